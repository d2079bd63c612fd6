//! Signal-strength association baselines with an equal-share bandwidth split.

use crate::error::Result;
use crate::matching::Matching;
use crate::radio::{dl_received_mw, downlink_sinr, DlInterference};
use crate::scenario::Scenario;

/// Splits `k` subchannels of each SBS as evenly as possible among its AVs:
/// `floor(k / n)` each with the remainder going to the lowest-indexed AVs.
/// With more AVs than subchannels the `k` lowest-indexed AVs get one each
/// and the rest get none. `assignment[av]` is the serving SBS.
pub fn equal_share_bandwidth(assignment: &[Option<usize>], n_sbs: usize, k: usize) -> Vec<Vec<(usize, usize)>> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_sbs];
    for (av, a) in assignment.iter().enumerate() {
        if let Some(sbs) = *a {
            members[sbs].push(av);
        }
    }
    members
        .into_iter()
        .map(|avs| {
            let n = avs.len();
            if n == 0 {
                return Vec::new();
            }
            let (base, extra) = (k / n, k % n);
            avs.into_iter()
                .enumerate()
                .map(|(i, av)| (av, base + usize::from(i < extra)))
                .collect()
        })
        .collect()
}

fn argmax_by(n: usize, mut score: impl FnMut(usize) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for s in 0..n {
        let v = score(s);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((s, v));
        }
    }
    best.map(|b| b.0)
}

/// Builds the matching from an association; AVs are served in index order.
/// AVs left without a subchannel remain assigned but fail.
fn associate(scn: &Scenario, assignment: Vec<Option<usize>>) -> Result<Matching> {
    let k = scn.config.n_subchannels;
    let shares = equal_share_bandwidth(&assignment, scn.n_sbs(), k);
    let grants: Vec<Vec<(usize, usize)>> = shares
        .iter()
        .map(|l| l.iter().copied().filter(|&(_, c)| c > 0).collect())
        .collect();
    let mut m = Matching::from_grants(scn.n_av(), k, &grants)?;
    // keep zero-share AVs associated so they count as served-but-failed
    for (sbs, list) in shares.iter().enumerate() {
        for &(av, c) in list {
            if c == 0 {
                m.assignment[av] = Some(sbs);
                m.accepted[sbs].push(av);
            }
        }
    }
    for list in &mut m.accepted {
        list.sort_unstable();
    }
    Ok(m)
}

/// Each AV picks the SBS with the highest downlink SINR on subchannel 0,
/// with every other SBS interfering; ties go to the lower index.
pub fn max_sinr_association(scn: &Scenario) -> Result<Matching> {
    let assignment = (0..scn.n_av())
        .map(|av| argmax_by(scn.n_sbs(), |s| downlink_sinr(scn, av, s, 0, DlInterference::WorstCase)))
        .collect();
    associate(scn, assignment)
}

/// Received signal strength averaged over the downlink subchannels.
pub fn rssi_mw(scn: &Scenario, av: usize, sbs: usize) -> f64 {
    let k = scn.config.n_subchannels;
    (0..k).map(|ch| dl_received_mw(scn, av, sbs, ch)).sum::<f64>() / k as f64
}

/// Each AV picks the SBS with the strongest wideband received power.
pub fn max_rssi_association(scn: &Scenario) -> Result<Matching> {
    let assignment = (0..scn.n_av())
        .map(|av| argmax_by(scn.n_sbs(), |s| rssi_mw(scn, av, s)))
        .collect();
    associate(scn, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shares(n: usize, k: usize) -> Vec<usize> {
        let a = vec![Some(0); n];
        equal_share_bandwidth(&a, 1, k)[0].iter().map(|e| e.1).collect()
    }

    #[test]
    fn equal_share_examples() {
        assert_eq!(shares(4, 48), vec![12; 4]);
        assert_eq!(shares(3, 5), vec![2, 2, 1]);
        assert_eq!(shares(3, 2), vec![1, 1, 0]);
        assert!(equal_share_bandwidth(&[None, None], 2, 8).iter().all(Vec::is_empty));
    }
}
