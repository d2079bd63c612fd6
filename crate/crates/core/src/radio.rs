//! SINR, Shannon rates and TTI-quantized transmission latencies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Scenario, TaskType};

/// Per-SBS subchannel counts and the explicit subchannel-to-AV map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthAllocation {
    /// `counts[sbs][av]`: subchannels SBS `sbs` gives AV `av`.
    pub counts: Vec<Vec<usize>>,
    /// `subchannel_map[sbs][k]`: the AV using subchannel `k` of `sbs`.
    pub subchannel_map: Vec<Vec<Option<usize>>>,
}

impl BandwidthAllocation {
    pub fn empty(n_sbs: usize, n_av: usize, k: usize) -> Self {
        BandwidthAllocation {
            counts: vec![vec![0; n_av]; n_sbs],
            subchannel_map: vec![vec![None; k]; n_sbs],
        }
    }

    /// Builds an allocation from per-SBS `(av, count)` lists. Each SBS hands
    /// out its lowest-indexed free subchannels, in list order.
    pub fn from_grants(n_av: usize, k: usize, grants: &[Vec<(usize, usize)>]) -> Result<Self> {
        let mut alloc = Self::empty(grants.len(), n_av, k);
        for (sbs, list) in grants.iter().enumerate() {
            let mut next = 0;
            for &(av, count) in list {
                if av >= n_av {
                    return Err(Error::Precondition(format!("AV {av} out of range")));
                }
                if next + count > k {
                    return Err(Error::Precondition(format!(
                        "SBS {sbs} grants more than {k} subchannels"
                    )));
                }
                alloc.counts[sbs][av] += count;
                for slot in &mut alloc.subchannel_map[sbs][next..next + count] {
                    *slot = Some(av);
                }
                next += count;
            }
        }
        Ok(alloc)
    }

    pub fn n_subchannels(&self) -> usize {
        self.subchannel_map.first().map_or(0, Vec::len)
    }

    pub fn count(&self, av: usize, sbs: usize) -> usize {
        self.counts[sbs][av]
    }

    /// Whether subchannel `k` of `sbs` carries downlink traffic.
    pub fn is_active(&self, sbs: usize, k: usize) -> bool {
        self.subchannel_map[sbs][k].is_some()
    }

    pub fn subchannels_of(&self, av: usize, sbs: usize) -> impl Iterator<Item = usize> + '_ {
        self.subchannel_map[sbs]
            .iter()
            .enumerate()
            .filter(move |(_, owner)| **owner == Some(av))
            .map(|(k, _)| k)
    }

    /// Checks the per-cell budget, orthogonality and count/map agreement.
    pub fn validate(&self) -> Result<()> {
        let k = self.n_subchannels();
        for (sbs, row) in self.counts.iter().enumerate() {
            let total: usize = row.iter().sum();
            if total > k {
                return Err(Error::Precondition(format!(
                    "SBS {sbs} allocates {total} of {k} subchannels"
                )));
            }
            for (av, &c) in row.iter().enumerate() {
                let mapped = self.subchannels_of(av, sbs).count();
                if mapped != c {
                    return Err(Error::Precondition(format!(
                        "SBS {sbs} AV {av}: count {c} but {mapped} mapped subchannels"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Which SBSs interfere on a downlink subchannel.
#[derive(Debug, Clone, Copy)]
pub enum DlInterference<'a> {
    /// Every other SBS, at full power, on every subchannel.
    WorstCase,
    /// Only SBSs that allocated the subchannel to some AV.
    Active(&'a BandwidthAllocation),
}

impl<'a> DlInterference<'a> {
    /// The model used for realized metrics under `scn`'s configuration.
    pub fn realized(scn: &Scenario, alloc: &'a BandwidthAllocation) -> Self {
        if scn.config.worst_case_interference {
            DlInterference::WorstCase
        } else {
            DlInterference::Active(alloc)
        }
    }

    fn includes(&self, sbs: usize, k: usize) -> bool {
        match self {
            DlInterference::WorstCase => true,
            DlInterference::Active(alloc) => alloc.is_active(sbs, k),
        }
    }
}

/// Downlink power received by `av` from `sbs` on subchannel `k` (mW).
pub fn dl_received_mw(scn: &Scenario, av: usize, sbs: usize, k: usize) -> f64 {
    let c = &scn.config;
    let t = &scn.topology;
    c.antenna_gain_av * c.antenna_gain_sbs * c.sbs_tx_power_mw * t.h_dl(av, sbs, k) * t.path_gain(av, sbs)
}

/// Uplink power received at `sbs` from `av` on the shared uplink subchannel (mW).
pub fn ul_received_mw(scn: &Scenario, av: usize, sbs: usize) -> f64 {
    let c = &scn.config;
    let t = &scn.topology;
    c.antenna_gain_av * c.antenna_gain_sbs * c.av_tx_power_mw * t.h_ul(av, sbs) * t.path_gain(av, sbs)
}

pub fn dl_interference_mw(scn: &Scenario, av: usize, sbs: usize, k: usize, model: DlInterference) -> f64 {
    (0..scn.n_sbs())
        .filter(|&other| other != sbs && model.includes(other, k))
        .map(|other| dl_received_mw(scn, av, other, k))
        .sum()
}

/// Downlink SINR of `av` served by `sbs` on subchannel `k`.
pub fn downlink_sinr(scn: &Scenario, av: usize, sbs: usize, k: usize, model: DlInterference) -> f64 {
    dl_received_mw(scn, av, sbs, k) / (dl_interference_mw(scn, av, sbs, k, model) + scn.config.noise_mw())
}

/// Uplink SINR of `av` at `sbs`; `interferers` transmit on the same uplink
/// subchannel (the AV itself is skipped if listed).
pub fn uplink_sinr(scn: &Scenario, av: usize, sbs: usize, interferers: &[usize]) -> f64 {
    let interference: f64 = interferers
        .iter()
        .filter(|&&other| other != av)
        .map(|&other| ul_received_mw(scn, other, sbs))
        .sum();
    ul_received_mw(scn, av, sbs) / (interference + scn.config.noise_mw())
}

/// Shannon rate of one subchannel (bits/s).
pub fn subchannel_rate(bw_hz: f64, sinr: f64) -> f64 {
    bw_hz * (1.0 + sinr).log2()
}

/// Downlink rate of `av` at `sbs` over its allocated subchannels (bits/s).
pub fn downlink_rate(scn: &Scenario, av: usize, sbs: usize, alloc: &BandwidthAllocation, model: DlInterference) -> f64 {
    alloc
        .subchannels_of(av, sbs)
        .map(|k| subchannel_rate(scn.config.subchannel_bw, downlink_sinr(scn, av, sbs, k, model)))
        .sum::<f64>()
        + 0.0
}

/// Number of TTIs needed to move `bits` at `rate_bps`: `ceil(bits / (rate * T))`.
///
/// The result satisfies `ttis * per_tti >= bits > (ttis - 1) * per_tti` in
/// floating point, where `per_tti = rate_bps * tti_ms / 1000`.
pub fn ttis_for(bits: f64, rate_bps: f64, tti_ms: f64) -> Option<u64> {
    if !(rate_bps > 0.0) || !rate_bps.is_finite() {
        return None;
    }
    let per_tti = rate_bps * tti_ms * 1e-3;
    let mut n = (bits / per_tti).ceil().max(1.0) as u64;
    while (n as f64) * per_tti < bits {
        n += 1;
    }
    while n > 1 && ((n - 1) as f64) * per_tti >= bits {
        n -= 1;
    }
    Some(n)
}

pub fn downlink_ttis(
    scn: &Scenario,
    av: usize,
    sbs: usize,
    alloc: &BandwidthAllocation,
    task: &TaskType,
    model: DlInterference,
) -> Result<u64> {
    let rate = downlink_rate(scn, av, sbs, alloc, model);
    ttis_for(scn.config.dl_bits(task), rate, scn.config.tti_ms).ok_or(Error::Unservable { av, sbs })
}

pub fn uplink_ttis(scn: &Scenario, av: usize, sbs: usize, interferers: &[usize]) -> Result<u64> {
    let rate = subchannel_rate(scn.config.subchannel_bw, uplink_sinr(scn, av, sbs, interferers));
    ttis_for(scn.config.ul_packet_bits, rate, scn.config.tti_ms).ok_or(Error::Unservable { av, sbs })
}

/// Uplink plus downlink TTIs, converted to milliseconds.
pub fn transmission_latency_ms(
    scn: &Scenario,
    av: usize,
    sbs: usize,
    alloc: &BandwidthAllocation,
    model: DlInterference,
    ul_interferers: &[usize],
) -> Result<f64> {
    let task = scn.task_of(av);
    let d = downlink_ttis(scn, av, sbs, alloc, task, model)?;
    let u = uplink_ttis(scn, av, sbs, ul_interferers)?;
    Ok((d + u) as f64 * scn.config.tti_ms)
}

/// Link quantities of one AV at one SBS under a given allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Downlink SINR on each allocated subchannel, in subchannel order.
    pub dl_sinr: Vec<f64>,
    pub ul_sinr: f64,
    pub dl_rate_bps: f64,
    /// Interference summed over the allocated subchannels.
    pub interference_dl_mw: f64,
    pub interference_ul_mw: f64,
}

pub fn link_budget(
    scn: &Scenario,
    av: usize,
    sbs: usize,
    alloc: &BandwidthAllocation,
    model: DlInterference,
    ul_interferers: &[usize],
) -> LinkBudget {
    let ks: Vec<usize> = alloc.subchannels_of(av, sbs).collect();
    let dl_sinr: Vec<f64> = ks.iter().map(|&k| downlink_sinr(scn, av, sbs, k, model)).collect();
    let dl_rate_bps = dl_sinr.iter().map(|&g| subchannel_rate(scn.config.subchannel_bw, g)).sum::<f64>() + 0.0;
    let interference_dl_mw = ks.iter().map(|&k| dl_interference_mw(scn, av, sbs, k, model)).sum::<f64>() + 0.0;
    let interference_ul_mw = ul_interferers
        .iter()
        .filter(|&&o| o != av)
        .map(|&o| ul_received_mw(scn, o, sbs))
        .sum();
    LinkBudget {
        dl_sinr,
        ul_sinr: uplink_sinr(scn, av, sbs, ul_interferers),
        dl_rate_bps,
        interference_dl_mw,
        interference_ul_mw,
    }
}

/// Link quality as seen while matching, before any final allocation exists.
///
/// Downlink SINRs assume every other SBS transmits on every subchannel; the
/// rate of `c` subchannels is `c * w * mean_k log2(1 + sinr_k)`, i.e. the
/// allocation-independent expectation over which subchannels are granted.
/// The uplink assumes all other AVs share the uplink subchannel.
#[derive(Debug, Clone)]
pub struct MatchingLinks {
    n_sbs: usize,
    /// Mean spectral efficiency (bits/s/Hz per subchannel), `[av][sbs]`.
    spectral_eff: Vec<f64>,
    ul_ttis: Vec<u64>,
    dl_bits: Vec<f64>,
    bw: f64,
    tti_ms: f64,
}

impl MatchingLinks {
    pub fn new(scn: &Scenario) -> Self {
        let (m, n, k) = (scn.n_av(), scn.n_sbs(), scn.config.n_subchannels);
        let noise = scn.config.noise_mw();
        let mut spectral_eff = vec![0.0; m * n];
        for av in 0..m {
            for ch in 0..k {
                let total: f64 = (0..n).map(|s| dl_received_mw(scn, av, s, ch)).sum();
                for s in 0..n {
                    let own = dl_received_mw(scn, av, s, ch);
                    let interference = (total - own).max(0.0);
                    spectral_eff[av * n + s] += (1.0 + own / (interference + noise)).log2();
                }
            }
        }
        spectral_eff.iter_mut().for_each(|x| *x /= k as f64);

        let all: Vec<usize> = (0..m).collect();
        let mut ul_ttis = Vec::with_capacity(m * n);
        for av in 0..m {
            for s in 0..n {
                // Positive powers keep the rate positive, so this cannot fail.
                ul_ttis.push(uplink_ttis(scn, av, s, &all).unwrap_or(u64::MAX));
            }
        }
        let dl_bits = (0..m).map(|av| scn.config.dl_bits(scn.task_of(av))).collect();
        MatchingLinks {
            n_sbs: n,
            spectral_eff,
            ul_ttis,
            dl_bits,
            bw: scn.config.subchannel_bw,
            tti_ms: scn.config.tti_ms,
        }
    }

    pub fn spectral_efficiency(&self, av: usize, sbs: usize) -> f64 {
        self.spectral_eff[av * self.n_sbs + sbs]
    }

    pub fn dl_rate_bps(&self, av: usize, sbs: usize, count: usize) -> f64 {
        count as f64 * self.bw * self.spectral_efficiency(av, sbs)
    }

    pub fn dl_ttis(&self, av: usize, sbs: usize, count: usize) -> Option<u64> {
        ttis_for(self.dl_bits[av], self.dl_rate_bps(av, sbs, count), self.tti_ms)
    }

    pub fn ul_ttis(&self, av: usize, sbs: usize) -> u64 {
        self.ul_ttis[av * self.n_sbs + sbs]
    }

    /// Transmission latency (ms) with `count` subchannels, `None` if unservable.
    pub fn tx_latency_ms(&self, av: usize, sbs: usize, count: usize) -> Option<f64> {
        let d = self.dl_ttis(av, sbs, count)?;
        Some((d + self.ul_ttis(av, sbs)) as f64 * self.tti_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ScenarioConfig, Topology};

    /// AVs and SBSs at explicit positions with unit fading.
    pub(crate) fn fixture(sbs: &[(f64, f64)], avs: &[(f64, f64)], k: usize) -> Scenario {
        let config = ScenarioConfig {
            n_sbs: sbs.len(),
            n_av: avs.len(),
            n_subchannels: k,
            ..Default::default()
        };
        let (m, n) = (avs.len(), sbs.len());
        let mut topology = Topology {
            sbs_positions: sbs.to_vec(),
            av_positions: avs.to_vec(),
            av_task: vec![0; m],
            sbs_machine: vec![0; n],
            fading_dl: vec![1.0; m * n * k],
            fading_ul: vec![1.0; m * n],
            path_gain: Vec::new(),
            n_subchannels: k,
        };
        topology.refresh_path_gain(&config);
        Scenario::from_parts(config, topology).unwrap()
    }

    #[test]
    fn dl_sinr_reference_value() {
        // 100 mW, unit gains, 68 dB loss, -90 dBm noise.
        let scn = fixture(&[(0.0, 0.0)], &[(10.0, 0.0)], 1);
        let g = downlink_sinr(&scn, 0, 0, 0, DlInterference::WorstCase);
        let expected = 100.0 * 10f64.powf(-6.8) / 1e-9;
        assert!((g / expected - 1.0).abs() < 1e-12, "{g} vs {expected}");
        assert!((g - 1.585e4).abs() / 1.585e4 < 1e-3);
    }

    #[test]
    fn dl_sinr_unit_when_signal_equals_noise() {
        let mut scn = fixture(&[(0.0, 0.0)], &[(10.0, 0.0)], 1);
        scn.topology.fading_dl[0] = scn.config.noise_mw() / (100.0 * scn.topology.path_gain(0, 0));
        let g = downlink_sinr(&scn, 0, 0, 0, DlInterference::WorstCase);
        assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_interferer_pushes_sinr_below_one() {
        let scn = fixture(&[(0.0, 0.0), (20.0, 0.0)], &[(10.0, 0.0)], 1);
        let g = downlink_sinr(&scn, 0, 0, 0, DlInterference::WorstCase);
        let s = dl_received_mw(&scn, 0, 0, 0);
        let expected = s / (s + scn.config.noise_mw());
        assert!(g < 1.0);
        assert!((g - expected).abs() < 1e-12);
    }

    #[test]
    fn active_interference_depends_on_allocation() {
        let scn = fixture(&[(0.0, 0.0), (20.0, 0.0)], &[(10.0, 0.0), (25.0, 0.0)], 2);
        // SBS 1 only uses subchannel 0.
        let alloc = BandwidthAllocation::from_grants(2, 2, &[vec![(0, 2)], vec![(1, 1)]]).unwrap();
        let m = DlInterference::Active(&alloc);
        let g0 = downlink_sinr(&scn, 0, 0, 0, m);
        let g1 = downlink_sinr(&scn, 0, 0, 1, m);
        assert!(g0 < 1.0);
        assert!(g1 > 1e3);
    }

    #[test]
    fn uplink_is_tenth_of_downlink() {
        let scn = fixture(&[(0.0, 0.0)], &[(10.0, 0.0)], 1);
        let dl = downlink_sinr(&scn, 0, 0, 0, DlInterference::WorstCase);
        let ul = uplink_sinr(&scn, 0, 0, &[]);
        assert!((dl / ul - 10.0).abs() < 1e-9);
    }

    #[test]
    fn colocated_uplink_interferer() {
        let scn = fixture(&[(0.0, 0.0)], &[(10.0, 0.0), (10.0, 0.0)], 1);
        assert!(uplink_sinr(&scn, 0, 0, &[0, 1]) < 1.0);
    }

    #[test]
    fn rate_examples() {
        let w = 180e3;
        assert_eq!(subchannel_rate(w, 1.0), 180e3);
        assert_eq!(2.0 * subchannel_rate(w, 3.0), 720e3);
        let scn = fixture(&[(0.0, 0.0)], &[(10.0, 0.0)], 2);
        let alloc = BandwidthAllocation::empty(1, 1, 2);
        assert_eq!(downlink_rate(&scn, 0, 0, &alloc, DlInterference::Active(&alloc)), 0.0);
        let task = scn.task_of(0).clone();
        assert!(matches!(
            downlink_ttis(&scn, 0, 0, &alloc, &task, DlInterference::Active(&alloc)),
            Err(Error::Unservable { av: 0, sbs: 0 })
        ));
    }

    #[test]
    fn tti_examples() {
        assert_eq!(ttis_for(5000.0, 180e3, 0.125), Some(223));
        assert_eq!(ttis_for(45.0, 180e3, 0.125), Some(2));
        assert_eq!(ttis_for(1.0, 180e3, 0.125), Some(1));
        // a single bit still needs many TTIs when the rate is tiny
        assert_eq!(ttis_for(1.0, 1.0, 0.125), Some(8000));
        assert_eq!(ttis_for(100.0, 180e3, 0.125), Some(5));
        assert_eq!(ttis_for(100.0, 1e15, 0.125), Some(1));
        assert_eq!(ttis_for(100.0, 0.0, 0.125), None);
        // (223 + 5) TTIs of 0.125 ms
        assert_eq!((223 + 5) as f64 * 0.125, 28.5);
        // Doubling T halves nothing exactly: 5000 / 45 -> 112, not 223 / 2.
        let single = ttis_for(5000.0, 180e3, 0.125).unwrap() as f64 * 0.125;
        let double = ttis_for(5000.0, 180e3, 0.25).unwrap() as f64 * 0.25;
        assert_eq!(single, 27.875);
        assert_eq!(double, 28.0);
        assert_ne!(double, 2.0 * single);
    }

    #[test]
    fn grants_use_lowest_free_subchannels() {
        let alloc = BandwidthAllocation::from_grants(3, 5, &[vec![(2, 2), (0, 1)]]).unwrap();
        assert_eq!(alloc.subchannel_map[0], vec![Some(2), Some(2), Some(0), None, None]);
        assert_eq!(alloc.counts[0], vec![1, 0, 2]);
        alloc.validate().unwrap();
        assert!(BandwidthAllocation::from_grants(3, 2, &[vec![(2, 2), (0, 1)]]).is_err());
    }

    #[test]
    fn matching_links_match_direct_evaluation() {
        let scn = fixture(&[(0.0, 0.0), (30.0, 0.0)], &[(10.0, 0.0)], 3);
        let links = MatchingLinks::new(&scn);
        let direct = (1.0 + downlink_sinr(&scn, 0, 0, 0, DlInterference::WorstCase)).log2();
        assert!((links.spectral_efficiency(0, 0) - direct).abs() < 1e-12);
        assert_eq!(links.ul_ttis(0, 0), uplink_ttis(&scn, 0, 0, &[0]).unwrap());
    }
}
