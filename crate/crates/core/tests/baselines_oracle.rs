mod common;

use proptest::prelude::*;
use v2i_edge::baselines::{equal_share_bandwidth, max_rssi_association, max_sinr_association};
use v2i_edge::{Scenario, ScenarioConfig};

use common::fixture;

fn small() -> ScenarioConfig {
    ScenarioConfig { n_subchannels: 4, ..Default::default() }
}

/// Independent SINR: unit gains and unit fading, every other SBS interfering.
fn sinr_by_hand(sbs: &[(f64, f64)], av: (f64, f64), serving: usize) -> f64 {
    let rx = |s: (f64, f64)| {
        let d = ((s.0 - av.0).powi(2) + (s.1 - av.1).powi(2)).sqrt().max(1.0);
        100.0 * 10f64.powf(-(38.0 + 30.0 * d.log10()) / 10.0)
    };
    let interference: f64 = sbs.iter().enumerate().filter(|(i, _)| *i != serving).map(|(_, &s)| rx(s)).sum();
    rx(sbs[serving]) / (interference + 1e-9)
}

#[test]
fn single_sbs_takes_everyone() {
    let scn = fixture(small(), &[(50.0, 50.0)], &[(0.0, 0.0), (100.0, 100.0), (60.0, 40.0)]);
    for m in [max_sinr_association(&scn).unwrap(), max_rssi_association(&scn).unwrap()] {
        assert_eq!(m.assignment, vec![Some(0); 3]);
        assert_eq!(m.grants(0), vec![(0, 2), (1, 1), (2, 1)]);
    }
}

#[test]
fn ties_go_to_the_lower_index() {
    let scn = fixture(small(), &[(0.0, 0.0), (20.0, 0.0)], &[(10.0, 0.0)]);
    assert_eq!(max_sinr_association(&scn).unwrap().assignment, vec![Some(0)]);
    assert_eq!(max_rssi_association(&scn).unwrap().assignment, vec![Some(0)]);
}

#[test]
fn three_sbs_matches_the_argmax_oracle() {
    let sbs = [(0.0, 0.0), (50.0, 80.0), (90.0, 10.0)];
    let avs = [(5.0, 3.0), (45.0, 70.0), (80.0, 20.0), (40.0, 40.0), (60.0, 30.0), (20.0, 60.0)];
    let scn = fixture(small(), &sbs, &avs);
    let sinr = max_sinr_association(&scn).unwrap();
    let rssi = max_rssi_association(&scn).unwrap();
    for (i, &av) in avs.iter().enumerate() {
        let scores: Vec<f64> = (0..3).map(|s| sinr_by_hand(&sbs, av, s)).collect();
        let best = (0..3).fold(0, |b, s| if scores[s] > scores[b] { s } else { b });
        assert_eq!(sinr.assignment[i], Some(best), "AV {i}: {scores:?}");
        // with unit fading the strongest server is the nearest one
        let nearest = (0..3)
            .min_by(|&a, &b| scn.topology.distance(i, a).total_cmp(&scn.topology.distance(i, b)))
            .unwrap();
        assert_eq!(rssi.assignment[i], Some(nearest));
    }
}

#[test]
fn rssi_and_sinr_disagree_under_frequency_selective_fading() {
    // SBS 0 is weak on the reference subchannel but strong on average.
    let config = ScenarioConfig { n_subchannels: 2, ..Default::default() };
    let mut scn = fixture(config, &[(0.0, 0.0), (20.0, 0.0)], &[(10.0, 0.0)]);
    // layout [av][sbs][k]
    scn.topology.fading_dl = vec![0.5, 3.0, 1.0, 1.0];
    assert_eq!(max_sinr_association(&scn).unwrap().assignment, vec![Some(1)]);
    assert_eq!(max_rssi_association(&scn).unwrap().assignment, vec![Some(0)]);
}

#[test]
fn overloaded_cell_keeps_zero_share_avs_associated() {
    let config = ScenarioConfig { n_subchannels: 2, ..Default::default() };
    let scn = fixture(config, &[(0.0, 0.0)], &[(5.0, 0.0), (6.0, 0.0), (7.0, 0.0)]);
    let m = max_rssi_association(&scn).unwrap();
    m.validate().unwrap();
    assert_eq!(m.assignment, vec![Some(0); 3]);
    assert_eq!((m.count(0), m.count(1), m.count(2)), (1, 1, 0));
}

#[test]
fn random_baselines_are_feasible() {
    for seed in 0..20 {
        let scn = Scenario::generate(ScenarioConfig { n_sbs: 4, n_av: 30, n_subchannels: 6, seed, ..Default::default() }).unwrap();
        for m in [max_sinr_association(&scn).unwrap(), max_rssi_association(&scn).unwrap()] {
            m.validate().unwrap();
            assert!(m.assignment.iter().all(Option::is_some));
            for sbs in 0..4 {
                let total: usize = m.grants(sbs).iter().map(|g| g.1).sum();
                assert!(total <= 6);
                assert!(m.accepted[sbs].windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}

proptest! {
    #[test]
    fn equal_share_is_even_and_feasible(
        assignment in prop::collection::vec(prop::option::of(0usize..3), 0..30),
        k in 1usize..20,
    ) {
        let shares = equal_share_bandwidth(&assignment, 3, k);
        for (sbs, list) in shares.iter().enumerate() {
            let members: Vec<usize> = (0..assignment.len()).filter(|&a| assignment[a] == Some(sbs)).collect();
            prop_assert_eq!(list.iter().map(|e| e.0).collect::<Vec<_>>(), members.clone());
            let counts: Vec<usize> = list.iter().map(|e| e.1).collect();
            let total: usize = counts.iter().sum();
            prop_assert_eq!(total, if members.is_empty() { 0 } else { k });
            if let (Some(lo), Some(hi)) = (counts.iter().min(), counts.iter().max()) {
                prop_assert!(hi - lo <= 1);
            }
            // the larger shares sit at the front
            prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn equal_share_depends_only_on_cell_sizes(sizes in prop::collection::vec(0usize..8, 3), k in 1usize..12, shift in 0usize..5) {
        // relabeling AVs (keeping their order within a cell) leaves the share vector unchanged
        let build = |offset: usize| {
            let mut a = vec![None; offset];
            for (sbs, &n) in sizes.iter().enumerate() {
                a.extend(std::iter::repeat_n(Some(sbs), n));
            }
            equal_share_bandwidth(&a, 3, k).iter().map(|l| l.iter().map(|e| e.1).collect::<Vec<_>>()).collect::<Vec<_>>()
        };
        prop_assert_eq!(build(0), build(shift));
    }
}
