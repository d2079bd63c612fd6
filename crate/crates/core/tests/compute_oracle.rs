//! Execution pmfs and queue completion times against independent oracles:
//! hand-enumerated outcome spaces, brute-force product enumeration and
//! sampling.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use v2i_edge::compute::{convolve, discretize_gaussian, ExecutionPmf, ExecutionTable, MachineQueue};
use v2i_edge::{Error, ScenarioConfig};

fn pmf(probs: &[f64]) -> ExecutionPmf {
    ExecutionPmf::new(probs.to_vec(), 1.0).unwrap()
}

fn tv(a: &ExecutionPmf, b: &ExecutionPmf) -> f64 {
    a.total_variation(b)
}

/// Independent oracle: enumerate every combination of per-task execution
/// times (entries below `floor` are skipped; their total mass bounds the
/// error) and histogram the sums.
fn enumerate_sum(pmfs: &[&ExecutionPmf], floor: f64) -> BTreeMap<usize, f64> {
    fn rec(pmfs: &[&ExecutionPmf], floor: f64, acc_t: usize, acc_p: f64, out: &mut BTreeMap<usize, f64>) {
        match pmfs.split_first() {
            None => *out.entry(acc_t).or_insert(0.0) += acc_p,
            Some((head, rest)) => {
                for (i, &p) in head.probs.iter().enumerate() {
                    if p >= floor {
                        rec(rest, floor, acc_t + i + 1, acc_p * p, out);
                    }
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    rec(pmfs, floor, 0, 1.0, &mut out);
    out
}

fn tv_to_map(a: &ExecutionPmf, b: &BTreeMap<usize, f64>) -> f64 {
    let len = a.len().max(b.keys().last().copied().unwrap_or(0));
    0.5 * (1..=len).map(|t| (a.p(t) - b.get(&t).copied().unwrap_or(0.0)).abs()).sum::<f64>()
}

#[test]
fn gaussian_discretization_examples() {
    let p = discretize_gaussian(1.0, 0.5, 20, 1.0).unwrap();
    assert_eq!(p.mode(), 1);
    assert!((p.total() - 1.0).abs() < 1e-9);

    let p = discretize_gaussian(5.0, 1e-6, 20, 1.0).unwrap();
    assert!((p.p(5) - 1.0).abs() < 1e-12);

    for (mean, std, max) in [(2.0, 0.5, 50), (10.0, 0.5, 100), (3.0, 4.0, 5), (30.0, 1.0, 20)] {
        let p = discretize_gaussian(mean, std, max, 1.0).unwrap();
        assert!((p.total() - 1.0).abs() < 1e-9, "{mean} {std} {max}");
        assert!(p.probs.iter().all(|&x| x >= 0.0));
    }

    for (mean, std, max) in [(0.0, 1.0, 5), (1.0, 0.0, 5), (1.0, 1.0, 0), (-1.0, 1.0, 5)] {
        assert!(matches!(discretize_gaussian(mean, std, max, 1.0), Err(Error::Config(_))));
    }
}

#[test]
fn gaussian_bins_match_normal_cdf() {
    // Phi evaluated through erf from the standard library's perspective:
    // bins of N(2, 0.5^2) at t = 1, 2, 3 before renormalization.
    let phi = |x: f64| 0.5 * (1.0 + statrs::function::erf::erf(x / std::f64::consts::SQRT_2));
    let raw: Vec<f64> = (1..=10).map(|t| phi((t as f64 + 0.5 - 2.0) / 0.5) - phi((t as f64 - 0.5 - 2.0) / 0.5)).collect();
    let total: f64 = raw.iter().sum();
    let p = discretize_gaussian(2.0, 0.5, 10, 1.0).unwrap();
    for t in 1..=10 {
        assert!((p.p(t) - raw[t - 1] / total).abs() < 1e-12);
    }
    // symmetric around the mean
    assert!((p.p(1) - p.p(3)).abs() < 1e-12);
    assert!((p.mean_steps() - 2.0).abs() < 0.05);
}

#[test]
fn convolution_examples() {
    let d2 = ExecutionPmf::delta(2, 1.0);
    let d3 = ExecutionPmf::delta(3, 1.0);
    let d5 = convolve(&d2, &d3).unwrap();
    assert_eq!(d5.mode(), 5);
    assert!((d5.p(5) - 1.0).abs() < 1e-15);

    let u = pmf(&[0.5, 0.5]);
    let uu = convolve(&u, &u).unwrap();
    assert_eq!((uu.p(1), uu.p(2), uu.p(3), uu.p(4)), (0.0, 0.25, 0.5, 0.25));

    let a = pmf(&[0.1, 0.6, 0.3]);
    let b = pmf(&[0.7, 0.0, 0.0, 0.3]);
    let ab = convolve(&a, &b).unwrap();
    let ba = convolve(&b, &a).unwrap();
    assert!(tv(&ab, &ba) < 1e-15);

    let other = ExecutionPmf::new(vec![1.0], 2.0).unwrap();
    assert!(matches!(convolve(&a, &other), Err(Error::StepMismatch(..))));
}

#[test]
fn completion_examples() {
    let config = ScenarioConfig::default();
    let table = ExecutionTable::new(&config).unwrap();
    let mut q = MachineQueue::new(0);
    q.push(7, 1).unwrap();
    assert!(tv(&table.completion_pmf(&q, 7).unwrap(), table.pmf(0, 1)) < 1e-15);
    assert!(matches!(table.completion_pmf(&q, 8), Err(Error::NotQueued(8))));
    assert!(q.push(7, 0).is_err());

    let d2 = ExecutionPmf::delta(2, 1.0);
    let det = ExecutionTable::from_pmfs(vec![vec![d2.clone()]], vec![20]).unwrap();
    let mut q = MachineQueue::new(0);
    assert_eq!(det.expected_completion_ms(&q).unwrap(), 0.0);
    q.push(0, 0).unwrap();
    q.push(1, 0).unwrap();
    assert!((det.completion_pmf(&q, 1).unwrap().p(4) - 1.0).abs() < 1e-15);
    assert_eq!(det.expected_task_completion_ms(&q, 0).unwrap(), 2.0);
    assert_eq!(det.expected_task_completion_ms(&q, 1).unwrap(), 4.0);
    assert_eq!(det.expected_completion_ms(&q).unwrap(), 6.0);

    let d5 = ExecutionTable::from_pmfs(vec![vec![ExecutionPmf::delta(5, 1.0)]], vec![20]).unwrap();
    let mut q = MachineQueue::new(0);
    q.push(3, 0).unwrap();
    assert_eq!(d5.expected_completion_ms(&q).unwrap(), 5.0);

    let d3 = ExecutionTable::from_pmfs(vec![vec![ExecutionPmf::delta(3, 1.0)]], vec![20]).unwrap();
    assert_eq!(d3.expected_task_completion_ms(&q, 3).unwrap(), 3.0);

    // Gaussian mu = 2, sigma = 0.5 alone
    let p = discretize_gaussian(2.0, 0.5, 50, 1.0).unwrap();
    let g = ExecutionTable::from_pmfs(vec![vec![p]], vec![50]).unwrap();
    assert!((g.expected_task_completion_ms(&q, 3).unwrap() - 2.0).abs() < 0.05);
}

#[test]
fn table_iv_three_task_queue_matches_enumeration() {
    let config = ScenarioConfig::default();
    let table = ExecutionTable::new(&config).unwrap();
    let mut q = MachineQueue::new(0);
    for (av, task) in [(0, 0), (1, 1), (2, 2)] {
        q.push(av, task).unwrap();
    }
    let oracle = enumerate_sum(&[table.pmf(0, 0), table.pmf(0, 1), table.pmf(0, 2)], 0.0);
    assert!(tv_to_map(&table.completion_pmf(&q, 2).unwrap(), &oracle) < 1e-9);
}

#[test]
fn random_queues_match_enumeration() {
    let config = ScenarioConfig::default();
    let table = ExecutionTable::new(&config).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(42);
    for _ in 0..50 {
        let machine = rng.gen_range(0..2);
        let len = rng.gen_range(1..=4);
        let mut q = MachineQueue::new(machine);
        for av in 0..len {
            q.push(av, rng.gen_range(0..3)).unwrap();
        }
        let target = rng.gen_range(0..len);
        let pmfs: Vec<&ExecutionPmf> = q.entries[..=target].iter().map(|&(_, t)| table.pmf(machine, t)).collect();
        // skipped entries carry < 4 * 100 * 1e-16 total mass
        let oracle = enumerate_sum(&pmfs, 1e-16);
        let d = tv_to_map(&table.completion_pmf(&q, target).unwrap(), &oracle);
        assert!(d < 1e-9, "queue {:?} target {target}: tv {d}", q.entries);
    }
}

#[test]
fn sampled_completion_mean_within_three_standard_errors() {
    let config = ScenarioConfig::default();
    let table = ExecutionTable::new(&config).unwrap();
    let mut q = MachineQueue::new(1);
    for (av, task) in [(0, 1), (1, 0), (2, 2)] {
        q.push(av, task).unwrap();
    }
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let n = 100_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| table.sample_completion_steps(&q, &mut rng)[&2].completion_steps as f64)
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let expected = table.expected_task_completion_ms(&q, 2).unwrap();
    assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected} (se {se})");
}

#[test]
fn sampling_edge_cases() {
    let det = ExecutionTable::from_pmfs(
        vec![vec![ExecutionPmf::delta(2, 1.0), ExecutionPmf::delta(3, 1.0)]],
        vec![4, 10],
    )
    .unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    assert!(det.sample_completion_steps(&MachineQueue::new(0), &mut rng).is_empty());

    let q = MachineQueue { machine: 0, entries: vec![(5, 1), (6, 0), (7, 0)] };
    let s = det.sample_completion_steps(&q, &mut rng);
    let got: Vec<(usize, bool)> = [5, 6, 7].iter().map(|a| (s[a].completion_steps, s[a].dropped)).collect();
    // partial sums 3, 5, 7 against the drop thresholds 10, 4, 4
    assert_eq!(got, vec![(3, false), (5, true), (7, true)]);
}

#[test]
fn table_from_pmfs_rejects_inconsistent_input() {
    assert!(ExecutionTable::from_pmfs(vec![], vec![]).is_err());
    assert!(ExecutionTable::from_pmfs(vec![vec![ExecutionPmf::delta(1, 1.0)]], vec![3, 4]).is_err());
    let mixed = vec![vec![ExecutionPmf::delta(1, 1.0)], vec![ExecutionPmf::delta(1, 2.0)]];
    assert!(matches!(ExecutionTable::from_pmfs(mixed, vec![3]), Err(Error::StepMismatch(..))));
}

fn arb_queue() -> impl Strategy<Value = (usize, Vec<usize>)> {
    (0..2usize, prop::collection::vec(0..3usize, 1..6))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn appending_never_speeds_up_earlier_tasks((machine, tasks) in arb_queue(), extra in 0..3usize) {
        let table = ExecutionTable::new(&ScenarioConfig::default()).unwrap();
        let mut q = MachineQueue::new(machine);
        for (av, &t) in tasks.iter().enumerate() {
            q.push(av, t).unwrap();
        }
        let before: Vec<f64> = (0..tasks.len()).map(|a| table.expected_task_completion_ms(&q, a).unwrap()).collect();
        let total_before = table.expected_completion_ms(&q).unwrap();
        q.push(tasks.len(), extra).unwrap();
        for (a, b) in before.iter().enumerate() {
            prop_assert!(table.expected_task_completion_ms(&q, a).unwrap() >= *b - 1e-12);
        }
        prop_assert!(table.expected_completion_ms(&q).unwrap() > total_before);
    }

    #[test]
    fn completion_mean_is_sum_of_execution_means((machine, tasks) in arb_queue()) {
        let table = ExecutionTable::new(&ScenarioConfig::default()).unwrap();
        let mut q = MachineQueue::new(machine);
        for (av, &t) in tasks.iter().enumerate() {
            q.push(av, t).unwrap();
        }
        let mut running = 0.0;
        for (av, &t) in tasks.iter().enumerate() {
            running += table.pmf(machine, t).mean_ms();
            prop_assert!((table.expected_task_completion_ms(&q, av).unwrap() - running).abs() < 1e-9);
        }
        let fast = table.expected_completion_ms_fast(machine, tasks.iter().copied());
        prop_assert!((table.expected_completion_ms(&q).unwrap() - fast).abs() < 1e-9);
    }

    #[test]
    fn convolution_preserves_mass(a in prop::collection::vec(0.0f64..1.0, 1..8), b in prop::collection::vec(0.0f64..1.0, 1..8)) {
        prop_assume!(a.iter().sum::<f64>() > 1e-3 && b.iter().sum::<f64>() > 1e-3);
        let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|x| x / s).collect::<Vec<_>>() };
        let (pa, pb) = (ExecutionPmf::new(norm(&a), 1.0).unwrap(), ExecutionPmf::new(norm(&b), 1.0).unwrap());
        let c = convolve(&pa, &pb).unwrap();
        prop_assert!((c.total() - 1.0).abs() < 1e-9);
        prop_assert!((c.mean_steps() - pa.mean_steps() - pb.mean_steps()).abs() < 1e-9);
    }
}
