#![allow(dead_code)]

use v2i_edge::scenario::{ExecStat, MachineType, TaskType};
use v2i_edge::{Scenario, ScenarioConfig, Topology};

/// Hand-placed instance with unit fading; every AV runs task index 0 and
/// every SBS machine index 0 unless the caller edits the topology.
pub fn fixture(config: ScenarioConfig, sbs: &[(f64, f64)], avs: &[(f64, f64)]) -> Scenario {
    let config = ScenarioConfig { n_sbs: sbs.len(), n_av: avs.len(), ..config };
    let (m, n, k) = (avs.len(), sbs.len(), config.n_subchannels);
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
    Scenario::from_parts(config, topology).expect("valid fixture")
}

/// A one-task, one-machine catalog with a (numerically) deterministic
/// execution time of `steps` and the given latency budget.
pub fn deterministic_catalog(steps: f64, budget_ms: f64) -> (Vec<TaskType>, Vec<MachineType>) {
    (
        vec![TaskType { id: 1, latency_budget_ms: budget_ms, dl_packet_bits: None, max_steps: None }],
        vec![MachineType { id: 1, exec_stats: vec![ExecStat { task: 1, mean_steps: steps, std_steps: 1e-6 }] }],
    )
}

/// Points on a circle of `radius` around `center`, evenly spaced.
pub fn ring(center: (f64, f64), radius: f64, count: usize) -> Vec<(f64, f64)> {
    (0..count)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / count as f64;
            (center.0 + radius * a.cos(), center.1 + radius * a.sin())
        })
        .collect()
}
