//! Network instances: configuration, random topology generation and the
//! log-distance path-loss model.
//!
//! Every random draw comes from its own ChaCha stream keyed by the
//! configuration seed and a fixed purpose label, so changing one part of a
//! scenario (say, the number of AVs) leaves the other draws untouched.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// A task class an AV can request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskType {
    pub id: u32,
    /// Tolerable end-to-end delay.
    pub latency_budget_ms: f64,
    /// Downlink packet size; falls back to `ScenarioConfig::dl_packet_bits`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dl_packet_bits: Option<f64>,
    /// Processing steps before the task is dropped; falls back to
    /// `latency_budget_ms / time_step_ms`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

/// Mean and standard deviation (in processing steps) of one task type's
/// execution time on a machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecStat {
    pub task: u32,
    pub mean_steps: f64,
    pub std_steps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineType {
    pub id: u32,
    pub exec_stats: Vec<ExecStat>,
}

impl MachineType {
    pub fn stat(&self, task: u32) -> Option<&ExecStat> {
        self.exec_stats.iter().find(|s| s.task == task)
    }
}

/// Static parameters of a network instance. Missing JSON fields take the
/// defaults of [`ScenarioConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Side of the square deployment region (m).
    pub area_side: f64,
    pub n_sbs: usize,
    pub n_av: usize,
    /// Downlink subchannels per SBS (K).
    pub n_subchannels: usize,
    /// Subchannel bandwidth w (Hz).
    pub subchannel_bw: f64,
    /// Transmission time interval T (ms).
    pub tti_ms: f64,
    /// Duration of one processing time step (ms).
    pub time_step_ms: f64,
    pub sbs_tx_power_mw: f64,
    pub av_tx_power_mw: f64,
    pub noise_power_dbm: f64,
    pub antenna_gain_sbs: f64,
    pub antenna_gain_av: f64,
    /// Bandwidth-cost control parameter of the SBS utility.
    pub alpha: f64,
    /// Multiplier applied to `alpha / w_mn` (with `w_mn` in Hz) so that the
    /// salary term shares the millisecond scale of the latency terms.
    pub alpha_unit_scale: f64,
    pub dl_packet_bits: f64,
    pub ul_packet_bits: f64,
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    /// Realized downlink SINRs count every other SBS as an interferer on
    /// every subchannel instead of only the SBSs that use the subchannel.
    pub worst_case_interference: bool,
    pub task_catalog: Vec<TaskType>,
    pub machine_catalog: Vec<MachineType>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            area_side: 100.0,
            n_sbs: 10,
            n_av: 40,
            n_subchannels: 48,
            subchannel_bw: 180e3,
            tti_ms: 0.125,
            time_step_ms: 1.0,
            sbs_tx_power_mw: 100.0,
            av_tx_power_mw: 10.0,
            noise_power_dbm: -90.0,
            antenna_gain_sbs: 1.0,
            antenna_gain_av: 1.0,
            alpha: 20e3,
            alpha_unit_scale: 1e3,
            dl_packet_bits: 5e3,
            ul_packet_bits: 100.0,
            pathloss_ref_db: 38.0,
            pathloss_exponent: 3.0,
            worst_case_interference: false,
            task_catalog: default_tasks(),
            machine_catalog: default_machines(),
            seed: 1,
        }
    }
}

/// Three task types with 20, 50 and 100 ms budgets.
pub fn default_tasks() -> Vec<TaskType> {
    [20.0, 50.0, 100.0]
        .iter()
        .enumerate()
        .map(|(i, &budget)| TaskType {
            id: i as u32 + 1,
            latency_budget_ms: budget,
            dl_packet_bits: None,
            max_steps: None,
        })
        .collect()
}

/// Two machine types; the second one is twice as slow on every task.
pub fn default_machines() -> Vec<MachineType> {
    let table = [[(1.0, 0.5), (2.0, 0.5), (5.0, 0.5)], [(2.0, 0.5), (4.0, 0.5), (10.0, 0.5)]];
    table
        .iter()
        .enumerate()
        .map(|(j, row)| MachineType {
            id: j as u32 + 1,
            exec_stats: row
                .iter()
                .enumerate()
                .map(|(i, &(mean_steps, std_steps))| ExecStat {
                    task: i as u32 + 1,
                    mean_steps,
                    std_steps,
                })
                .collect(),
        })
        .collect()
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(what.to_string()))
    }
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        require(self.area_side > 0.0, "area_side must be > 0")?;
        require(self.n_sbs >= 1, "n_sbs must be >= 1")?;
        require(self.n_subchannels >= 1, "n_subchannels must be >= 1")?;
        require(self.subchannel_bw > 0.0, "subchannel_bw must be > 0")?;
        require(self.tti_ms > 0.0, "tti_ms must be > 0")?;
        require(self.time_step_ms > 0.0, "time_step_ms must be > 0")?;
        require(self.sbs_tx_power_mw > 0.0, "sbs_tx_power_mw must be > 0")?;
        require(self.av_tx_power_mw > 0.0, "av_tx_power_mw must be > 0")?;
        require(self.noise_power_dbm.is_finite(), "noise_power_dbm must be finite")?;
        require(self.antenna_gain_sbs > 0.0, "antenna_gain_sbs must be > 0")?;
        require(self.antenna_gain_av > 0.0, "antenna_gain_av must be > 0")?;
        require(self.alpha >= 0.0, "alpha must be >= 0")?;
        require(self.alpha_unit_scale > 0.0, "alpha_unit_scale must be > 0")?;
        require(self.dl_packet_bits > 0.0, "dl_packet_bits must be > 0")?;
        require(self.ul_packet_bits > 0.0, "ul_packet_bits must be > 0")?;
        require(self.pathloss_exponent > 0.0, "pathloss_exponent must be > 0")?;
        require(!self.task_catalog.is_empty(), "task_catalog must not be empty")?;
        require(!self.machine_catalog.is_empty(), "machine_catalog must not be empty")?;
        for (i, t) in self.task_catalog.iter().enumerate() {
            require(
                self.task_catalog[..i].iter().all(|o| o.id != t.id),
                &format!("duplicate task id {}", t.id),
            )?;
            require(
                t.latency_budget_ms > 0.0,
                &format!("task {}: latency_budget_ms must be > 0", t.id),
            )?;
            if let Some(bits) = t.dl_packet_bits {
                require(bits > 0.0, &format!("task {}: dl_packet_bits must be > 0", t.id))?;
            }
            require(
                self.max_steps(t) >= 1,
                &format!("task {}: max_steps must be >= 1", t.id),
            )?;
        }
        for m in &self.machine_catalog {
            for t in &self.task_catalog {
                let stat = m.stat(t.id).ok_or_else(|| {
                    Error::Config(format!("machine {} has no entry for task {}", m.id, t.id))
                })?;
                require(
                    stat.mean_steps > 0.0 && stat.std_steps > 0.0,
                    &format!("machine {} task {}: mean and std must be > 0", m.id, t.id),
                )?;
            }
        }
        Ok(())
    }

    /// Noise power in mW.
    pub fn noise_mw(&self) -> f64 {
        10f64.powf(self.noise_power_dbm / 10.0)
    }

    pub fn max_steps(&self, task: &TaskType) -> usize {
        task.max_steps
            .unwrap_or_else(|| (task.latency_budget_ms / self.time_step_ms).floor() as usize)
    }

    pub fn dl_bits(&self, task: &TaskType) -> f64 {
        task.dl_packet_bits.unwrap_or(self.dl_packet_bits)
    }

    /// Linear path gain at distance `d` (m); distances below 1 m are clamped.
    pub fn path_loss(&self, d: f64) -> f64 {
        path_loss(d, self.pathloss_ref_db, self.pathloss_exponent)
    }
}

/// Log-distance path loss `ref_db + 10 * exponent * log10(max(d, 1))`,
/// returned as a linear gain.
pub fn path_loss(d: f64, ref_db: f64, exponent: f64) -> f64 {
    let loss_db = ref_db + 10.0 * exponent * d.max(1.0).log10();
    10f64.powf(-loss_db / 10.0)
}

pub type Point = (f64, f64);

/// A frozen network instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub sbs_positions: Vec<Point>,
    pub av_positions: Vec<Point>,
    /// Index into the task catalog, per AV.
    pub av_task: Vec<usize>,
    /// Index into the machine catalog, per SBS.
    pub sbs_machine: Vec<usize>,
    /// Downlink fading, flattened as `[av][sbs][subchannel]`.
    pub fading_dl: Vec<f64>,
    /// Uplink fading on the shared uplink subchannel, `[av][sbs]`.
    pub fading_ul: Vec<f64>,
    /// Linear path gain, `[av][sbs]`.
    pub path_gain: Vec<f64>,
    pub n_subchannels: usize,
}

impl Topology {
    pub fn n_av(&self) -> usize {
        self.av_positions.len()
    }

    pub fn n_sbs(&self) -> usize {
        self.sbs_positions.len()
    }

    pub fn h_dl(&self, av: usize, sbs: usize, k: usize) -> f64 {
        self.fading_dl[(av * self.n_sbs() + sbs) * self.n_subchannels + k]
    }

    pub fn h_ul(&self, av: usize, sbs: usize) -> f64 {
        self.fading_ul[av * self.n_sbs() + sbs]
    }

    pub fn path_gain(&self, av: usize, sbs: usize) -> f64 {
        self.path_gain[av * self.n_sbs() + sbs]
    }

    pub fn distance(&self, av: usize, sbs: usize) -> f64 {
        let (ax, ay) = self.av_positions[av];
        let (sx, sy) = self.sbs_positions[sbs];
        ((ax - sx).powi(2) + (ay - sy).powi(2)).sqrt()
    }

    /// Recomputes `path_gain` from the positions.
    pub fn refresh_path_gain(&mut self, config: &ScenarioConfig) {
        let n = self.n_sbs();
        self.path_gain = (0..self.n_av() * n)
            .map(|i| config.path_loss(self.distance(i / n, i % n)))
            .collect();
    }
}

fn uniform_points(rng: &mut ChaCha20Rng, count: usize, side: f64) -> Vec<Point> {
    (0..count)
        .map(|_| (rng.gen_range(0.0..=side), rng.gen_range(0.0..=side)))
        .collect()
}

fn unit_exp(rng: &mut ChaCha20Rng) -> f64 {
    loop {
        let h: f64 = Exp1.sample(rng);
        if h > 0.0 {
            return h;
        }
    }
}

/// Draws a topology: uniform positions, uniform task and machine types,
/// and i.i.d. unit-mean exponential (Rayleigh power) fading gains.
pub fn generate_topology(config: &ScenarioConfig) -> Result<Topology> {
    config.validate()?;
    let seed = config.seed;
    let (n, m, k) = (config.n_sbs, config.n_av, config.n_subchannels);

    let sbs_positions = uniform_points(&mut stream(seed, Stream::SbsPositions), n, config.area_side);
    let av_positions = uniform_points(&mut stream(seed, Stream::AvPositions), m, config.area_side);

    let mut rng = stream(seed, Stream::Tasks);
    let av_task = (0..m).map(|_| rng.gen_range(0..config.task_catalog.len())).collect();
    let mut rng = stream(seed, Stream::Machines);
    let sbs_machine = (0..n).map(|_| rng.gen_range(0..config.machine_catalog.len())).collect();

    // AV-major order: adding AVs only appends draws.
    let mut rng = stream(seed, Stream::FadingDl);
    let fading_dl = (0..m * n * k).map(|_| unit_exp(&mut rng)).collect();
    let mut rng = stream(seed, Stream::FadingUl);
    let fading_ul = (0..m * n).map(|_| unit_exp(&mut rng)).collect();

    let mut topo = Topology {
        sbs_positions,
        av_positions,
        av_task,
        sbs_machine,
        fading_dl,
        fading_ul,
        path_gain: Vec::new(),
        n_subchannels: k,
    };
    topo.refresh_path_gain(config);
    Ok(topo)
}

/// A configuration together with the topology drawn from it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub topology: Topology,
}

impl Scenario {
    pub fn generate(config: ScenarioConfig) -> Result<Self> {
        let topology = generate_topology(&config)?;
        Ok(Scenario { config, topology })
    }

    /// Wraps a hand-built topology. Dimensions must agree with the config.
    pub fn from_parts(config: ScenarioConfig, topology: Topology) -> Result<Self> {
        config.validate()?;
        let (n, m, k) = (topology.n_sbs(), topology.n_av(), topology.n_subchannels);
        require(n == config.n_sbs, "topology SBS count differs from n_sbs")?;
        require(m == config.n_av, "topology AV count differs from n_av")?;
        require(k == config.n_subchannels, "topology subchannel count differs")?;
        require(topology.fading_dl.len() == m * n * k, "fading_dl has wrong length")?;
        require(topology.fading_ul.len() == m * n, "fading_ul has wrong length")?;
        require(topology.path_gain.len() == m * n, "path_gain has wrong length")?;
        require(topology.av_task.len() == m, "av_task has wrong length")?;
        require(topology.sbs_machine.len() == n, "sbs_machine has wrong length")?;
        require(
            topology.av_task.iter().all(|&t| t < config.task_catalog.len()),
            "av_task index out of range",
        )?;
        require(
            topology.sbs_machine.iter().all(|&j| j < config.machine_catalog.len()),
            "sbs_machine index out of range",
        )?;
        require(
            topology.fading_dl.iter().chain(&topology.fading_ul).all(|&h| h > 0.0),
            "fading gains must be > 0",
        )?;
        Ok(Scenario { config, topology })
    }

    pub fn n_av(&self) -> usize {
        self.topology.n_av()
    }

    pub fn n_sbs(&self) -> usize {
        self.topology.n_sbs()
    }

    pub fn task_of(&self, av: usize) -> &TaskType {
        &self.config.task_catalog[self.topology.av_task[av]]
    }
}
