//! Realized latencies, reliability and Monte Carlo aggregation.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compute::{ExecutionTable, MachineQueue};
use crate::matching::Matching;
use crate::radio::{downlink_rate, ttis_for, uplink_ttis, DlInterference};
use crate::scenario::Scenario;

/// What happened to one AV's task in one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvOutcome {
    pub av: usize,
    /// Task type id.
    pub task: u32,
    pub sbs: Option<usize>,
    pub subchannels: usize,
    pub ul_ttis: Option<u64>,
    pub dl_ttis: Option<u64>,
    pub dl_rate_bps: f64,
    /// `dl_ttis * T`.
    pub dl_ms: Option<f64>,
    /// `(ul_ttis + dl_ttis) * T`.
    pub tx_ms: Option<f64>,
    pub expected_compute_ms: Option<f64>,
    pub realized_compute_ms: Option<f64>,
    pub e2e_ms: Option<f64>,
    pub budget_ms: f64,
    pub dropped: bool,
    pub kappa: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub avs: Vec<AvOutcome>,
    /// Fraction of all AVs whose task met its budget.
    pub reliability: f64,
    /// AVs served per SBS.
    pub load: Vec<usize>,
    pub rounds_used: usize,
}

impl RunResult {
    /// Reliability as the association-weighted sum `(1/M) sum_n sum_m x_mn kappa_m`.
    pub fn reliability_from_association(&self) -> f64 {
        if self.avs.is_empty() {
            return 0.0;
        }
        let served: usize = self.load.iter().enumerate().map(|(sbs, _)| {
            self.avs.iter().filter(|o| o.sbs == Some(sbs) && o.kappa).count()
        }).sum();
        served as f64 / self.avs.len() as f64
    }

    pub fn mean_dl_rate_bps(&self) -> f64 {
        if self.avs.is_empty() {
            return 0.0;
        }
        self.avs.iter().map(|o| o.dl_rate_bps).sum::<f64>() / self.avs.len() as f64
    }
}

/// Evaluates a matching once: transmission latencies under the realized
/// interference model, one sampled execution time per queued task, and the
/// resulting success indicators. AVs without bandwidth do not enter any
/// machine queue and fail.
pub fn realize_run<R: Rng + ?Sized>(scn: &Scenario, matching: &Matching, exec: &ExecutionTable, rng: &mut R) -> RunResult {
    let cfg = &scn.config;
    let alloc = &matching.bandwidth;
    let model = DlInterference::realized(scn, alloc);
    let n_sbs = scn.n_sbs();

    let mut avs: Vec<AvOutcome> = (0..scn.n_av())
        .map(|av| {
            let task = scn.task_of(av);
            AvOutcome {
                av,
                task: task.id,
                sbs: matching.assignment[av],
                subchannels: matching.count(av),
                ul_ttis: None,
                dl_ttis: None,
                dl_rate_bps: 0.0,
                dl_ms: None,
                tx_ms: None,
                expected_compute_ms: None,
                realized_compute_ms: None,
                e2e_ms: None,
                budget_ms: task.latency_budget_ms,
                dropped: false,
                kappa: false,
            }
        })
        .collect();

    for sbs in 0..n_sbs {
        let served: Vec<usize> = matching.accepted[sbs].iter().copied().filter(|&a| alloc.count(a, sbs) > 0).collect();
        let others: Vec<usize> = (0..scn.n_av())
            .filter(|&a| matches!(matching.assignment[a], Some(s) if s != sbs))
            .collect();
        let queue = MachineQueue {
            machine: scn.topology.sbs_machine[sbs],
            entries: served.iter().map(|&a| (a, scn.topology.av_task[a])).collect(),
        };
        let samples = exec.sample_completion_steps(&queue, rng);
        let mut expected_clock = 0.0;
        for &(av, task_idx) in &queue.entries {
            let out = &mut avs[av];
            let task = &cfg.task_catalog[task_idx];
            let rate = downlink_rate(scn, av, sbs, alloc, model);
            out.dl_rate_bps = rate;
            out.dl_ttis = ttis_for(cfg.dl_bits(task), rate, cfg.tti_ms);
            out.ul_ttis = uplink_ttis(scn, av, sbs, &others).ok();
            expected_clock += exec.mean_steps(queue.machine, task_idx) * exec.step_ms();
            out.expected_compute_ms = Some(expected_clock);
            let sample = samples[&av];
            let compute = sample.completion_steps as f64 * exec.step_ms();
            out.realized_compute_ms = Some(compute);
            out.dropped = sample.dropped;
            out.dl_ms = out.dl_ttis.map(|d| d as f64 * cfg.tti_ms);
            if let (Some(d), Some(u)) = (out.dl_ttis, out.ul_ttis) {
                let tx = (d + u) as f64 * cfg.tti_ms;
                out.tx_ms = Some(tx);
                let e2e = tx + compute;
                out.e2e_ms = Some(e2e);
                out.kappa = !sample.dropped && e2e <= task.latency_budget_ms;
            }
        }
    }

    let reliability = if avs.is_empty() {
        0.0
    } else {
        avs.iter().filter(|o| o.kappa).count() as f64 / avs.len() as f64
    };
    let mut load = vec![0; n_sbs];
    for o in &avs {
        if let Some(s) = o.sbs {
            load[s] += 1;
        }
    }
    RunResult { avs, reliability, load, rounds_used: matching.rounds_used }
}

/// Empirical CDF: distinct sorted values with the fraction of samples at or
/// below each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSeries {
    pub label: String,
    pub scenario: String,
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl CdfSeries {
    /// `P(X <= x)`.
    pub fn at(&self, x: f64) -> f64 {
        match self.values.iter().rposition(|&v| v <= x) {
            Some(i) => self.probs[i],
            None => 0.0,
        }
    }

    /// `P(X < x)`.
    pub fn below(&self, x: f64) -> f64 {
        match self.values.iter().rposition(|&v| v < x) {
            Some(i) => self.probs[i],
            None => 0.0,
        }
    }
}

pub fn cdf(samples: &[f64], label: &str, scenario: &str) -> CdfSeries {
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|x| !x.is_nan()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut values = Vec::new();
    let mut probs = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        if values.last() == Some(&v) {
            *probs.last_mut().unwrap() = (i + 1) as f64 / n;
        } else {
            values.push(v);
            probs.push((i + 1) as f64 / n);
        }
    }
    CdfSeries { label: label.to_string(), scenario: scenario.to_string(), values, probs }
}

/// Mean with a 95% normal-approximation confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean; absent with fewer than two samples.
    pub std_err: Option<f64>,
    pub ci95: Option<(f64, f64)>,
}

pub fn summarize(samples: &[f64]) -> MetricSummary {
    let n = samples.len();
    if n == 0 {
        return MetricSummary { n, mean: f64::NAN, std_err: None, ci95: None };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return MetricSummary { n, mean, std_err: None, ci95: None };
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    MetricSummary { n, mean, std_err: Some(se), ci95: Some((mean - 1.96 * se, mean + 1.96 * se)) }
}

/// Aggregate over the runs of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    /// Per-run and pooled metrics keyed by name.
    pub metrics: BTreeMap<String, MetricSummary>,
    pub cdfs: Vec<CdfSeries>,
}

impl Summary {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.get(name)
    }

    pub fn cdf(&self, label: &str) -> Option<&CdfSeries> {
        self.cdfs.iter().find(|c| c.label == label)
    }
}

/// Per-run reliability, pooled per-AV success, latency components and DL
/// rate, and the negotiation round count.
pub fn aggregate(results: &[RunResult], scenario: &str) -> Summary {
    let per_run = |f: &dyn Fn(&RunResult) -> f64| results.iter().map(f).collect::<Vec<f64>>();
    let pooled = |f: &dyn Fn(&AvOutcome) -> Option<f64>| {
        results.iter().flat_map(|r| r.avs.iter().filter_map(f)).collect::<Vec<f64>>()
    };

    let reliability = per_run(&|r| r.reliability);
    let rate = per_run(&|r| r.mean_dl_rate_bps());
    let rounds = per_run(&|r| r.rounds_used as f64);
    let kappa = pooled(&|o| Some(if o.kappa { 1.0 } else { 0.0 }));
    let e2e = pooled(&|o| o.e2e_ms);
    let dl = pooled(&|o| o.dl_ms);
    let compute = pooled(&|o| o.realized_compute_ms);
    let within_50 = pooled(&|o| Some(if o.e2e_ms.is_some_and(|e| e <= 50.0) { 1.0 } else { 0.0 }));

    let mut metrics = BTreeMap::new();
    metrics.insert("reliability".to_string(), summarize(&reliability));
    metrics.insert("kappa_rate".to_string(), summarize(&kappa));
    metrics.insert("e2e_within_50ms".to_string(), summarize(&within_50));
    metrics.insert(
        "e2e_ms".to_string(),
        summarize(&e2e),
    );
    metrics.insert("dl_ms".to_string(), summarize(&dl));
    metrics.insert("compute_ms".to_string(), summarize(&compute));
    metrics.insert("dl_rate_bps".to_string(), summarize(&rate));
    metrics.insert("rounds".to_string(), summarize(&rounds));

    let cdfs = vec![
        cdf(&reliability, "reliability", scenario),
        cdf(&e2e, "e2e_ms", scenario),
        cdf(&dl, "dl_ms", scenario),
        cdf(&compute, "compute_ms", scenario),
        cdf(&rounds, "rounds", scenario),
    ];
    Summary { runs: results.len(), metrics, cdfs }
}
