//! Stochastic computational latency at the edge machines.
//!
//! Execution times live on a grid of processing steps `1, 2, ...`; a pmf
//! stores `P(step = t)` at index `t - 1`. The completion time of a queued
//! task is the sum of the execution times of every task up to and including
//! it, so its pmf is the convolution of those execution pmfs.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionPmf {
    /// `probs[t - 1] = P(t)` for `t = 1..=probs.len()`.
    pub probs: Vec<f64>,
    pub step_ms: f64,
}

impl ExecutionPmf {
    pub fn new(probs: Vec<f64>, step_ms: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Precondition("pmf needs at least one step".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Precondition("pmf entries must be >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("pmf sums to {total}")));
        }
        Ok(ExecutionPmf { probs, step_ms })
    }

    /// All mass on step `t` (`t >= 1`).
    pub fn delta(t: usize, step_ms: f64) -> Self {
        assert!(t >= 1, "steps start at 1");
        let mut probs = vec![0.0; t];
        probs[t - 1] = 1.0;
        ExecutionPmf { probs, step_ms }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `P(t)`, zero outside the support.
    pub fn p(&self, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.probs.get(t - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean_steps(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    pub fn mean_ms(&self) -> f64 {
        self.mean_steps() * self.step_ms
    }

    /// Probability that the step exceeds `limit`.
    pub fn tail_above(&self, limit: usize) -> f64 {
        // `+ 0.0` turns the empty sum's -0.0 into 0.0
        self.probs.iter().skip(limit).sum::<f64>() + 0.0
    }

    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best + 1
    }

    /// Inverse-CDF draw of one step.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>() * self.total();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i + 1;
            }
        }
        // Rounding left `u` at the very top; take the last step with mass.
        self.probs.iter().rposition(|&p| p > 0.0).map_or(1, |i| i + 1)
    }

    pub fn total_variation(&self, other: &ExecutionPmf) -> f64 {
        let n = self.len().max(other.len());
        0.5 * (1..=n).map(|t| (self.p(t) - other.p(t)).abs()).sum::<f64>()
    }
}

/// Half-step binning of `N(mean, std^2)` onto steps `1..=max_steps`. Mass
/// falling outside the range is removed by renormalizing.
pub fn discretize_gaussian(mean_steps: f64, std_steps: f64, max_steps: usize, step_ms: f64) -> Result<ExecutionPmf> {
    if !(mean_steps > 0.0) || !(std_steps > 0.0) || max_steps == 0 {
        return Err(Error::Config(format!(
            "gaussian execution time needs mean > 0, std > 0, max_steps >= 1 (got {mean_steps}, {std_steps}, {max_steps})"
        )));
    }
    let normal = Normal::new(mean_steps, std_steps).map_err(|e| Error::Config(e.to_string()))?;
    let mut probs: Vec<f64> = (1..=max_steps)
        .map(|t| {
            let t = t as f64;
            (normal.cdf(t + 0.5) - normal.cdf(t - 0.5)).max(0.0)
        })
        .collect();
    let total: f64 = probs.iter().sum();
    if total > 0.0 && total.is_finite() {
        probs.iter_mut().for_each(|p| *p /= total);
    } else {
        // Every bin underflowed: the mean is far outside the range.
        probs.iter_mut().for_each(|p| *p = 0.0);
        let t = (mean_steps.round() as usize).clamp(1, max_steps);
        probs[t - 1] = 1.0;
    }
    Ok(ExecutionPmf { probs, step_ms })
}

/// Pmf of the sum of two independent step counts.
pub fn convolve(a: &ExecutionPmf, b: &ExecutionPmf) -> Result<ExecutionPmf> {
    if (a.step_ms - b.step_ms).abs() > 1e-12 * a.step_ms.abs().max(1.0) {
        return Err(Error::StepMismatch(a.step_ms, b.step_ms));
    }
    // steps i + 1 and j + 1 land on step i + j + 2, i.e. index i + j + 1
    let mut probs = vec![0.0; a.len() + b.len()];
    for (i, &pa) in a.probs.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for (j, &pb) in b.probs.iter().enumerate() {
            probs[i + j + 1] += pa * pb;
        }
    }
    Ok(ExecutionPmf { probs, step_ms: a.step_ms })
}

/// Tasks batched at one SBS machine, in service order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineQueue {
    /// Index into the machine catalog.
    pub machine: usize,
    /// `(av, task index)` pairs.
    pub entries: Vec<(usize, usize)>,
}

impl MachineQueue {
    pub fn new(machine: usize) -> Self {
        MachineQueue { machine, entries: Vec::new() }
    }

    pub fn push(&mut self, av: usize, task: usize) -> Result<()> {
        if self.position(av).is_some() {
            return Err(Error::Precondition(format!("AV {av} is already queued")));
        }
        self.entries.push((av, task));
        Ok(())
    }

    pub fn position(&self, av: usize) -> Option<usize> {
        self.entries.iter().position(|&(a, _)| a == av)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Execution pmfs for every (machine type, task type) pair of a configuration.
#[derive(Debug, Clone)]
pub struct ExecutionTable {
    /// `pmfs[machine][task]`.
    pmfs: Vec<Vec<ExecutionPmf>>,
    means: Vec<Vec<f64>>,
    max_steps: Vec<usize>,
    step_ms: f64,
}

impl ExecutionTable {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let max_steps: Vec<usize> = config.task_catalog.iter().map(|t| config.max_steps(t)).collect();
        let mut pmfs = Vec::with_capacity(config.machine_catalog.len());
        for machine in &config.machine_catalog {
            let mut row = Vec::with_capacity(config.task_catalog.len());
            for (ti, task) in config.task_catalog.iter().enumerate() {
                let stat = machine.stat(task.id).ok_or_else(|| {
                    Error::Config(format!("machine {} has no entry for task {}", machine.id, task.id))
                })?;
                row.push(discretize_gaussian(stat.mean_steps, stat.std_steps, max_steps[ti], config.time_step_ms)?);
            }
            pmfs.push(row);
        }
        let means = pmfs.iter().map(|row| row.iter().map(ExecutionPmf::mean_steps).collect()).collect();
        Ok(ExecutionTable { pmfs, means, max_steps, step_ms: config.time_step_ms })
    }

    /// Builds a table from explicit pmfs, `pmfs[machine][task]`, and
    /// per-task drop thresholds. All pmfs must share one step duration.
    pub fn from_pmfs(pmfs: Vec<Vec<ExecutionPmf>>, max_steps: Vec<usize>) -> Result<Self> {
        let step_ms = pmfs
            .first()
            .and_then(|row| row.first())
            .map(|p| p.step_ms)
            .ok_or_else(|| Error::Config("execution table needs at least one pmf".into()))?;
        for row in &pmfs {
            if row.len() != max_steps.len() {
                return Err(Error::Config(format!(
                    "execution table row has {} pmfs for {} task types",
                    row.len(),
                    max_steps.len()
                )));
            }
            if let Some(p) = row.iter().find(|p| p.step_ms != step_ms) {
                return Err(Error::StepMismatch(step_ms, p.step_ms));
            }
        }
        let means = pmfs.iter().map(|row| row.iter().map(ExecutionPmf::mean_steps).collect()).collect();
        Ok(ExecutionTable { pmfs, means, max_steps, step_ms })
    }

    pub fn pmf(&self, machine: usize, task: usize) -> &ExecutionPmf {
        &self.pmfs[machine][task]
    }

    /// Mean execution time in steps.
    pub fn mean_steps(&self, machine: usize, task: usize) -> f64 {
        self.means[machine][task]
    }

    /// Drop threshold of a task type, in steps.
    pub fn max_steps(&self, task: usize) -> usize {
        self.max_steps[task]
    }

    pub fn step_ms(&self) -> f64 {
        self.step_ms
    }

    /// Completion-time pmf of `target`: the convolution of the execution
    /// pmfs of every task ahead of it and its own.
    pub fn completion_pmf(&self, queue: &MachineQueue, target: usize) -> Result<ExecutionPmf> {
        let pos = queue.position(target).ok_or(Error::NotQueued(target))?;
        let mut acc = self.pmf(queue.machine, queue.entries[0].1).clone();
        for &(_, task) in &queue.entries[1..=pos] {
            acc = convolve(&acc, self.pmf(queue.machine, task))?;
        }
        Ok(acc)
    }

    /// Expected completion time of `target` (ms).
    pub fn expected_task_completion_ms(&self, queue: &MachineQueue, target: usize) -> Result<f64> {
        Ok(self.completion_pmf(queue, target)?.mean_ms())
    }

    /// Sum of the expected completion times of every queued task (ms).
    pub fn expected_completion_ms(&self, queue: &MachineQueue) -> Result<f64> {
        let mut total = 0.0;
        for &(av, _) in &queue.entries {
            total += self.expected_task_completion_ms(queue, av)?;
        }
        Ok(total)
    }

    /// Closed-form counterpart of `expected_completion_ms`: by linearity the
    /// i-th task contributes `(len - i)` copies of its mean execution time.
    pub fn expected_completion_ms_fast(&self, machine: usize, tasks: impl ExactSizeIterator<Item = usize>) -> f64 {
        let len = tasks.len();
        tasks
            .enumerate()
            .map(|(i, t)| (len - i) as f64 * self.mean_steps(machine, t))
            .sum::<f64>()
            * self.step_ms
    }

    /// Draws one execution time per queued task; completion is the running sum.
    pub fn sample_completion_steps<R: Rng + ?Sized>(
        &self,
        queue: &MachineQueue,
        rng: &mut R,
    ) -> BTreeMap<usize, CompletionSample> {
        let mut clock = 0;
        let mut out = BTreeMap::new();
        for &(av, task) in &queue.entries {
            let exec = self.pmf(queue.machine, task).sample(rng);
            clock += exec;
            out.insert(
                av,
                CompletionSample {
                    exec_steps: exec,
                    completion_steps: clock,
                    dropped: clock > self.max_steps(task),
                },
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionSample {
    pub exec_steps: usize,
    pub completion_steps: usize,
    /// Completion passed the task's step limit.
    pub dropped: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform12() -> ExecutionPmf {
        ExecutionPmf::new(vec![0.5, 0.5], 1.0).unwrap()
    }

    #[test]
    fn gaussian_mode_and_normalization() {
        let pmf = discretize_gaussian(1.0, 0.5, 20, 1.0).unwrap();
        assert_eq!(pmf.mode(), 1);
        assert!((pmf.total() - 1.0).abs() < 1e-9);
        let delta = discretize_gaussian(5.0, 1e-6, 20, 1.0).unwrap();
        assert!((delta.p(5) - 1.0).abs() < 1e-12);
        for (m, s, t) in [(2.0, 0.5, 50), (10.0, 0.5, 100), (0.2, 3.0, 4), (40.0, 0.1, 5)] {
            let p = discretize_gaussian(m, s, t, 1.0).unwrap();
            assert!((p.total() - 1.0).abs() < 1e-9);
            assert!(p.probs.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn gaussian_rejects_bad_parameters() {
        assert!(matches!(discretize_gaussian(0.0, 0.5, 10, 1.0), Err(Error::Config(_))));
        assert!(matches!(discretize_gaussian(1.0, 0.0, 10, 1.0), Err(Error::Config(_))));
        assert!(matches!(discretize_gaussian(1.0, 0.5, 0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn gaussian_mean_close_to_parameter() {
        let pmf = discretize_gaussian(2.0, 0.5, 50, 1.0).unwrap();
        assert!((pmf.mean_ms() - 2.0).abs() < 0.05);
    }

    #[test]
    fn convolution_examples() {
        let c = convolve(&ExecutionPmf::delta(2, 1.0), &ExecutionPmf::delta(3, 1.0)).unwrap();
        assert_eq!(c.p(5), 1.0);
        assert!((c.total() - 1.0).abs() < 1e-15);

        let u = convolve(&uniform12(), &uniform12()).unwrap();
        assert_eq!((u.p(1), u.p(2), u.p(3), u.p(4)), (0.0, 0.25, 0.5, 0.25));

        assert!(matches!(
            convolve(&uniform12(), &ExecutionPmf::delta(1, 2.0)),
            Err(Error::StepMismatch(..))
        ));
    }

    fn table() -> ExecutionTable {
        ExecutionTable::new(&ScenarioConfig::default()).unwrap()
    }

    #[test]
    fn completion_of_single_task_is_its_execution() {
        let t = table();
        let mut q = MachineQueue::new(1);
        q.push(4, 2).unwrap();
        assert_eq!(&t.completion_pmf(&q, 4).unwrap(), t.pmf(1, 2));
        assert!(matches!(t.completion_pmf(&q, 5), Err(Error::NotQueued(5))));
        assert!(q.push(4, 0).is_err());
    }

    #[test]
    fn expected_completion_examples() {
        let t = table();
        assert_eq!(t.expected_completion_ms(&MachineQueue::new(0)).unwrap(), 0.0);
        assert_eq!(t.sample_completion_steps(&MachineQueue::new(0), &mut ChaCha8Rng::seed_from_u64(1)).len(), 0);

        let mut q = MachineQueue::new(1);
        q.push(0, 1).unwrap();
        q.push(1, 1).unwrap();
        let e0 = t.expected_task_completion_ms(&q, 0).unwrap();
        let e1 = t.expected_task_completion_ms(&q, 1).unwrap();
        assert!((e1 - 2.0 * e0).abs() < 1e-9);
        let fast = t.expected_completion_ms_fast(1, q.entries.iter().map(|e| e.1));
        assert!((t.expected_completion_ms(&q).unwrap() - fast).abs() < 1e-9);
    }

    #[test]
    fn delta_queue_samples_are_partial_sums() {
        let mut cfg = ScenarioConfig::default();
        for m in &mut cfg.machine_catalog {
            for s in &mut m.exec_stats {
                s.std_steps = 1e-6;
            }
        }
        let t = ExecutionTable::new(&cfg).unwrap();
        let mut q = MachineQueue::new(1);
        for (av, task) in [(3, 0), (1, 1), (7, 2)] {
            q.push(av, task).unwrap();
        }
        let s = t.sample_completion_steps(&q, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(s[&3].completion_steps, 2);
        assert_eq!(s[&1].completion_steps, 6);
        assert_eq!(s[&7].completion_steps, 16);
        assert!(s.values().all(|c| !c.dropped));
        assert!((t.expected_completion_ms(&q).unwrap() - 24.0).abs() < 1e-9);
    }
}
