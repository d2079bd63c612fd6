//! Monte Carlo sweeps, the property-verification suite and single-instance
//! traces, with their on-disk artifacts.
//!
//! Every instance is derived from `(base seed, run index)` through
//! [`run_seed`], and work is fanned out with rayon but collected by
//! `(point, run)` index, so the files written are byte-identical across
//! reruns regardless of thread scheduling.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{max_rssi_association, max_sinr_association};
use crate::compute::ExecutionTable;
use crate::error::{Error, Result};
use crate::matching::verify::{check_trace, find_blocking_pair, individual_rationality, search_size, DEFAULT_SEARCH_LIMIT};
use crate::matching::{run_matching_with, MarketModel, Matching, MatchingOptions};
use crate::metrics::{aggregate, realize_run, RunResult, Summary};
use crate::rng::{run_seed, stream, Stream};
use crate::scenario::{Scenario, ScenarioConfig};

/// An association and bandwidth scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    MaxSinr,
    MaxRssi,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::MaxRssi, Scheme::MaxSinr];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::MaxSinr => "max_sinr",
            Scheme::MaxRssi => "max_rssi",
        }
    }

    /// Builds this scheme's matching for one instance.
    pub fn matching(self, scn: &Scenario) -> Result<Matching> {
        match self {
            Scheme::Proposed => {
                let model = MarketModel::new(scn)?;
                run_matching_with(&model, MatchingOptions::default())
            }
            Scheme::MaxSinr => max_sinr_association(scn),
            Scheme::MaxRssi => max_rssi_association(scn),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `--scheme` value: one scheme or all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSelection {
    One(Scheme),
    All,
}

impl SchemeSelection {
    pub fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeSelection::One(s) => vec![s],
            SchemeSelection::All => Scheme::ALL.to_vec(),
        }
    }
}

impl FromStr for SchemeSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(SchemeSelection::One(Scheme::Proposed)),
            "max_sinr" => Ok(SchemeSelection::One(Scheme::MaxSinr)),
            "max_rssi" => Ok(SchemeSelection::One(Scheme::MaxRssi)),
            "all" => Ok(SchemeSelection::All),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (expected proposed, max_sinr, max_rssi or all)"
            ))),
        }
    }
}

/// Parses an AV-count list: comma-separated values and/or `start:end:step`
/// ranges (inclusive), e.g. `10,20` or `10:40:10`.
pub fn parse_av_counts(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("invalid AV count list '{s}'"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        match fields.as_slice() {
            [v] => out.push(v.parse().map_err(|_| bad())?),
            [a, b, step] => {
                let (a, b, step): (usize, usize, usize) = (
                    a.parse().map_err(|_| bad())?,
                    b.parse().map_err(|_| bad())?,
                    step.parse().map_err(|_| bad())?,
                );
                if step == 0 || a > b {
                    return Err(bad());
                }
                out.extend((a..=b).step_by(step));
            }
            _ => return Err(bad()),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// What to run and where to write it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scheme: SchemeSelection,
    /// Sweep points (number of AVs).
    pub av_counts: Vec<usize>,
    pub runs_per_point: usize,
    pub output_dir: PathBuf,
    /// Everything except `n_av` comes from here; `seed` roots all runs.
    pub base: ScenarioConfig,
}

impl ExperimentSpec {
    /// A single-point spec at the base config's AV count.
    pub fn new(base: ScenarioConfig, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            scheme: SchemeSelection::All,
            av_counts: vec![base.n_av],
            runs_per_point: 1,
            output_dir: output_dir.into(),
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.av_counts.is_empty() {
            return Err(Error::Config("av_counts must not be empty".into()));
        }
        if self.runs_per_point == 0 {
            return Err(Error::Config("runs_per_point must be >= 1".into()));
        }
        self.base.validate()
    }

    /// Configuration of run `run` at sweep point `n_av`.
    pub fn instance_config(&self, n_av: usize, run: usize) -> ScenarioConfig {
        ScenarioConfig { n_av, seed: run_seed(self.base.seed, run as u64), ..self.base.clone() }
    }

    fn jobs(&self) -> Vec<(usize, usize)> {
        self.av_counts
            .iter()
            .flat_map(|&m| (0..self.runs_per_point).map(move |r| (m, r)))
            .collect()
    }
}

/// Results of one scheme at one sweep point, in run order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResults {
    pub scheme: Scheme,
    pub n_av: usize,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunResult>,
}

impl PointResults {
    pub fn summary(&self) -> Summary {
        aggregate(&self.runs, &format!("{}_m{}", self.scheme, self.n_av))
    }
}

/// Simulates one instance under one scheme. The realization stream depends
/// only on the instance seed, so all schemes see the same execution draws.
pub fn simulate_instance(config: ScenarioConfig, scheme: Scheme) -> Result<RunResult> {
    let seed = config.seed;
    let scn = Scenario::generate(config)?;
    let exec = ExecutionTable::new(&scn.config)?;
    let matching = scheme.matching(&scn)?;
    Ok(realize_run(&scn, &matching, &exec, &mut stream(seed, Stream::Execution)))
}

/// Runs the sweep for every selected scheme, in parallel over instances.
pub fn simulate(spec: &ExperimentSpec) -> Result<Vec<PointResults>> {
    spec.validate()?;
    let jobs = spec.jobs();
    let mut out = Vec::new();
    for scheme in spec.scheme.schemes() {
        let runs: Vec<RunResult> = jobs
            .par_iter()
            .map(|&(m, r)| simulate_instance(spec.instance_config(m, r), scheme))
            .collect::<Result<_>>()?;
        let mut runs = runs.into_iter();
        for &m in &spec.av_counts {
            out.push(PointResults {
                scheme,
                n_av: m,
                seeds: (0..spec.runs_per_point).map(|r| spec.instance_config(m, r).seed).collect(),
                runs: runs.by_ref().take(spec.runs_per_point).collect(),
            });
        }
    }
    Ok(out)
}

/// One row of `<scheme>_avs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvRow {
    pub scheme: Scheme,
    pub n_av: usize,
    pub run: usize,
    pub seed: u64,
    pub av: usize,
    pub task: u32,
    pub sbs: Option<usize>,
    pub subchannels: usize,
    pub ul_ttis: Option<u64>,
    pub dl_ttis: Option<u64>,
    pub dl_rate_bps: f64,
    pub dl_ms: Option<f64>,
    pub tx_ms: Option<f64>,
    pub expected_compute_ms: Option<f64>,
    pub realized_compute_ms: Option<f64>,
    pub e2e_ms: Option<f64>,
    pub budget_ms: f64,
    pub dropped: bool,
    pub kappa: bool,
}

/// One row of `<scheme>_runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub scheme: Scheme,
    pub n_av: usize,
    pub run: usize,
    pub seed: u64,
    pub reliability: f64,
    pub matched: usize,
    pub mean_dl_rate_bps: f64,
    pub rounds_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub n_av: usize,
    pub summary: Summary,
}

/// Contents of `<scheme>_summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub runs_per_point: usize,
    pub base_seed: u64,
    pub points: Vec<PointSummary>,
}

/// Writes the per-AV CSV, per-run CSV and JSON summary of each scheme.
/// Returns the paths written.
pub fn write_results(spec: &ExperimentSpec, results: &[PointResults]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&spec.output_dir)?;
    let mut written = Vec::new();
    for scheme in spec.scheme.schemes() {
        let points: Vec<&PointResults> = results.iter().filter(|p| p.scheme == scheme).collect();

        let path = spec.output_dir.join(format!("{scheme}_avs.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        for p in &points {
            for (run, (res, &seed)) in p.runs.iter().zip(&p.seeds).enumerate() {
                for o in &res.avs {
                    w.serialize(AvRow {
                        scheme,
                        n_av: p.n_av,
                        run,
                        seed,
                        av: o.av,
                        task: o.task,
                        sbs: o.sbs,
                        subchannels: o.subchannels,
                        ul_ttis: o.ul_ttis,
                        dl_ttis: o.dl_ttis,
                        dl_rate_bps: o.dl_rate_bps,
                        dl_ms: o.dl_ms,
                        tx_ms: o.tx_ms,
                        expected_compute_ms: o.expected_compute_ms,
                        realized_compute_ms: o.realized_compute_ms,
                        e2e_ms: o.e2e_ms,
                        budget_ms: o.budget_ms,
                        dropped: o.dropped,
                        kappa: o.kappa,
                    })?;
                }
            }
        }
        w.flush()?;
        written.push(path);

        let path = spec.output_dir.join(format!("{scheme}_runs.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        for p in &points {
            for (run, (res, &seed)) in p.runs.iter().zip(&p.seeds).enumerate() {
                w.serialize(RunRow {
                    scheme,
                    n_av: p.n_av,
                    run,
                    seed,
                    reliability: res.reliability,
                    matched: res.avs.iter().filter(|o| o.sbs.is_some()).count(),
                    mean_dl_rate_bps: res.mean_dl_rate_bps(),
                    rounds_used: res.rounds_used,
                })?;
            }
        }
        w.flush()?;
        written.push(path);

        let summary = SchemeSummary {
            scheme,
            runs_per_point: spec.runs_per_point,
            base_seed: spec.base.seed,
            points: points.iter().map(|p| PointSummary { n_av: p.n_av, summary: p.summary() }).collect(),
        };
        let path = spec.output_dir.join(format!("{scheme}_summary.json"));
        let mut f = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut f, &summary)?;
        f.write_all(b"\n")?;
        f.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Plain-text table of mean reliability, tail probabilities and rounds.
pub fn summary_table(results: &[PointResults]) -> String {
    let mut s = format!(
        "{:<10} {:>5} {:>5} {:>16} {:>10} {:>12} {:>8}\n",
        "scheme", "M", "runs", "reliability", "P(eta<0.8)", "P(e2e<=50)", "rounds"
    );
    for p in results {
        let sum = p.summary();
        let rel = sum.metric("reliability").expect("reliability is always aggregated");
        let low = sum.cdf("reliability").map_or(f64::NAN, |c| c.below(0.8));
        let within = sum.metric("e2e_within_50ms").map_or(f64::NAN, |m| m.mean);
        let rounds = sum.metric("rounds").map_or(f64::NAN, |m| m.mean);
        let ci = rel.std_err.map_or(String::from("-"), |se| format!("{:.3}", 1.96 * se));
        s.push_str(&format!(
            "{:<10} {:>5} {:>5} {:>9.3} ± {:<5} {:>10.3} {:>12.3} {:>8.1}\n",
            p.scheme.name(),
            p.n_av,
            p.runs.len(),
            rel.mean,
            ci,
            low,
            within,
            rounds
        ));
    }
    s
}

/// Runs the sweep, writes the artifacts and returns the summary table.
pub fn cmd_run(spec: &ExperimentSpec) -> Result<String> {
    let results = simulate(spec)?;
    write_results(spec, &results)?;
    Ok(summary_table(&results))
}

/// Pass/fail of one property over all verified instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    /// Instances where the property could not be evaluated.
    pub skipped: usize,
    /// First few failure descriptions.
    pub details: Vec<String>,
}

impl PropertyResult {
    fn new(name: &str) -> Self {
        PropertyResult { name: name.to_string(), instances: 0, failures: 0, skipped: 0, details: Vec::new() }
    }

    fn record(&mut self, failure: Option<String>) {
        self.instances += 1;
        if let Some(msg) = failure {
            self.failures += 1;
            if self.details.len() < 5 {
                self.details.push(msg);
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub instances: usize,
    pub properties: Vec<PropertyResult>,
    pub warnings: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyResult::passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        for p in &self.properties {
            let status = if p.passed() { "PASS" } else { "FAIL" };
            s.push_str(&format!(
                "{status} {:<22} {} instances, {} failures, {} skipped\n",
                p.name, p.instances, p.failures, p.skipped
            ));
            for d in &p.details {
                s.push_str(&format!("    {d}\n"));
            }
        }
        s
    }
}

/// Options for [`cmd_verify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Largest coalition the core check enumerates.
    pub max_subset: usize,
    /// Skip the repetition of unrejected offers, to show the trace
    /// checks catch it.
    pub inject_bug: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { max_subset: 5, inject_bug: false }
    }
}

#[derive(Debug, Clone)]
struct InstanceCheck {
    converged: Option<String>,
    ir: Option<String>,
    core: Option<Option<String>>,
    trace: Vec<(&'static str, Option<String>)>,
}

fn check_instance(config: ScenarioConfig, opts: VerifyOptions) -> Result<InstanceCheck> {
    let seed = config.seed;
    let scn = Scenario::generate(config)?;
    let model = MarketModel::new(&scn)?;
    let mopts = MatchingOptions { repeat_unrejected: !opts.inject_bug, round_cap: None };
    let matching = match run_matching_with(&model, mopts) {
        Ok(m) => m,
        Err(Error::RoundCap(cap)) => {
            return Ok(InstanceCheck {
                converged: Some(format!("seed {seed}: no convergence within {cap} rounds")),
                ir: None,
                core: None,
                trace: Vec::new(),
            })
        }
        Err(e) => return Err(e),
    };
    let ir = individual_rationality(&model, &matching);
    let ir = (!ir.is_empty()).then(|| format!("seed {seed}: {ir:?}"));
    let (n, m, k) = (scn.n_sbs(), scn.n_av(), scn.config.n_subchannels);
    let core = if search_size(n, m, k, opts.max_subset) <= DEFAULT_SEARCH_LIMIT {
        Some(find_blocking_pair(&model, &matching, opts.max_subset)?.map(|b| format!("seed {seed}: {b:?}")))
    } else {
        None
    };
    let trace = check_trace(&matching)
        .into_iter()
        .map(|c| {
            let msg = c.violations.first().map(|v| format!("seed {seed}: {v}"));
            (c.name, msg)
        })
        .collect();
    Ok(InstanceCheck { converged: None, ir, core, trace })
}

/// Runs the property suite (convergence within the round cap, individual
/// rationality, absence of blocking coalitions where the exhaustive search
/// is affordable, and the offer-trace invariants) on `runs_per_point`
/// instances per sweep point. Zero instances pass vacuously with a warning.
pub fn cmd_verify(spec: &ExperimentSpec, opts: VerifyOptions) -> Result<VerifyReport> {
    spec.base.validate()?;
    let jobs = spec.jobs();
    let checks: Vec<InstanceCheck> = jobs
        .par_iter()
        .map(|&(m, r)| check_instance(spec.instance_config(m, r), opts))
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    if checks.is_empty() {
        warnings.push("no instances requested; verification passes vacuously".to_string());
    }
    let mut converged = PropertyResult::new("convergence");
    let mut ir = PropertyResult::new("individual rationality");
    let mut core = PropertyResult::new("core allocation");
    let mut trace: Vec<PropertyResult> = Vec::new();
    for c in checks {
        converged.record(c.converged.clone());
        if c.converged.is_some() {
            continue;
        }
        ir.record(c.ir);
        match c.core {
            Some(found) => core.record(found),
            None => core.skipped += 1,
        }
        for (name, msg) in c.trace {
            let idx = match trace.iter().position(|p| p.name == name) {
                Some(i) => i,
                None => {
                    trace.push(PropertyResult::new(name));
                    trace.len() - 1
                }
            };
            trace[idx].record(msg);
        }
    }
    if core.skipped > 0 {
        warnings.push(format!(
            "core check skipped on {} instances too large for exhaustive search",
            core.skipped
        ));
    }
    let mut properties = vec![converged, ir, core];
    properties.extend(trace);
    Ok(VerifyReport { instances: jobs.len(), properties, warnings })
}

/// Final state of a traced instance, written next to the offer log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub seed: u64,
    pub n_sbs: usize,
    pub n_av: usize,
    pub rounds_used: usize,
    pub assignment: Vec<Option<usize>>,
    /// `(av, subchannels)` per SBS in service order.
    pub grants: Vec<Vec<(usize, usize)>>,
}

/// Runs the proposed negotiation on the instance defined by `config` and
/// writes `trace.jsonl` (one offer event per line) and `matching.json` into
/// `out_dir`. Returns the matching.
pub fn cmd_trace(config: &ScenarioConfig, out_dir: &Path) -> Result<Matching> {
    let scn = Scenario::generate(config.clone())?;
    let matching = Scheme::Proposed.matching(&scn)?;
    fs::create_dir_all(out_dir)?;
    let mut f = BufWriter::new(File::create(out_dir.join("trace.jsonl"))?);
    matching.write_trace(&mut f)?;
    f.flush()?;
    let summary = TraceSummary {
        seed: config.seed,
        n_sbs: scn.n_sbs(),
        n_av: scn.n_av(),
        rounds_used: matching.rounds_used,
        assignment: matching.assignment.clone(),
        grants: (0..scn.n_sbs()).map(|s| matching.grants(s)).collect(),
    };
    let mut f = BufWriter::new(File::create(out_dir.join("matching.json"))?);
    serde_json::to_writer_pretty(&mut f, &summary)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(matching)
}
