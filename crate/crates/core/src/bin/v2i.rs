use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use v2i_edge::experiment::{
    cmd_run, cmd_trace, cmd_verify, parse_av_counts, ExperimentSpec, SchemeSelection, VerifyOptions,
};
use v2i_edge::{Error, ScenarioConfig};

/// Monte Carlo sweeps, property verification and offer traces for the V2I
/// edge-computing simulator.
#[derive(Debug, Parser)]
#[command(name = "v2i", version)]
struct Args {
    /// JSON scenario configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// proposed, max_sinr, max_rssi or all.
    #[arg(long, default_value = "all")]
    scheme: String,
    /// AV counts to sweep, e.g. `40` or `10:40:10` or `10,30`. Defaults to
    /// the config's n_av.
    #[arg(long)]
    avs: Option<String>,
    /// Runs per sweep point (0 is accepted only with --verify).
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Run the property suite instead of a sweep.
    #[arg(long, conflicts_with = "trace")]
    verify: bool,
    /// Write the offer log of the single instance defined by the config and seed.
    #[arg(long)]
    trace: bool,
    /// With --verify: disable the repetition of unrejected offers.
    #[arg(long, requires = "verify")]
    inject_bug: bool,
    /// With --verify: largest coalition size for the core check.
    #[arg(long, default_value_t = 5)]
    max_subset: usize,
}

fn build_spec(args: &Args) -> Result<ExperimentSpec, Error> {
    let mut base = match &args.config {
        Some(path) => ScenarioConfig::from_json_file(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    let av_counts = match &args.avs {
        Some(s) => parse_av_counts(s)?,
        None => vec![base.n_av],
    };
    base.n_av = av_counts[0];
    base.validate()?;
    Ok(ExperimentSpec {
        scheme: args.scheme.parse::<SchemeSelection>()?,
        av_counts,
        runs_per_point: args.runs,
        output_dir: args.out.clone(),
        base,
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = match build_spec(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let outcome = if args.verify {
        let opts = VerifyOptions { max_subset: args.max_subset, inject_bug: args.inject_bug };
        cmd_verify(&spec, opts).map(|report| {
            print!("{}", report.render());
            report.passed()
        })
    } else if args.trace {
        cmd_trace(&spec.base, &spec.output_dir).map(|m| {
            println!(
                "{} offer events over {} rounds, {} of {} AVs matched; wrote {}",
                m.offer_log.len(),
                m.rounds_used,
                m.matched(),
                m.n_av(),
                spec.output_dir.join("trace.jsonl").display()
            );
            true
        })
    } else {
        cmd_run(&spec).map(|table| {
            print!("{table}");
            true
        })
    };

    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
