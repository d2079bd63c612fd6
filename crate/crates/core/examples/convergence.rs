//! Negotiation rounds as the number of AVs grows, with ten SBSs.

use v2i_edge::experiment::{ExperimentSpec, Scheme};
use v2i_edge::metrics::summarize;
use v2i_edge::{run_matching, Scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs = 100;
    let spec = ExperimentSpec { runs_per_point: runs, ..ExperimentSpec::new(ScenarioConfig::default(), "unused") };
    println!("scheme: {}", Scheme::Proposed);
    println!("  M   mean rounds   95% CI            max");
    for m in (5..=40).step_by(5) {
        let rounds: Vec<f64> = (0..runs)
            .map(|r| {
                let scn = Scenario::generate(spec.instance_config(m, r))?;
                Ok(run_matching(&scn)?.rounds_used as f64)
            })
            .collect::<Result<_, v2i_edge::Error>>()?;
        let s = summarize(&rounds);
        let (lo, hi) = s.ci95.unwrap_or((s.mean, s.mean));
        let max = rounds.iter().copied().fold(0.0, f64::max);
        println!("{m:>3}   {:>11.2}   [{lo:>6.2}, {hi:>6.2}]   {max:>4}", s.mean);
    }
    Ok(())
}
