//! Checks the negotiated matching on small random instances: individual
//! rationality, the exhaustive blocking-coalition search, and the offer-log
//! invariants. The second pass disables the repetition of held offers to
//! show that the trace checks notice.

use v2i_edge::experiment::{cmd_verify, ExperimentSpec, VerifyOptions};
use v2i_edge::ScenarioConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = ScenarioConfig { n_sbs: 3, n_av: 5, n_subchannels: 8, ..Default::default() };
    let spec = ExperimentSpec { runs_per_point: 50, ..ExperimentSpec::new(base, "unused") };

    let report = cmd_verify(&spec, VerifyOptions::default())?;
    println!("faithful algorithm ({} instances):\n{}", report.instances, report.render());

    let report = cmd_verify(&spec, VerifyOptions { inject_bug: true, ..Default::default() })?;
    println!("held offers not repeated:\n{}", report.render());
    Ok(())
}
