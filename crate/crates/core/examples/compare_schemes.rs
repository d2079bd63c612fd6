//! Monte Carlo comparison of the negotiated association against the
//! max-SINR and max-RSSI baselines over a range of AV counts.
//!
//! ```text
//! cargo run --release --example compare_schemes -- 50
//! ```

use v2i_edge::experiment::{simulate, summary_table, ExperimentSpec, SchemeSelection};
use v2i_edge::ScenarioConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(30);
    let spec = ExperimentSpec {
        scheme: SchemeSelection::All,
        av_counts: vec![10, 20, 30, 40],
        runs_per_point: runs,
        ..ExperimentSpec::new(ScenarioConfig::default(), "unused")
    };
    let results = simulate(&spec)?;
    print!("{}", summary_table(&results));

    println!("\nmean latency components at M = 40 (ms):");
    for p in results.iter().filter(|p| p.n_av == 40) {
        let s = p.summary();
        let mean = |k: &str| s.metric(k).map_or(f64::NAN, |m| m.mean);
        println!(
            "  {:<9} downlink {:>8.2}   compute {:>6.2}   E2E {:>8.2}   DL rate {:>6.2} Mb/s",
            p.scheme.name(),
            mean("dl_ms"),
            mean("compute_ms"),
            mean("e2e_ms"),
            mean("dl_rate_bps") / 1e6
        );
    }
    Ok(())
}
