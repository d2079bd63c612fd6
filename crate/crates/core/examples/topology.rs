//! Generates a network instance from a JSON config and prints its layout.
//!
//! ```text
//! cargo run --example topology
//! cargo run --example topology -- '{"n_sbs": 4, "n_av": 8, "seed": 7}'
//! ```

use v2i_edge::{Scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let json = std::env::args().nth(1).unwrap_or_else(|| r#"{"n_sbs": 5, "n_av": 12}"#.to_string());
    let config = ScenarioConfig::from_json_str(&json)?;
    let scn = Scenario::generate(config)?;
    let topo = &scn.topology;

    println!("area {0} m x {0} m, seed {1}", scn.config.area_side, scn.config.seed);
    println!("\nSBS  position            machine");
    for (n, &(x, y)) in topo.sbs_positions.iter().enumerate() {
        let machine = &scn.config.machine_catalog[topo.sbs_machine[n]];
        println!("{n:>3}  ({x:>6.1}, {y:>6.1})    {}", machine.id);
    }

    println!("\nAV   position            task  budget   nearest SBS   path gain (dB)");
    for (m, &(x, y)) in topo.av_positions.iter().enumerate() {
        let task = scn.task_of(m);
        let nearest = (0..scn.n_sbs())
            .min_by(|&a, &b| topo.distance(m, a).total_cmp(&topo.distance(m, b)))
            .expect("at least one SBS");
        println!(
            "{m:>3}  ({x:>6.1}, {y:>6.1})    {:>4}  {:>4} ms  {nearest:>5} @ {:>5.1} m  {:>8.1}",
            task.id,
            task.latency_budget_ms,
            topo.distance(m, nearest),
            10.0 * topo.path_gain(m, nearest).log10()
        );
    }

    let n = topo.fading_dl.len() as f64;
    let mean = topo.fading_dl.iter().sum::<f64>() / n;
    println!("\n{} downlink fading gains, sample mean {mean:.3} (Rayleigh power, unit mean)", topo.fading_dl.len());
    Ok(())
}
