//! Runs the offer/reject negotiation on a small instance and replays it
//! round by round. Pass `--jsonl` to print the raw JSON-lines trace instead.

use std::io::stdout;

use v2i_edge::matching::{MarketModel, OfferOutcome};
use v2i_edge::{run_matching, Scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scn = Scenario::generate(ScenarioConfig { n_sbs: 3, n_av: 6, n_subchannels: 8, seed: 4, ..Default::default() })?;
    let matching = run_matching(&scn)?;

    if std::env::args().any(|a| a == "--jsonl") {
        matching.write_trace(stdout().lock())?;
        return Ok(());
    }

    for round in 1..=matching.rounds_used {
        let events: Vec<_> = matching.offer_log.iter().filter(|e| e.round == round).collect();
        let rejected = events.iter().filter(|e| e.outcome == OfferOutcome::Rejected).count();
        println!("round {round}: {} offers, {rejected} rejected", events.len());
        for e in events {
            println!(
                "  SBS {} -> AV {} with {} subchannel(s){}: {:?} (AV utility {:.2})",
                e.sbs,
                e.av,
                e.count,
                if e.repeated { " [repeat]" } else { "" },
                e.outcome,
                e.utility
            );
        }
    }

    let model = MarketModel::new(&scn)?;
    println!("\nfinal matching after {} rounds:", matching.rounds_used);
    for sbs in 0..scn.n_sbs() {
        let grants = matching.grants(sbs);
        println!("  SBS {sbs}: {grants:?}, utility {:.2}", model.sbs_utility(sbs, &grants)?);
    }
    let unmatched: Vec<usize> = (0..scn.n_av()).filter(|&a| matching.assignment[a].is_none()).collect();
    println!("  unmatched: {unmatched:?}");
    Ok(())
}
