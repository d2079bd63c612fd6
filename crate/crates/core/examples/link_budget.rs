//! Downlink SINR, rate and TTI-quantized latency of one AV as its serving
//! SBS grants it more subchannels, under both interference models.

use v2i_edge::radio::{
    downlink_ttis, link_budget, transmission_latency_ms, uplink_ttis, BandwidthAllocation, DlInterference,
};
use v2i_edge::{Scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scn = Scenario::generate(ScenarioConfig { n_sbs: 4, n_av: 6, n_subchannels: 16, seed: 11, ..Default::default() })?;
    let (av, sbs) = (0, 0);
    let task = scn.task_of(av).clone();
    println!(
        "AV {av} -> SBS {sbs}: distance {:.1} m, task {} ({} ms budget)",
        scn.topology.distance(av, sbs),
        task.id,
        task.latency_budget_ms
    );

    // Every other AV uplinks elsewhere and interferes on the shared uplink subchannel.
    let others: Vec<usize> = (1..scn.n_av()).collect();
    println!("uplink: {} TTIs", uplink_ttis(&scn, av, sbs, &others)?);

    println!("\n  c   rate worst (Mb/s)   rate active (Mb/s)   DL TTIs (active)   tx latency (ms)");
    for c in [1, 2, 4, 8, 16] {
        // SBS 0 grants `c` subchannels to the AV; SBS 1 keeps the first four busy.
        let mut grants = vec![Vec::new(); scn.n_sbs()];
        grants[sbs].push((av, c));
        grants[1].push((1, 4));
        let alloc = BandwidthAllocation::from_grants(scn.n_av(), scn.config.n_subchannels, &grants)?;

        let worst = link_budget(&scn, av, sbs, &alloc, DlInterference::WorstCase, &others);
        let active = link_budget(&scn, av, sbs, &alloc, DlInterference::Active(&alloc), &others);
        let ttis = downlink_ttis(&scn, av, sbs, &alloc, &task, DlInterference::Active(&alloc))?;
        let tx = transmission_latency_ms(&scn, av, sbs, &alloc, DlInterference::Active(&alloc), &others)?;
        println!(
            "{c:>3}   {:>17.3}   {:>18.3}   {ttis:>16}   {tx:>15.3}",
            worst.dl_rate_bps / 1e6,
            active.dl_rate_bps / 1e6
        );
    }
    Ok(())
}
