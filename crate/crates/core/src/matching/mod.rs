//! Joint AV-SBS association and bandwidth negotiation.
//!
//! SBSs act as firms and AVs as workers; the number of downlink subchannels
//! an SBS grants an AV plays the role of the salary. Each round every SBS
//! picks candidates greedily, offers to them (re-extending every offer that
//! was not rejected), each AV keeps its best offer and rejects the rest, and
//! every rejected SBS raises its offer to that AV by one subchannel. The
//! loop ends in the first round without rejections.

mod utility;
pub mod verify;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::BandwidthAllocation;
use crate::scenario::Scenario;

pub use utility::MarketModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OfferOutcome {
    Accepted,
    Rejected,
}

/// One offer made in one round, with the AV's response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferEvent {
    pub round: usize,
    pub sbs: usize,
    pub av: usize,
    /// Offered subchannels.
    pub count: usize,
    /// Re-extension of an offer held since the previous round.
    pub repeated: bool,
    /// The AV's utility for this offer (ms, negated latency).
    pub utility: f64,
    pub outcome: OfferOutcome,
}

/// An AV-SBS matching with its bandwidth, as produced by the negotiation or
/// by a baseline rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `assignment[av]`: serving SBS, `None` if unmatched.
    pub assignment: Vec<Option<usize>>,
    /// `accepted[sbs]`: served AVs in service order.
    pub accepted: Vec<Vec<usize>>,
    pub bandwidth: BandwidthAllocation,
    pub rounds_used: usize,
    pub offer_log: Vec<OfferEvent>,
}

impl Matching {
    /// Builds a matching from per-SBS `(av, count)` lists in service order.
    pub fn from_grants(n_av: usize, k: usize, grants: &[Vec<(usize, usize)>]) -> Result<Self> {
        let bandwidth = BandwidthAllocation::from_grants(n_av, k, grants)?;
        let mut assignment = vec![None; n_av];
        for (sbs, list) in grants.iter().enumerate() {
            for &(av, _) in list {
                if assignment[av].replace(sbs).is_some() {
                    return Err(Error::Precondition(format!("AV {av} assigned twice")));
                }
            }
        }
        Ok(Matching {
            assignment,
            accepted: grants.iter().map(|l| l.iter().map(|e| e.0).collect()).collect(),
            bandwidth,
            rounds_used: 0,
            offer_log: Vec::new(),
        })
    }

    pub fn n_av(&self) -> usize {
        self.assignment.len()
    }

    pub fn count(&self, av: usize) -> usize {
        self.assignment[av].map_or(0, |s| self.bandwidth.count(av, s))
    }

    /// `(av, count)` pairs served by `sbs`, in service order.
    pub fn grants(&self, sbs: usize) -> Vec<(usize, usize)> {
        self.accepted[sbs].iter().map(|&a| (a, self.bandwidth.count(a, sbs))).collect()
    }

    pub fn matched(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }

    /// `f(m) = n` iff `m` is in `f(n)`, and the allocation is feasible.
    pub fn validate(&self) -> Result<()> {
        for (sbs, list) in self.accepted.iter().enumerate() {
            for &av in list {
                if self.assignment[av] != Some(sbs) {
                    return Err(Error::Precondition(format!("AV {av} listed at SBS {sbs} but assigned elsewhere")));
                }
            }
        }
        for (av, a) in self.assignment.iter().enumerate() {
            if let Some(sbs) = *a {
                if !self.accepted[sbs].contains(&av) {
                    return Err(Error::Precondition(format!("AV {av} assigned to SBS {sbs} but not listed")));
                }
            }
        }
        for (sbs, row) in self.bandwidth.counts.iter().enumerate() {
            for (av, &c) in row.iter().enumerate() {
                if c > 0 && self.assignment[av] != Some(sbs) {
                    return Err(Error::Precondition(format!("SBS {sbs} grants bandwidth to unassigned AV {av}")));
                }
            }
        }
        self.bandwidth.validate()
    }

    /// Writes the offer log as JSON lines.
    pub fn write_trace<W: Write>(&self, mut out: W) -> Result<()> {
        for ev in &self.offer_log {
            serde_json::to_writer(&mut out, ev)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Reads a JSON-lines offer trace.
pub fn read_trace(text: &str) -> Result<Vec<OfferEvent>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchingOptions {
    /// Re-extend offers that were not rejected. Turning this off breaks the
    /// algorithm; it exists to exercise the trace checks.
    pub repeat_unrejected: bool,
    /// Overrides the default cap of `10 * M * K` rounds.
    pub round_cap: Option<usize>,
}

impl Default for MatchingOptions {
    fn default() -> Self {
        MatchingOptions { repeat_unrejected: true, round_cap: None }
    }
}

pub fn run_matching(scn: &Scenario) -> Result<Matching> {
    let model = MarketModel::new(scn)?;
    run_matching_with(&model, MatchingOptions::default())
}

/// Negotiation state between rounds.
#[derive(Debug, Clone)]
pub struct OfferState {
    /// `counts[sbs][av]`: current offer size, starting at one subchannel.
    pub counts: Vec<Vec<usize>>,
    /// SBS gave up on the AV after its offer would exceed the budget.
    pub withdrawn: Vec<Vec<bool>>,
    /// AVs holding this SBS's offer after the last round, in service order.
    pub held: Vec<Vec<usize>>,
}

impl OfferState {
    pub fn new(n_sbs: usize, n_av: usize) -> Self {
        OfferState {
            counts: vec![vec![1; n_av]; n_sbs],
            withdrawn: vec![vec![false; n_av]; n_sbs],
            held: vec![Vec::new(); n_sbs],
        }
    }
}

/// Offer selection: the SBS keeps the AVs holding its offer and then walks the
/// remaining AVs by descending ranking utility. A candidate is added when it
/// fits in the subchannel budget at its current count, raises the SBS
/// utility, and leaves every member's term (ranking utility minus expected
/// completion time) positive; otherwise it is skipped. The returned set is in
/// service order (see [`MarketModel::service_order`]).
///
/// Removing members never delays the others, so any subset of the returned
/// set that ends up accepting still has positive utility.
pub fn select_candidates(model: &MarketModel, sbs: usize, state: &OfferState, keep_held: bool) -> Vec<usize> {
    let k = model.budget();
    let counts = &state.counts[sbs];
    let held: Vec<usize> = if keep_held { state.held[sbs].clone() } else { Vec::new() };
    let mut queue: Vec<(usize, usize)> = model.service_order(sbs, &held.iter().map(|&a| (a, counts[a])).collect::<Vec<_>>());
    let mut used: usize = queue.iter().map(|e| e.1).sum();
    let mut utility = model.sbs_utility(sbs, &queue).unwrap_or(f64::NEG_INFINITY);

    let mut ranked: Vec<(usize, f64)> = (0..model.n_av())
        .filter(|&a| !state.withdrawn[sbs][a] && !held.contains(&a))
        .map(|a| (a, model.ranking_utility(sbs, a, counts[a])))
        .filter(|(_, u)| u.is_finite())
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    for (av, _) in ranked {
        if used + counts[av] > k {
            continue;
        }
        let entry = (av, counts[av]);
        let pos = queue.partition_point(|&e| model.queue_cmp(sbs, e, entry).is_lt());
        let mut trial = queue.clone();
        trial.insert(pos, entry);
        let terms = model.queue_terms(sbs, &trial);
        let total: f64 = terms.iter().sum();
        if terms.iter().all(|&t| t > 0.0) && total > utility {
            queue = trial;
            used += entry.1;
            utility = total;
        }
    }
    queue.into_iter().map(|e| e.0).collect()
}

pub fn run_matching_with(model: &MarketModel, opts: MatchingOptions) -> Result<Matching> {
    let (n_sbs, n_av, k) = (model.n_sbs(), model.n_av(), model.budget());
    let cap = opts.round_cap.unwrap_or(10 * n_av.max(1) * k);
    let mut state = OfferState::new(n_sbs, n_av);
    let mut log = Vec::new();
    let mut round = 0;

    loop {
        round += 1;
        if round > cap {
            return Err(Error::RoundCap(cap));
        }

        // Steps 2 and 3
        let offers: Vec<Vec<usize>> = (0..n_sbs)
            .map(|s| select_candidates(model, s, &state, opts.repeat_unrejected))
            .collect();

        // AV utilities with the SBS's offer list as the queue preview.
        let mut received: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_av];
        for (sbs, list) in offers.iter().enumerate() {
            for (pos, &av) in list.iter().enumerate() {
                let u = model.av_utility(av, sbs, state.counts[sbs][av], &list[..pos]);
                received[av].push((sbs, u));
            }
        }
        let mut choice: Vec<Option<usize>> = vec![None; n_av];
        for (av, opts_av) in received.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for &(sbs, u) in opts_av {
                if u.is_finite() && best.is_none_or(|(_, bu)| u > bu) {
                    best = Some((sbs, u));
                }
            }
            choice[av] = best.map(|b| b.0);
        }

        let mut rejections = 0;
        let mut held = vec![Vec::new(); n_sbs];
        for (sbs, list) in offers.iter().enumerate() {
            for (pos, &av) in list.iter().enumerate() {
                let count = state.counts[sbs][av];
                let accepted = choice[av] == Some(sbs);
                log.push(OfferEvent {
                    round,
                    sbs,
                    av,
                    count,
                    repeated: state.held[sbs].contains(&av),
                    utility: model.av_utility(av, sbs, count, &list[..pos]),
                    outcome: if accepted { OfferOutcome::Accepted } else { OfferOutcome::Rejected },
                });
                if accepted {
                    held[sbs].push(av);
                } else {
                    rejections += 1;
                    // a rejected AV is retried with one more subchannel, or withdrawn past the budget
                    if count + 1 > k {
                        state.withdrawn[sbs][av] = true;
                    } else {
                        state.counts[sbs][av] = count + 1;
                    }
                }
            }
        }
        state.held = held;
        if rejections == 0 {
            break;
        }
    }

    let grants: Vec<Vec<(usize, usize)>> = state
        .held
        .iter()
        .enumerate()
        .map(|(s, list)| list.iter().map(|&a| (a, state.counts[s][a])).collect())
        .collect();
    let mut matching = Matching::from_grants(n_av, k, &grants)?;
    matching.rounds_used = round;
    matching.offer_log = log;
    Ok(matching)
}
