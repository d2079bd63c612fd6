//! Checks of the negotiation's guarantees: individual rationality, absence
//! of blocking coalitions (core allocation) and the offer-trace invariants.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{Matching, MarketModel, OfferEvent, OfferOutcome};
use crate::error::{Error, Result};

/// Utilities closer than this (relative) are treated as equal.
const TIE_EPS: f64 = 1e-9;

fn strictly_greater(a: f64, b: f64) -> bool {
    if b == f64::NEG_INFINITY {
        return a > b;
    }
    a > b + TIE_EPS * b.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum IrViolation {
    /// A matched AV without subchannels.
    NoBandwidth { av: usize, sbs: usize },
    /// A serving SBS whose utility is not in `(0, inf)`.
    NonPositiveUtility { sbs: usize, utility: f64 },
}

/// Individual rationality: every matched AV holds at least one subchannel
/// and every SBS with a nonempty set has finite positive utility. SBSs
/// serving nobody are rational vacuously.
pub fn individual_rationality(model: &MarketModel, matching: &Matching) -> Vec<IrViolation> {
    let mut out = Vec::new();
    for (av, a) in matching.assignment.iter().enumerate() {
        if let Some(sbs) = *a {
            if matching.bandwidth.count(av, sbs) == 0 {
                out.push(IrViolation::NoBandwidth { av, sbs });
            }
        }
    }
    for sbs in 0..model.n_sbs() {
        let grants = matching.grants(sbs);
        if grants.is_empty() {
            continue;
        }
        let u = model.sbs_utility(sbs, &grants).unwrap_or(f64::NEG_INFINITY);
        if !(u > 0.0 && u.is_finite()) {
            out.push(IrViolation::NonPositiveUtility { sbs, utility: u });
        }
    }
    out
}

pub fn is_individually_rational(model: &MarketModel, matching: &Matching) -> bool {
    individual_rationality(model, matching).is_empty()
}

/// An SBS and a set of AVs that all gain by serving each other under `counts`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockingCoalition {
    pub sbs: usize,
    /// `(av, count)` in the service order the SBS would use.
    pub members: Vec<(usize, usize)>,
    pub sbs_utility_before: f64,
    pub sbs_utility_after: f64,
}

/// Default cap on the number of `(sbs, subset, bandwidth vector)` triples.
pub const DEFAULT_SEARCH_LIMIT: u128 = 50_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of deviations `find_blocking_pair` would enumerate.
pub fn search_size(n_sbs: usize, n_av: usize, k: usize, max_subset: usize) -> u128 {
    // vectors of s positive integers with sum <= k: C(k, s)
    let per_sbs: u128 = (1..=max_subset.min(n_av)).map(|s| binomial(n_av, s) * binomial(k, s)).sum();
    per_sbs * n_sbs as u128
}

/// Current utility of every AV under `matching` (`-inf` if unmatched).
pub fn current_av_utilities(model: &MarketModel, matching: &Matching) -> Vec<f64> {
    (0..model.n_av())
        .map(|av| match matching.assignment[av] {
            None => f64::NEG_INFINITY,
            Some(sbs) => {
                let list = &matching.accepted[sbs];
                let pos = list.iter().position(|&a| a == av).unwrap_or(list.len());
                model.av_utility(av, sbs, matching.bandwidth.count(av, sbs), &list[..pos])
            }
        })
        .collect()
}

/// Exhaustive search for a coalition `(n, M', w')` with `|M'| <= max_subset`
/// and per-AV counts in `1..=K` summing to at most `K`, such that every
/// member strictly prefers `n` with its new count and `n` strictly prefers
/// the coalition to its current set. Returns the first one found.
pub fn find_blocking_pair(model: &MarketModel, matching: &Matching, max_subset: usize) -> Result<Option<BlockingCoalition>> {
    find_blocking_pair_limited(model, matching, max_subset, DEFAULT_SEARCH_LIMIT)
}

pub fn find_blocking_pair_limited(
    model: &MarketModel,
    matching: &Matching,
    max_subset: usize,
    limit: u128,
) -> Result<Option<BlockingCoalition>> {
    let (n_sbs, n_av, k) = (model.n_sbs(), model.n_av(), model.budget());
    let size = search_size(n_sbs, n_av, k, max_subset);
    if size > limit {
        return Err(Error::TooLarge(size, limit));
    }
    let current = current_av_utilities(model, matching);

    for sbs in 0..n_sbs {
        let before = model.sbs_utility(sbs, &matching.grants(sbs))?;
        for s in 1..=max_subset.min(n_av) {
            let mut subset: Vec<usize> = (0..s).collect();
            loop {
                if let Some(found) = search_counts(model, sbs, &subset, before, &current) {
                    return Ok(Some(found));
                }
                if !next_combination(&mut subset, n_av) {
                    break;
                }
            }
        }
    }
    Ok(None)
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let s = c.len();
    let mut i = s;
    while i > 0 {
        i -= 1;
        if c[i] < n - s + i {
            c[i] += 1;
            for j in i + 1..s {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn search_counts(
    model: &MarketModel,
    sbs: usize,
    subset: &[usize],
    before: f64,
    current: &[f64],
) -> Option<BlockingCoalition> {
    let k = model.budget();
    let s = subset.len();
    let mut counts = vec![1; s];
    loop {
        if counts.iter().sum::<usize>() <= k {
            let set: Vec<(usize, usize)> = subset.iter().copied().zip(counts.iter().copied()).collect();
            let order = model.service_order(sbs, &set);
            let all_gain = order.iter().enumerate().all(|(pos, &(av, c))| {
                let ahead: Vec<usize> = order[..pos].iter().map(|e| e.0).collect();
                strictly_greater(model.av_utility(av, sbs, c, &ahead), current[av])
            });
            if all_gain {
                if let Ok(after) = model.sbs_utility(sbs, &order) {
                    if strictly_greater(after, before) {
                        return Some(BlockingCoalition {
                            sbs,
                            members: order,
                            sbs_utility_before: before,
                            sbs_utility_after: after,
                        });
                    }
                }
            }
        }
        // odometer over 1..=k
        let mut i = 0;
        loop {
            if i == s {
                return None;
            }
            counts[i] += 1;
            if counts[i] <= k && counts.iter().sum::<usize>() <= k {
                break;
            }
            counts[i] = 1;
            i += 1;
        }
    }
}

/// Outcome of one trace invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceCheck {
    pub name: &'static str,
    pub violations: Vec<String>,
}

impl TraceCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn by_round(log: &[OfferEvent]) -> BTreeMap<usize, Vec<&OfferEvent>> {
    let mut rounds: BTreeMap<usize, Vec<&OfferEvent>> = BTreeMap::new();
    for ev in log {
        rounds.entry(ev.round).or_default().push(ev);
    }
    rounds
}

/// Every offer that was not rejected in round `j` is made again in `j + 1`.
pub fn check_offer_persistence(log: &[OfferEvent], rounds_used: usize) -> TraceCheck {
    let rounds = by_round(log);
    let mut violations = Vec::new();
    for (&r, events) in &rounds {
        if r >= rounds_used {
            continue;
        }
        let next: BTreeSet<(usize, usize, usize)> = rounds
            .get(&(r + 1))
            .map(|evs| evs.iter().map(|e| (e.sbs, e.av, e.count)).collect())
            .unwrap_or_default();
        for e in events.iter().filter(|e| e.outcome == OfferOutcome::Accepted) {
            if !next.contains(&(e.sbs, e.av, e.count)) {
                violations.push(format!(
                    "round {r}: offer SBS {} -> AV {} ({} subchannels) held but not repeated",
                    e.sbs, e.av, e.count
                ));
            }
        }
    }
    TraceCheck { name: "offer persistence", violations }
}

/// Offered counts never decrease for any (SBS, AV) pair, and grow by one
/// subchannel right after a rejection.
pub fn check_monotone_escalation(log: &[OfferEvent]) -> TraceCheck {
    let mut last: BTreeMap<(usize, usize), (usize, usize, OfferOutcome)> = BTreeMap::new();
    let mut violations = Vec::new();
    for e in log {
        if let Some(&(round, count, outcome)) = last.get(&(e.sbs, e.av)) {
            if e.count < count {
                violations.push(format!(
                    "SBS {} -> AV {}: count fell from {count} (round {round}) to {} (round {})",
                    e.sbs, e.av, e.count, e.round
                ));
            }
            if outcome == OfferOutcome::Rejected && e.count <= count {
                violations.push(format!(
                    "SBS {} -> AV {}: rejected in round {round} at {count} but re-offered at {} in round {}",
                    e.sbs, e.av, e.count, e.round
                ));
            }
        }
        last.insert((e.sbs, e.av), (e.round, e.count, e.outcome));
    }
    TraceCheck { name: "monotone escalation", violations }
}

/// From the first round an AV receives an offer until convergence, it holds
/// at least one offer every round. AVs never offered anything are exempt.
pub fn check_at_least_one_offer(log: &[OfferEvent], rounds_used: usize, n_av: usize) -> TraceCheck {
    let rounds = by_round(log);
    let mut first: Vec<Option<usize>> = vec![None; n_av];
    for e in log {
        let f = &mut first[e.av];
        *f = Some(f.map_or(e.round, |r| r.min(e.round)));
    }
    let mut violations = Vec::new();
    for r in 1..=rounds_used {
        let offered: BTreeSet<usize> = rounds.get(&r).map(|evs| evs.iter().map(|e| e.av).collect()).unwrap_or_default();
        for (av, f) in first.iter().enumerate() {
            if matches!(f, Some(f0) if *f0 <= r) && !offered.contains(&av) {
                violations.push(format!("round {r}: AV {av} holds no offer"));
            }
        }
    }
    TraceCheck { name: "at least one offer", violations }
}

/// In each round every AV accepts exactly one of its offers, one with the
/// highest utility.
pub fn check_argmax_stability(log: &[OfferEvent]) -> TraceCheck {
    let mut groups: BTreeMap<(usize, usize), Vec<&OfferEvent>> = BTreeMap::new();
    for e in log {
        groups.entry((e.round, e.av)).or_default().push(e);
    }
    let mut violations = Vec::new();
    for ((round, av), evs) in groups {
        let accepted: Vec<_> = evs.iter().filter(|e| e.outcome == OfferOutcome::Accepted).collect();
        if accepted.len() != 1 {
            violations.push(format!("round {round}: AV {av} accepted {} offers", accepted.len()));
            continue;
        }
        let best = evs.iter().map(|e| e.utility).fold(f64::NEG_INFINITY, f64::max);
        if strictly_greater(best, accepted[0].utility) {
            violations.push(format!("round {round}: AV {av} accepted a dominated offer"));
        }
    }
    TraceCheck { name: "argmax stability", violations }
}

/// Runs all trace invariants on a negotiated matching.
pub fn check_trace(matching: &Matching) -> Vec<TraceCheck> {
    let log = &matching.offer_log;
    vec![
        check_offer_persistence(log, matching.rounds_used),
        check_monotone_escalation(log),
        check_at_least_one_offer(log, matching.rounds_used, matching.n_av()),
        check_argmax_stability(log),
    ]
}
