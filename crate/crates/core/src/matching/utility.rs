//! Utilities of SBSs and AVs while negotiating.
//!
//! All latencies are in milliseconds and evaluated with the matching-phase
//! link model ([`MatchingLinks`]). Expected completion times use the closed
//! form (sum of mean execution times of the tasks ahead plus the task's own),
//! which equals the mean of the convolved completion pmf.

use crate::compute::{ExecutionTable, MachineQueue};
use crate::error::{Error, Result};
use crate::radio::MatchingLinks;
use crate::scenario::Scenario;

/// Precomputed link and execution data for one instance.
#[derive(Debug, Clone)]
pub struct MarketModel<'a> {
    pub scenario: &'a Scenario,
    pub links: MatchingLinks,
    pub exec: ExecutionTable,
    /// `alpha_unit_scale * alpha / w`: salary term of a single subchannel.
    salary_unit: f64,
}

impl<'a> MarketModel<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let c = &scenario.config;
        Ok(MarketModel {
            scenario,
            links: MatchingLinks::new(scenario),
            exec: ExecutionTable::new(c)?,
            salary_unit: c.alpha_unit_scale * c.alpha / c.subchannel_bw,
        })
    }

    pub fn n_av(&self) -> usize {
        self.scenario.n_av()
    }

    pub fn n_sbs(&self) -> usize {
        self.scenario.n_sbs()
    }

    pub fn budget(&self) -> usize {
        self.scenario.config.n_subchannels
    }

    pub fn machine(&self, sbs: usize) -> usize {
        self.scenario.topology.sbs_machine[sbs]
    }

    pub fn task(&self, av: usize) -> usize {
        self.scenario.topology.av_task[av]
    }

    /// Mean execution time of `av`'s task on `sbs`'s machine (ms).
    pub fn exec_mean_ms(&self, av: usize, sbs: usize) -> f64 {
        self.exec.mean_steps(self.machine(sbs), self.task(av)) * self.exec.step_ms()
    }

    /// Transmission latency (ms) of `av` at `sbs` with `count` subchannels.
    pub fn tx_latency_ms(&self, av: usize, sbs: usize, count: usize) -> Option<f64> {
        self.links.tx_latency_ms(av, sbs, count)
    }

    /// Per-AV ranking utility `alpha / w_mn - tau_t` used to sort candidates;
    /// `-inf` for an unservable link.
    pub fn ranking_utility(&self, sbs: usize, av: usize, count: usize) -> f64 {
        match self.tx_latency_ms(av, sbs, count) {
            Some(tx) if count > 0 => self.salary_unit / count as f64 - tx,
            _ => f64::NEG_INFINITY,
        }
    }

    /// SBS utility of serving `queue` (`(av, count)` in service order):
    /// the ranking utilities minus the summed expected completion times.
    pub fn sbs_utility(&self, sbs: usize, queue: &[(usize, usize)]) -> Result<f64> {
        let mut total = 0.0;
        let mut clock = 0.0;
        for &(av, count) in queue {
            if count == 0 {
                return Err(Error::Precondition(format!("AV {av} has no bandwidth at SBS {sbs}")));
            }
            clock += self.exec_mean_ms(av, sbs);
            total += self.ranking_utility(sbs, av, count) - clock;
        }
        Ok(total)
    }

    /// Per-member terms of [`MarketModel::sbs_utility`]: ranking utility minus
    /// the member's expected completion time (`-inf` for zero bandwidth).
    pub fn queue_terms(&self, sbs: usize, queue: &[(usize, usize)]) -> Vec<f64> {
        let mut clock = 0.0;
        queue
            .iter()
            .map(|&(av, count)| {
                clock += self.exec_mean_ms(av, sbs);
                self.ranking_utility(sbs, av, count) - clock
            })
            .collect()
    }

    /// Utility of `av` for an offer of `count` subchannels from `sbs`, when
    /// the AVs in `ahead` are served first: the negated expected E2E latency.
    pub fn av_utility(&self, av: usize, sbs: usize, count: usize, ahead: &[usize]) -> f64 {
        match self.tx_latency_ms(av, sbs, count) {
            Some(tx) if count > 0 => {
                let wait: f64 = ahead.iter().map(|&a| self.exec_mean_ms(a, sbs)).sum();
                -(tx + wait + self.exec_mean_ms(av, sbs))
            }
            _ => f64::NEG_INFINITY,
        }
    }

    /// Service queue of `avs` at `sbs`, for the convolution-based routines.
    pub fn machine_queue(&self, sbs: usize, avs: &[usize]) -> MachineQueue {
        MachineQueue {
            machine: self.machine(sbs),
            entries: avs.iter().map(|&a| (a, self.task(a))).collect(),
        }
    }

    /// Service order the SBS uses for `set` (`(av, count)` pairs): shortest
    /// expected execution first, which maximizes its utility for a fixed set;
    /// ties go to the higher ranking utility, then the lower AV index.
    pub fn service_order(&self, sbs: usize, set: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let mut order = set.to_vec();
        order.sort_by(|a, b| self.queue_cmp(sbs, *a, *b));
        order
    }

    /// Comparator behind [`MarketModel::service_order`].
    pub fn queue_cmp(&self, sbs: usize, a: (usize, usize), b: (usize, usize)) -> std::cmp::Ordering {
        self.exec_mean_ms(a.0, sbs)
            .total_cmp(&self.exec_mean_ms(b.0, sbs))
            .then_with(|| self.ranking_utility(sbs, b.0, b.1).total_cmp(&self.ranking_utility(sbs, a.0, a.1)))
            .then(a.0.cmp(&b.0))
    }
}
