//! Simulation library for ultra-reliable low-latency vehicle-to-infrastructure
//! networks whose small base stations (SBSs) run edge-computing machines.
//!
//! An autonomous vehicle (AV) requests one task; its end-to-end latency is
//! the TTI-quantized uplink and downlink transmission time plus the
//! stochastic completion time of the task in the serving SBS's queue. The
//! [`matching`] module associates AVs with SBSs and negotiates bandwidth with
//! a labor-market style offer/reject process; [`baselines`] provides
//! max-SINR and max-RSSI association for comparison, and [`metrics`] turns a
//! matching into realized latencies and reliability.

pub mod baselines;
pub mod compute;
pub mod error;
pub mod experiment;
pub mod matching;
pub mod metrics;
pub mod radio;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use matching::{run_matching, Matching};
pub use scenario::{generate_topology, Scenario, ScenarioConfig, Topology};
