//! Simulator for reliable fault-tolerant routing in wavelength-routed optical
//! WDM mesh networks.
//!
//! Primaries are routed over a threshold cost of each link's free-channel
//! fraction; backups are link-disjoint candidates ranked by the NACK fraction
//! of periodic probes; link failures restore connections onto the best live
//! backup or drop them.

pub mod config;
pub mod metrics;
pub mod probing;
pub mod routing;
pub mod runner;
pub mod sim;
pub mod topology;

pub use metrics::MetricsReport;
pub use sim::{run, RouterKind, SimConfig, Simulation};
pub use topology::Topology;
