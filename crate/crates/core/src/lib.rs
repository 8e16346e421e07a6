//! Multi-hop upstream pressure for traffic signal control.
//!
//! * [`network`]: link graphs, the supersink closure, and the transition matrix.
//! * [`pressure`]: upstream potentials and multi-hop pressure.
//! * [`sim`]: a deterministic store-and-forward signal simulator.
//! * [`control`]: Webster, MaxPressure, and greedy split controllers.
//! * [`rl`]: per-intersection PPO agents that set cycle splits.
//! * [`harness`]: scenario catalog, replication runner, and reports.

pub mod exec;
pub mod network;
pub mod pressure;
pub mod control;
pub mod sim;
pub mod rl;
pub mod harness;
