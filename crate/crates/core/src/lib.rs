//! Remote output tracking over a finite-capacity channel.
//!
//! A remote exosystem `ẇ = s(w)` generates the reference `y_r(w)`. An encoder
//! co-located with it sends `r·⌈log2 N⌉` bits every `T` seconds; a decoder at
//! the plant reconstructs `w_d ≈ w`, and an internal-model regulator drives
//! the plant output `y` to `y_r(w_d)`.
//!
//! Modules, bottom up:
//!
//! - [`sim`]: fixed-step RK4 flow with time-scheduled jumps.
//! - [`codec`]: zooming quantizer, encoder/decoder pair, channel frames,
//!   expansion estimate and rate condition.
//! - [`regulator`]: gain vector, compactly supported `φ_c`, internal model.
//! - [`closedloop`]: the composite hybrid system and its diagnostics.
//! - [`config`], [`sweep`], [`acceptance`]: scenario files, parameter sweeps
//!   and the acceptance report.

pub mod acceptance;
pub mod closedloop;
pub mod codec;
pub mod config;
pub mod error;
pub mod region;
pub mod regulator;
pub mod sim;
pub mod sweep;
pub mod vdp;

pub use closedloop::{run_scenario, RunMetrics, RunResult, Scenario};
pub use config::ScenarioConfig;
pub use error::{Error, Result};
