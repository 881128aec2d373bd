//! Uplink coexistence of broadband users (eMBB+) and spread-spectrum
//! machine-type devices (mMTC+) in terminal-centric cell-free massive MIMO.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: configuration, random deployments, AP association, pilots.
//! - [`channel_stats`]: MMSE estimation statistics under uncorrelated fading.
//! - [`rates`]: closed-form SINR moments, Shannon / finite-blocklength rates, EE.
//! - [`mc_oracle`]: link-level Monte Carlo simulator used to check every closed form.
//! - [`problem`]: the max-min energy-efficiency problem and its constraint checks.
//! - [`optimizer`]: sequential fractional programming around generalized Dinkelbach.
//! - [`heuristics`]: UPC / FPC / G-FPC benchmark policies.
//! - [`harness`]: batch engine, CDFs, OMA comparison, validation reports, datasets.

pub mod channel_stats;
pub mod error;
pub mod harness;
pub mod heuristics;
pub mod mc_oracle;
pub mod optimizer;
pub mod problem;
pub mod rates;
pub mod rng;
pub mod scenario;

pub use channel_stats::{compute_stats, EstimationStats};
pub use error::{Error, Result};
pub use problem::{PowerControlProblem, Regime};
pub use rates::{MomentSet, PowerVector};
pub use scenario::{Deployment, ScenarioConfig};
