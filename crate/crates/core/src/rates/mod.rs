//! Closed-form SINR moments, achievable rates and energy efficiency.

mod fbl;
mod moments;
mod sinr;

pub use fbl::{dispersion, dispersion_scale, fbl_rate, q_function, q_inv, shannon_rate};
pub(crate) use fbl::fbl_sinr_threshold;
pub use moments::{embb_moments, mmtc_moments, DeviceMoments, MomentSet, UserMoments};
pub use sinr::{embb_sinr, energy_efficiency, mmtc_interference, mmtc_sinr};

use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioConfig;

/// Transmit powers in watts: `p` for users, `q` for devices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerVector {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl PowerVector {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Self {
        Self { p, q }
    }

    pub fn uniform(num_users: usize, user_power: f64, num_devices: usize, device_power: f64) -> Self {
        Self {
            p: vec![user_power; num_users],
            q: vec![device_power; num_devices],
        }
    }

    /// theta = (p_1, .., p_Ku, q_1, .., q_Kd).
    pub fn stacked(&self) -> Vec<f64> {
        self.p.iter().chain(&self.q).copied().collect()
    }

    pub fn from_stacked(theta: &[f64], num_users: usize) -> Self {
        Self {
            p: theta[..num_users].to_vec(),
            q: theta[num_users..].to_vec(),
        }
    }

    pub fn norm_squared(&self) -> f64 {
        self.p.iter().chain(&self.q).map(|v| v * v).sum()
    }
}

/// Parameters of the device energy-efficiency objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EEParams {
    /// psi = B tau_u / tau_c in Hz.
    pub psi: f64,
    /// Spreading factor N; the device pre-log is psi / N.
    pub spreading: usize,
    /// Finite-blocklength scale v_d per device.
    pub dispersion_scale: Vec<f64>,
    /// Amplifier inefficiency mu_d per device.
    pub amp_inefficiency: Vec<f64>,
    /// Static power Theta_d per device, watts.
    pub static_power: Vec<f64>,
}

impl EEParams {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        let kd = config.num_devices;
        Self {
            psi: config.psi(),
            spreading: config.num_prbs,
            dispersion_scale: vec![dispersion_scale(config.blocklength, config.target_per); kd],
            amp_inefficiency: vec![config.amplifier_inefficiency; kd],
            static_power: vec![config.static_power_w; kd],
        }
    }

    /// psi / N.
    pub fn prelog(&self) -> f64 {
        self.psi / self.spreading as f64
    }

    /// mu_d q_d + Theta_d.
    pub fn consumed_power(&self, d: usize, q: f64) -> f64 {
        self.amp_inefficiency[d] * q + self.static_power[d]
    }
}
