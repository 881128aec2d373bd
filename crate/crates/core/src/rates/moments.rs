use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel_stats::{compute_stats, EstimationStats};
use crate::scenario::{Deployment, ScenarioConfig};

/// Deterministic coefficients of the broadband-user SINR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMoments {
    pub delta: Vec<f64>,
    pub upsilon: Vec<f64>,
    /// K_u x K_u, (u, k) = interference of user k onto user u; diagonal is zero.
    pub kappa: DMatrix<f64>,
    /// K_u x K_d, (u, d) = interference of device d onto user u.
    pub varkappa: DMatrix<f64>,
    pub xi: Vec<f64>,
}

/// Deterministic coefficients of the despread device SINR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceMoments {
    pub lambda: Vec<f64>,
    pub nu: Vec<f64>,
    /// K_d x K_d, (d, k) = interference of device k onto device d; diagonal is zero.
    pub eps_dd: DMatrix<f64>,
    /// K_d x K_u, (d, u) = interference of user u onto device d.
    pub eps_du: DMatrix<f64>,
    pub chi: Vec<f64>,
}

/// All SINR coefficients of one deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub delta: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub kappa: DMatrix<f64>,
    pub varkappa: DMatrix<f64>,
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub nu: Vec<f64>,
    pub eps_dd: DMatrix<f64>,
    pub eps_du: DMatrix<f64>,
    pub chi: Vec<f64>,
}

impl MomentSet {
    pub fn from_halves(user: UserMoments, device: DeviceMoments) -> Self {
        Self {
            delta: user.delta,
            upsilon: user.upsilon,
            kappa: user.kappa,
            varkappa: user.varkappa,
            xi: user.xi,
            lambda: device.lambda,
            nu: device.nu,
            eps_dd: device.eps_dd,
            eps_du: device.eps_du,
            chi: device.chi,
        }
    }

    /// Closed-form moments of a deployment.
    pub fn closed_form(dep: &Deployment, config: &ScenarioConfig) -> Self {
        let stats = compute_stats(dep, config);
        Self::from_halves(embb_moments(&stats, dep, config), mmtc_moments(&stats, dep, config))
    }

    pub fn num_users(&self) -> usize {
        self.delta.len()
    }

    pub fn num_devices(&self) -> usize {
        self.lambda.len()
    }

    pub fn user_half(&self) -> UserMoments {
        UserMoments {
            delta: self.delta.clone(),
            upsilon: self.upsilon.clone(),
            kappa: self.kappa.clone(),
            varkappa: self.varkappa.clone(),
            xi: self.xi.clone(),
        }
    }

    pub fn device_half(&self) -> DeviceMoments {
        DeviceMoments {
            lambda: self.lambda.clone(),
            nu: self.nu.clone(),
            eps_dd: self.eps_dd.clone(),
            eps_du: self.eps_du.clone(),
            chi: self.chi.clone(),
        }
    }

    /// Drops the cross-service couplings (users never see devices and vice versa).
    pub fn without_cross_service(mut self) -> Self {
        self.varkappa.fill(0.0);
        self.eps_du.fill(0.0);
        self
    }
}

/// Broadband-user moments with MRC under uncorrelated fading.
///
/// With s = eta alpha / c the MMSE shrinkage, every trace collapses to
/// L alpha s-type scalars. Coherent contamination terms appear only for
/// terminals sharing the user's pilot.
pub fn embb_moments(stats: &EstimationStats, dep: &Deployment, config: &ScenarioConfig) -> UserMoments {
    let m_aps = dep.num_aps();
    let (ku, kd) = (dep.num_users(), dep.num_devices());
    let l = config.antennas_per_ap as f64;
    let a = |m: usize, u: usize| if dep.user_assoc[(m, u)] { 1.0 } else { 0.0 };
    let s = &stats.a_user;
    let eta = &stats.user_training;
    let zeta = &stats.device_training;

    let mut delta = vec![0.0; ku];
    let mut upsilon = vec![0.0; ku];
    let mut xi = vec![0.0; ku];
    for u in 0..ku {
        let (mut coh, mut var, mut noise) = (0.0, 0.0, 0.0);
        for m in 0..m_aps {
            let w = a(m, u) * l * dep.alpha[(m, u)] * s[(m, u)];
            coh += w;
            var += w * dep.alpha[(m, u)];
            noise += w;
        }
        delta[u] = coh * coh;
        upsilon[u] = var;
        xi[u] = stats.noise_var * noise;
    }

    let kappa = DMatrix::from_fn(ku, ku, |u, k| {
        if u == k {
            return 0.0;
        }
        let (mut incoh, mut coh) = (0.0, 0.0);
        for m in 0..m_aps {
            let w = a(m, u) * l * s[(m, u)] * dep.alpha[(m, k)];
            incoh += w * dep.alpha[(m, u)];
            coh += w;
        }
        incoh + eta[k] / eta[u] * dep.user_user_overlap(k, u) * coh * coh
    });

    let varkappa = DMatrix::from_fn(ku, kd, |u, d| {
        let (mut incoh, mut coh) = (0.0, 0.0);
        for m in 0..m_aps {
            let w = a(m, u) * l * s[(m, u)] * dep.beta[(m, d)];
            incoh += w * dep.alpha[(m, u)];
            coh += w;
        }
        incoh + zeta[d] / eta[u] * dep.user_device_overlap(u, d) * coh * coh
    });

    UserMoments {
        delta,
        upsilon,
        kappa,
        varkappa,
        xi,
    }
}

/// Device moments after MRC, time-frequency despreading with N = config.num_prbs
/// chips and AP aggregation, under uncorrelated fading.
pub fn mmtc_moments(stats: &EstimationStats, dep: &Deployment, config: &ScenarioConfig) -> DeviceMoments {
    let m_aps = dep.num_aps();
    let (ku, kd) = (dep.num_users(), dep.num_devices());
    let l = config.antennas_per_ap as f64;
    let n = config.num_prbs as f64;
    let b = |m: usize, d: usize| if dep.device_assoc[(m, d)] { 1.0 } else { 0.0 };
    let bh = &stats.beta_hat;
    let bb = &stats.beta_bar;
    let zeta = &stats.device_training;
    let eta = &stats.user_training;
    let own = |m: usize, d: usize| stats.beta_tilde[m][(d, d)];

    let mut lambda = vec![0.0; kd];
    let mut nu = vec![0.0; kd];
    let mut chi = vec![0.0; kd];
    for d in 0..kd {
        let (mut mean, mut var, mut noise) = (0.0, 0.0, 0.0);
        for m in 0..m_aps {
            let (h, t, s) = (bh[(m, d)], own(m, d), bb[(m, d)]);
            let w = b(m, d);
            mean += w * h * h * t * (s + l * t);
            var += w
                * h.powi(4)
                * t
                * t
                * ((l + 1.0) * ((l + 1.0) * t * (l * t + 4.0 * s) + 2.0 * s * s) - l * (s + l * t).powi(2));
            noise += w * h.powi(4) * t * s * ((l + 1.0) * t + s);
        }
        lambda[d] = n * n * l * l * mean * mean;
        nu[d] = n * l * var;
        chi[d] = n * l * (l + 1.0) * zeta[d] * stats.noise_var * noise;
    }

    let eps_dd = DMatrix::from_fn(kd, kd, |d, k| {
        if d == k {
            return 0.0;
        }
        let (mut incoh, mut coh) = (0.0, 0.0);
        for m in 0..m_aps {
            let (h, t, s) = (bh[(m, d)], own(m, d), bb[(m, d)]);
            let tk = stats.beta_tilde[m][(d, k)];
            let w = b(m, d) * t * dep.beta[(m, k)];
            incoh += w
                * h.powi(4)
                * ((l + 1.0) * s * s + (l + 1.0).powi(2) * s * (t + tk) + l * (2.0 * l + 1.0) * t * tk);
            coh += w * h * h;
        }
        n * l * zeta[d] * incoh + l.powi(4) * zeta[d] * zeta[k] * dep.device_device_overlap(k, d) * coh * coh
    });

    let eps_du = DMatrix::from_fn(kd, ku, |d, u| {
        let (mut incoh, mut coh) = (0.0, 0.0);
        for m in 0..m_aps {
            let (h, t, s) = (bh[(m, d)], own(m, d), bb[(m, d)]);
            let tu = stats.alpha_tilde[m][(d, u)];
            let w = b(m, d) * t * dep.alpha[(m, u)];
            incoh += w
                * h.powi(4)
                * ((l + 1.0) * s * s + (l + 1.0).powi(2) * s * (t + tu) + l * (2.0 * l + 1.0) * t * tu);
            coh += w * h * h;
        }
        n * l * zeta[d] * incoh + n * l.powi(4) * zeta[d] * eta[u] * dep.user_device_overlap(u, d) * coh * coh
    });

    DeviceMoments {
        lambda,
        nu,
        eps_dd,
        eps_du,
        chi,
    }
}
