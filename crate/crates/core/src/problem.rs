//! The max-min device energy-efficiency problem and its constraint checks.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::rates::{
    embb_sinr, energy_efficiency, fbl_rate, mmtc_sinr, shannon_rate, EEParams, MomentSet, PowerVector,
};
use crate::scenario::{Deployment, ScenarioConfig};

/// Which device rate expression is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Infinite blocklength: Shannon capacity.
    Shannon,
    /// Normal approximation with blocklength n_d and target PER.
    FiniteBlocklength,
}

impl std::str::FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "shannon" => Ok(Regime::Shannon),
            "fbl" | "finite_blocklength" => Ok(Regime::FiniteBlocklength),
            other => Err(format!("unknown regime '{other}' (expected shannon or fbl)")),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Shannon => "shannon",
            Regime::FiniteBlocklength => "fbl",
        })
    }
}

/// Constraint labels, C1 = device power box, C2 = user power box,
/// C3 = device rate, C4 = user rate, C5 = device SINR floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    C1,
    C2,
    C3,
    C4,
    C5,
}

/// Relative slack of one constraint at one terminal (negative = violated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub constraint: Constraint,
    pub terminal: usize,
    pub slack: f64,
}

/// Per-constraint slacks at a power vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub slacks: Vec<Slack>,
    pub tolerance: f64,
}

impl ConstraintReport {
    pub fn feasible(&self) -> bool {
        self.slacks.iter().all(|s| s.slack >= -self.tolerance)
    }

    pub fn violated(&self) -> Vec<&Slack> {
        self.slacks.iter().filter(|s| s.slack < -self.tolerance).collect()
    }

    pub fn min_slack(&self, constraint: Constraint) -> Option<f64> {
        self.slacks
            .iter()
            .filter(|s| s.constraint == constraint)
            .map(|s| s.slack)
            .min_by(f64::total_cmp)
    }

    pub fn worst(&self) -> f64 {
        self.slacks.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min)
    }
}

/// SINR written as sig x_i / (1 + w . x) over powers normalized by the budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFractional {
    /// Index of the terminal's own power in x.
    pub own: usize,
    pub sig: f64,
    pub w: DVector<f64>,
}

impl LinearFractional {
    /// Noise-normalized interference-plus-noise 1 + w . x.
    pub fn denominator(&self, x: &DVector<f64>) -> f64 {
        1.0 + self.w.dot(x)
    }

    pub fn sinr(&self, x: &DVector<f64>) -> f64 {
        self.sig * x[self.own] / self.denominator(x)
    }

    /// sig x_i - T (1 + w . x), linear in x and positive iff SINR > T.
    pub fn margin(&self, x: &DVector<f64>, threshold: f64) -> f64 {
        self.sig * x[self.own] - threshold * self.denominator(x)
    }

    pub fn margin_gradient(&self, threshold: f64) -> DVector<f64> {
        let mut g = -threshold * &self.w;
        g[self.own] += self.sig;
        g
    }
}

/// One instance of the power-control problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerControlProblem {
    pub moments: MomentSet,
    pub ee: EEParams,
    /// Bandwidth factor of the broadband users (equal to the device psi unless resources are split).
    pub psi_user: f64,
    pub user_budget: Vec<f64>,
    pub device_budget: Vec<f64>,
    pub embb_rate_min_bps: f64,
    pub mmtc_rate_min_bps: f64,
    pub sinr_min: f64,
}

impl PowerControlProblem {
    pub fn new(moments: MomentSet, config: &ScenarioConfig) -> Self {
        Self {
            user_budget: vec![config.user_power_max_w; moments.num_users()],
            device_budget: vec![config.device_power_max_w; moments.num_devices()],
            ee: EEParams::from_config(config),
            psi_user: config.psi(),
            embb_rate_min_bps: config.embb_rate_min_bps,
            mmtc_rate_min_bps: config.mmtc_rate_min_bps,
            sinr_min: config.sinr_min,
            moments,
        }
    }

    /// Closed-form moments of `dep` wrapped into a problem.
    pub fn from_deployment(dep: &Deployment, config: &ScenarioConfig) -> Self {
        Self::new(MomentSet::closed_form(dep, config), config)
    }

    pub fn num_users(&self) -> usize {
        self.user_budget.len()
    }

    pub fn num_devices(&self) -> usize {
        self.device_budget.len()
    }

    pub fn dim(&self) -> usize {
        self.num_users() + self.num_devices()
    }

    pub fn budgets(&self) -> Vec<f64> {
        self.user_budget.iter().chain(&self.device_budget).copied().collect()
    }

    pub fn full_power(&self) -> PowerVector {
        PowerVector::new(self.user_budget.clone(), self.device_budget.clone())
    }

    pub fn user_sinr(&self, theta: &PowerVector) -> Vec<f64> {
        embb_sinr(&self.moments, theta)
    }

    pub fn device_sinr(&self, theta: &PowerVector) -> Vec<f64> {
        mmtc_sinr(&self.moments, theta)
    }

    /// psi_u log2(1 + gamma_u) in bits/s.
    pub fn user_rates_bps(&self, theta: &PowerVector) -> Vec<f64> {
        self.user_sinr(theta).iter().map(|g| self.psi_user * shannon_rate(*g)).collect()
    }

    /// Device spectral efficiency R_d in bits/s/Hz (before the psi / N pre-log).
    pub fn device_rates(&self, theta: &PowerVector, regime: Regime) -> Vec<f64> {
        self.device_sinr(theta)
            .iter()
            .enumerate()
            .map(|(d, rho)| match regime {
                Regime::Shannon => shannon_rate(*rho),
                Regime::FiniteBlocklength => fbl_rate(*rho, self.ee.dispersion_scale[d]),
            })
            .collect()
    }

    /// (psi / N) R_d in bits/s.
    pub fn device_rates_bps(&self, theta: &PowerVector, regime: Regime) -> Vec<f64> {
        let prelog = self.ee.prelog();
        self.device_rates(theta, regime).iter().map(|r| prelog * r).collect()
    }

    pub fn energy_efficiency(&self, theta: &PowerVector, regime: Regime) -> Vec<f64> {
        energy_efficiency(theta, &self.device_rates(theta, regime), &self.ee)
    }

    pub fn min_ee(&self, theta: &PowerVector, regime: Regime) -> f64 {
        self.energy_efficiency(theta, regime).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// SINR equivalent of the user rate constraint, 2^{R/psi_u} - 1.
    pub fn user_sinr_threshold(&self) -> f64 {
        (self.embb_rate_min_bps / self.psi_user).exp2() - 1.0
    }

    /// Required device spectral efficiency (N / psi) R^mMTC in bits/s/Hz.
    pub fn device_rate_target(&self) -> f64 {
        self.mmtc_rate_min_bps / self.ee.prelog()
    }

    /// SINR equivalent of the device rate constraint. Both rate expressions
    /// are increasing where the constraint binds, so this is exact.
    pub fn device_rate_sinr_threshold(&self, d: usize, regime: Regime) -> f64 {
        let target = self.device_rate_target();
        match regime {
            Regime::Shannon => target.exp2() - 1.0,
            Regime::FiniteBlocklength => {
                crate::rates::fbl_sinr_threshold(target, self.ee.dispersion_scale[d])
            }
        }
    }

    /// Combined SINR floor for device d (rate constraint and SINR floor).
    pub fn device_sinr_floor(&self, d: usize, regime: Regime) -> f64 {
        self.device_rate_sinr_threshold(d, regime).max(self.sinr_min)
    }

    /// Normalized SINR models, users first, then devices.
    pub fn sinr_models(&self) -> Vec<LinearFractional> {
        let (ku, kd) = (self.num_users(), self.num_devices());
        let n = ku + kd;
        let m = &self.moments;
        let mut out = Vec::with_capacity(n);
        for u in 0..ku {
            let noise = m.xi[u];
            let mut w = DVector::zeros(n);
            for k in 0..ku {
                w[k] = if k == u { m.upsilon[u] } else { m.kappa[(u, k)] } * self.user_budget[k] / noise;
            }
            for d in 0..kd {
                w[ku + d] = m.varkappa[(u, d)] * self.device_budget[d] / noise;
            }
            out.push(LinearFractional {
                own: u,
                sig: m.delta[u] * self.user_budget[u] / noise,
                w,
            });
        }
        for d in 0..kd {
            let noise = m.chi[d];
            let mut w = DVector::zeros(n);
            for u in 0..ku {
                w[u] = m.eps_du[(d, u)] * self.user_budget[u] / noise;
            }
            for k in 0..kd {
                w[ku + k] = if k == d { m.nu[d] } else { m.eps_dd[(d, k)] } * self.device_budget[k] / noise;
            }
            out.push(LinearFractional {
                own: ku + d,
                sig: m.lambda[d] * self.device_budget[d] / noise,
                w,
            });
        }
        out
    }

    /// theta / theta_max.
    pub fn normalize(&self, theta: &PowerVector) -> DVector<f64> {
        let b = self.budgets();
        DVector::from_iterator(self.dim(), theta.stacked().iter().zip(&b).map(|(t, m)| t / m))
    }

    pub fn denormalize(&self, x: &DVector<f64>) -> PowerVector {
        let theta: Vec<f64> = x.iter().zip(self.budgets()).map(|(x, m)| x * m).collect();
        PowerVector::from_stacked(&theta, self.num_users())
    }

    /// Relative slack of every constraint at theta; the device rate
    /// constraint uses the true rate of `regime`.
    pub fn check(&self, theta: &PowerVector, regime: Regime, tolerance: f64) -> ConstraintReport {
        let mut slacks = Vec::new();
        for (d, (&q, &b)) in theta.q.iter().zip(&self.device_budget).enumerate() {
            slacks.push(Slack {
                constraint: Constraint::C1,
                terminal: d,
                slack: q.min(b - q) / b,
            });
        }
        for (u, (&p, &b)) in theta.p.iter().zip(&self.user_budget).enumerate() {
            slacks.push(Slack {
                constraint: Constraint::C2,
                terminal: u,
                slack: p.min(b - p) / b,
            });
        }
        for (d, r) in self.device_rates_bps(theta, regime).iter().enumerate() {
            slacks.push(Slack {
                constraint: Constraint::C3,
                terminal: d,
                slack: (r - self.mmtc_rate_min_bps) / self.mmtc_rate_min_bps,
            });
        }
        for (u, r) in self.user_rates_bps(theta).iter().enumerate() {
            slacks.push(Slack {
                constraint: Constraint::C4,
                terminal: u,
                slack: (r - self.embb_rate_min_bps) / self.embb_rate_min_bps,
            });
        }
        for (d, rho) in self.device_sinr(theta).iter().enumerate() {
            slacks.push(Slack {
                constraint: Constraint::C5,
                terminal: d,
                slack: (rho - self.sinr_min) / self.sinr_min,
            });
        }
        ConstraintReport { slacks, tolerance }
    }
}
