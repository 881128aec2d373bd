//! Benchmark power-control policies and the feasibility marker used for
//! every policy's output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{ConstraintReport, PowerControlProblem, Regime};
use crate::rates::{MomentSet, PowerVector};
use crate::scenario::{Deployment, ScenarioConfig};

/// Relative slack tolerated when marking a point feasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

/// Exponent used by FPC and by default for G-FPC.
pub const DEFAULT_KAPPA: f64 = -0.5;

/// Uniform power control: every terminal at its budget.
pub fn upc(config: &ScenarioConfig) -> PowerVector {
    PowerVector::uniform(
        config.num_users,
        config.user_power_max_w,
        config.num_devices,
        config.device_power_max_w,
    )
}

/// Generalized fractional power control on the aggregate LSF of the serving APs.
pub fn gfpc(config: &ScenarioConfig, dep: &Deployment, kappa: f64) -> Result<PowerVector> {
    let user_lsf: Vec<f64> = (0..dep.num_users())
        .map(|u| (0..dep.num_aps()).filter(|&m| dep.user_assoc[(m, u)]).map(|m| dep.alpha[(m, u)]).sum())
        .collect();
    let device_lsf: Vec<f64> = (0..dep.num_devices())
        .map(|d| (0..dep.num_aps()).filter(|&m| dep.device_assoc[(m, d)]).map(|m| dep.beta[(m, d)]).sum())
        .collect();
    fractional(config, &user_lsf, &device_lsf, kappa)
}

/// Classical fractional power control on the strongest serving AP's LSF
/// with kappa = -0.5.
pub fn fpc(config: &ScenarioConfig, dep: &Deployment) -> Result<PowerVector> {
    fpc_with_exponent(config, dep, DEFAULT_KAPPA)
}

pub fn fpc_with_exponent(config: &ScenarioConfig, dep: &Deployment, kappa: f64) -> Result<PowerVector> {
    let strongest = |lsf: &nalgebra::DMatrix<f64>, mask: &nalgebra::DMatrix<bool>, k: usize| {
        (0..lsf.nrows())
            .filter(|&m| mask[(m, k)])
            .map(|m| lsf[(m, k)])
            .fold(0.0, f64::max)
    };
    let user_lsf: Vec<f64> = (0..dep.num_users()).map(|u| strongest(&dep.alpha, &dep.user_assoc, u)).collect();
    let device_lsf: Vec<f64> = (0..dep.num_devices())
        .map(|d| strongest(&dep.beta, &dep.device_assoc, d))
        .collect();
    fractional(config, &user_lsf, &device_lsf, kappa)
}

/// P (s^kappa / c) with c the largest s^kappa over all terminals.
fn fractional(config: &ScenarioConfig, user_lsf: &[f64], device_lsf: &[f64], kappa: f64) -> Result<PowerVector> {
    if !(-1.0..=1.0).contains(&kappa) || kappa.is_nan() {
        return Err(Error::InvalidExponent(kappa));
    }
    if let Some(k) = user_lsf.iter().chain(device_lsf).position(|s| *s <= 0.0) {
        return Err(Error::ZeroLsf { terminal: k });
    }
    let powered = |s: &f64| s.powf(kappa);
    let c = user_lsf.iter().chain(device_lsf).map(powered).fold(0.0, f64::max);
    Ok(PowerVector::new(
        user_lsf.iter().map(|s| config.user_power_max_w * (powered(s) / c)).collect(),
        device_lsf.iter().map(|s| config.device_power_max_w * (powered(s) / c)).collect(),
    ))
}

/// Feasibility verdict of a power vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub feasible: bool,
    pub report: ConstraintReport,
}

/// Checks C1-C5 at theta without repairing anything. In the finite-blocklength
/// regime the rate constraint uses the true normal-approximation rate.
pub fn mark_feasible(theta: &PowerVector, moments: &MomentSet, config: &ScenarioConfig, regime: Regime) -> Verdict {
    let problem = PowerControlProblem::new(moments.clone(), config);
    mark_problem(&problem, theta, regime)
}

pub fn mark_problem(problem: &PowerControlProblem, theta: &PowerVector, regime: Regime) -> Verdict {
    let report = problem.check(theta, regime, FEASIBILITY_TOLERANCE);
    Verdict {
        feasible: report.feasible(),
        report,
    }
}
