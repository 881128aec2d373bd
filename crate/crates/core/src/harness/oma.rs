//! Orthogonal multiple access baseline: users and devices get disjoint PRB
//! shares, so neither service interferes with the other.

use serde::{Deserialize, Serialize};

use super::batch::{run_batch, run_batch_with, BatchResult, Policy};
use crate::error::{Error, Result};
use crate::mc_oracle::supported_lengths;
use crate::optimizer::SolveOptions;
use crate::problem::{PowerControlProblem, Regime};
use crate::rates::MomentSet;
use crate::scenario::{Deployment, ScenarioConfig};

/// Resource split of the OMA model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmaSplit {
    /// Percent of PRBs given to users.
    pub user_percent: f64,
    /// Percent of PRBs given to devices.
    pub device_percent: f64,
    /// Device spreading factor after rounding to an m-sequence length.
    pub device_prbs: usize,
}

impl OmaSplit {
    pub fn new(config: &ScenarioConfig, user_percent: f64, device_percent: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&user_percent) || !(0.0..=100.0).contains(&device_percent) {
            return Err(Error::OmaSplit(format!("shares {user_percent}% / {device_percent}% must lie in [0, 100]")));
        }
        if user_percent + device_percent > 100.0 {
            return Err(Error::OmaSplit(format!(
                "r_u + r_d = {} exceeds 100%",
                user_percent + device_percent
            )));
        }
        if config.num_users > 0 && user_percent <= 0.0 {
            return Err(Error::OmaSplit("users need a positive PRB share".into()));
        }
        let raw = (device_percent / 100.0 * config.num_prbs as f64).round();
        if raw < 1.0 {
            return Err(Error::OmaSplit(format!(
                "{device_percent}% of {} PRBs rounds to {raw} device PRBs",
                config.num_prbs
            )));
        }
        let device_prbs = supported_lengths()
            .into_iter()
            .min_by(|a, b| (*a as f64 - raw).abs().total_cmp(&(*b as f64 - raw).abs()))
            .expect("length table is not empty");
        Ok(Self {
            user_percent,
            device_percent,
            device_prbs,
        })
    }

    /// OMA problem of one deployment: cross-service moments removed, users
    /// on a psi r_u / 100 bandwidth, devices spread over `device_prbs`.
    /// Each device symbol still occupies one PRB-width of spectrum, so the
    /// device pre-log stays psi / N of the full grid.
    pub fn problem(&self, dep: &Deployment, config: &ScenarioConfig) -> PowerControlProblem {
        let user = MomentSet::closed_form(dep, config).user_half();
        let dev_config = config.clone().with_prbs(self.device_prbs);
        let device = MomentSet::closed_form(dep, &dev_config).device_half();
        let moments = MomentSet::from_halves(user, device).without_cross_service();
        let mut problem = PowerControlProblem::new(moments, &dev_config);
        problem.psi_user = config.psi() * self.user_percent / 100.0;
        problem.ee.psi = config.psi() * self.device_prbs as f64 / config.num_prbs as f64;
        problem
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmaComparison {
    pub split: OmaSplit,
    pub noma: BatchResult,
    pub oma: BatchResult,
}

pub fn compare_oma(
    config: &ScenarioConfig,
    user_percent: f64,
    device_percent: f64,
    policy: Policy,
    n_instances: usize,
    regime: Regime,
) -> Result<OmaComparison> {
    let split = OmaSplit::new(config, user_percent, device_percent)?;
    let mut noma = run_batch(config, policy, n_instances, regime)?;
    noma.label = format!("{} noma", noma.label);
    let mut oma = run_batch_with(config, policy, n_instances, regime, &SolveOptions::default(), |dep| {
        Ok(split.problem(dep, config))
    })?;
    oma.label = format!("{} oma({user_percent},{device_percent})", oma.label);
    Ok(OmaComparison { split, noma, oma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_deployment;
    use approx::assert_relative_eq;

    #[test]
    fn split_validation() {
        let c = ScenarioConfig::baseline();
        assert!(matches!(OmaSplit::new(&c, 100.0, 0.0), Err(Error::OmaSplit(_))));
        assert!(matches!(OmaSplit::new(&c, 60.0, 50.0), Err(Error::OmaSplit(_))));
        assert_eq!(OmaSplit::new(&c, 50.0, 50.0).unwrap().device_prbs, 127);
        assert_eq!(OmaSplit::new(&c, 90.0, 10.0).unwrap().device_prbs, 31);
    }

    #[test]
    fn oma_removes_cross_terms_and_scales_resources() {
        let c = ScenarioConfig::baseline();
        let dep = generate_deployment(&c);
        let split = OmaSplit::new(&c, 50.0, 50.0).unwrap();
        let p = split.problem(&dep, &c);
        assert!(p.moments.varkappa.iter().all(|v| *v == 0.0));
        assert!(p.moments.eps_du.iter().all(|v| *v == 0.0));
        assert_relative_eq!(p.psi_user, c.psi() / 2.0);
        assert_relative_eq!(p.ee.prelog(), c.psi() / c.num_prbs as f64);
        assert_eq!(p.ee.spreading, 127);
    }

    #[test]
    fn small_device_share_is_less_feasible() {
        let c = ScenarioConfig::baseline();
        let a = compare_oma(&c, 50.0, 50.0, Policy::Upc, 40, Regime::Shannon).unwrap();
        let b = compare_oma(&c, 90.0, 10.0, Policy::Upc, 40, Regime::Shannon).unwrap();
        assert!(b.oma.feasible_fraction() <= a.oma.feasible_fraction());
        assert_eq!(a.noma, b.noma);
    }
}
