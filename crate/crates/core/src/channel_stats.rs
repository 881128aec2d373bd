//! MMSE channel-estimation statistics under uncorrelated fading
//! (R_{m,u} = alpha_{m,u} I, Q_{m,d} = beta_{m,d} I).

use nalgebra::DMatrix;

use crate::scenario::{Deployment, ScenarioConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationStats {
    /// sigma_m^2, identical at every AP.
    pub noise_var: f64,
    /// Training powers eta_u.
    pub user_training: Vec<f64>,
    /// Training powers zeta_d.
    pub device_training: Vec<f64>,
    /// M x K_u per-antenna variance of the least-squares pilot observation.
    pub c_user: DMatrix<f64>,
    /// M x K_u MMSE shrinkage eta_u alpha_{m,u} / c_{m,u}, in (0, 1].
    pub a_user: DMatrix<f64>,
    /// M x K_d device MMSE factor beta_{m,d} / beta_bar_{m,d}.
    pub beta_hat: DMatrix<f64>,
    /// Per AP, K_d x K_d: entry (d, k) = zeta_k beta_{m,k} |pi_k^H pi_d|^2.
    pub beta_tilde: Vec<DMatrix<f64>>,
    /// Per AP, K_d x K_u: entry (d, u) = eta_u alpha_{m,u} |phi_u^H pi_d|^2.
    pub alpha_tilde: Vec<DMatrix<f64>>,
    /// M x K_d per-antenna variance of the device pilot observation.
    pub beta_bar: DMatrix<f64>,
}

impl EstimationStats {
    pub fn num_aps(&self) -> usize {
        self.c_user.nrows().max(self.beta_bar.nrows())
    }
}

pub fn compute_stats(dep: &Deployment, config: &ScenarioConfig) -> EstimationStats {
    let m_aps = dep.num_aps();
    let (ku, kd) = (dep.num_users(), dep.num_devices());
    let noise_var = config.noise_power_w();
    let eta = vec![config.user_training_power_w; ku];
    let zeta = vec![config.device_training_power_w; kd];

    let c_user = DMatrix::from_fn(m_aps, ku, |m, u| {
        let users: f64 = (0..ku)
            .map(|k| eta[k] * dep.alpha[(m, k)] * dep.user_user_overlap(k, u))
            .sum();
        let devices: f64 = (0..kd)
            .map(|d| zeta[d] * dep.beta[(m, d)] * dep.user_device_overlap(u, d))
            .sum();
        users + devices + noise_var
    });
    let a_user = DMatrix::from_fn(m_aps, ku, |m, u| eta[u] * dep.alpha[(m, u)] / c_user[(m, u)]);

    let beta_tilde: Vec<DMatrix<f64>> = (0..m_aps)
        .map(|m| {
            DMatrix::from_fn(kd, kd, |d, k| zeta[k] * dep.beta[(m, k)] * dep.device_device_overlap(k, d))
        })
        .collect();
    let alpha_tilde: Vec<DMatrix<f64>> = (0..m_aps)
        .map(|m| {
            DMatrix::from_fn(kd, ku, |d, u| eta[u] * dep.alpha[(m, u)] * dep.user_device_overlap(u, d))
        })
        .collect();
    let beta_bar = DMatrix::from_fn(m_aps, kd, |m, d| {
        beta_tilde[m].row(d).sum() + alpha_tilde[m].row(d).sum() + noise_var
    });
    let beta_hat = DMatrix::from_fn(m_aps, kd, |m, d| dep.beta[(m, d)] / beta_bar[(m, d)]);

    EstimationStats {
        noise_var,
        user_training: eta,
        device_training: zeta,
        c_user,
        a_user,
        beta_hat,
        beta_tilde,
        alpha_tilde,
        beta_bar,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_deployment;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn single_link(alpha: f64) -> (Deployment, ScenarioConfig) {
        let cfg = ScenarioConfig::baseline().with_network(1, 1, 1, 0, 1);
        let dep = Deployment::from_lsf(
            DMatrix::from_element(1, 1, alpha),
            DMatrix::zeros(1, 0),
            1,
            vec![0],
            vec![],
            1,
        )
        .unwrap();
        (dep, cfg)
    }

    #[test]
    fn textbook_single_link() {
        let (dep, cfg) = single_link(1e-10);
        let s = compute_stats(&dep, &cfg);
        let eta = cfg.user_training_power_w;
        let sigma2 = cfg.noise_power_w();
        assert_relative_eq!(s.c_user[(0, 0)], eta * 1e-10 + sigma2, max_relative = 1e-14);
        assert_relative_eq!(s.a_user[(0, 0)], eta * 1e-10 / (eta * 1e-10 + sigma2), max_relative = 1e-14);
    }

    #[test]
    fn shared_pilot_adds_contamination() {
        let cfg = ScenarioConfig::baseline().with_network(1, 1, 2, 0, 1);
        let alpha = DMatrix::from_row_slice(1, 2, &[2e-10, 5e-11]);
        let shared = Deployment::from_lsf(alpha.clone(), DMatrix::zeros(1, 0), 1, vec![0, 0], vec![], 1).unwrap();
        let apart = Deployment::from_lsf(alpha, DMatrix::zeros(1, 0), 1, vec![0, 1], vec![], 2).unwrap();
        let s = compute_stats(&shared, &cfg);
        let o = compute_stats(&apart, &cfg);
        let eta = cfg.user_training_power_w;
        assert_relative_eq!(s.c_user[(0, 0)] - o.c_user[(0, 0)], eta * 5e-11, max_relative = 1e-12);
        assert_relative_eq!(s.c_user[(0, 1)] - o.c_user[(0, 1)], eta * 2e-10, max_relative = 1e-12);
    }

    #[test]
    fn orthogonal_pilots_beta_bar_is_own_term_plus_noise() {
        let mut cfg = ScenarioConfig::baseline().with_network(4, 2, 2, 3, 2);
        cfg.pilot_samples = 5;
        let dep = generate_deployment(&cfg);
        let s = compute_stats(&dep, &cfg);
        for m in 0..4 {
            for d in 0..3 {
                assert_relative_eq!(
                    s.beta_bar[(m, d)],
                    s.beta_tilde[m][(d, d)] + s.noise_var,
                    max_relative = 1e-14
                );
                for k in 0..3 {
                    if k != d {
                        assert_eq!(s.beta_tilde[m][(d, k)], 0.0);
                    }
                }
                assert!(s.alpha_tilde[m].row(d).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn shrinkage_bounds_on_baseline() {
        let cfg = ScenarioConfig::baseline();
        let dep = generate_deployment(&cfg);
        let s = compute_stats(&dep, &cfg);
        assert!(s.a_user.iter().all(|&a| a > 0.0 && a <= 1.0));
        for m in 0..cfg.num_aps {
            for d in 0..cfg.num_devices {
                let shrink = s.device_training[d] * s.beta_hat[(m, d)];
                assert!(shrink > 0.0 && shrink <= 1.0);
            }
        }
        assert!(s.c_user.iter().all(|&c| c > 0.0));
        assert!(s.beta_bar.iter().all(|&c| c > 0.0));
    }

    proptest! {
        // Removing an interferer never increases an observation variance.
        #[test]
        fn contamination_monotone(seed in 0u64..200, drop in 0usize..5) {
            let cfg = ScenarioConfig::baseline().with_network(3, 2, 2, 3, 2).with_seed(seed);
            let dep = generate_deployment(&cfg);
            let full = compute_stats(&dep, &cfg);
            let mut reduced = dep.clone();
            if drop < 2 {
                reduced.alpha.column_mut(drop).fill(0.0);
            } else {
                reduced.beta.column_mut(drop - 2).fill(0.0);
            }
            let r = compute_stats(&reduced, &cfg);
            for (a, b) in r.c_user.iter().zip(full.c_user.iter()) {
                prop_assert!(a <= b);
            }
            for (a, b) in r.beta_bar.iter().zip(full.beta_bar.iter()) {
                prop_assert!(a <= b);
            }
        }
    }
}
