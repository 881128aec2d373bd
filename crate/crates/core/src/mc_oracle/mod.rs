//! Link-level Monte Carlo oracle for the closed-form SINR moments.
//!
//! Each draw samples fresh channels and noise, estimates the channels from
//! the pilot observations, applies MRC (users) or per-PRB MRC, signature
//! correlation and AP aggregation (devices), and accumulates the sample
//! moments of every term of the use-and-then-forget decomposition.
//!
//! Draw `i` always uses the random stream keyed by `(seed, i)` and draws are
//! reduced in fixed-size blocks merged in index order, so results do not
//! depend on the number of worker threads.

mod channels;
mod pn;

pub use channels::{estimate_channels, sample_channels, ChannelDraw, ChannelEstimates, LinkArray};
pub use pn::{
    gen_mseq, primitive_polynomial, register_length_for, spreading_codes, supported_lengths, PnSequence,
    PRIMITIVE_POLYNOMIALS,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel_stats::{compute_stats, EstimationStats};
use crate::error::{Error, Result};
use crate::rates::{DeviceMoments, UserMoments};
use crate::rng::{stream, Domain};
use crate::scenario::{Deployment, ScenarioConfig};
use channels::{estimate_into, sample_channels_into};

/// Fewer draws cannot reach the documented tolerances.
pub const MIN_DRAWS: usize = 1_000;
const BLOCK: usize = 256;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // a^H b
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn check_draws(n_draws: usize) -> Result<()> {
    if n_draws < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            requested: n_draws,
            minimum: MIN_DRAWS,
        });
    }
    Ok(())
}

/// Per-thread scratch buffers.
struct Scratch {
    draw: ChannelDraw,
    est: ChannelEstimates,
    obs: LinkArray,
}

impl Scratch {
    fn new(dep: &Deployment, config: &ScenarioConfig) -> Self {
        let draw = ChannelDraw::zeros(dep, config);
        let est = ChannelEstimates {
            h_hat: draw.h.clone(),
            g_hat: draw.g.clone(),
        };
        let obs = draw.pilot_noise.clone();
        Self { draw, est, obs }
    }

    fn realize(&mut self, dep: &Deployment, config: &ScenarioConfig, stats: &EstimationStats, index: u64) {
        let mut rng = stream(config.seed, Domain::Channels, index);
        sample_channels_into(&mut self.draw, dep, config, &mut rng);
        estimate_into(&mut self.est, &mut self.obs, &self.draw, dep, stats);
    }
}

/// Runs `per_draw` over every draw in deterministic blocks and sums the
/// accumulators in draw order.
fn accumulate<A, F>(dep: &Deployment, config: &ScenarioConfig, n_draws: usize, zero: A, per_draw: F) -> A
where
    A: Clone + Send + Sync + std::ops::AddAssign,
    F: Fn(&Scratch, &mut A) + Sync,
{
    let stats = compute_stats(dep, config);
    let blocks = n_draws.div_ceil(BLOCK);
    let partial: Vec<A> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut scratch = Scratch::new(dep, config);
            let mut acc = zero.clone();
            for i in b * BLOCK..((b + 1) * BLOCK).min(n_draws) {
                scratch.realize(dep, config, &stats, i as u64);
                per_draw(&scratch, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = zero;
    for p in partial {
        total += p;
    }
    total
}

/// Flat vector of sums with element-wise addition.
#[derive(Clone)]
struct Sums(Vec<f64>);

impl std::ops::AddAssign for Sums {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

/// Sample moments of the broadband-user terms, averaged over draws and PRBs.
///
/// For the combiner v_u = sum_m a_{m,u} h_hat_{m,u}:
/// delta = |E[v^H h_u]|^2, upsilon = Var[v^H h_u], kappa = E|v^H h_k|^2,
/// varkappa = E|v^H g_d|^2 and xi = E|v^H w|^2.
pub fn empirical_embb_moments(dep: &Deployment, config: &ScenarioConfig, n_draws: usize) -> Result<UserMoments> {
    check_draws(n_draws)?;
    let (m_aps, ku, kd, prbs) = (dep.num_aps(), dep.num_users(), dep.num_devices(), config.num_prbs);
    // layout: [re mean, im mean, |.|^2] per user, then ku*ku, ku*kd, ku
    let width = 3 * ku + ku * ku + ku * kd + ku;
    let sums = accumulate(dep, config, n_draws, Sums(vec![0.0; width]), |s, acc| {
        let acc = &mut acc.0;
        for n in 0..prbs {
            for u in 0..ku {
                let mut x = vec![Complex64::new(0.0, 0.0); ku];
                let mut y = vec![Complex64::new(0.0, 0.0); kd];
                let mut w = Complex64::new(0.0, 0.0);
                for m in (0..m_aps).filter(|&m| dep.user_assoc[(m, u)]) {
                    let v = s.est.h_hat.vector(m, u, n);
                    for (k, xk) in x.iter_mut().enumerate() {
                        *xk += dot(v, s.draw.h.vector(m, k, n));
                    }
                    for (d, yd) in y.iter_mut().enumerate() {
                        *yd += dot(v, s.draw.g.vector(m, d, n));
                    }
                    w += dot(v, s.draw.data_noise.vector(m, 0, n));
                }
                acc[3 * u] += x[u].re;
                acc[3 * u + 1] += x[u].im;
                acc[3 * u + 2] += x[u].norm_sqr();
                let base = 3 * ku + u * ku;
                for k in 0..ku {
                    acc[base + k] += x[k].norm_sqr();
                }
                let base = 3 * ku + ku * ku + u * kd;
                for d in 0..kd {
                    acc[base + d] += y[d].norm_sqr();
                }
                acc[3 * ku + ku * ku + ku * kd + u] += w.norm_sqr();
            }
        }
    })
    .0;
    let count = (n_draws * prbs) as f64;
    let mean = |i: usize| sums[i] / count;
    let mut delta = vec![0.0; ku];
    let mut upsilon = vec![0.0; ku];
    for u in 0..ku {
        let mu = Complex64::new(mean(3 * u), mean(3 * u + 1));
        delta[u] = mu.norm_sqr();
        upsilon[u] = mean(3 * u + 2) - delta[u];
    }
    let kappa = DMatrix::from_fn(ku, ku, |u, k| if u == k { 0.0 } else { mean(3 * ku + u * ku + k) });
    let varkappa = DMatrix::from_fn(ku, kd, |u, d| mean(3 * ku + ku * ku + u * kd + d));
    let xi = (0..ku).map(|u| mean(3 * ku + ku * ku + ku * kd + u)).collect();
    Ok(UserMoments {
        delta,
        upsilon,
        kappa,
        varkappa,
        xi,
    })
}

/// Sample moments of the despread device terms.
///
/// On PRB n at AP m the device-d branch forms (g^H g_hat)(g_hat^H r), the
/// branches are weighted by the +-1 chips of d's signature, summed over PRBs
/// and aggregated over the serving APs. With S the resulting useful term,
/// lambda = (E S)^2 and nu = Var S; eps_dd, eps_du and chi are the mean
/// powers of the device, user and noise contributions.
pub fn empirical_mmtc_moments(dep: &Deployment, config: &ScenarioConfig, n_draws: usize) -> Result<DeviceMoments> {
    check_draws(n_draws)?;
    let (m_aps, ku, kd, prbs) = (dep.num_aps(), dep.num_users(), dep.num_devices(), config.num_prbs);
    let chips: Vec<Vec<f64>> = spreading_codes(prbs, kd)?.iter().map(|c| c.unit_chips()).collect();
    // layout: [sum S, sum S^2] per device, then kd*kd, kd*ku, kd
    let width = 2 * kd + kd * kd + kd * ku + kd;
    let sums = accumulate(dep, config, n_draws, Sums(vec![0.0; width]), |s, acc| {
        let acc = &mut acc.0;
        for d in 0..kd {
            let mut signal = 0.0;
            let mut jd = vec![Complex64::new(0.0, 0.0); kd];
            let mut user_power = vec![0.0; ku];
            let mut noise_power = 0.0;
            for n in 0..prbs {
                let c = chips[d][n];
                let mut ju = vec![Complex64::new(0.0, 0.0); ku];
                let mut w = Complex64::new(0.0, 0.0);
                for m in (0..m_aps).filter(|&m| dep.device_assoc[(m, d)]) {
                    let t = s.est.g_hat.vector(m, d, n);
                    let tg = dot(t, s.draw.g.vector(m, d, n));
                    // branch weight (g^H t) = conj(t^H g)
                    let weight = tg.conj();
                    signal += tg.norm_sqr();
                    for (k, j) in jd.iter_mut().enumerate() {
                        if k != d {
                            *j += weight * dot(t, s.draw.g.vector(m, k, n)) * (c * chips[k][n]);
                        }
                    }
                    for (u, j) in ju.iter_mut().enumerate() {
                        *j += weight * dot(t, s.draw.h.vector(m, u, n)) * c;
                    }
                    w += weight * dot(t, s.draw.data_noise.vector(m, 0, n)) * c;
                }
                // user symbols and noise are independent across PRBs
                for (p, j) in user_power.iter_mut().zip(&ju) {
                    *p += j.norm_sqr();
                }
                noise_power += w.norm_sqr();
            }
            acc[2 * d] += signal;
            acc[2 * d + 1] += signal * signal;
            for k in 0..kd {
                acc[2 * kd + d * kd + k] += jd[k].norm_sqr();
            }
            for u in 0..ku {
                acc[2 * kd + kd * kd + d * ku + u] += user_power[u];
            }
            acc[2 * kd + kd * kd + kd * ku + d] += noise_power;
        }
    })
    .0;
    let count = n_draws as f64;
    let mean = |i: usize| sums[i] / count;
    let mut lambda = vec![0.0; kd];
    let mut nu = vec![0.0; kd];
    for d in 0..kd {
        let mu = mean(2 * d);
        lambda[d] = mu * mu;
        nu[d] = mean(2 * d + 1) - mu * mu;
    }
    let eps_dd = DMatrix::from_fn(kd, kd, |d, k| if d == k { 0.0 } else { mean(2 * kd + d * kd + k) });
    let eps_du = DMatrix::from_fn(kd, ku, |d, u| mean(2 * kd + kd * kd + d * ku + u));
    let chi = (0..kd).map(|d| mean(2 * kd + kd * kd + kd * ku + d)).collect();
    Ok(DeviceMoments {
        lambda,
        nu,
        eps_dd,
        eps_du,
        chi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{embb_moments, mmtc_moments};
    use crate::scenario::generate_deployment;
    use approx::assert_relative_eq;

    fn small() -> ScenarioConfig {
        ScenarioConfig::baseline().with_network(3, 2, 2, 3, 2).with_prbs(7).with_seed(5)
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / a).abs()
    }

    #[test]
    fn refuses_too_few_draws() {
        let c = small();
        let dep = generate_deployment(&c);
        assert!(matches!(
            empirical_embb_moments(&dep, &c, 999),
            Err(Error::TooFewDraws { requested: 999, .. })
        ));
        assert!(empirical_mmtc_moments(&dep, &c, 10).is_err());
    }

    #[test]
    fn same_seed_same_draw() {
        let c = small();
        let dep = generate_deployment(&c);
        let a = sample_channels(&dep, &c, &mut stream(3, Domain::Channels, 9));
        let b = sample_channels(&dep, &c, &mut stream(3, Domain::Channels, 9));
        assert_eq!(a, b);
        let other = sample_channels(&dep, &c, &mut stream(3, Domain::Channels, 10));
        assert_ne!(a, other);
    }

    #[test]
    fn channel_power_and_prb_independence() {
        let c = small();
        let dep = generate_deployment(&c);
        let draws = 20_000;
        let (mut power, mut cross, mut norm) = (0.0, Complex64::new(0.0, 0.0), 0.0);
        for i in 0..draws {
            let d = sample_channels(&dep, &c, &mut stream(1, Domain::Channels, i));
            for n in 0..c.num_prbs {
                power += d.h.vector(0, 0, n).iter().map(|x| x.norm_sqr()).sum::<f64>();
            }
            let (a, b) = (d.h.vector(0, 0, 0)[0], d.h.vector(0, 0, 1)[0]);
            cross += a.conj() * b;
            norm += a.norm_sqr();
        }
        let count = (draws * c.num_prbs as u64) as f64;
        let expect = c.antennas_per_ap as f64 * dep.alpha[(0, 0)];
        assert!(rel(expect, power / count) < 0.02);
        // normalized cross-PRB correlation ~ N(0, 1/draws) per component
        let rho = cross.norm() / norm;
        assert!(rho < 4.0 / (draws as f64).sqrt(), "rho = {rho}");
    }

    #[test]
    fn noiseless_orthogonal_estimate_is_exact() {
        let mut c = ScenarioConfig::baseline().with_network(2, 4, 1, 1, 2);
        c.noise_density_w_hz = 0.0;
        let dep = Deployment::from_lsf(
            DMatrix::from_column_slice(2, 1, &[1e-7, 3e-9]),
            DMatrix::from_column_slice(2, 1, &[2e-8, 5e-8]),
            2,
            vec![0],
            vec![1],
            2,
        )
        .unwrap();
        let stats = compute_stats(&dep, &c);
        let draw = sample_channels(&dep, &c, &mut stream(0, Domain::Channels, 0));
        let est = estimate_channels(&draw, &dep, &stats);
        for (a, b) in est.h_hat.data.iter().zip(&draw.h.data).chain(est.g_hat.data.iter().zip(&draw.g.data)) {
            assert!((a - b).norm() <= 1e-12 * b.norm());
        }
    }

    #[test]
    fn estimate_variance_and_orthogonality() {
        let c = small();
        let dep = generate_deployment(&c);
        let stats = compute_stats(&dep, &c);
        let draws = 20_000u64;
        let (mut power, mut corr, mut err_power) = (0.0, Complex64::new(0.0, 0.0), 0.0);
        for i in 0..draws {
            let d = sample_channels(&dep, &c, &mut stream(2, Domain::Channels, i));
            let e = estimate_channels(&d, &dep, &stats);
            for n in 0..c.num_prbs {
                let (hh, h) = (e.h_hat.vector(1, 0, n), d.h.vector(1, 0, n));
                power += hh.iter().map(|x| x.norm_sqr()).sum::<f64>();
                let err: Vec<Complex64> = h.iter().zip(hh).map(|(a, b)| a - b).collect();
                corr += dot(hh, &err);
                err_power += err.iter().map(|x| x.norm_sqr()).sum::<f64>();
            }
        }
        let count = (draws * c.num_prbs as u64) as f64;
        let l = c.antennas_per_ap as f64;
        let expect = l * stats.a_user[(1, 0)] * dep.alpha[(1, 0)];
        assert!(rel(expect, power / count) < 0.02);
        // |E[h_hat^H e]| against its standard error
        let se = (power / count * err_power / count / count).sqrt();
        assert!((corr / count).norm() < 4.0 * se);
    }

    #[test]
    fn user_moments_agree_with_closed_form() {
        let c = small();
        let dep = generate_deployment(&c);
        let stats = compute_stats(&dep, &c);
        let closed = embb_moments(&stats, &dep, &c);
        let emp = empirical_embb_moments(&dep, &c, 20_000).unwrap();
        for u in 0..2 {
            assert!(rel(closed.delta[u], emp.delta[u]) < 0.03);
            assert!(rel(closed.upsilon[u], emp.upsilon[u]) < 0.03);
            assert!(rel(closed.xi[u], emp.xi[u]) < 0.03);
            for d in 0..3 {
                assert!(rel(closed.varkappa[(u, d)], emp.varkappa[(u, d)]) < 0.05);
            }
        }
        assert!(rel(closed.kappa[(0, 1)], emp.kappa[(0, 1)]) < 0.05);
    }

    #[test]
    fn no_spreading_limit() {
        let c = small().with_prbs(1);
        let dep = generate_deployment(&c);
        let stats = compute_stats(&dep, &c);
        let closed = mmtc_moments(&stats, &dep, &c);
        let emp = empirical_mmtc_moments(&dep, &c, 40_000).unwrap();
        for d in 0..3 {
            assert!(rel(closed.lambda[d], emp.lambda[d]) < 0.05);
            assert!(rel(closed.nu[d], emp.nu[d]) < 0.1);
            assert!(rel(closed.chi[d], emp.chi[d]) < 0.1);
        }
    }

    #[test]
    fn absent_interferers_give_exact_zeros() {
        let c = ScenarioConfig::baseline().with_network(2, 2, 2, 1, 1).with_prbs(3);
        let dep = Deployment::from_lsf(
            DMatrix::from_column_slice(2, 2, &[1e-7, 2e-8, 0.0, 0.0]),
            DMatrix::from_column_slice(2, 1, &[0.0, 0.0]),
            1,
            vec![0, 1],
            vec![2],
            3,
        )
        .unwrap();
        let emp = empirical_embb_moments(&dep, &c, 1_000).unwrap();
        let closed = MomentSetHalf::user(&dep, &c);
        assert_eq!(emp.kappa[(0, 1)], 0.0);
        assert_eq!(emp.varkappa[(0, 0)], 0.0);
        assert_eq!(closed.kappa[(0, 1)], 0.0);
        assert_eq!(closed.varkappa[(0, 0)], 0.0);
    }

    struct MomentSetHalf;
    impl MomentSetHalf {
        fn user(dep: &Deployment, c: &ScenarioConfig) -> UserMoments {
            embb_moments(&compute_stats(dep, c), dep, c)
        }
    }

    #[test]
    fn single_device_has_no_device_interference() {
        let c = ScenarioConfig::baseline().with_network(2, 2, 1, 1, 2).with_prbs(3);
        let dep = generate_deployment(&c);
        let emp = empirical_mmtc_moments(&dep, &c, 1_000).unwrap();
        assert_eq!(emp.eps_dd.shape(), (1, 1));
        assert_eq!(emp.eps_dd[(0, 0)], 0.0);
        assert!(emp.lambda[0] > 0.0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let c = small();
        let dep = generate_deployment(&c);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| (empirical_embb_moments(&dep, &c, 3_000).unwrap(), empirical_mmtc_moments(&dep, &c, 3_000).unwrap()))
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn delta_estimate_converges() {
        let c = small();
        let dep = generate_deployment(&c);
        let closed = MomentSetHalf::user(&dep, &c).delta[0];
        let coarse = empirical_embb_moments(&dep, &c.clone().with_seed(8), 1_000).unwrap().delta[0];
        let fine = empirical_embb_moments(&dep, &c.with_seed(8), 64_000).unwrap().delta[0];
        assert_relative_eq!(fine, closed, max_relative = 0.02);
        assert!(rel(closed, fine) <= rel(closed, coarse) + 0.005);
    }
}
