use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel_stats::EstimationStats;
use crate::scenario::{Deployment, ScenarioConfig};

/// Dense M x K x N x L array of complex samples, AP index outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkArray {
    pub data: Vec<Complex64>,
    pub aps: usize,
    pub terminals: usize,
    pub prbs: usize,
    pub antennas: usize,
}

impl LinkArray {
    pub fn zeros(aps: usize, terminals: usize, prbs: usize, antennas: usize) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); aps * terminals * prbs * antennas],
            aps,
            terminals,
            prbs,
            antennas,
        }
    }

    fn offset(&self, m: usize, k: usize, n: usize) -> usize {
        ((m * self.terminals + k) * self.prbs + n) * self.antennas
    }

    /// The L-antenna vector of terminal `k` at AP `m` on PRB `n`.
    pub fn vector(&self, m: usize, k: usize, n: usize) -> &[Complex64] {
        let o = self.offset(m, k, n);
        &self.data[o..o + self.antennas]
    }

    pub fn vector_mut(&mut self, m: usize, k: usize, n: usize) -> &mut [Complex64] {
        let o = self.offset(m, k, n);
        &mut self.data[o..o + self.antennas]
    }
}

/// One realization of every small-scale quantity of a coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    /// User channels h_{m,u}[n].
    pub h: LinkArray,
    /// Device channels g_{m,d}[n].
    pub g: LinkArray,
    /// Noise on the despread pilot observation, indexed by pilot instead of terminal.
    pub pilot_noise: LinkArray,
    /// Receiver noise during data transmission (terminal axis of length 1).
    pub data_noise: LinkArray,
}

impl ChannelDraw {
    pub fn zeros(dep: &Deployment, config: &ScenarioConfig) -> Self {
        let (m, n, l) = (dep.num_aps(), config.num_prbs, config.antennas_per_ap);
        Self {
            h: LinkArray::zeros(m, dep.num_users(), n, l),
            g: LinkArray::zeros(m, dep.num_devices(), n, l),
            pilot_noise: LinkArray::zeros(m, dep.num_pilots, n, l),
            data_noise: LinkArray::zeros(m, 1, n, l),
        }
    }
}

/// MMSE channel estimates in the same layout as the true channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimates {
    pub h_hat: LinkArray,
    pub g_hat: LinkArray,
}

fn cn<R: Rng + ?Sized>(rng: &mut R, std: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * (std * std::f64::consts::FRAC_1_SQRT_2)
}

/// Draws i.i.d. CN(0, alpha) user and CN(0, beta) device channel entries,
/// independent across antennas and PRBs, plus pilot and data noise.
pub fn sample_channels<R: Rng + ?Sized>(dep: &Deployment, config: &ScenarioConfig, rng: &mut R) -> ChannelDraw {
    let mut draw = ChannelDraw::zeros(dep, config);
    sample_channels_into(&mut draw, dep, config, rng);
    draw
}

pub(crate) fn sample_channels_into<R: Rng + ?Sized>(
    draw: &mut ChannelDraw,
    dep: &Deployment,
    config: &ScenarioConfig,
    rng: &mut R,
) {
    let noise_std = config.noise_power_w().sqrt();
    for m in 0..dep.num_aps() {
        for u in 0..dep.num_users() {
            let std = dep.alpha[(m, u)].sqrt();
            for n in 0..config.num_prbs {
                draw.h.vector_mut(m, u, n).iter_mut().for_each(|x| *x = cn(rng, std));
            }
        }
        for d in 0..dep.num_devices() {
            let std = dep.beta[(m, d)].sqrt();
            for n in 0..config.num_prbs {
                draw.g.vector_mut(m, d, n).iter_mut().for_each(|x| *x = cn(rng, std));
            }
        }
    }
    for x in draw.pilot_noise.data.iter_mut().chain(draw.data_noise.data.iter_mut()) {
        *x = cn(rng, noise_std);
    }
}

/// Least-squares pilot observations followed by the scalar MMSE factor.
///
/// Every terminal on pilot p sees the same observation
/// y_p = sum sqrt(eta) h + sum sqrt(zeta) g + noise, so contamination is
/// reproduced exactly.
pub fn estimate_channels(draw: &ChannelDraw, dep: &Deployment, stats: &EstimationStats) -> ChannelEstimates {
    let mut out = ChannelEstimates {
        h_hat: LinkArray::zeros(draw.h.aps, draw.h.terminals, draw.h.prbs, draw.h.antennas),
        g_hat: LinkArray::zeros(draw.g.aps, draw.g.terminals, draw.g.prbs, draw.g.antennas),
    };
    let mut obs = draw.pilot_noise.clone();
    estimate_into(&mut out, &mut obs, draw, dep, stats);
    out
}

pub(crate) fn estimate_into(
    out: &mut ChannelEstimates,
    obs: &mut LinkArray,
    draw: &ChannelDraw,
    dep: &Deployment,
    stats: &EstimationStats,
) {
    obs.data.copy_from_slice(&draw.pilot_noise.data);
    let (m_aps, prbs) = (obs.aps, obs.prbs);
    for m in 0..m_aps {
        for n in 0..prbs {
            for u in 0..dep.num_users() {
                let s = stats.user_training[u].sqrt();
                let dst = obs.offset(m, dep.user_pilot[u], n);
                for (l, x) in draw.h.vector(m, u, n).iter().enumerate() {
                    obs.data[dst + l] += x * s;
                }
            }
            for d in 0..dep.num_devices() {
                let s = stats.device_training[d].sqrt();
                let dst = obs.offset(m, dep.device_pilot[d], n);
                for (l, x) in draw.g.vector(m, d, n).iter().enumerate() {
                    obs.data[dst + l] += x * s;
                }
            }
        }
    }
    for m in 0..m_aps {
        for u in 0..dep.num_users() {
            // sqrt(eta) alpha / c
            let f = stats.user_training[u].sqrt() * dep.alpha[(m, u)] / stats.c_user[(m, u)];
            for n in 0..prbs {
                let y = obs.vector(m, dep.user_pilot[u], n);
                for (dst, y) in out.h_hat.vector_mut(m, u, n).iter_mut().zip(y) {
                    *dst = y * f;
                }
            }
        }
        for d in 0..dep.num_devices() {
            // sqrt(zeta) beta / beta_bar
            let f = stats.device_training[d].sqrt() * stats.beta_hat[(m, d)];
            for n in 0..prbs {
                let y = obs.vector(m, dep.device_pilot[d], n);
                for (dst, y) in out.g_hat.vector_mut(m, d, n).iter_mut().zip(y) {
                    *dst = y * f;
                }
            }
        }
    }
}
