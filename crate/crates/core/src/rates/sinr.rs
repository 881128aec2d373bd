use super::{EEParams, MomentSet, PowerVector};

/// Broadband-user SINR for every user.
pub fn embb_sinr(moments: &MomentSet, theta: &PowerVector) -> Vec<f64> {
    let ku = moments.num_users();
    (0..ku)
        .map(|u| {
            let users: f64 = (0..ku).filter(|&k| k != u).map(|k| moments.kappa[(u, k)] * theta.p[k]).sum();
            let devices: f64 = theta.q.iter().enumerate().map(|(d, q)| moments.varkappa[(u, d)] * q).sum();
            let signal = moments.delta[u] * theta.p[u];
            signal / (moments.upsilon[u] * theta.p[u] + users + devices + moments.xi[u])
        })
        .collect()
}

/// Denominator of the device SINR, nu q_d + sum eps q_k + sum eps p_u + chi.
pub fn mmtc_interference(moments: &MomentSet, theta: &PowerVector, d: usize) -> f64 {
    let devices: f64 = theta
        .q
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != d)
        .map(|(k, q)| moments.eps_dd[(d, k)] * q)
        .sum();
    let users: f64 = theta.p.iter().enumerate().map(|(u, p)| moments.eps_du[(d, u)] * p).sum();
    moments.nu[d] * theta.q[d] + devices + users + moments.chi[d]
}

/// Despread device SINR for every device.
pub fn mmtc_sinr(moments: &MomentSet, theta: &PowerVector) -> Vec<f64> {
    (0..moments.num_devices())
        .map(|d| moments.lambda[d] * theta.q[d] / mmtc_interference(moments, theta, d))
        .collect()
}

/// EE_d = (psi / N) R_d / (mu_d q_d + Theta_d), bits per Joule.
pub fn energy_efficiency(theta: &PowerVector, mmtc_rates: &[f64], params: &EEParams) -> Vec<f64> {
    mmtc_rates
        .iter()
        .enumerate()
        .map(|(d, r)| params.prelog() * r / params.consumed_power(d, theta.q[d]))
        .collect()
}
