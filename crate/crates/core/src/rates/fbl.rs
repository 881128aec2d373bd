use std::f64::consts::{LN_2, SQRT_2};

/// Gaussian tail probability Q(x).
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Inverse of [`q_function`] by bisection to an absolute error below 1e-12.
///
/// Panics unless `0 < p < 1`.
pub fn q_inv(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "q_inv needs 0 < p < 1, got {p}");
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        // Q is decreasing
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// v_d = (log2 e / sqrt(n_d)) Q^{-1}(PER_d).
pub fn dispersion_scale(blocklength: usize, per: f64) -> f64 {
    std::f64::consts::LOG2_E / (blocklength as f64).sqrt() * q_inv(per)
}

pub fn shannon_rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// D(x) = sqrt(2x / (1 + x)).
pub fn dispersion(sinr: f64) -> f64 {
    if sinr.is_infinite() {
        return SQRT_2;
    }
    (2.0 * sinr / (1.0 + sinr)).sqrt()
}

/// Normal approximation C(rho) - v D(rho), clamped at zero.
pub fn fbl_rate(sinr: f64, dispersion_scale: f64) -> f64 {
    (shannon_rate(sinr) - dispersion_scale * dispersion(sinr)).max(0.0)
}

/// Smallest SINR whose finite-blocklength rate reaches `target` bits/Hz.
///
/// C(x) - v D(x) is increasing once sqrt(2x(1+x)) > v ln 2, and it is still
/// negative at that point, so every non-negative target is met on the
/// increasing branch and bisection there is exact.
pub(crate) fn fbl_sinr_threshold(target: f64, dispersion_scale: f64) -> f64 {
    let raw = |x: f64| shannon_rate(x) - dispersion_scale * dispersion(x);
    // start of the increasing branch
    let c = dispersion_scale * LN_2;
    let mut lo = (-1.0 + (1.0 + 2.0 * c * c).sqrt()) / 2.0;
    if raw(lo) >= target {
        return lo;
    }
    let mut hi = lo.max(1.0);
    while raw(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if raw(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}
