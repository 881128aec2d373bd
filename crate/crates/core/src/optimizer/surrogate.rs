//! Touching concave lower bound of the device capacity and convex upper
//! bound of the channel-dispersion term.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::LinearFractional;
use crate::rates::{dispersion, shannon_rate, MomentSet, PowerVector};

/// Both surrogates of one device, expanded at x_bar.
///
/// With A(x) = sig x_d + 1 + w . x (signal plus interference plus noise),
/// rho_bar the SINR at x_bar and A_bar = A(x_bar):
///
/// C~(x) = log2(1 + rho_bar) + (rho_bar / ln 2) (2 sqrt(x_d / x_bar_d) - A(x) / A_bar - 1)
/// D~(x) = (D(rho_bar) / 2) (A_bar / A(x) + x_d / x_bar_d)
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSurrogate {
    pub model: LinearFractional,
    x_bar_own: f64,
    a_bar: f64,
    rho_bar: f64,
    d_bar: f64,
    /// d A / d x.
    a_grad: DVector<f64>,
}

impl DeviceSurrogate {
    pub fn new(model: &LinearFractional, x_bar: &DVector<f64>) -> Result<Self> {
        let own = x_bar[model.own];
        if !(own > 0.0) {
            return Err(Error::SurrogateDomain(format!(
                "expansion point has non-positive own power {own:e}"
            )));
        }
        let rho_bar = model.sinr(x_bar);
        let mut a_grad = model.w.clone();
        a_grad[model.own] += model.sig;
        Ok(Self {
            x_bar_own: own,
            a_bar: model.sig * own + model.denominator(x_bar),
            rho_bar,
            d_bar: dispersion(rho_bar),
            a_grad,
            model: model.clone(),
        })
    }

    fn total(&self, x: &DVector<f64>) -> f64 {
        self.model.sig * x[self.model.own] + self.model.denominator(x)
    }

    pub fn capacity(&self, x: &DVector<f64>) -> f64 {
        let gamma = 2.0 * (x[self.model.own] / self.x_bar_own).sqrt() - self.total(x) / self.a_bar;
        shannon_rate(self.rho_bar) + self.rho_bar / LN_2 * (gamma - 1.0)
    }

    pub fn capacity_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let k = self.rho_bar / LN_2;
        let mut g = &self.a_grad * (-k / self.a_bar);
        g[self.model.own] += k / (x[self.model.own] * self.x_bar_own).sqrt();
        g
    }

    pub fn capacity_hess(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        let i = self.model.own;
        let mut h = DMatrix::zeros(n, n);
        h[(i, i)] = -self.rho_bar / LN_2 * 0.5 * x[i].powf(-1.5) / self.x_bar_own.sqrt();
        h
    }

    pub fn dispersion(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.d_bar * (self.a_bar / self.total(x) + x[self.model.own] / self.x_bar_own)
    }

    pub fn dispersion_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let a = self.total(x);
        let mut g = &self.a_grad * (-0.5 * self.d_bar * self.a_bar / (a * a));
        g[self.model.own] += 0.5 * self.d_bar / self.x_bar_own;
        g
    }

    pub fn dispersion_hess(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let a = self.total(x);
        &self.a_grad * self.a_grad.transpose() * (self.d_bar * self.a_bar / (a * a * a))
    }

    /// C~ - v D~, the surrogate finite-blocklength rate.
    pub fn fbl_rate(&self, x: &DVector<f64>, v: f64) -> f64 {
        self.capacity(x) - v * self.dispersion(x)
    }
}

/// Surrogate value and gradient with respect to theta (watts, users first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateValue {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// SINR model of device d over unnormalized powers.
pub fn device_model(moments: &MomentSet, d: usize) -> LinearFractional {
    let (ku, kd) = (moments.num_users(), moments.num_devices());
    let noise = moments.chi[d];
    let mut w = DVector::zeros(ku + kd);
    for u in 0..ku {
        w[u] = moments.eps_du[(d, u)] / noise;
    }
    for k in 0..kd {
        w[ku + k] = if k == d { moments.nu[d] } else { moments.eps_dd[(d, k)] } / noise;
    }
    LinearFractional {
        own: ku + d,
        sig: moments.lambda[d] / noise,
        w,
    }
}

fn surrogate_at(theta_bar: &PowerVector, moments: &MomentSet, d: usize) -> Result<DeviceSurrogate> {
    DeviceSurrogate::new(&device_model(moments, d), &DVector::from_vec(theta_bar.stacked()))
}

/// Concave lower bound of log2(1 + rho_d(theta)) touching at theta_bar.
pub fn capacity_surrogate(theta: &PowerVector, theta_bar: &PowerVector, moments: &MomentSet, d: usize) -> Result<SurrogateValue> {
    let s = surrogate_at(theta_bar, moments, d)?;
    let x = DVector::from_vec(theta.stacked());
    Ok(SurrogateValue {
        value: s.capacity(&x),
        gradient: s.capacity_grad(&x).iter().copied().collect(),
    })
}

/// Convex upper bound of sqrt(2 rho_d / (1 + rho_d)) touching at theta_bar.
pub fn dispersion_surrogate(theta: &PowerVector, theta_bar: &PowerVector, moments: &MomentSet, d: usize) -> Result<SurrogateValue> {
    let s = surrogate_at(theta_bar, moments, d)?;
    let x = DVector::from_vec(theta.stacked());
    Ok(SurrogateValue {
        value: s.dispersion(&x),
        gradient: s.dispersion_grad(&x).iter().copied().collect(),
    })
}
