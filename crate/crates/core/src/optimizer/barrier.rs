//! Log-barrier interior-point method for maximizing a linear objective over
//! an intersection of strict concave inequalities h_i(z) > 0.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value and (optionally) derivatives of one constraint function.
pub struct Eval {
    pub value: f64,
    pub grad: DVector<f64>,
    /// `None` means the Hessian is zero.
    pub hess: Option<DMatrix<f64>>,
}

/// Twice differentiable constraint function. `value` alone is used by the
/// line search, so implementors can skip the derivatives there.
pub trait Smooth: Sync {
    fn value(&self, z: &DVector<f64>) -> f64;
    fn eval(&self, z: &DVector<f64>) -> Eval;
}

impl<F: Fn(&DVector<f64>) -> Eval + Sync> Smooth for F {
    fn value(&self, z: &DVector<f64>) -> f64 {
        self(z).value
    }

    fn eval(&self, z: &DVector<f64>) -> Eval {
        self(z)
    }
}

/// A constraint h(z) > 0 with h concave.
pub enum Inequality<'a> {
    /// a . z + b > 0.
    Linear { a: DVector<f64>, b: f64 },
    Concave(Box<dyn Smooth + 'a>),
}

impl Inequality<'_> {
    pub fn value(&self, z: &DVector<f64>) -> f64 {
        match self {
            Inequality::Linear { a, b } => a.dot(z) + b,
            Inequality::Concave(f) => f.value(z),
        }
    }

    fn eval(&self, z: &DVector<f64>) -> Eval {
        match self {
            Inequality::Linear { a, b } => Eval {
                value: a.dot(z) + b,
                grad: a.clone(),
                hess: None,
            },
            Inequality::Concave(f) => f.eval(z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierOptions {
    /// Target duality gap m / s.
    pub tolerance: f64,
    /// Barrier weight growth per centering step.
    pub growth: f64,
    pub initial_weight: f64,
    pub max_centering: usize,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            growth: 10.0,
            initial_weight: 1.0,
            max_centering: 200,
            max_newton: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierOutcome {
    pub z: DVector<f64>,
    pub objective: f64,
    pub centering_steps: usize,
    pub newton_steps: usize,
    /// Bound m / s on the suboptimality of `z`.
    pub gap: f64,
}

/// Centering stops once the Newton decrement squared / 2 drops below this.
const DECREMENT_TOL: f64 = 1e-6;
/// Backtracking gives up below this step length.
const MIN_STEP: f64 = 1e-6;

/// Maximizes `c . z` subject to every inequality, starting from a strictly
/// feasible `z0`.
pub fn maximize(c: &DVector<f64>, constraints: &[Inequality], z0: DVector<f64>, opts: &BarrierOptions) -> Result<BarrierOutcome> {
    if let Some((i, v)) = constraints
        .iter()
        .map(|h| h.value(&z0))
        .enumerate()
        .find(|(_, v)| !(*v > 0.0))
    {
        return Err(Error::NotStrictlyFeasible(format!("constraint {i} has value {v:e}")));
    }
    let m = constraints.len() as f64;
    let n = z0.len();
    let mut z = z0;
    let mut s = opts.initial_weight;
    let mut newton_steps = 0;

    // phi(trial) - phi(z) for phi = -s c.z - sum log h, computed from ratios
    // of constraint values so that a large s does not drown the decrease in
    // rounding noise; +inf outside the domain
    let phi_change = |values: &[f64], trial: &DVector<f64>, dz: &DVector<f64>, s: f64| -> f64 {
        let mut acc = -s * c.dot(dz);
        for (h, v0) in constraints.iter().zip(values) {
            let v = h.value(trial);
            if !(v > 0.0) {
                return f64::INFINITY;
            }
            acc -= ((v - v0) / v0).ln_1p();
        }
        acc
    };

    for centering in 1..=opts.max_centering {
        for _ in 0..opts.max_newton {
            let mut grad = -s * c;
            let mut hess = DMatrix::<f64>::zeros(n, n);
            for h in constraints {
                let e = h.eval(&z);
                let inv = 1.0 / e.value;
                grad -= &e.grad * inv;
                hess.ger(inv * inv, &e.grad, &e.grad, 1.0);
                if let Some(hh) = e.hess {
                    hess -= hh * inv;
                }
            }
            let step = newton_direction(&hess, &grad);
            let decrement = -grad.dot(&step);
            if !(decrement > 0.0) || decrement / 2.0 <= DECREMENT_TOL {
                break;
            }
            newton_steps += 1;
            let values: Vec<f64> = constraints.iter().map(|h| h.value(&z)).collect();
            let mut t = 1.0;
            loop {
                let dz = &step * t;
                let trial = &z + &dz;
                if phi_change(&values, &trial, &dz, s) <= -0.25 * t * decrement {
                    z = trial;
                    break;
                }
                t *= 0.5;
                if t < MIN_STEP {
                    break;
                }
            }
            if t < MIN_STEP {
                // no progress possible at this weight
                break;
            }
        }
        let gap = m / s;
        if gap <= opts.tolerance {
            return Ok(BarrierOutcome {
                objective: c.dot(&z),
                z,
                centering_steps: centering,
                newton_steps,
                gap,
            });
        }
        s *= opts.growth;
    }
    Err(Error::BarrierNotConverged {
        iterations: opts.max_centering,
        gap: m / s,
    })
}

/// Solves H d = -g by Cholesky on the Jacobi-scaled Hessian, regularizing
/// the diagonal if needed. The scaling keeps near-active box barriers from
/// wrecking the conditioning.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let n = hess.nrows();
    let d = DVector::from_iterator(n, hess.diagonal().iter().map(|v| 1.0 / v.abs().max(1e-300).sqrt()));
    let scaled = DMatrix::from_fn(n, n, |i, j| hess[(i, j)] * d[i] * d[j]);
    let g = grad.component_mul(&d);
    let mut shift = 0.0;
    loop {
        let mut h = scaled.clone();
        for i in 0..n {
            h[(i, i)] += shift;
        }
        if let Some(ch) = h.cholesky() {
            return -ch.solve(&g).component_mul(&d);
        }
        shift = if shift == 0.0 { 1e-12 } else { shift * 10.0 };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linear(a: &[f64], b: f64) -> Inequality<'static> {
        Inequality::Linear {
            a: DVector::from_row_slice(a),
            b,
        }
    }

    #[test]
    fn linear_program_vertex() {
        // max x + 2y s.t. x, y >= 0, x + y <= 1 -> (0, 1)
        let cons = vec![linear(&[1.0, 0.0], 0.0), linear(&[0.0, 1.0], 0.0), linear(&[-1.0, -1.0], 1.0)];
        let out = maximize(&DVector::from_row_slice(&[1.0, 2.0]), &cons, DVector::from_row_slice(&[0.2, 0.2]), &BarrierOptions::default()).unwrap();
        assert!((out.objective - 2.0).abs() <= 3e-7);
        assert!(out.gap <= 1e-7);
    }

    #[test]
    fn concave_disk() {
        // max x s.t. 1 - x^2 - y^2 > 0 -> x = 1
        let disk = Inequality::Concave(Box::new(|z: &DVector<f64>| Eval {
            value: 1.0 - z.norm_squared(),
            grad: -2.0 * z,
            hess: Some(DMatrix::identity(2, 2) * -2.0),
        }));
        let out = maximize(&DVector::from_row_slice(&[1.0, 0.0]), &[disk], DVector::zeros(2), &BarrierOptions::default()).unwrap();
        assert_relative_eq!(out.objective, 1.0, epsilon = 2e-7);
    }

    #[test]
    fn rejects_infeasible_start() {
        let cons = vec![linear(&[1.0], 0.0)];
        assert!(matches!(
            maximize(&DVector::from_row_slice(&[1.0]), &cons, DVector::from_row_slice(&[0.0]), &BarrierOptions::default()),
            Err(Error::NotStrictlyFeasible(_))
        ));
    }

    #[test]
    fn iteration_cap_reported() {
        let cons = vec![linear(&[1.0], 0.0), linear(&[-1.0], 1.0)];
        let opts = BarrierOptions {
            max_centering: 2,
            ..Default::default()
        };
        assert!(matches!(
            maximize(&DVector::from_row_slice(&[1.0]), &cons, DVector::from_row_slice(&[0.5]), &opts),
            Err(Error::BarrierNotConverged { .. })
        ));
    }
}
