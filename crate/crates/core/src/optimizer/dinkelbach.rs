//! Generalized Dinkelbach iteration for max-min ratio problems.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Result of one parametric subproblem max_x min_k f_k(x) - vartheta g_k(x).
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub x: DVector<f64>,
    /// Optimal value F(vartheta).
    pub value: f64,
    /// Work spent (Newton steps for the barrier solver).
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DinkelbachOutcome {
    pub x: DVector<f64>,
    /// min_k f_k(x) / g_k(x) at the returned point.
    pub vartheta: f64,
    /// F(vartheta) of every iteration, in order.
    pub f_values: Vec<f64>,
    /// vartheta used by every iteration.
    pub varthetas: Vec<f64>,
    pub solver_steps: usize,
    pub converged: bool,
}

/// Runs Dinkelbach's method from `x_bar`.
///
/// `ratio(x)` returns min_k f_k(x) / g_k(x); `solve(start, vartheta)` solves
/// the parametric subproblem from a strictly feasible `start`. The first
/// vartheta is the ratio at `x_bar`, so F(vartheta) >= 0; afterwards
/// vartheta is the ratio at the latest maximizer. Stops once F <= f0.
pub fn dinkelbach<R, S>(x_bar: &DVector<f64>, ratio: R, mut solve: S, f0: f64, max_iter: usize) -> Result<DinkelbachOutcome>
where
    R: Fn(&DVector<f64>) -> f64,
    S: FnMut(&DVector<f64>, f64) -> Result<InnerSolution>,
{
    let mut x = x_bar.clone();
    let mut vartheta = ratio(&x);
    let mut f_values = Vec::new();
    let mut varthetas = Vec::new();
    let mut solver_steps = 0;
    for _ in 0..max_iter {
        let sol = solve(&x, vartheta)?;
        solver_steps += sol.steps;
        f_values.push(sol.value);
        varthetas.push(vartheta);
        x = sol.x;
        let next = ratio(&x);
        if sol.value <= f0 {
            return Ok(DinkelbachOutcome {
                x,
                vartheta: next,
                f_values,
                varthetas,
                solver_steps,
                converged: true,
            });
        }
        vartheta = next;
    }
    log::warn!("Dinkelbach stopped after {max_iter} iterations without reaching F <= {f0:e}");
    Ok(DinkelbachOutcome {
        vartheta: ratio(&x),
        x,
        f_values,
        varthetas,
        solver_steps,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::barrier::{maximize, BarrierOptions, Inequality};
    use approx::assert_relative_eq;

    /// max_x min_k (a_k x + b_k) / (c_k x + e_k) on 0 < x < 1 via the epigraph
    /// subproblem solved by the barrier method.
    fn toy(ratios: &[(f64, f64, f64, f64)]) -> DinkelbachOutcome {
        let ratio = |x: &DVector<f64>| {
            ratios
                .iter()
                .map(|(a, b, c, e)| (a * x[0] + b) / (c * x[0] + e))
                .fold(f64::INFINITY, f64::min)
        };
        let opts = BarrierOptions {
            tolerance: 1e-12,
            ..Default::default()
        };
        let solve = |start: &DVector<f64>, th: f64| {
            let mut cons = vec![
                Inequality::Linear { a: DVector::from_row_slice(&[1.0, 0.0]), b: 0.0 },
                Inequality::Linear { a: DVector::from_row_slice(&[-1.0, 0.0]), b: 1.0 },
            ];
            let mut t0 = f64::INFINITY;
            for (a, b, c, e) in ratios {
                cons.push(Inequality::Linear {
                    a: DVector::from_row_slice(&[a - th * c, -1.0]),
                    b: b - th * e,
                });
                t0 = t0.min((a - th * c) * start[0] + b - th * e);
            }
            let z0 = DVector::from_row_slice(&[start[0], t0 - 1.0]);
            let out = maximize(&DVector::from_row_slice(&[0.0, 1.0]), &cons, z0, &opts)?;
            Ok(InnerSolution {
                x: DVector::from_row_slice(&[out.z[0]]),
                value: out.objective,
                steps: out.newton_steps,
            })
        };
        dinkelbach(&DVector::from_row_slice(&[0.5]), ratio, solve, 1e-12, 50).unwrap()
    }

    #[test]
    fn single_ratio_optimum_at_box_edge() {
        // (2x + 1) / (x + 3) increases on [0, 1] -> 3/4 at x = 1
        let out = toy(&[(2.0, 1.0, 1.0, 3.0)]);
        assert!(out.converged);
        assert_relative_eq!(out.vartheta, 0.75, epsilon = 1e-8);
    }

    #[test]
    fn two_ratios_cross_in_the_interior() {
        // x / 1 and (1 - x) / 1 -> max-min 1/2 at x = 1/2
        let out = toy(&[(1.0, 0.0, 0.0, 1.0), (-1.0, 1.0, 0.0, 1.0)]);
        assert_relative_eq!(out.vartheta, 0.5, epsilon = 1e-8);
        // (x + 1) / (x + 2) and (2 - x) / 2: equal at x = sqrt(3) - 1
        let out = toy(&[(1.0, 1.0, 1.0, 2.0), (-1.0, 2.0, 0.0, 2.0)]);
        let x = 3f64.sqrt() - 1.0;
        assert_relative_eq!(out.vartheta, (2.0 - x) / 2.0, epsilon = 1e-8);
    }

    #[test]
    fn f_sequence_strictly_decreasing() {
        let out = toy(&[(1.0, 1.0, 1.0, 2.0), (-1.0, 2.0, 0.0, 2.0), (3.0, 0.1, 2.0, 1.0)]);
        assert!(out.f_values[0] >= 0.0);
        for w in out.f_values.windows(2) {
            assert!(w[1] < w[0]);
        }
        for w in out.varthetas.windows(2) {
            assert!(w[1] > w[0]);
        }
    }
}
