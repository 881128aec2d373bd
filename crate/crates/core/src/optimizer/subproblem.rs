//! Constraint set, phase-1 feasibility search and the epigraph subproblem.

use nalgebra::{DMatrix, DVector};

use super::barrier::{maximize, BarrierOptions, Eval, Inequality, Smooth};
use super::surrogate::DeviceSurrogate;
use crate::error::{Error, Result};
use crate::problem::{LinearFractional, PowerControlProblem, Regime};

/// Linear SINR floor sig x_i >= T (1 + w . x).
#[derive(Debug, Clone, PartialEq)]
pub struct SinrFloor {
    pub model: LinearFractional,
    pub threshold: f64,
    /// Positive constant making the margin roughly a relative SINR surplus.
    pub scale: f64,
}

impl SinrFloor {
    fn new(model: LinearFractional, threshold: f64) -> Self {
        let full = DVector::from_element(model.w.len(), 1.0);
        let scale = threshold.max(1e-12) * model.denominator(&full);
        Self { model, threshold, scale }
    }

    /// Scaled margin, positive iff the floor holds strictly.
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        self.model.margin(x, self.threshold) / self.scale
    }

    pub fn gradient(&self) -> DVector<f64> {
        self.model.margin_gradient(self.threshold) / self.scale
    }
}

/// Finite-blocklength rate constraint kept in surrogate form.
#[derive(Debug, Clone, PartialEq)]
pub struct FblRateConstraint {
    pub device: usize,
    /// Required spectral efficiency (N / psi) R^mMTC in bits/s/Hz.
    pub target: f64,
    pub dispersion_scale: f64,
}

/// Feasible set over budget-normalized powers x = theta / theta_max in (0, 1).
///
/// C1-C2 are the unit box; C4, C5 and (Shannon regime) C3 are linear SINR
/// floors; in the finite-blocklength regime C3 is C~ - v D~ >= target.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub dim: usize,
    pub floors: Vec<SinrFloor>,
    pub fbl_rate: Vec<FblRateConstraint>,
}

impl ConstraintSet {
    pub fn build(problem: &PowerControlProblem, regime: Regime) -> Self {
        let models = problem.sinr_models();
        let ku = problem.num_users();
        let user_threshold = problem.user_sinr_threshold();
        let mut floors = Vec::with_capacity(models.len());
        let mut fbl_rate = Vec::new();
        for (i, model) in models.into_iter().enumerate() {
            let threshold = if i < ku {
                user_threshold
            } else {
                let d = i - ku;
                match regime {
                    Regime::Shannon => problem.device_sinr_floor(d, regime),
                    Regime::FiniteBlocklength => {
                        fbl_rate.push(FblRateConstraint {
                            device: d,
                            target: problem.device_rate_target(),
                            dispersion_scale: problem.ee.dispersion_scale[d],
                        });
                        problem.sinr_min
                    }
                }
            };
            floors.push(SinrFloor::new(model, threshold));
        }
        Self {
            dim: problem.dim(),
            floors,
            fbl_rate,
        }
    }

    /// Same set with every rate constraint written as its exact SINR floor.
    pub fn linearized(problem: &PowerControlProblem, regime: Regime) -> Self {
        let mut set = Self::build(problem, Regime::Shannon);
        let ku = problem.num_users();
        for d in 0..problem.num_devices() {
            let floor = &mut set.floors[ku + d];
            *floor = SinrFloor::new(floor.model.clone(), problem.device_sinr_floor(d, regime));
        }
        set
    }

    /// Smallest scaled floor margin at x (positive iff all floors hold strictly).
    pub fn min_margin(&self, x: &DVector<f64>) -> f64 {
        self.floors.iter().map(|f| f.margin(x)).fold(f64::INFINITY, f64::min)
    }

    /// Barrier inequalities over z = (x, extra variables...).
    fn inequalities<'a>(&'a self, surrogates: &'a [DeviceSurrogate], len: usize) -> Vec<Inequality<'a>> {
        let n = self.dim;
        let mut out = Vec::new();
        for i in 0..n {
            let mut a = DVector::zeros(len);
            a[i] = 1.0;
            out.push(Inequality::Linear { a: a.clone(), b: 0.0 });
            out.push(Inequality::Linear { a: -a, b: 1.0 });
        }
        for f in &self.floors {
            let full = f.model.margin(&DVector::zeros(n), f.threshold) / f.scale;
            out.push(Inequality::Linear {
                a: pad(&f.gradient(), len),
                b: full,
            });
        }
        for c in &self.fbl_rate {
            out.push(Inequality::Concave(Box::new(RateTerm {
                surrogate: &surrogates[c.device],
                regime: Regime::FiniteBlocklength,
                dispersion_scale: c.dispersion_scale,
                dim: n,
                len,
                offset: c.target,
                slope: 0.0,
                epigraph: false,
            })));
        }
        out
    }
}

/// rate~(x) - slope x_own - offset [- t], concave in z = (x, t).
struct RateTerm<'a> {
    surrogate: &'a DeviceSurrogate,
    regime: Regime,
    dispersion_scale: f64,
    dim: usize,
    len: usize,
    offset: f64,
    slope: f64,
    /// Subtract the epigraph variable z[dim].
    epigraph: bool,
}

impl RateTerm<'_> {
    fn x(&self, z: &DVector<f64>) -> DVector<f64> {
        z.rows(0, self.dim).into_owned()
    }

    fn rate(&self, x: &DVector<f64>) -> f64 {
        match self.regime {
            Regime::Shannon => self.surrogate.capacity(x),
            Regime::FiniteBlocklength => self.surrogate.fbl_rate(x, self.dispersion_scale),
        }
    }
}

impl Smooth for RateTerm<'_> {
    fn value(&self, z: &DVector<f64>) -> f64 {
        let x = self.x(z);
        let t = if self.epigraph { z[self.dim] } else { 0.0 };
        self.rate(&x) - self.slope * x[self.surrogate.model.own] - self.offset - t
    }

    fn eval(&self, z: &DVector<f64>) -> Eval {
        let x = self.x(z);
        let s = self.surrogate;
        let (grad, hess) = match self.regime {
            Regime::Shannon => (s.capacity_grad(&x), s.capacity_hess(&x)),
            Regime::FiniteBlocklength => (
                s.capacity_grad(&x) - s.dispersion_grad(&x) * self.dispersion_scale,
                s.capacity_hess(&x) - s.dispersion_hess(&x) * self.dispersion_scale,
            ),
        };
        let mut g = pad(&grad, self.len);
        g[s.model.own] -= self.slope;
        if self.epigraph {
            g[self.dim] = -1.0;
        }
        Eval {
            value: self.value(z),
            grad: g,
            hess: Some(pad_matrix(&hess, self.len)),
        }
    }
}

fn pad(v: &DVector<f64>, len: usize) -> DVector<f64> {
    let mut out = DVector::zeros(len);
    out.rows_mut(0, v.len()).copy_from(v);
    out
}

fn pad_matrix(m: &DMatrix<f64>, len: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(len, len);
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// Maximizes the smallest scaled floor margin over the open unit box starting
/// from `x0` (clamped into the box). Returns the maximizer and its margin,
/// or [`Error::Infeasible`] if no point has a positive margin.
pub fn phase_one(set: &ConstraintSet, x0: &DVector<f64>, opts: &BarrierOptions) -> Result<(DVector<f64>, f64)> {
    let n = set.dim;
    let x0 = x0.map(|v| v.clamp(1e-3, 1.0 - 1e-3));
    let mut cons = set.inequalities(&[], n + 1);
    // floors become margin - s > 0
    let first_floor = 2 * n;
    for c in cons.iter_mut().skip(first_floor) {
        if let Inequality::Linear { a, .. } = c {
            a[n] = -1.0;
        }
    }
    let s0 = set.min_margin(&x0) - 1.0;
    let mut z0 = pad(&x0, n + 1);
    z0[n] = s0;
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    let out = maximize(&c, &cons, z0, opts)?;
    let x = out.z.rows(0, n).into_owned();
    let best = set.min_margin(&x);
    if best <= 1e-9 {
        return Err(Error::Infeasible { best_slack: best });
    }
    Ok((x, best))
}

/// Epigraph data of the device objective.
pub struct Objective<'a> {
    pub surrogates: &'a [DeviceSurrogate],
    pub regime: Regime,
    /// v_d per device.
    pub dispersion_scale: &'a [f64],
    /// mu_d Q_d per device (consumed power slope in normalized units).
    pub slope: &'a [f64],
    /// Theta_d per device.
    pub offset: &'a [f64],
}

impl Objective<'_> {
    /// Surrogate device rate in bits/s/Hz.
    pub fn rate(&self, d: usize, x: &DVector<f64>) -> f64 {
        let s = &self.surrogates[d];
        match self.regime {
            Regime::Shannon => s.capacity(x),
            Regime::FiniteBlocklength => s.fbl_rate(x, self.dispersion_scale[d]),
        }
    }

    pub fn power(&self, d: usize, x: &DVector<f64>) -> f64 {
        self.slope[d] * x[self.surrogates[d].model.own] + self.offset[d]
    }

    /// min_d rate_d / power_d.
    pub fn min_ratio(&self, x: &DVector<f64>) -> f64 {
        (0..self.surrogates.len())
            .map(|d| self.rate(d, x) / self.power(d, x))
            .fold(f64::INFINITY, f64::min)
    }

    fn value(&self, d: usize, x: &DVector<f64>, vartheta: f64) -> f64 {
        self.rate(d, x) - vartheta * self.power(d, x)
    }
}

/// Solves max_x min_d rate~_d(x) - vartheta power_d(x) over the constraint set
/// in epigraph form with the barrier method, starting from a strictly
/// feasible `start`. Returns the maximizer and the optimal value F(vartheta).
pub fn solve_inner(
    start: &DVector<f64>,
    vartheta: f64,
    set: &ConstraintSet,
    objective: &Objective,
    opts: &BarrierOptions,
) -> Result<(DVector<f64>, f64, usize)> {
    let n = set.dim;
    let len = n + 1;
    let mut cons = set.inequalities(objective.surrogates, len);
    for d in 0..objective.surrogates.len() {
        cons.push(Inequality::Concave(Box::new(RateTerm {
            surrogate: &objective.surrogates[d],
            regime: objective.regime,
            dispersion_scale: objective.dispersion_scale[d],
            dim: n,
            len,
            offset: vartheta * objective.offset[d],
            slope: vartheta * objective.slope[d],
            epigraph: true,
        })));
    }
    let t0 = (0..objective.surrogates.len())
        .map(|d| objective.value(d, start, vartheta))
        .fold(f64::INFINITY, f64::min);
    let mut z0 = pad(start, len);
    z0[n] = t0 - (1e-3 * t0.abs()).max(1e-6);
    let mut c = DVector::zeros(len);
    c[n] = 1.0;
    let out = maximize(&c, &cons, z0, opts)?;
    let x = out.z.rows(0, n).into_owned();
    // the epigraph variable sits strictly below the true min; report the min
    let value = (0..objective.surrogates.len())
        .map(|d| objective.value(d, &x, vartheta))
        .fold(f64::INFINITY, f64::min);
    Ok((x, value, out.newton_steps))
}
