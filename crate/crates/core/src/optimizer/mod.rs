//! Max-min energy-efficiency power control: sequential fractional
//! programming around generalized Dinkelbach, each parametric subproblem
//! solved by a log-barrier method on its epigraph form.
//!
//! All internal work happens in budget-normalized powers x = theta / theta_max
//! and in spectral efficiency (bits/s/Hz); results are reported in watts
//! and bits/Joule.

pub mod barrier;
pub mod dinkelbach;
pub mod subproblem;
pub mod surrogate;

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::{gfpc, mark_problem, Verdict, DEFAULT_KAPPA};
use crate::problem::{PowerControlProblem, Regime};
use crate::rates::{MomentSet, PowerVector};
use crate::scenario::{Deployment, ScenarioConfig};

pub use barrier::{maximize, BarrierOptions, BarrierOutcome, Eval, Inequality};
pub use dinkelbach::{dinkelbach, DinkelbachOutcome, InnerSolution};
pub use subproblem::{phase_one, solve_inner, ConstraintSet, Objective};
pub use surrogate::{capacity_surrogate, device_model, dispersion_surrogate, DeviceSurrogate, SurrogateValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Outer stop: ||theta - theta_bar||^2 / ||theta||^2 <= theta_tol.
    pub theta_tol: f64,
    /// Dinkelbach stop on F, in spectral-efficiency units (F0 (psi / N) in bits/Joule).
    pub f0: f64,
    pub max_outer: usize,
    pub max_dinkelbach: usize,
    /// Extrapolate each accepted outer step in log-power space while the true
    /// objective keeps improving. The surrogate is far more curved than the
    /// rate at high SINR, so plain outer steps crawl.
    #[serde(default = "default_extrapolate")]
    pub extrapolate: bool,
    pub barrier: BarrierOptions,
}

fn default_extrapolate() -> bool {
    true
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            theta_tol: 1e-10,
            f0: 1e-6,
            max_outer: 1000,
            max_dinkelbach: 50,
            extrapolate: true,
            barrier: BarrierOptions::default(),
        }
    }
}

/// One Dinkelbach iteration in the solver log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer: usize,
    pub iter: usize,
    /// vartheta in bits/Joule.
    pub vartheta: f64,
    /// F(vartheta) in spectral-efficiency units.
    pub f: f64,
    /// True min-EE at the iterate in bits/Joule.
    pub objective: f64,
    /// Largest relative constraint violation at the iterate (0 if none).
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTerminal {
    pub user_sinr: Vec<f64>,
    pub user_rates_bps: Vec<f64>,
    pub device_sinr: Vec<f64>,
    pub device_rates_bps: Vec<f64>,
    pub device_ee: Vec<f64>,
}

impl PerTerminal {
    pub fn evaluate(problem: &PowerControlProblem, theta: &PowerVector, regime: Regime) -> Self {
        Self {
            user_sinr: problem.user_sinr(theta),
            user_rates_bps: problem.user_rates_bps(theta),
            device_sinr: problem.device_sinr(theta),
            device_rates_bps: problem.device_rates_bps(theta, regime),
            device_ee: problem.energy_efficiency(theta, regime),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Absent when no feasible starting point exists.
    pub theta_star: Option<PowerVector>,
    /// min_d EE_d(theta*) in bits/Joule, 0 when infeasible.
    pub objective: f64,
    pub feasible: bool,
    pub verdict: Option<Verdict>,
    pub outer_iters: usize,
    /// Dinkelbach iterations summed over outer iterations.
    pub inner_iters: usize,
    /// Newton steps summed over every barrier solve.
    pub subproblem_iters: usize,
    /// True min-EE after every accepted outer iteration, starting point first.
    pub trace: Vec<f64>,
    /// F values of every Dinkelbach run, one vector per outer iteration.
    pub dinkelbach_f: Vec<Vec<f64>>,
    pub per_terminal: Option<PerTerminal>,
    pub log: Vec<TraceRecord>,
}

impl SolveResult {
    fn infeasible() -> Self {
        Self {
            theta_star: None,
            objective: 0.0,
            feasible: false,
            verdict: None,
            outer_iters: 0,
            inner_iters: 0,
            subproblem_iters: 0,
            trace: Vec::new(),
            dinkelbach_f: Vec::new(),
            per_terminal: None,
            log: Vec::new(),
        }
    }

    /// Writes the solver log as JSON lines.
    pub fn write_trace<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in &self.log {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

const START_MARGIN: f64 = 1e-9;

/// Finds a strictly feasible normalized start: the clamped `start` if it
/// already satisfies every floor, otherwise the phase-1 maximizer.
fn initial_point(problem: &PowerControlProblem, regime: Regime, start: Option<&PowerVector>, opts: &SolveOptions) -> Result<DVector<f64>> {
    let set = ConstraintSet::linearized(problem, regime);
    let x0 = match start {
        Some(theta) => problem.normalize(theta),
        None => DVector::from_element(problem.dim(), 0.5),
    }
    .map(|v| v.clamp(1e-4, 1.0 - 1e-4));
    if set.min_margin(&x0) >= START_MARGIN {
        return Ok(x0);
    }
    let (x, _) = phase_one(&set, &x0, &opts.barrier)?;
    Ok(x)
}

/// Longest geometric extension x_bar (x / x_bar)^a, a = 2, 4, ..., that stays
/// strictly feasible and keeps raising the true min-EE.
fn extrapolate(problem: &PowerControlProblem, regime: Regime, floors: &ConstraintSet, x_bar: &DVector<f64>, x: DVector<f64>, value: f64) -> (DVector<f64>, f64) {
    let (mut best_x, mut best) = (x.clone(), value);
    let mut alpha = 2.0;
    for _ in 0..40 {
        let cand = x_bar.zip_map(&x, |b, n| b * (n / b).powf(alpha));
        if cand.iter().any(|v| !(*v > 0.0 && *v < 1.0)) || floors.min_margin(&cand) < START_MARGIN {
            break;
        }
        let theta = problem.denormalize(&cand);
        if problem.check(&theta, regime, 0.0).worst() <= 0.0 {
            break;
        }
        let v = problem.min_ee(&theta, regime);
        if !(v > best) {
            break;
        }
        (best_x, best) = (cand, v);
        alpha *= 2.0;
    }
    (best_x, best)
}

fn max_violation(problem: &PowerControlProblem, theta: &PowerVector, regime: Regime) -> f64 {
    let worst = problem.check(theta, regime, 0.0).worst();
    (-worst).max(0.0)
}

/// Sequential fractional programming on one problem instance.
///
/// `start` seeds the search (G-FPC in [`sequential_fp`]); it need not be
/// feasible. Infeasible instances come back with `feasible = false`, no
/// `theta_star` and objective 0.
pub fn solve_problem(problem: &PowerControlProblem, regime: Regime, start: Option<&PowerVector>, options: &SolveOptions) -> Result<SolveResult> {
    let mut x_bar = match initial_point(problem, regime, start, options) {
        Ok(x) => x,
        Err(Error::Infeasible { best_slack }) => {
            log::debug!("no strictly feasible start (best margin {best_slack:e})");
            return Ok(SolveResult::infeasible());
        }
        Err(e) => return Err(e),
    };

    let kd = problem.num_devices();
    let ku = problem.num_users();
    let models = problem.sinr_models();
    let set = ConstraintSet::build(problem, regime);
    let floors = ConstraintSet::linearized(problem, regime);
    let slope: Vec<f64> = (0..kd)
        .map(|d| problem.ee.amp_inefficiency[d] * problem.device_budget[d])
        .collect();
    let prelog = problem.ee.prelog();

    let mut theta_bar = problem.denormalize(&x_bar);
    let mut best = problem.min_ee(&theta_bar, regime);
    let mut result = SolveResult::infeasible();
    result.trace.push(best);

    for outer in 0..options.max_outer {
        let surrogates = (0..kd)
            .map(|d| DeviceSurrogate::new(&models[ku + d], &x_bar))
            .collect::<Result<Vec<_>>>()?;
        let objective = Objective {
            surrogates: &surrogates,
            regime,
            dispersion_scale: &problem.ee.dispersion_scale,
            slope: &slope,
            offset: &problem.ee.static_power,
        };
        let mut iter = 0;
        let mut log = Vec::new();
        let out = dinkelbach(
            &x_bar,
            |x| objective.min_ratio(x),
            |start, vartheta| {
                let (x, value, steps) = solve_inner(start, vartheta, &set, &objective, &options.barrier)?;
                let theta = problem.denormalize(&x);
                log.push(TraceRecord {
                    outer,
                    iter,
                    vartheta: vartheta * prelog,
                    f: value,
                    objective: problem.min_ee(&theta, regime),
                    max_violation: max_violation(problem, &theta, regime),
                });
                iter += 1;
                Ok(InnerSolution { x, value, steps })
            },
            options.f0,
            options.max_dinkelbach,
        )?;
        result.log.extend(log);
        result.outer_iters += 1;
        result.inner_iters += out.f_values.len();
        result.subproblem_iters += out.solver_steps;
        result.dinkelbach_f.push(out.f_values);

        let mut x_new = out.x;
        let mut value = problem.min_ee(&problem.denormalize(&x_new), regime);
        if value < best {
            log::debug!("outer iteration {outer} lowered the objective ({value} < {best}); keeping the previous point");
            break;
        }
        if options.extrapolate {
            (x_new, value) = extrapolate(problem, regime, &floors, &x_bar, x_new, value);
        }
        let theta = problem.denormalize(&x_new);
        let diff: f64 = theta.stacked().iter().zip(theta_bar.stacked()).map(|(a, b)| (a - b).powi(2)).sum();
        let rel = diff / theta.norm_squared();
        best = value;
        result.trace.push(value);
        x_bar = x_new;
        theta_bar = theta;
        if rel <= options.theta_tol {
            break;
        }
    }

    let verdict = mark_problem(problem, &theta_bar, regime);
    result.feasible = verdict.feasible;
    result.objective = if verdict.feasible { best } else { 0.0 };
    result.per_terminal = Some(PerTerminal::evaluate(problem, &theta_bar, regime));
    result.theta_star = Some(theta_bar);
    result.verdict = Some(verdict);
    Ok(result)
}

/// Solves the instance `dep` with the given moments, starting from G-FPC.
pub fn sequential_fp(config: &ScenarioConfig, dep: &Deployment, moments: &MomentSet, regime: Regime) -> Result<SolveResult> {
    sequential_fp_with(config, dep, moments, regime, &SolveOptions::default())
}

pub fn sequential_fp_with(
    config: &ScenarioConfig,
    dep: &Deployment,
    moments: &MomentSet,
    regime: Regime,
    options: &SolveOptions,
) -> Result<SolveResult> {
    let problem = PowerControlProblem::new(moments.clone(), config);
    let start = gfpc(config, dep, DEFAULT_KAPPA).ok();
    solve_problem(&problem, regime, start.as_ref(), options)
}
