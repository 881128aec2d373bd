//! Monte Carlo batches over random deployments and their CDFs.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::{fpc, gfpc, mark_problem, upc, DEFAULT_KAPPA};
use crate::optimizer::{solve_problem, SolveOptions};
use crate::problem::{PowerControlProblem, Regime};
use crate::rates::PowerVector;
use crate::scenario::{generate_deployment_indexed, Deployment, ScenarioConfig};

/// Power-control policy applied to every instance of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Policy {
    Upc,
    Fpc,
    Gfpc { kappa: f64 },
    /// Optimized power control (sequential fractional programming).
    Opc,
}

impl Policy {
    pub fn all() -> [Policy; 4] {
        [Policy::Opc, Policy::Upc, Policy::Fpc, Policy::Gfpc { kappa: DEFAULT_KAPPA }]
    }

    pub fn label(&self) -> String {
        match self {
            Policy::Upc => "upc".into(),
            Policy::Fpc => "fpc".into(),
            Policy::Gfpc { kappa } if *kappa == DEFAULT_KAPPA => "gfpc".into(),
            Policy::Gfpc { kappa } => format!("gfpc({kappa})"),
            Policy::Opc => "opc".into(),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "upc" => Ok(Policy::Upc),
            "fpc" => Ok(Policy::Fpc),
            "gfpc" | "g-fpc" => Ok(Policy::Gfpc { kappa: DEFAULT_KAPPA }),
            "opc" => Ok(Policy::Opc),
            other => Err(Error::InvalidConfig(format!("unknown policy {other:?} (upc, fpc, gfpc, opc)"))),
        }
    }
}

/// Everything recorded for one instance. Infeasible instances report zero
/// EE and zero rates, matching the plotting convention for infeasible points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub index: u64,
    pub feasible: bool,
    pub theta: Option<PowerVector>,
    /// min_d EE_d in bits/Joule.
    pub min_ee: f64,
    pub device_ee: Vec<f64>,
    pub device_rates_bps: Vec<f64>,
    pub user_rates_bps: Vec<f64>,
    /// Raw values at theta regardless of feasibility (for diagnostics).
    pub raw_min_ee: f64,
    pub raw_min_user_rate_bps: f64,
    pub error: Option<String>,
}

impl InstanceOutcome {
    pub fn min_user_rate_bps(&self) -> f64 {
        let m = self.user_rates_bps.iter().copied().fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            m
        } else {
            0.0
        }
    }

    fn failed(index: u64, problem: &PowerControlProblem, error: String) -> Self {
        Self {
            index,
            feasible: false,
            theta: None,
            min_ee: 0.0,
            device_ee: vec![0.0; problem.num_devices()],
            device_rates_bps: vec![0.0; problem.num_devices()],
            user_rates_bps: vec![0.0; problem.num_users()],
            raw_min_ee: 0.0,
            raw_min_user_rate_bps: 0.0,
            error: Some(error),
        }
    }

    fn evaluate(index: u64, problem: &PowerControlProblem, theta: PowerVector, feasible: bool, regime: Regime) -> Self {
        let ee = problem.energy_efficiency(&theta, regime);
        let user_rates = problem.user_rates_bps(&theta);
        let device_rates = problem.device_rates_bps(&theta, regime);
        let raw_min_ee = ee.iter().copied().fold(f64::INFINITY, f64::min);
        let raw_min_user_rate_bps = user_rates.iter().copied().fold(f64::INFINITY, f64::min);
        let keep = |v: Vec<f64>| if feasible { v } else { vec![0.0; v.len()] };
        Self {
            index,
            feasible,
            min_ee: if feasible { raw_min_ee } else { 0.0 },
            device_ee: keep(ee),
            device_rates_bps: keep(device_rates),
            user_rates_bps: keep(user_rates),
            raw_min_ee,
            raw_min_user_rate_bps,
            theta: Some(theta),
            error: None,
        }
    }
}

/// Applies `policy` to one problem instance.
pub fn run_instance(
    index: u64,
    config: &ScenarioConfig,
    dep: &Deployment,
    problem: &PowerControlProblem,
    policy: Policy,
    regime: Regime,
    options: &SolveOptions,
) -> InstanceOutcome {
    let theta = match policy {
        Policy::Upc => Ok(upc(config)),
        Policy::Fpc => fpc(config, dep),
        Policy::Gfpc { kappa } => gfpc(config, dep, kappa),
        Policy::Opc => {
            let start = gfpc(config, dep, DEFAULT_KAPPA).ok();
            match solve_problem(problem, regime, start.as_ref(), options) {
                Ok(res) => match res.theta_star {
                    Some(theta) => return InstanceOutcome::evaluate(index, problem, theta, res.feasible, regime),
                    None => return InstanceOutcome::failed(index, problem, "no feasible starting point".into()),
                },
                Err(e) => Err(e),
            }
        }
    };
    match theta {
        Ok(theta) => {
            let feasible = mark_problem(problem, &theta, regime).feasible;
            InstanceOutcome::evaluate(index, problem, theta, feasible, regime)
        }
        Err(e) => {
            log::warn!("instance {index}: policy {policy} failed: {e}");
            InstanceOutcome::failed(index, problem, e.to_string())
        }
    }
}

/// Outcomes of one batch, ordered by instance index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub label: String,
    pub policy: Policy,
    pub regime: Regime,
    pub instances: Vec<InstanceOutcome>,
}

impl BatchResult {
    pub fn feasible_fraction(&self) -> f64 {
        if self.instances.is_empty() {
            return 0.0;
        }
        self.instances.iter().filter(|o| o.feasible).count() as f64 / self.instances.len() as f64
    }

    /// One sample per instance: min_d EE_d.
    pub fn min_ee_cdf(&self) -> CdfSeries {
        CdfSeries::new(
            format!("{} min-EE [bit/J]", self.label),
            self.instances.iter().map(|o| (o.min_ee, o.feasible)).collect(),
        )
    }

    /// One sample per device, pooled over instances.
    pub fn device_ee_cdf(&self) -> CdfSeries {
        CdfSeries::new(
            format!("{} device EE [bit/J]", self.label),
            self.instances
                .iter()
                .flat_map(|o| o.device_ee.iter().map(move |v| (*v, o.feasible)))
                .collect(),
        )
    }

    /// One sample per instance: min_u user rate.
    pub fn min_user_rate_cdf(&self) -> CdfSeries {
        CdfSeries::new(
            format!("{} min user rate [bit/s]", self.label),
            self.instances.iter().map(|o| (o.min_user_rate_bps(), o.feasible)).collect(),
        )
    }

    /// One sample per user, pooled over instances.
    pub fn user_rate_cdf(&self) -> CdfSeries {
        CdfSeries::new(
            format!("{} user rate [bit/s]", self.label),
            self.instances
                .iter()
                .flat_map(|o| o.user_rates_bps.iter().map(move |v| (*v, o.feasible)))
                .collect(),
        )
    }
}

/// Runs `n_instances` independent deployments in parallel on the current
/// rayon pool. Instance i always uses deployment stream i, so the result
/// does not depend on the number of workers.
pub fn run_batch(config: &ScenarioConfig, policy: Policy, n_instances: usize, regime: Regime) -> Result<BatchResult> {
    run_batch_with(config, policy, n_instances, regime, &SolveOptions::default(), |dep| {
        Ok(PowerControlProblem::from_deployment(dep, config))
    })
}

/// [`run_batch`] with a custom problem builder (used for the OMA model).
pub fn run_batch_with<B>(
    config: &ScenarioConfig,
    policy: Policy,
    n_instances: usize,
    regime: Regime,
    options: &SolveOptions,
    build: B,
) -> Result<BatchResult>
where
    B: Fn(&Deployment) -> Result<PowerControlProblem> + Sync,
{
    config.validate()?;
    let instances = (0..n_instances as u64)
        .into_par_iter()
        .map(|i| {
            let dep = generate_deployment_indexed(config, i);
            let problem = build(&dep)?;
            Ok(run_instance(i, config, &dep, &problem, policy, regime, options))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchResult {
        label: policy.label(),
        policy,
        regime,
        instances,
    })
}

/// Empirical CDF. Samples are sorted ascending by value (ties keep their
/// input order); infeasible samples carry value 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSeries {
    pub label: String,
    pub values: Vec<f64>,
    pub feasible: Vec<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CdfRow {
    value: f64,
    cdf: f64,
    feasible_flag: u8,
}

impl CdfSeries {
    pub fn new(label: impl Into<String>, mut samples: Vec<(f64, bool)>) -> Self {
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (values, feasible) = samples.into_iter().unzip();
        Self {
            label: label.into(),
            values,
            feasible,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn feasible_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.feasible.iter().filter(|f| **f).count() as f64 / self.len() as f64
    }

    /// Lower empirical quantile: the smallest value v with F(v) >= p.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptySeries);
        }
        let n = self.len();
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        Ok(self.values[k - 1])
    }

    /// CSV with columns `value,cdf,feasible_flag`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.len() as f64;
        for (i, (v, f)) in self.values.iter().zip(&self.feasible).enumerate() {
            w.serialize(CdfRow {
                value: *v,
                cdf: (i + 1) as f64 / n,
                feasible_flag: *f as u8,
            })
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(label: impl Into<String>, input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut samples = Vec::new();
        for row in r.deserialize() {
            let row: CdfRow = row.map_err(csv_error)?;
            samples.push((row.value, row.feasible_flag != 0));
        }
        Ok(Self::new(label, samples))
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Dataset(format!("CSV: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig::baseline().with_network(4, 2, 1, 3, 2).with_prbs(63).with_seed(5)
    }

    #[test]
    fn policy_parse_round_trip() {
        for p in Policy::all() {
            assert_eq!(p.label().parse::<Policy>().unwrap(), p);
        }
        assert!("nope".parse::<Policy>().is_err());
    }

    #[test]
    fn cdf_is_sorted_and_ends_at_one() {
        let s = CdfSeries::new("x", vec![(3.0, true), (0.0, false), (1.0, true)]);
        assert_eq!(s.values, vec![0.0, 1.0, 3.0]);
        assert_eq!(s.feasible, vec![false, true, true]);
        assert!((s.feasible_fraction() - 2.0 / 3.0).abs() < 1e-15);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("value,cdf,feasible_flag\n"));
        assert!(text.trim_end().ends_with("3.0,1.0,1"));
        assert_eq!(CdfSeries::read_csv("x", buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn quantile_picks_lower_sample() {
        let s = CdfSeries::new("x", (1..=20).map(|v| (v as f64, true)).collect());
        assert_eq!(s.quantile(0.05).unwrap(), 1.0);
        assert_eq!(s.quantile(0.5).unwrap(), 10.0);
        assert_eq!(s.quantile(1.0).unwrap(), 20.0);
        assert!(CdfSeries::new("e", vec![]).quantile(0.5).is_err());
    }

    #[test]
    fn infeasible_instances_report_zero() {
        let mut c = tiny();
        c.sinr_min = 1e9;
        let b = run_batch(&c, Policy::Upc, 4, Regime::Shannon).unwrap();
        assert_eq!(b.feasible_fraction(), 0.0);
        assert!(b.instances.iter().all(|o| o.min_ee == 0.0 && o.device_ee.iter().all(|v| *v == 0.0)));
        assert!(b.instances.iter().all(|o| o.raw_min_ee > 0.0));
    }

    #[test]
    fn opc_beats_heuristics_per_instance() {
        let c = tiny();
        let opc = run_batch(&c, Policy::Opc, 6, Regime::Shannon).unwrap();
        for p in [Policy::Upc, Policy::Fpc, Policy::Gfpc { kappa: DEFAULT_KAPPA }] {
            let h = run_batch(&c, p, 6, Regime::Shannon).unwrap();
            for (a, b) in opc.instances.iter().zip(&h.instances) {
                if b.feasible {
                    assert!(a.feasible);
                    assert!(a.min_ee >= b.min_ee * (1.0 - 1e-9), "{p}: {} < {}", a.min_ee, b.min_ee);
                }
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let c = tiny();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_batch(&c, Policy::Opc, 4, Regime::FiniteBlocklength).unwrap())
        };
        let (a, b) = (run(1), run(3));
        let csv = |r: &BatchResult| {
            let mut buf = Vec::new();
            r.min_ee_cdf().write_csv(&mut buf).unwrap();
            buf
        };
        assert_eq!(csv(&a), csv(&b));
        assert_eq!(a, b);
    }
}
