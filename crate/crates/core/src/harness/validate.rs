//! Closed-form moments against the Monte Carlo oracle.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mc_oracle::{empirical_embb_moments, empirical_mmtc_moments};
use crate::rates::{DeviceMoments, MomentSet, UserMoments};
use crate::scenario::{generate_deployment, Deployment, ScenarioConfig};

pub const USER_TOLERANCE: f64 = 0.03;
pub const DEVICE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    /// Moment symbol, e.g. `kappa`.
    pub moment: String,
    /// Terminal indices, e.g. `[0, 2]`.
    pub index: Vec<usize>,
    pub closed_form: f64,
    pub empirical: f64,
    /// |empirical - closed| / |closed|; 0 when both are exactly zero.
    pub rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl MomentRow {
    fn new(moment: &str, index: Vec<usize>, closed_form: f64, empirical: f64, tolerance: f64) -> Self {
        let rel_error = if closed_form == 0.0 {
            if empirical == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (empirical - closed_form).abs() / closed_form.abs()
        };
        Self {
            moment: moment.into(),
            index,
            closed_form,
            empirical,
            rel_error,
            tolerance,
            pass: rel_error <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config_digest: String,
    pub user_draws: usize,
    pub device_draws: usize,
    pub rows: Vec<MomentRow>,
    pub user_seconds: f64,
    pub device_seconds: f64,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn worst(&self, user_side: bool) -> Option<&MomentRow> {
        let users = ["delta", "upsilon", "kappa", "varkappa", "xi"];
        self.rows
            .iter()
            .filter(|r| users.contains(&r.moment.as_str()) == user_side)
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    /// CSV with one row per moment entry.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["moment", "index", "closed_form", "empirical", "rel_error", "tolerance", "pass"])
            .map_err(super::batch::csv_error)?;
        for r in &self.rows {
            let idx = r.index.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(":");
            w.write_record([
                r.moment.clone(),
                idx,
                r.closed_form.to_string(),
                r.empirical.to_string(),
                r.rel_error.to_string(),
                r.tolerance.to_string(),
                r.pass.to_string(),
            ])
            .map_err(super::batch::csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn vector_rows(out: &mut Vec<MomentRow>, name: &str, closed: &[f64], emp: &[f64], tol: f64) {
    for (i, (c, e)) in closed.iter().zip(emp).enumerate() {
        out.push(MomentRow::new(name, vec![i], *c, *e, tol));
    }
}

/// Off-diagonal entries only when `skip_diagonal` (those are zero by definition).
fn matrix_rows(out: &mut Vec<MomentRow>, name: &str, closed: &DMatrix<f64>, emp: &DMatrix<f64>, skip_diagonal: bool, tol: f64) {
    for i in 0..closed.nrows() {
        for j in 0..closed.ncols() {
            if skip_diagonal && i == j {
                continue;
            }
            out.push(MomentRow::new(name, vec![i, j], closed[(i, j)], emp[(i, j)], tol));
        }
    }
}

pub fn compare_user(closed: &UserMoments, emp: &UserMoments, tol: f64) -> Vec<MomentRow> {
    let mut rows = Vec::new();
    vector_rows(&mut rows, "delta", &closed.delta, &emp.delta, tol);
    vector_rows(&mut rows, "upsilon", &closed.upsilon, &emp.upsilon, tol);
    matrix_rows(&mut rows, "kappa", &closed.kappa, &emp.kappa, true, tol);
    matrix_rows(&mut rows, "varkappa", &closed.varkappa, &emp.varkappa, false, tol);
    vector_rows(&mut rows, "xi", &closed.xi, &emp.xi, tol);
    rows
}

pub fn compare_device(closed: &DeviceMoments, emp: &DeviceMoments, tol: f64) -> Vec<MomentRow> {
    let mut rows = Vec::new();
    vector_rows(&mut rows, "lambda", &closed.lambda, &emp.lambda, tol);
    vector_rows(&mut rows, "nu", &closed.nu, &emp.nu, tol);
    matrix_rows(&mut rows, "eps_dd", &closed.eps_dd, &emp.eps_dd, true, tol);
    matrix_rows(&mut rows, "eps_du", &closed.eps_du, &emp.eps_du, false, tol);
    vector_rows(&mut rows, "chi", &closed.chi, &emp.chi, tol);
    rows
}

/// Compares every closed-form moment of `dep` with its oracle estimate.
/// A draw count of zero skips that side.
pub fn validate_deployment(dep: &Deployment, config: &ScenarioConfig, user_draws: usize, device_draws: usize) -> Result<ValidationReport> {
    let closed = MomentSet::closed_form(dep, config);
    let mut rows = Vec::new();
    let mut user_seconds = 0.0;
    let mut device_seconds = 0.0;
    if user_draws > 0 {
        let t = Instant::now();
        let emp = empirical_embb_moments(dep, config, user_draws)?;
        user_seconds = t.elapsed().as_secs_f64();
        rows.extend(compare_user(&closed.user_half(), &emp, USER_TOLERANCE));
    }
    if device_draws > 0 {
        let t = Instant::now();
        let emp = empirical_mmtc_moments(dep, config, device_draws)?;
        device_seconds = t.elapsed().as_secs_f64();
        rows.extend(compare_device(&closed.device_half(), &emp, DEVICE_TOLERANCE));
    }
    Ok(ValidationReport {
        config_digest: config.digest(),
        user_draws,
        device_draws,
        rows,
        user_seconds,
        device_seconds,
    })
}

/// [`validate_deployment`] on the deployment drawn from `config`'s seed.
pub fn validate(config: &ScenarioConfig, user_draws: usize, device_draws: usize) -> Result<ValidationReport> {
    config.validate()?;
    validate_deployment(&generate_deployment(config), config, user_draws, device_draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::rates::{embb_moments, mmtc_moments};

    #[test]
    fn zero_interferers_give_exact_zeros() {
        // two users and two devices on disjoint APs with orthogonal pilots
        let alpha = DMatrix::from_row_slice(4, 2, &[1e-9, 0.0, 0.0, 2e-9, 0.0, 0.0, 0.0, 0.0]);
        let beta = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 3e-9, 0.0, 0.0, 1e-9]);
        let dep = Deployment::from_lsf(alpha, beta, 1, vec![0, 1], vec![2, 3], 4).unwrap();
        let c = ScenarioConfig::baseline().with_network(4, 2, 2, 2, 1).with_prbs(7);
        let report = validate_deployment(&dep, &c, 1000, 1000).unwrap();
        for r in report.rows.iter().filter(|r| matches!(r.moment.as_str(), "kappa" | "varkappa" | "eps_dd" | "eps_du")) {
            assert_eq!(r.closed_form, 0.0, "{r:?}");
            assert_eq!(r.empirical, 0.0, "{r:?}");
            assert!(r.pass);
        }
    }

    #[test]
    fn report_is_reproducible_and_flags_mismatch() {
        let c = ScenarioConfig::baseline().with_network(3, 2, 2, 3, 2).with_prbs(7);
        let a = validate(&c, 2000, 1000).unwrap();
        let b = validate(&c, 2000, 1000).unwrap();
        assert_eq!(a.rows, b.rows);
        let dep = generate_deployment(&c);
        let stats = crate::channel_stats::compute_stats(&dep, &c);
        let mut wrong = embb_moments(&stats, &dep, &c);
        wrong.delta[0] *= 1.2;
        let rows = compare_user(&wrong, &embb_moments(&stats, &dep, &c), USER_TOLERANCE);
        assert!(rows.iter().any(|r| !r.pass && r.moment == "delta"));
        let dev = mmtc_moments(&stats, &dep, &c);
        assert!(compare_device(&dev, &dev, DEVICE_TOLERANCE).iter().all(|r| r.pass && r.rel_error == 0.0));
    }

    #[test]
    fn too_few_draws_is_an_error() {
        let c = ScenarioConfig::baseline().with_network(3, 2, 2, 3, 2).with_prbs(7);
        assert!(matches!(validate(&c, 10, 0), Err(Error::TooFewDraws { .. })));
    }
}
