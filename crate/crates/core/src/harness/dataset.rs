//! Training datasets of (LSF, optimal power) tuples for learned power control.
//!
//! Each scenario produces `<name>.jsonl`: a header line followed by one
//! [`DatasetRecord`] per line, plus `<name>.train.txt`, `<name>.val.txt` and
//! `<name>.test.txt` listing record ids (80/10/10).

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::{gfpc, mark_problem, DEFAULT_KAPPA};
use crate::optimizer::{solve_problem, SolveOptions};
use crate::problem::{PowerControlProblem, Regime};
use crate::rates::PowerVector;
use crate::rng::{stream, Domain};
use crate::scenario::{generate_deployment_indexed, Deployment, ScenarioConfig};

pub const SCHEMA: &str = "coexist-dataset";
pub const SCHEMA_VERSION: u32 = 1;
pub const PHI_ORDERING: &str =
    "phi = [alpha(m, u) for m in 0..M for u in 0..K_u] ++ [beta(m, d) for m in 0..M for d in 0..K_d]; masks use the same AP-major order";

/// Network dimensions of one dataset scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub num_users: usize,
    pub num_devices: usize,
    pub num_aps: usize,
    pub serving_aps: usize,
}

impl ScenarioSpec {
    pub fn name(&self) -> String {
        format!("ku{}_kd{}_m{}_ms{}", self.num_users, self.num_devices, self.num_aps, self.serving_aps)
    }

    pub fn apply(&self, base: &ScenarioConfig) -> ScenarioConfig {
        base.clone().with_network(
            self.num_aps,
            base.antennas_per_ap,
            self.num_users,
            self.num_devices,
            self.serving_aps,
        )
    }
}

/// Scenarios of the learned-model evaluation table; the first is the baseline.
pub fn default_grid() -> Vec<ScenarioSpec> {
    [(2, 10, 10, 5), (2, 10, 10, 1), (2, 10, 5, 5), (1, 10, 10, 5), (1, 5, 10, 5)]
        .into_iter()
        .map(|(num_users, num_devices, num_aps, serving_aps)| ScenarioSpec {
            num_users,
            num_devices,
            num_aps,
            serving_aps,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: String,
    pub version: u32,
    pub scenario: ScenarioSpec,
    pub config: ScenarioConfig,
    pub config_digest: String,
    pub regime: Regime,
    pub phi_ordering: String,
    pub num_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    /// Deployment index under the scenario seed.
    pub id: u64,
    pub config_digest: String,
    pub phi: Vec<f64>,
    pub user_assoc: Vec<bool>,
    pub device_assoc: Vec<bool>,
    pub theta: PowerVector,
    pub user_rates_bps: Vec<f64>,
    pub device_rates_bps: Vec<f64>,
    pub device_ee: Vec<f64>,
    pub min_ee: f64,
}

fn mask(m: &nalgebra::DMatrix<bool>) -> Vec<bool> {
    (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| (r, c))).map(|i| m[i]).collect()
}

impl DatasetRecord {
    pub fn new(id: u64, digest: &str, dep: &Deployment, problem: &PowerControlProblem, theta: PowerVector, regime: Regime) -> Self {
        let device_ee = problem.energy_efficiency(&theta, regime);
        Self {
            id,
            config_digest: digest.to_string(),
            phi: dep.lsf_vector(),
            user_assoc: mask(&dep.user_assoc),
            device_assoc: mask(&dep.device_assoc),
            user_rates_bps: problem.user_rates_bps(&theta),
            device_rates_bps: problem.device_rates_bps(&theta, regime),
            min_ee: device_ee.iter().copied().fold(f64::INFINITY, f64::min),
            device_ee,
            theta,
        }
    }
}

/// Record ids of the three splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<u64>,
    pub val: Vec<u64>,
    pub test: Vec<u64>,
}

impl SplitManifest {
    /// Seeded shuffle, then 80/10/10 (test takes the rounding remainder).
    pub fn split(ids: &[u64], seed: u64, scenario_index: u64) -> Self {
        let mut ids = ids.to_vec();
        ids.shuffle(&mut stream(seed, Domain::DatasetSplit, scenario_index));
        let n = ids.len();
        let n_train = n * 8 / 10;
        let n_val = n / 10;
        let test = ids.split_off(n_train + n_val);
        let val = ids.split_off(n_train);
        Self { train: ids, val, test }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub scenario: ScenarioSpec,
    pub data_path: PathBuf,
    pub attempted: usize,
    pub infeasible: usize,
    pub records: usize,
}

fn solve_one(config: &ScenarioConfig, digest: &str, index: u64, regime: Regime, options: &SolveOptions) -> Result<Option<DatasetRecord>> {
    let dep = generate_deployment_indexed(config, index);
    let problem = PowerControlProblem::from_deployment(&dep, config);
    let start = gfpc(config, &dep, DEFAULT_KAPPA).ok();
    let res = solve_problem(&problem, regime, start.as_ref(), options)?;
    match res.theta_star {
        Some(theta) if res.feasible => {
            // post-check with the independent feasibility marker
            if !mark_problem(&problem, &theta, regime).feasible {
                return Ok(None);
            }
            Ok(Some(DatasetRecord::new(index, digest, &dep, &problem, theta, regime)))
        }
        _ => Ok(None),
    }
}

/// Solves deployments until `n` feasible records are collected.
///
/// The first `n` deployments are always attempted; if more than half of
/// them are infeasible the scenario is aborted. Shortfalls are refilled from
/// later deployment indices, up to 4n attempts in total.
pub fn collect_records(config: &ScenarioConfig, n: usize, regime: Regime, options: &SolveOptions) -> Result<(Vec<DatasetRecord>, usize)> {
    let digest = config.digest();
    let solve_range = |range: std::ops::Range<u64>| -> Result<Vec<Option<DatasetRecord>>> {
        range.into_par_iter().map(|i| solve_one(config, &digest, i, regime, options)).collect()
    };
    let first = solve_range(0..n as u64)?;
    let infeasible = first.iter().filter(|r| r.is_none()).count();
    if 2 * infeasible > n {
        return Err(Error::Dataset(format!(
            "{infeasible} of {n} instances infeasible (more than 50%) for N = {}, K_u = {}, K_d = {}, M = {}",
            config.num_prbs, config.num_users, config.num_devices, config.num_aps
        )));
    }
    let mut records: Vec<DatasetRecord> = first.into_iter().flatten().collect();
    let mut attempted = n;
    while records.len() < n {
        let need = n - records.len();
        if attempted + need > 4 * n {
            return Err(Error::Dataset(format!("only {} feasible instances after {attempted} attempts", records.len())));
        }
        let more = solve_range(attempted as u64..(attempted + need) as u64)?;
        attempted += need;
        records.extend(more.into_iter().flatten());
    }
    Ok((records, attempted))
}

fn manifest_path(data: &Path, split: &str) -> PathBuf {
    data.with_extension(format!("{split}.txt"))
}

/// Writes one dataset file and its manifests per scenario.
pub fn export_dataset(
    base: &ScenarioConfig,
    grid: &[ScenarioSpec],
    n_per_scenario: usize,
    dir: &Path,
    regime: Regime,
    options: &SolveOptions,
) -> Result<Vec<ExportSummary>> {
    if n_per_scenario == 0 {
        return Err(Error::Dataset("need at least one record per scenario".into()));
    }
    fs::create_dir_all(dir)?;
    let mut summaries = Vec::new();
    for (k, spec) in grid.iter().enumerate() {
        let config = spec.apply(base);
        config.validate()?;
        let (records, attempted) = collect_records(&config, n_per_scenario, regime, options)?;
        let header = DatasetHeader {
            schema: SCHEMA.into(),
            version: SCHEMA_VERSION,
            scenario: *spec,
            config_digest: config.digest(),
            config: config.clone(),
            regime,
            phi_ordering: PHI_ORDERING.into(),
            num_records: records.len(),
        };
        let data_path = dir.join(format!("{}.jsonl", spec.name()));
        write_dataset(&data_path, &header, &records)?;
        let ids: Vec<u64> = records.iter().map(|r| r.id).collect();
        write_manifest(&data_path, &SplitManifest::split(&ids, config.seed, k as u64))?;
        log::info!("{}: {} records from {attempted} deployments", spec.name(), records.len());
        summaries.push(ExportSummary {
            scenario: *spec,
            data_path,
            attempted,
            infeasible: attempted - records.len(),
            records: records.len(),
        });
    }
    Ok(summaries)
}

pub fn write_dataset(path: &Path, header: &DatasetHeader, records: &[DatasetRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<DatasetRecord>)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = lines.next().ok_or_else(|| Error::Dataset(format!("{} is empty", path.display())))??;
    let header: DatasetHeader = serde_json::from_str(&first)?;
    if header.schema != SCHEMA || header.version != SCHEMA_VERSION {
        return Err(Error::Dataset(format!("unsupported schema {} v{}", header.schema, header.version)));
    }
    let mut records = Vec::with_capacity(header.num_records);
    for line in lines {
        let line = line?;
        if !line.is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    if records.len() != header.num_records {
        return Err(Error::Dataset(format!("header announces {} records, found {}", header.num_records, records.len())));
    }
    Ok((header, records))
}

pub fn write_manifest(data_path: &Path, manifest: &SplitManifest) -> Result<()> {
    for (name, ids) in [("train", &manifest.train), ("val", &manifest.val), ("test", &manifest.test)] {
        let mut w = BufWriter::new(File::create(manifest_path(data_path, name))?);
        for id in ids {
            writeln!(w, "{id}")?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn read_manifest(data_path: &Path) -> Result<SplitManifest> {
    let read = |name: &str| -> Result<Vec<u64>> {
        let text = fs::read_to_string(manifest_path(data_path, name))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse().map_err(|e| Error::Dataset(format!("bad id {l:?}: {e}"))))
            .collect()
    };
    Ok(SplitManifest {
        train: read("train")?,
        val: read("val")?,
        test: read("test")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ScenarioSpec {
        ScenarioSpec {
            num_users: 1,
            num_devices: 2,
            num_aps: 4,
            serving_aps: 2,
        }
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let ids: Vec<u64> = (0..100).collect();
        let m = SplitManifest::split(&ids, 3, 0);
        assert_eq!((m.train.len(), m.val.len(), m.test.len()), (80, 10, 10));
        let mut all: Vec<u64> = m.train.iter().chain(&m.val).chain(&m.test).copied().collect();
        all.sort();
        assert_eq!(all, ids);
        assert_eq!(m, SplitManifest::split(&ids, 3, 0));
    }

    #[test]
    fn default_grid_starts_with_baseline() {
        let g = default_grid();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0].apply(&ScenarioConfig::baseline()), ScenarioConfig::baseline());
    }

    #[test]
    fn export_round_trip_and_reexport_identical() {
        let dir = tempfile::tempdir().unwrap();
        let base = ScenarioConfig::baseline().with_prbs(63);
        let opts = SolveOptions::default();
        let s = export_dataset(&base, &[small_spec()], 20, dir.path(), Regime::Shannon, &opts).unwrap();
        assert_eq!(s[0].records, 20);
        let path = &s[0].data_path;
        let (header, records) = read_dataset(path).unwrap();
        assert_eq!(header.num_records, 20);
        let config = small_spec().apply(&base);
        for r in &records {
            assert_eq!(r.phi.len(), 4 * 3);
            let dep = generate_deployment_indexed(&config, r.id);
            let problem = PowerControlProblem::from_deployment(&dep, &config);
            assert!(mark_problem(&problem, &r.theta, Regime::Shannon).feasible);
        }
        let tmp = dir.path().join("copy.jsonl");
        write_dataset(&tmp, &header, &records).unwrap();
        assert_eq!(fs::read(&tmp).unwrap(), fs::read(path).unwrap());
        let m = read_manifest(path).unwrap();
        assert_eq!((m.train.len(), m.val.len(), m.test.len()), (16, 2, 2));

        let before = fs::read(path).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let s2 = export_dataset(&base, &[small_spec()], 20, dir2.path(), Regime::Shannon, &opts).unwrap();
        assert_eq!(fs::read(&s2[0].data_path).unwrap(), before);
    }

    #[test]
    fn mostly_infeasible_scenario_aborts() {
        let dir = tempfile::tempdir().unwrap();
        let base = ScenarioConfig::baseline().with_prbs(1);
        let err = export_dataset(&base, &[small_spec()], 10, dir.path(), Regime::Shannon, &SolveOptions::default());
        assert!(matches!(err, Err(Error::Dataset(_))), "{err:?}");
    }
}
