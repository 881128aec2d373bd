use std::collections::HashSet;
use std::fs;

use coexist_core::harness::{
    compare_oma, export_dataset, metrics, read_dataset, read_manifest, run_batch, sweep, CdfSeries, Policy, ScenarioSpec, SweepParam,
};
use coexist_core::optimizer::SolveOptions;
use coexist_core::scenario::generate_deployment_indexed;
use coexist_core::{PowerControlProblem, Regime, ScenarioConfig};

fn tiny() -> ScenarioConfig {
    ScenarioConfig::baseline().with_network(5, 2, 1, 3, 3).with_seed(31)
}

#[test]
fn toml_config_round_trips_into_a_batch() {
    let text = "num_aps = 5\nantennas_per_ap = 2\nnum_users = 1\nnum_devices = 3\nserving_aps = 3\nseed = 31\n";
    let c = ScenarioConfig::from_toml_str(text).unwrap();
    assert_eq!(c, tiny());
    let batch = run_batch(&c, Policy::Opc, 6, Regime::Shannon).unwrap();
    assert_eq!(batch.instances.len(), 6);
    for inst in batch.instances.iter().filter(|i| i.feasible) {
        let dep = generate_deployment_indexed(&c, inst.index);
        let problem = PowerControlProblem::from_deployment(&dep, &c);
        let theta = inst.theta.as_ref().unwrap();
        assert!(problem.check(theta, Regime::Shannon, 1e-6).feasible());
        assert!((problem.min_ee(theta, Regime::Shannon) - inst.min_ee).abs() <= 1e-9 * inst.min_ee);
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    assert!(ScenarioConfig::from_toml_str("num_ap = 3\n").is_err());
}

#[test]
fn cdf_csv_round_trip_and_self_metrics() {
    let batch = run_batch(&tiny(), Policy::Upc, 20, Regime::Shannon).unwrap();
    let cdf = batch.device_ee_cdf();
    let mut buf = Vec::new();
    cdf.write_csv(&mut buf).unwrap();
    let back = CdfSeries::read_csv(cdf.label.clone(), buf.as_slice()).unwrap();
    assert_eq!(back, cdf);
    let feasible: Vec<f64> = cdf.values.iter().zip(&cdf.feasible).filter(|(_, f)| **f).map(|(v, _)| *v).collect();
    if !feasible.is_empty() {
        let m = metrics(&feasible, &feasible).unwrap();
        assert_eq!(m.kl_divergence, 0.0);
        assert_eq!(m.p95_loss, 0.0);
    }
}

#[test]
fn prb_sweep_reports_every_value() {
    let points = sweep(&tiny(), SweepParam::NumPrbs, &[15, 63], Policy::Upc, 10, Regime::Shannon).unwrap();
    assert_eq!(points.iter().map(|p| p.value).collect::<Vec<_>>(), vec![15, 63]);
}

#[test]
fn oma_uses_a_shorter_code() {
    let cmp = compare_oma(&tiny(), 50.0, 50.0, Policy::Upc, 8, Regime::Shannon).unwrap();
    assert!(cmp.split.device_prbs < tiny().num_prbs);
    assert_eq!(cmp.noma.instances.len(), cmp.oma.instances.len());
}

#[test]
fn dataset_export_is_reproducible_and_split_is_a_partition() {
    let spec = ScenarioSpec {
        num_users: 1,
        num_devices: 2,
        num_aps: 4,
        serving_aps: 2,
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let opts = SolveOptions::default();
    let sa = export_dataset(&tiny(), &[spec], 20, a.path(), Regime::Shannon, &opts).unwrap();
    export_dataset(&tiny(), &[spec], 20, b.path(), Regime::Shannon, &opts).unwrap();
    for entry in fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }

    let (header, records) = read_dataset(&sa[0].data_path).unwrap();
    assert_eq!(header.num_records, 20);
    assert_eq!(records.len(), 20);
    let split = read_manifest(&sa[0].data_path).unwrap();
    let all: Vec<u64> = split.train.iter().chain(&split.val).chain(&split.test).copied().collect();
    let ids: HashSet<u64> = records.iter().map(|r| r.id).collect();
    assert_eq!(all.len(), ids.len());
    assert_eq!(all.iter().copied().collect::<HashSet<_>>(), ids);
    assert_eq!((split.train.len(), split.val.len(), split.test.len()), (16, 2, 2));
}
