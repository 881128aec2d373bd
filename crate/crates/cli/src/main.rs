//! `coexist`: batch runs, sweeps, OMA comparison, moment validation, dataset
//! export and distribution metrics.
//!
//! Exit codes: 0 success, 2 when a run is infeasible-dominated (feasible
//! fraction below one half), 1 on any error.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coexist_core::harness::{
    self, compare_oma, default_grid, export_dataset, run_batch, sweep, BatchResult, CdfSeries, Policy, ScenarioSpec, SweepParam,
};
use coexist_core::heuristics::DEFAULT_KAPPA;
use coexist_core::optimizer::{solve_problem, SolveOptions};
use coexist_core::scenario::generate_deployment_indexed;
use coexist_core::{PowerControlProblem, Regime, ScenarioConfig};

type CliResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

#[derive(Parser)]
#[command(name = "coexist", version, about = "Energy-efficient eMBB/mMTC coexistence in cell-free massive MIMO")]
struct Cli {
    /// Worker threads for instance-level parallelism (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// TOML scenario file (powers in dBm, noise in dBm/Hz); baseline if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed overriding the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Spreading factor N (PRBs) overriding the file.
    #[arg(long)]
    prbs: Option<usize>,
    /// Rate model: shannon or fbl.
    #[arg(long, default_value = "shannon")]
    regime: Regime,
}

impl ScenarioArgs {
    fn load(&self) -> CliResult<ScenarioConfig> {
        let mut c = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::baseline(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.prbs {
            c.num_prbs = n;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Clone)]
struct PolicyArgs {
    /// upc, fpc, gfpc or opc.
    #[arg(long, default_value = "opc")]
    policy: String,
    /// G-FPC exponent kappa in [-1, 1].
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    kappa: f64,
}

impl PolicyArgs {
    fn policy(&self) -> CliResult<Policy> {
        Ok(match self.policy.parse::<Policy>()? {
            Policy::Gfpc { .. } => Policy::Gfpc { kappa: self.kappa },
            p => p,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo batch of one policy; writes CDF CSVs (value, cdf, feasible_flag).
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Number of independent deployments.
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Batch repeated over the values of one configuration field.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Field to vary: num_prbs, num_aps, antennas_per_ap, num_users, num_devices, serving_aps, blocklength.
        #[arg(long, default_value = "num_prbs")]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', default_values_t = [15usize, 63, 255, 1023])]
        values: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// NOMA against OMA with r_u % of the PRBs for users and r_d % for devices.
    Oma {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// User PRB share in percent.
        #[arg(long)]
        ru: f64,
        /// Device PRB share in percent.
        #[arg(long)]
        rd: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form moments against the Monte Carlo oracle.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Monte Carlo draws for the user moments (0 skips them).
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        /// Draws for the device moments; defaults to 4 x --draws.
        #[arg(long)]
        device_draws: Option<usize>,
        /// CSV report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solves one deployment and dumps the result and its JSON-lines trace.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Deployment index under the seed.
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Result JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Solver trace path (JSON lines: outer, iter, vartheta, f, objective, max_violation).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Exports (LSF, optimal power) datasets with 80/10/10 split manifests.
    ExportDataset {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Feasible records per scenario.
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// Scenarios as K_u,K_d,M,M_s; repeatable. Defaults to the five-scenario evaluation grid.
        #[arg(long = "scenario", value_parser = parse_spec)]
        scenarios: Vec<ScenarioSpec>,
        #[arg(long)]
        out: PathBuf,
    },
    /// KL divergence and 95%-likely loss between two CDF CSVs (first is the reference).
    Metrics {
        reference: PathBuf,
        candidate: PathBuf,
        /// JSON report {kl_divergence, p95_loss} from an external model to cross-check.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn parse_spec(s: &str) -> Result<ScenarioSpec, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [num_users, num_devices, num_aps, serving_aps] => Ok(ScenarioSpec {
            num_users,
            num_devices,
            num_aps,
            serving_aps,
        }),
        _ => Err("expected K_u,K_d,M,M_s".into()),
    }
}

fn write_cdf(dir: &Path, name: &str, series: &CdfSeries) -> CliResult<()> {
    series.write_csv(BufWriter::new(File::create(dir.join(format!("{name}.csv")))?))?;
    Ok(())
}

fn write_batch(dir: &Path, prefix: &str, batch: &BatchResult) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    write_cdf(dir, &format!("{prefix}min_ee"), &batch.min_ee_cdf())?;
    write_cdf(dir, &format!("{prefix}device_ee"), &batch.device_ee_cdf())?;
    write_cdf(dir, &format!("{prefix}min_user_rate"), &batch.min_user_rate_cdf())?;
    write_cdf(dir, &format!("{prefix}user_rate"), &batch.user_rate_cdf())?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join(format!("{prefix}instances.json")))?), batch)?;
    println!("{}: feasible fraction {:.3} over {} instances", batch.label, batch.feasible_fraction(), batch.instances.len());
    Ok(())
}

fn status(fraction: f64) -> ExitCode {
    if fraction < 0.5 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn execute(cli: Cli) -> CliResult<ExitCode> {
    match cli.command {
        Command::Run { scenario, policy, n, out } => {
            let config = scenario.load()?;
            let batch = run_batch(&config, policy.policy()?, n, scenario.regime)?;
            write_batch(&out, "", &batch)?;
            Ok(status(batch.feasible_fraction()))
        }
        Command::Sweep {
            scenario,
            policy,
            param,
            values,
            n,
            out,
        } => {
            let config = scenario.load()?;
            let points = sweep(&config, param, &values, policy.policy()?, n, scenario.regime)?;
            let mut worst = 1.0f64;
            for p in &points {
                write_batch(&out, &format!("{param}_{}_", p.value), &p.batch)?;
                worst = worst.min(p.batch.feasible_fraction());
            }
            Ok(status(worst))
        }
        Command::Oma {
            scenario,
            policy,
            ru,
            rd,
            n,
            out,
        } => {
            let config = scenario.load()?;
            let cmp = compare_oma(&config, ru, rd, policy.policy()?, n, scenario.regime)?;
            println!("device spreading factor under OMA: {}", cmp.split.device_prbs);
            write_batch(&out, "noma_", &cmp.noma)?;
            write_batch(&out, "oma_", &cmp.oma)?;
            Ok(status(cmp.noma.feasible_fraction().min(cmp.oma.feasible_fraction())))
        }
        Command::Validate {
            scenario,
            draws,
            device_draws,
            out,
        } => {
            let config = scenario.load()?;
            let report = harness::validate(&config, draws, device_draws.unwrap_or(4 * draws))?;
            if let Some(path) = out {
                report.write_csv(BufWriter::new(File::create(path)?))?;
            }
            for (side, user) in [("user", true), ("device", false)] {
                if let Some(r) = report.worst(user) {
                    println!(
                        "{side} moments: worst {} {:?} relative error {:.3e} (tolerance {})",
                        r.moment, r.index, r.rel_error, r.tolerance
                    );
                }
            }
            if report.pass() {
                println!("validation passed");
                Ok(ExitCode::SUCCESS)
            } else {
                Err("closed-form moments disagree with the oracle".into())
            }
        }
        Command::Solve {
            scenario,
            index,
            out,
            trace,
        } => {
            let config = scenario.load()?;
            let dep = generate_deployment_indexed(&config, index);
            let problem = PowerControlProblem::from_deployment(&dep, &config);
            let start = coexist_core::heuristics::gfpc(&config, &dep, DEFAULT_KAPPA).ok();
            let res = solve_problem(&problem, scenario.regime, start.as_ref(), &SolveOptions::default())?;
            serde_json::to_writer_pretty(BufWriter::new(File::create(out)?), &res)?;
            if let Some(path) = trace {
                res.write_trace(BufWriter::new(File::create(path)?))?;
            }
            println!(
                "feasible {} min-EE {:.6e} bit/J after {} outer iterations",
                res.feasible, res.objective, res.outer_iters
            );
            Ok(status(if res.feasible { 1.0 } else { 0.0 }))
        }
        Command::ExportDataset {
            scenario,
            n,
            scenarios,
            out,
        } => {
            let config = scenario.load()?;
            let grid = if scenarios.is_empty() { default_grid() } else { scenarios };
            let summaries = export_dataset(&config, &grid, n, &out, scenario.regime, &SolveOptions::default())?;
            for s in summaries {
                println!(
                    "{}: {} records ({} infeasible deployments skipped)",
                    s.data_path.display(),
                    s.records,
                    s.infeasible
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Metrics {
            reference,
            candidate,
            report,
        } => {
            let a = CdfSeries::read_csv("reference", File::open(&reference)?)?;
            let b = CdfSeries::read_csv("candidate", File::open(&candidate)?)?;
            let m = harness::metrics(&a.values, &b.values)?;
            println!("kl_divergence {:.6}", m.kl_divergence);
            println!("p95_loss {:.6}", m.p95_loss);
            if let Some(path) = report {
                let r = harness::read_report(&path)?;
                println!(
                    "report kl_divergence {:.6} (diff {:.3e}), p95_loss {:.6} (diff {:.3e})",
                    r.kl_divergence,
                    (r.kl_divergence - m.kl_divergence).abs(),
                    r.p95_loss,
                    (r.p95_loss - m.p95_loss).abs()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| execute(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
