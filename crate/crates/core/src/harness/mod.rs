//! Batch engine behind the command-line tool: Monte Carlo batches and CDFs,
//! parameter sweeps, the OMA comparison, moment validation, dataset export
//! and distribution metrics.

pub mod batch;
pub mod dataset;
pub mod metrics;
pub mod oma;
pub mod sweep;
pub mod validate;

pub use batch::{run_batch, run_batch_with, run_instance, BatchResult, CdfSeries, InstanceOutcome, Policy};
pub use dataset::{default_grid, export_dataset, read_dataset, read_manifest, DatasetHeader, DatasetRecord, ScenarioSpec, SplitManifest};
pub use metrics::{kl_divergence, metrics, p95_loss, read_report, Metrics};
pub use oma::{compare_oma, OmaComparison, OmaSplit};
pub use sweep::{sweep, SweepParam, SweepPoint};
pub use validate::{validate, validate_deployment, MomentRow, ValidationReport};
