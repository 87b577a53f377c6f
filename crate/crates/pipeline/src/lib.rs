//! Dataset files, experiment manifests, run artifacts and reports behind
//! the `hlad` command-line tool.

pub mod artifacts;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gen;
pub mod manifest;
pub mod report;

pub use artifacts::{cmd_train, run_dir_name, write_history, TrainOutcome, HISTORY_HEADER};
pub use dataset::{DatasetFile, DatasetHeader, SealedAudit};
pub use error::{PipelineError, Result};
pub use eval::{cmd_eval, load_model, EvalOptions, EvalReport};
pub use gen::{generate, generate_with_conditions, GenConfig, RecordConditions};
pub use manifest::{DatasetPaths, Manifest, MethodName};
pub use report::{cmd_report, combine, curve_table, load_report, results_table, write_report_files, Table};
