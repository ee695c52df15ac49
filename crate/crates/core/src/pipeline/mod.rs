//! Configuration-driven runs and the convergence studies built on them.

pub mod config;
pub mod output;
pub mod run;
pub mod studies;

pub use config::{MeshConfig, NetworkConfig, OutputConfig, RunConfig, SsaConfig, StartsConfig};
pub use output::{load_ssa, save_ssa, write_run, Manifest, RunDir};
pub use run::{
    mesh_stage, run, run_in_domain, run_with_samples, solve_stage, ssa_stage, RunOutput, RunReport, SsaStage,
    SsaSummary, StageTimings,
};
pub use studies::{
    compare_runs, converge_beta1, converge_h, converge_t, doubling_accuracy_test, ConvergenceRow, ConvergenceTable,
    DoublingReport,
};
