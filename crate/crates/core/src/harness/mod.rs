//! The measurement harness: experiment configuration, the phase-ordered
//! trial driver, report serialization and sweep expansion.

pub mod config;
pub mod report;
pub mod runner;
pub mod sweep;

pub use config::{
    AttackSpec, BaselineMode, ClusterKnowledge, CorpusSpec, ExperimentConfig, GammaSpec,
    MultiplierSpec, TrendSpec, UpdateCount, UpdateSpec, WindowSpec,
};
pub use report::{
    report_overheads, write_aggregate_csv, write_results_csv, Aggregate, ExperimentReport,
    OverheadRatio, OverheadReport, Timing, TrialOutcome, TrialResult,
};
pub use runner::run_experiment;
pub use sweep::{expand_grid, run_sweep, SweepGrid, SweepOutcome};
