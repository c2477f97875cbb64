//! Experiment orchestration behind the CLI.

mod commands;
mod config;
mod eval;
mod experiment;
mod report;

pub use commands::{
    cmd_ablate, cmd_eval, cmd_sweep, cmd_train, cmd_trend, cmd_verify, run_experiment, run_on_data, train_interleaved,
    CellResult, RunResult, SweepParam, ABLATION_METHODS,
};
pub use config::{CsvData, DataSource, ExperimentConfig, Method, SyntheticData};
pub use eval::{evaluate, file_tag, mean_auroc, trend_row, Evaluation, SetOutputs, TrendRow};
pub use experiment::{
    batch_plan, effective_epsilon, objective_for, prepare_data, train_config, train_run,
    PreparedData, SeedPlan, TrainOutcome, Trainer,
};
pub use report::EvalReport;
