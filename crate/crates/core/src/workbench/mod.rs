//! Matrix generators and end-to-end verification experiments.

mod experiment;
mod generators;

pub use experiment::{
    run_experiment, run_experiment_full, run_subexp_experiment, truncation_study,
    ExperimentConfig, ExperimentOutcome, ExperimentReport, SubexpConfig, SubexpExperimentReport,
    MIN_CONTRACTION,
};
pub use generators::{
    dominance_lambda, gen_random_decay, gen_shift_example, generate, Generated, GeneratorKind,
    GeneratorSpec, ShiftOracle,
};
