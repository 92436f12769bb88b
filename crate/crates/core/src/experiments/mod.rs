//! Synthetic experiments: instance generators, recovery metrics and a
//! seeded, parallel trial harness.

mod generators;
mod metrics;
mod trials;

pub use generators::{
    gen_cs_instance, gen_nanopore_instance, lowpass_cascade, BlockSpec, CsInstance, NanoporeConfig,
    NanoporeInstance, NoiseSpec, SyntheticCsConfig,
};
pub use metrics::{metric_f1, metric_nmse, metric_snr, DEFAULT_F1_THRESHOLD, SNR_CAP_DB};
pub use trials::{
    aggregate, run_method, run_trials, trial_seed, write_summary_csv, write_trials_csv, Experiment,
    FidelityKind, Instance, MethodSpec, Stats, Summary, TrialPlan, TrialReport, TRIAL_CSV_HEADER,
};
