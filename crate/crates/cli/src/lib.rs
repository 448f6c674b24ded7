//! Experiment front-end: spec files, seeded sweeps, CSV output and the
//! invariant suite.

pub mod experiment;
pub mod output;
pub mod spec;
pub mod validate;

pub use experiment::{run, run_irs_count_sweep, run_sigma_sweep, run_trace, RunError};
pub use output::{write_csv, ResultRow};
pub use spec::{load_spec, ExperimentSpec, SpecError, SweepSpec};
