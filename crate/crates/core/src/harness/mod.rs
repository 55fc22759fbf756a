//! Simulation experiments, CSV/JSON I/O and the command line front end.

mod cli;
mod experiments;
mod io;

pub use cli::{cli_main, run_cli, SEED_ENV};
pub use experiments::{
    exp_coupling_scaling, exp_dist_approx, exp_power, exp_qhat_scaling, exp_rosenthal, exp_size, ks_distance,
    ks_null_band, rosenthal_rhs, run_experiment, tidy_to_csv, with_level_shift, ExperimentKind, ExperimentOutput,
    ExperimentParams, ExperimentSpec, GridPoint, KernelRef, ScalingPoint, ScalingReport, TidyRow,
};
pub use io::{matrix_from_csv, matrix_to_csv, read_matrix, write_text};
