//! Sequential mean and CUSUM statistics, Monte-Carlo calibration of their
//! Gaussian quantiles, and the offset rejection rule
//! `T(X) > a_{alpha - nu}(Q̂) + tau`.

mod calibrate;
mod rule;
mod stats;

pub use calibrate::{
    order_statistic_quantile, quantile_mc, quantile_mc_detailed, IncrementSampler, QuantileEstimate, MIN_MC_REPS,
};
pub use rule::{
    default_offsets, run_test, seq_test_condition, ConditionParams, ConditionReport, ResolvedConfig, TestConfig,
    TestReport,
};
pub use stats::{stat_cusum, stat_seq, Statistic};
