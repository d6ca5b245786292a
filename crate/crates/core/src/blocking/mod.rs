//! Block statistics and the blocking hypotheses as finite-n diagnostics.
//!
//! A scheme splits `1..n` into `m` blocks of length `ell` plus a tail of
//! `r` variables. Each hypothesis is a functional of the block variances,
//! block moments or covariances that should converge to a target as `n`
//! grows; [`ConditionReport`] evaluates it along a grid and issues a verdict
//! under the declared rule in [`Thresholds`].

mod catalog;
mod conditions;
mod stats;
mod verdict;

pub use catalog::{check_conditions, CheckOutput, CompositeReport, Condition, ConditionContext, GridPoint};
pub use conditions::{
    eval_feller_max, eval_h0, eval_ha, eval_hab, eval_hb, eval_hc, eval_hc_empirical, eval_hnab, eval_hnab_max,
    eval_lindeberg_analytic, eval_lindeberg_blocks, eval_variable_lindeberg, eval_variable_lindeberg_mc,
    hc_prefactor, ConditionValue, LindebergNorm, ValueSource, MIN_MC_REPS,
};
pub use stats::{block_stats, cross_block_mass, empirical_block_stats, BlockStats, BlockSums, StatsSource};
pub use verdict::{trend_slope, ConditionKind, ConditionReport, Thresholds, Verdict, DECAY_SLOPE, MIN_TREND_POINTS};
