//! Covariance structure and the covariance inequalities behind the theorems.
//!
//! `s_n^2` always means `Var(S_n)`. The long-run variance `sigma^2` appears
//! only as the normaliser of the stationary `sigma * sqrt(n)` CLT.

mod hoeffding;
mod probes;
mod profile;
mod rows;

pub use hoeffding::{hoeffding_cov, DiscreteBivariate};
pub use probes::{
    association_probe, cov_with_stderr, demimartingale_probe, expected_associated, newman_functional_check,
    AssociationBattery, MonotoneTestBattery, NewmanCheck, PathStat, PrefixStat, ProbeResult, ProbeValue,
    MIN_PROBE_SAMPLES, PROBE_SIGMAS,
};
pub use rows::CovarianceRows;
pub use profile::{
    analytic_profile, cox_coefficient_limit, empirical_profile, empirical_profile_with, long_run_variance,
    stationary_sum_var, CovarianceProfile, Gamma, LongRunVariance, ProfileSource,
};

/// `Var(S_n)` of a profile.
pub fn s_n_squared(profile: &CovarianceProfile) -> crate::Result<f64> {
    profile.s_n_squared()
}

/// `u_n(r)` over the finite window.
pub fn cox_coefficient(profile: &CovarianceProfile, r: usize) -> f64 {
    profile.cox_coefficient(r)
}
