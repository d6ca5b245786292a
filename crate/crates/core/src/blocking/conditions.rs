use serde::Serialize;

use super::stats::{BlockStats, BlockSums, StatsSource};
use crate::covariance::CovarianceProfile;
use crate::error::{Error, Result};
use crate::exec::{mean_and_stderr, Exec};
use crate::generators::map_replicates;
use crate::model::dist::normal_abs_moment;
use crate::model::{BlockScheme, FamilyKind, FamilySpec};

/// Fewest replicates accepted by a Monte Carlo condition evaluator.
pub const MIN_MC_REPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSource {
    Analytic,
    Empirical,
}

impl From<StatsSource> for ValueSource {
    fn from(s: StatsSource) -> Self {
        match s {
            StatsSource::Analytic => ValueSource::Analytic,
            StatsSource::Empirical { .. } => ValueSource::Empirical,
        }
    }
}

/// One condition functional at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionValue {
    pub condition_id: String,
    pub n: u64,
    /// Set when the grid runs along a lag axis at fixed `n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lag: Option<u64>,
    pub value: f64,
    pub target: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub source: ValueSource,
}

impl ConditionValue {
    pub(crate) fn new(id: &str, n: u64, value: f64, target: f64, source: ValueSource) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(ConditionValue {
            condition_id: id.to_string(),
            n,
            lag: None,
            value,
            target,
            stderr: None,
            source,
        })
    }

    pub(crate) fn with_stderr(mut self, se: f64) -> Self {
        self.stderr = Some(se);
        self
    }

    pub(crate) fn at_lag(mut self, lag: u64) -> Self {
        self.lag = Some(lag);
        self
    }

    /// `|value - target|`.
    pub fn distance(&self) -> f64 {
        (self.value - self.target).abs()
    }
}

fn positive(s_n_sq: f64) -> Result<f64> {
    if s_n_sq > 0.0 && s_n_sq.is_finite() {
        Ok(s_n_sq)
    } else {
        Err(Error::DegenerateVariance("s_n^2"))
    }
}

/// `ell / s_n^2`, target 0.
pub fn eval_h0(profile: &CovarianceProfile, scheme: &BlockScheme) -> Result<ConditionValue> {
    let s2 = positive(profile.s_n_squared()?)?;
    ConditionValue::new("H0", scheme.n, scheme.ell as f64 / s2, 0.0, ValueSource::Analytic)
}

/// `nu^2 / s_n^2`, target 1.
pub fn eval_ha(stats: &BlockStats, s_n_sq: f64) -> Result<ConditionValue> {
    let s2 = positive(s_n_sq)?;
    ConditionValue::new("Ha", stats.scheme.n, stats.nu_sq / s2, 1.0, stats.source.into())
}

/// Tail variance over `s_n^2`, target 0.
pub fn eval_hab(stats: &BlockStats, s_n_sq: f64) -> Result<ConditionValue> {
    let s2 = positive(s_n_sq)?;
    ConditionValue::new("Hab", stats.scheme.n, stats.tail_var / s2, 0.0, stats.source.into())
}

/// Largest block variance, tail included, over `s_n^2`; target 0.
pub fn eval_hb(stats: &BlockStats, s_n_sq: f64) -> Result<ConditionValue> {
    let s2 = positive(s_n_sq)?;
    let top = stats.max_tau_sq().max(stats.tail_var);
    ConditionValue::new("Hb", stats.scheme.n, top / s2, 0.0, stats.source.into())
}

/// `max_j tau_j^2 / s_n^2` over full blocks only; target 0.
pub fn eval_feller_max(stats: &BlockStats, s_n_sq: f64) -> Result<ConditionValue> {
    let s2 = positive(s_n_sq)?;
    ConditionValue::new("FellerMax", stats.scheme.n, stats.max_tau_sq() / s2, 0.0, stats.source.into())
}

/// Multiplier turning `sum_j E|B_j|^p / s_n^p` (block sums `B_j`) into the
/// Lyapunov-type functional. With the default convention it is 1; the
/// literal `ell^{3/2}` prefactor on normalised blocks contributes
/// `ell^{3/2 - p/2}`, which only differs from 1 when `delta != 1`.
pub fn hc_prefactor(ell: u64, delta: f64, literal: bool) -> f64 {
    if literal {
        (ell as f64).powf(1.5 - (2.0 + delta) / 2.0)
    } else {
        1.0
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")))
    }
}

/// Closed-form Lyapunov-type functional `sum_{j <= m} E|B_j|^{2+delta} / s_n^{2+delta}`
/// for jointly Gaussian families and common factors. `stats` must be analytic.
pub fn eval_hc(family: &FamilySpec, stats: &BlockStats, delta: f64, literal: bool) -> Result<ConditionValue> {
    check_delta(delta)?;
    let s2 = positive(stats.s_n_sq)?;
    let p = 2.0 + delta;
    let scheme = &stats.scheme;
    let total: f64 = match &family.kind {
        FamilyKind::CommonFactor { dist } => {
            // every block sum is ell * Z
            scheme.m as f64 * (scheme.ell as f64).powf(p) * dist.abs_moment(p)
        }
        _ if family.is_gaussian() => {
            let c = normal_abs_moment(p);
            stats.tau_sq.iter().map(|t| t.powf(p / 2.0) * c).sum()
        }
        _ => {
            return Err(Error::NoAnalyticCovariance(format!(
                "block moments of a `{}` family",
                family.kind_name()
            )))
        }
    };
    let value = hc_prefactor(scheme.ell, delta, literal) * total / s2.powf(p / 2.0);
    ConditionValue::new("Hc", scheme.n, value, 0.0, ValueSource::Analytic)
}

/// Monte Carlo version of [`eval_hc`] from replicate block sums.
pub fn eval_hc_empirical(sums: &BlockSums, s_n_sq: f64, delta: f64, literal: bool) -> Result<ConditionValue> {
    check_delta(delta)?;
    check_reps(sums.reps)?;
    let s2 = positive(s_n_sq)?;
    let p = 2.0 + delta;
    let m = sums.scheme.m as usize;
    let scale = hc_prefactor(sums.scheme.ell, delta, literal) / s2.powf(p / 2.0);
    let per_rep: Vec<f64> = sums
        .rows()
        .map(|r| scale * crate::exec::pairwise_sum(&r[..m].iter().map(|b| b.abs().powf(p)).collect::<Vec<_>>()))
        .collect();
    let (v, se) = mean_and_stderr(&per_rep);
    Ok(ConditionValue::new("Hc", sums.scheme.n, v, 0.0, ValueSource::Empirical)?.with_stderr(se))
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_MC_REPS {
        Err(Error::TooFewReplicates {
            needed: MIN_MC_REPS,
            got: reps,
        })
    } else {
        Ok(())
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")))
    }
}

/// Truncation level of the block Lindeberg functional: `eps * nu` or `eps * s_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LindebergNorm {
    Nu,
    SN,
}

impl LindebergNorm {
    pub fn id(self) -> &'static str {
        match self {
            LindebergNorm::Nu => "Lindeberg_nu",
            LindebergNorm::SN => "Lindeberg_s_n",
        }
    }

    fn threshold(self, stats: &BlockStats, eps: f64) -> f64 {
        eps * match self {
            LindebergNorm::Nu => stats.nu_sq.sqrt(),
            LindebergNorm::SN => stats.s_n_sq.sqrt(),
        }
    }
}

/// `(1/s_n^2) sum_{j <= m} E[B_j^2 1{|B_j| >= a}]` in closed form for
/// Gaussian blocks and common factors; `None` otherwise.
pub fn eval_lindeberg_analytic(
    family: &FamilySpec,
    stats: &BlockStats,
    eps: f64,
    norm: LindebergNorm,
) -> Result<Option<ConditionValue>> {
    check_epsilon(eps)?;
    let s2 = positive(stats.s_n_sq)?;
    let a = norm.threshold(stats, eps);
    let scheme = &stats.scheme;
    let total: f64 = match &family.kind {
        FamilyKind::CommonFactor { dist } => {
            let ell = scheme.ell as f64;
            // B = ell Z: E[B^2 1{|B| >= a}] = ell^2 E[Z^2 1{|Z| >= a / ell}]
            scheme.m as f64 * ell * ell * dist.truncated_second_moment(a / ell)
        }
        _ if family.is_gaussian() => stats
            .tau_sq
            .iter()
            .map(|t| crate::model::dist::gaussian_truncated_second_moment(*t, a))
            .sum(),
        _ => return Ok(None),
    };
    Ok(Some(ConditionValue::new(norm.id(), scheme.n, total / s2, 0.0, ValueSource::Analytic)?))
}

/// Monte Carlo block Lindeberg functional. The truncation level and `s_n^2`
/// come from `stats`, the expectations from the replicate block sums.
pub fn eval_lindeberg_blocks(sums: &BlockSums, stats: &BlockStats, eps: f64, norm: LindebergNorm) -> Result<ConditionValue> {
    check_epsilon(eps)?;
    check_reps(sums.reps)?;
    let s2 = positive(stats.s_n_sq)?;
    let a = norm.threshold(stats, eps);
    let m = sums.scheme.m as usize;
    let per_rep: Vec<f64> = sums
        .rows()
        .map(|r| {
            let v: Vec<f64> = r[..m].iter().map(|b| if b.abs() >= a { b * b } else { 0.0 }).collect();
            crate::exec::pairwise_sum(&v) / s2
        })
        .collect();
    let (v, se) = mean_and_stderr(&per_rep);
    Ok(ConditionValue::new(norm.id(), sums.scheme.n, v, 0.0, ValueSource::Empirical)?.with_stderr(se))
}

/// `(1/s_n^2) sum_{i=t}^{u} Var(X_i)` over the inclusive 1-based window
/// `t..=u`; `t == u` is a single term. Requires `1 <= t <= u <= n` and
/// `u - t <= ell`.
pub fn eval_hnab(profile: &CovarianceProfile, t: u64, u: u64, ell: u64, s_n_sq: f64) -> Result<ConditionValue> {
    let n = profile.n as u64;
    if t == 0 || t > u || u > n {
        return Err(Error::InvalidArgument(format!(
            "window {t}..={u} must satisfy 1 <= t <= u <= n = {n}"
        )));
    }
    if u - t > ell {
        return Err(Error::InvalidArgument(format!(
            "window {t}..={u} is wider than the block length {ell}"
        )));
    }
    let s2 = positive(s_n_sq)?;
    let sum: f64 = ((t - 1)..u).map(|i| profile.get(i as usize, i as usize)).sum();
    ConditionValue::new("HNab", n, sum / s2, 0.0, profile_source(profile))
}

/// Grid value of the window condition: the largest window `t..=t+ell`
/// (clipped at `n`).
pub fn eval_hnab_max(profile: &CovarianceProfile, ell: u64, s_n_sq: f64) -> Result<ConditionValue> {
    let n = profile.n;
    let diag = profile.diagonal();
    let w = (ell as usize + 1).min(n);
    let mut acc: f64 = diag[..w].iter().sum();
    let mut best = acc;
    for i in w..n {
        acc += diag[i] - diag[i - w];
        best = best.max(acc);
    }
    let s2 = positive(s_n_sq)?;
    ConditionValue::new("HNab", n as u64, best / s2, 0.0, profile_source(profile))
}

fn profile_source(p: &CovarianceProfile) -> ValueSource {
    if p.is_analytic() {
        ValueSource::Analytic
    } else {
        ValueSource::Empirical
    }
}

/// Per-variable Lindeberg functional `(1/s_n^2) sum_{j=1}^{n} E[X_j^2 1{|X_j| >= eps s_n}]`
/// from the closed-form marginal; `None` when the marginal is unknown.
pub fn eval_variable_lindeberg(family: &FamilySpec, n: u64, s_n_sq: f64, eps: f64) -> Result<Option<ConditionValue>> {
    check_epsilon(eps)?;
    let s2 = positive(s_n_sq)?;
    let Some(marg) = family.marginal() else {
        return Ok(None);
    };
    let v = n as f64 * marg.truncated_second_moment(eps * s2.sqrt()) / s2;
    Ok(Some(ConditionValue::new("Lindeberg_vars", n, v, 0.0, ValueSource::Analytic)?))
}

/// Monte Carlo version of [`eval_variable_lindeberg`], streamed over fresh
/// replicates.
pub fn eval_variable_lindeberg_mc(
    family: &FamilySpec,
    n: u64,
    s_n_sq: f64,
    eps: f64,
    reps: usize,
    seed: u64,
    exec: Exec,
) -> Result<ConditionValue> {
    check_epsilon(eps)?;
    check_reps(reps)?;
    let s2 = positive(s_n_sq)?;
    let a = eps * s2.sqrt();
    let per_rep = map_replicates(family, n as usize, reps, seed, exec, |_, x| {
        let v: Vec<f64> = x.iter().map(|v| if v.abs() >= a { v * v } else { 0.0 }).collect();
        crate::exec::pairwise_sum(&v) / s2
    })?;
    let (v, se) = mean_and_stderr(&per_rep);
    Ok(ConditionValue::new("Lindeberg_vars", n, v, 0.0, ValueSource::Empirical)?.with_stderr(se))
}
