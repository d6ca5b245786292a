use serde::Serialize;

use super::ks::{ks_critical, ks_distance};
use crate::covariance::{analytic_profile, long_run_variance, LongRunVariance};
use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Exec};
use crate::generators::map_replicates;
use crate::model::config::SAMPLE_BUDGET;
use crate::model::{FamilySpec, Normalizer};

/// Fewest replicates for a normality run.
pub const MIN_CLT_REPS: usize = 100;

/// Moment summary of the normalised sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (`R - 1` denominator).
    pub sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl SampleSummary {
    pub fn of(xs: &[f64]) -> Self {
        let r = xs.len() as f64;
        let mean = pairwise_sum(xs) / r;
        let pow = |k: i32| pairwise_sum(&xs.iter().map(|x| (x - mean).powi(k)).collect::<Vec<_>>()) / r;
        let (m2, m3, m4) = (pow(2), pow(3), pow(4));
        let degenerate = m2 <= 0.0;
        SampleSummary {
            count: xs.len(),
            mean,
            sd: if xs.len() > 1 { (m2 * r / (r - 1.0)).sqrt() } else { 0.0 },
            skewness: if degenerate { 0.0 } else { m3 / m2.powf(1.5) },
            excess_kurtosis: if degenerate { 0.0 } else { m4 / (m2 * m2) - 3.0 },
        }
    }
}

/// Outcome of a Monte Carlo CLT run at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltVerdict {
    pub family: FamilySpec,
    pub n: u64,
    pub reps: usize,
    pub seed: u64,
    pub normalizer: Normalizer,
    /// The divisor applied to `S_n`.
    pub scale: f64,
    pub summary: SampleSummary,
    pub ks_distance: f64,
    pub ks_critical: f64,
    pub alpha: f64,
    pub pass: bool,
    /// Normalised sums in replicate order.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltOptions {
    pub alpha: f64,
    /// Lift the `reps * n` budget.
    pub allow_large: bool,
    pub exec: Exec,
}

impl Default for CltOptions {
    fn default() -> Self {
        CltOptions {
            alpha: 0.05,
            allow_large: false,
            exec: Exec::default(),
        }
    }
}

/// Checks `reps * n` against the sample budget.
pub fn check_budget(n: u64, reps: usize, allow_large: bool) -> Result<()> {
    let values = n as u128 * reps as u128;
    if values > SAMPLE_BUDGET && !allow_large {
        return Err(Error::BudgetExceeded {
            values,
            limit: SAMPLE_BUDGET,
        });
    }
    Ok(())
}

fn unavailable(normalizer: Normalizer, reason: impl Into<String>) -> Error {
    Error::NormalizerUnavailable {
        normalizer: serde_json::to_value(normalizer)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
        reason: reason.into(),
    }
}

/// Analytic divisor for `S_n`, if the normaliser does not need the sample.
fn analytic_scale(family: &FamilySpec, n: u64, normalizer: Normalizer) -> Result<Option<f64>> {
    match normalizer {
        Normalizer::EmpiricalSN => Ok(None),
        Normalizer::AnalyticSN => match analytic_profile(family, n as usize) {
            Ok(p) => Ok(Some(p.s_n_squared()?.sqrt())),
            Err(Error::NoAnalyticCovariance(why)) => Err(unavailable(normalizer, why)),
            Err(e) => Err(e),
        },
        Normalizer::StationarySigmaSqrtN => match long_run_variance(family) {
            Ok(LongRunVariance::Finite(v)) if v > 0.0 => Ok(Some((v * n as f64).sqrt())),
            Ok(LongRunVariance::Finite(_)) => Err(Error::DegenerateVariance("long-run variance")),
            Ok(LongRunVariance::Infinite) => Err(unavailable(normalizer, "the long-run variance diverges")),
            Err(Error::NoAnalyticCovariance(why)) => Err(unavailable(normalizer, why)),
            Err(e) => Err(e),
        },
    }
}

/// Draws `reps` paths, normalises `S_n` and compares the result with the
/// standard normal by the Kolmogorov–Smirnov distance.
pub fn run_clt(
    family: &FamilySpec,
    n: u64,
    reps: usize,
    seed: u64,
    normalizer: Normalizer,
    opts: CltOptions,
) -> Result<CltVerdict> {
    if reps < MIN_CLT_REPS {
        return Err(Error::TooFewReplicates {
            needed: MIN_CLT_REPS,
            got: reps,
        });
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", opts.alpha)));
    }
    check_budget(n, reps, opts.allow_large)?;
    let fixed = analytic_scale(family, n, normalizer)?;
    let sums = map_replicates(family, n as usize, reps, seed, opts.exec, |_, x| pairwise_sum(x))?;
    let scale = match fixed {
        Some(s) => s,
        None => SampleSummary::of(&sums).sd,
    };
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::DegenerateVariance("s_n"));
    }
    let samples: Vec<f64> = sums.iter().map(|s| s / scale).collect();
    let d = ks_distance(&samples)?;
    let crit = ks_critical(opts.alpha, reps);
    Ok(CltVerdict {
        family: family.clone(),
        n,
        reps,
        seed,
        normalizer,
        scale,
        summary: SampleSummary::of(&samples),
        ks_distance: d,
        ks_critical: crit,
        alpha: opts.alpha,
        pass: d < crit,
        samples,
    })
}
