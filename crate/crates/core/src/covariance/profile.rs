use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Exec};
use crate::generators::ReplicateSet;
use crate::model::{Autocov, FamilyKind, FamilySpec};

/// Largest `n` for which a dense analytic matrix is materialised
/// (non-stationary families only).
const MAX_DENSE_N: usize = 8192;

/// Covariance entries: a stationary autocovariance or a dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Gamma {
    /// `gamma(0..n)`; `Gamma_ij = gamma(|i - j|)`.
    Stationary(Vec<f64>),
    /// Row-major `n x n`, symmetric.
    Full(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    Analytic,
    /// Sample covariance over `reps` replicates with per-entry standard errors
    /// (row-major `n x n`).
    Empirical { reps: usize, stderr: Vec<f64> },
}

impl ProfileSource {
    pub fn label(&self) -> &'static str {
        match self {
            ProfileSource::Analytic => "analytic",
            ProfileSource::Empirical { .. } => "empirical",
        }
    }
}

/// Covariance structure of `X_1, ..., X_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceProfile {
    pub n: usize,
    pub source: ProfileSource,
    pub gamma: Gamma,
}

/// Long-run variance `gamma(0) + 2 sum_{k >= 1} gamma(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum LongRunVariance {
    Finite(f64),
    /// The series diverges (e.g. a common factor).
    Infinite,
}

impl LongRunVariance {
    pub fn finite(self) -> Option<f64> {
        match self {
            LongRunVariance::Finite(v) => Some(v),
            LongRunVariance::Infinite => None,
        }
    }
}

impl CovarianceProfile {
    pub fn stationary(gamma: Vec<f64>) -> Self {
        CovarianceProfile {
            n: gamma.len(),
            source: ProfileSource::Analytic,
            gamma: Gamma::Stationary(gamma),
        }
    }

    /// Dense analytic profile; `rows` must be square and symmetric.
    pub fn dense(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * n);
        for r in &rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            flat.extend_from_slice(r);
        }
        for i in 0..n {
            for j in 0..i {
                if flat[i * n + j] != flat[j * n + i] {
                    return Err(Error::InvalidArgument(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(CovarianceProfile {
            n,
            source: ProfileSource::Analytic,
            gamma: Gamma::Full(flat),
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.gamma {
            Gamma::Stationary(g) => g[i.abs_diff(j)],
            Gamma::Full(m) => m[i * self.n + j],
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self.gamma, Gamma::Stationary(_))
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.source, ProfileSource::Analytic)
    }

    /// `Var(X_{a+1} + ... + X_b)` for the 0-based half-open range `a..b`.
    pub fn range_var(&self, a: usize, b: usize) -> f64 {
        if b <= a {
            return 0.0;
        }
        match &self.gamma {
            Gamma::Stationary(g) => stationary_sum_var(g, b - a),
            Gamma::Full(_) => {
                let mut acc = 0.0;
                for i in a..b {
                    let mut row = 0.0;
                    for j in a..b {
                        row += self.get(i, j);
                    }
                    acc += row;
                }
                acc
            }
        }
    }

    /// `sum_{i in a..b, j in c..d} Gamma_ij`.
    pub fn cross_sum(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let mut acc = 0.0;
        for i in a..b {
            let mut row = 0.0;
            for j in c..d {
                row += self.get(i, j);
            }
            acc += row;
        }
        acc
    }

    /// `s_n^2 = Var(S_n)`. Zero is an error.
    pub fn s_n_squared(&self) -> Result<f64> {
        let s = self.range_var(0, self.n);
        if !s.is_finite() {
            return Err(Error::NonFinite);
        }
        if s <= 0.0 {
            return Err(Error::DegenerateVariance("s_n^2"));
        }
        Ok(s)
    }

    /// Variances `Var(X_j)`, `j = 1..n`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `u_n(r) = max_j sum_{i : |i - j| >= r} Gamma_ij` over the window `1..n`.
    pub fn cox_coefficient(&self, r: usize) -> f64 {
        let n = self.n;
        match &self.gamma {
            Gamma::Stationary(g) => {
                // prefix[k] = gamma(0) + ... + gamma(k - 1)
                let mut prefix = Vec::with_capacity(n + 1);
                prefix.push(0.0);
                let mut acc = 0.0;
                for &v in g {
                    acc += v;
                    prefix.push(acc);
                }
                // one-sided sum over lags r..=reach
                let side = |reach: usize| if reach < r { 0.0 } else { prefix[reach + 1] - prefix[r] };
                (0..n)
                    .map(|j| {
                        let both = side(j) + side(n - 1 - j);
                        if r == 0 {
                            both - g[0]
                        } else {
                            both
                        }
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            Gamma::Full(_) => (0..n)
                .map(|j| (0..n).filter(|i| i.abs_diff(j) >= r).map(|i| self.get(i, j)).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Dense copy of the matrix.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }
}

/// `L gamma(0) + 2 sum_{k=1}^{L-1} (L - k) gamma(k)`.
pub fn stationary_sum_var(g: &[f64], len: usize) -> f64 {
    if len == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 1..len {
        acc += (len - k) as f64 * g[k];
    }
    len as f64 * g[0] + 2.0 * acc
}

/// Closed-form autocovariance of a stationary family, `gamma(0..n)`.
fn analytic_autocov(family: &FamilySpec, n: usize) -> Result<Option<Vec<f64>>> {
    let g = match &family.kind {
        FamilyKind::Iid { dist } => {
            let mut g = vec![0.0; n];
            g[0] = dist.variance();
            g
        }
        FamilyKind::GaussianCov { autocov } => (0..n).map(|k| autocov.at(k)).collect(),
        FamilyKind::MovingAverage { weights, innovation } => {
            let v = innovation.variance();
            (0..n)
                .map(|h| {
                    let s: f64 = weights.iter().zip(weights.iter().skip(h)).map(|(a, b)| a * b).sum();
                    v * s
                })
                .collect()
        }
        FamilyKind::CommonFactor { dist } => vec![dist.variance(); n],
        FamilyKind::MarkovTwoState { p_stay0, p_stay1 } => {
            let (pi1, lambda) = FamilySpec::markov_params(*p_stay0, *p_stay1);
            let v = pi1 * (1.0 - pi1);
            let mut g = Vec::with_capacity(n);
            let mut p = 1.0;
            for _ in 0..n {
                g.push(v * p);
                p *= lambda;
            }
            g
        }
        FamilyKind::MonotoneTransform { base, map } => {
            let Some((a, _)) = map.is_affine() else {
                return Err(Error::NoAnalyticCovariance(format!(
                    "nonlinear transform `{map:?}` of {}",
                    base.kind_name()
                )));
            };
            match analytic_autocov(base, n)? {
                Some(g) => g.into_iter().map(|v| a * a * v).collect(),
                None => return Ok(None),
            }
        }
        FamilyKind::Antithetic { .. } => return Ok(None),
    };
    Ok(Some(g))
}

/// Exact covariance of the first `n` coordinates of `family`.
pub fn analytic_profile(family: &FamilySpec, n: usize) -> Result<CovarianceProfile> {
    if n == 0 {
        return Err(Error::InvalidArgument("profile length must be positive".into()));
    }
    if let Some(g) = analytic_autocov(family, n)? {
        return Ok(CovarianceProfile::stationary(g));
    }
    match &family.kind {
        FamilyKind::Antithetic { dist } => {
            if n > MAX_DENSE_N {
                return Err(Error::InvalidArgument(format!("dense profile limited to n <= {MAX_DENSE_N}")));
            }
            let v = dist.variance();
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                m[i * n + i] = v;
                let partner = i ^ 1;
                if partner < n {
                    m[i * n + partner] = -v;
                }
            }
            Ok(CovarianceProfile {
                n,
                source: ProfileSource::Analytic,
                gamma: Gamma::Full(m),
            })
        }
        _ => Err(Error::NoAnalyticCovariance(family.kind_name().into())),
    }
}

/// Long-run variance of a stationary family (closed forms for every built-in).
pub fn long_run_variance(family: &FamilySpec) -> Result<LongRunVariance> {
    use LongRunVariance::*;
    Ok(match &family.kind {
        FamilyKind::Iid { dist } => Finite(dist.variance()),
        FamilyKind::GaussianCov { autocov } => match autocov {
            Autocov::Geometric { rho, variance } => {
                if *rho >= 1.0 {
                    Infinite
                } else {
                    Finite(variance * (1.0 + rho) / (1.0 - rho))
                }
            }
            Autocov::Explicit { values } => {
                Finite(values.first().copied().unwrap_or(0.0) + 2.0 * values.iter().skip(1).sum::<f64>())
            }
        },
        FamilyKind::MovingAverage { weights, innovation } => {
            let s: f64 = weights.iter().sum();
            Finite(innovation.variance() * s * s)
        }
        FamilyKind::CommonFactor { .. } => Infinite,
        FamilyKind::MarkovTwoState { p_stay0, p_stay1 } => {
            let (pi1, lambda) = FamilySpec::markov_params(*p_stay0, *p_stay1);
            Finite(pi1 * (1.0 - pi1) * (1.0 + lambda) / (1.0 - lambda))
        }
        FamilyKind::MonotoneTransform { base, map } => match map.is_affine() {
            Some((a, _)) => match long_run_variance(base)? {
                Finite(v) => Finite(a * a * v),
                Infinite => Infinite,
            },
            None => return Err(Error::NoAnalyticCovariance(format!("nonlinear transform `{map:?}`"))),
        },
        FamilyKind::Antithetic { .. } => {
            return Err(Error::NoAnalyticCovariance("antithetic pairs are not stationary".into()))
        }
    })
}

/// Infinite-window Cox coefficient `u(r) = sup_j sum_{|i - j| >= r} Cov(X_i, X_j)`
/// in closed form; `None` when it diverges.
pub fn cox_coefficient_limit(family: &FamilySpec, r: usize) -> Result<Option<f64>> {
    // u(r) = 2 sum_{k >= r} gamma(k) for r >= 1; for r = 0 the lag-0 term counts once.
    let with_zero = |tail: f64, g0: f64| if r == 0 { tail - g0 } else { tail };
    Ok(match &family.kind {
        FamilyKind::CommonFactor { .. } => None,
        FamilyKind::GaussianCov {
            autocov: Autocov::Geometric { rho, variance },
        } => {
            if *rho >= 1.0 {
                None
            } else {
                Some(with_zero(2.0 * variance * rho.powi(r as i32) / (1.0 - rho), *variance))
            }
        }
        FamilyKind::MarkovTwoState { p_stay0, p_stay1 } => {
            let (pi1, lambda) = FamilySpec::markov_params(*p_stay0, *p_stay1);
            let v = pi1 * (1.0 - pi1);
            let tail = if lambda == 0.0 {
                if r == 0 {
                    v
                } else {
                    0.0
                }
            } else {
                v * lambda.powi(r as i32) / (1.0 - lambda)
            };
            Some(with_zero(2.0 * tail, v))
        }
        FamilyKind::MonotoneTransform { base, map } => match map.is_affine() {
            Some((a, _)) => cox_coefficient_limit(base, r)?.map(|u| a * a * u),
            None => return Err(Error::NoAnalyticCovariance(format!("nonlinear transform `{map:?}`"))),
        },
        FamilyKind::Antithetic { .. } => {
            return Err(Error::NoAnalyticCovariance("antithetic pairs are not stationary".into()))
        }
        // finite support: iid, explicit, moving average
        _ => {
            let support = match &family.kind {
                FamilyKind::Iid { .. } => 1,
                FamilyKind::GaussianCov {
                    autocov: Autocov::Explicit { values },
                } => values.len(),
                FamilyKind::MovingAverage { weights, .. } => weights.len(),
                _ => unreachable!("handled above"),
            };
            let g = analytic_autocov(family, support.max(1))?.expect("stationary family");
            let tail: f64 = g.iter().skip(r).sum();
            Some(with_zero(2.0 * tail, g[0]))
        }
    })
}

/// Unbiased sample covariance across replicates, with per-entry standard errors.
pub fn empirical_profile(reps: &ReplicateSet) -> Result<CovarianceProfile> {
    empirical_profile_with(reps, Exec::default())
}

pub fn empirical_profile_with(reps: &ReplicateSet, exec: Exec) -> Result<CovarianceProfile> {
    let r = reps.reps();
    if r < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: r });
    }
    let n = reps.n;
    // column means
    let means: Vec<f64> = (0..n)
        .map(|i| pairwise_sum(&reps.paths.iter().map(|p| p.values[i]).collect::<Vec<_>>()) / r as f64)
        .collect();
    let centered: Vec<Vec<f64>> = (0..n)
        .map(|i| reps.paths.iter().map(|p| p.values[i] - means[i]).collect())
        .collect();
    let rows: Vec<Vec<(f64, f64)>> = exec.map_with(n, Vec::new, |prod: &mut Vec<f64>, i| {
        (0..n)
            .map(|j| {
                if j < i {
                    return (0.0, 0.0);
                }
                prod.clear();
                prod.extend(centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b));
                let s = pairwise_sum(prod);
                let cov = s / (r - 1) as f64;
                let mean = s / r as f64;
                for x in prod.iter_mut() {
                    *x = (*x - mean) * (*x - mean);
                }
                let var = pairwise_sum(prod) / (r - 1) as f64;
                (cov, (var / r as f64).sqrt())
            })
            .collect()
    });
    let mut cov = vec![0.0; n * n];
    let mut se = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let (c, s) = rows[i][j];
            cov[i * n + j] = c;
            cov[j * n + i] = c;
            se[i * n + j] = s;
            se[j * n + i] = s;
        }
    }
    Ok(CovarianceProfile {
        n,
        source: ProfileSource::Empirical { reps: r, stderr: se },
        gamma: Gamma::Full(cov),
    })
}
