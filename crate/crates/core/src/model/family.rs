use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dist::BaseDist;
use super::maps::MonotoneMap;

/// Declarative description of a generative family of associated sequences.
///
/// `centered` asks for mean-zero marginals. It drives centering for the
/// Markov and monotone-transform kinds; every other kind is mean-zero by
/// construction and ignores it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(flatten)]
    pub kind: FamilyKind,
    #[serde(default = "default_true")]
    pub centered: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    Iid {
        dist: BaseDist,
    },
    /// Stationary centered Gaussian sequence with Toeplitz covariance.
    GaussianCov {
        autocov: Autocov,
    },
    /// `X_t = sum_k w_k e_{t-k}` with i.i.d. centered innovations.
    MovingAverage {
        weights: Vec<f64>,
        innovation: BaseDist,
    },
    /// Coordinatewise nondecreasing map applied to another family.
    MonotoneTransform {
        base: Box<FamilySpec>,
        map: MonotoneMap,
    },
    /// `X_i = Z` for every `i`.
    CommonFactor {
        dist: BaseDist,
    },
    /// Stationary two-state chain on `{0, 1}`.
    MarkovTwoState {
        p_stay0: f64,
        p_stay1: f64,
    },
    /// `X_{2k-1} = Z_k`, `X_{2k} = -Z_k`. Not associated; exists so the probes
    /// have a known negative case.
    Antithetic {
        dist: BaseDist,
    },
}

/// Stationary autocovariance rule `gamma(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Autocov {
    /// `gamma(k) = variance * rho^k`.
    Geometric {
        rho: f64,
        #[serde(default = "default_one")]
        variance: f64,
    },
    /// `gamma(k) = values[k]`, zero beyond the list.
    Explicit { values: Vec<f64> },
}

fn default_one() -> f64 {
    1.0
}

impl Autocov {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Autocov::Geometric { rho, variance } => variance * rho.powi(k as i32),
            Autocov::Explicit { values } => values.get(k).copied().unwrap_or(0.0),
        }
    }
}

/// One violated family constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: String,
    pub parameter: String,
    pub detail: String,
}

impl Violation {
    fn new(constraint: &str, parameter: impl Into<String>, detail: impl Into<String>) -> Self {
        Violation {
            constraint: constraint.to_string(),
            parameter: parameter.into(),
            detail: detail.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} violated at `{}`: {}", self.constraint, self.parameter, self.detail)
    }
}

/// Per-coordinate law, when it is known in closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    Gaussian { variance: f64 },
    Base(BaseDist),
    /// Two-point law: `lo` with probability `1 - p_hi`, `hi` with `p_hi`.
    TwoPoint { lo: f64, hi: f64, p_hi: f64 },
}

impl Marginal {
    pub fn variance(&self) -> f64 {
        match self {
            Marginal::Gaussian { variance } => *variance,
            Marginal::Base(d) => d.variance(),
            Marginal::TwoPoint { lo, hi, p_hi } => {
                let mean = lo * (1.0 - p_hi) + hi * p_hi;
                (lo - mean).powi(2) * (1.0 - p_hi) + (hi - mean).powi(2) * p_hi
            }
        }
    }

    pub fn abs_moment(&self, p: f64) -> f64 {
        match self {
            Marginal::Gaussian { variance } => variance.powf(p / 2.0) * super::dist::normal_abs_moment(p),
            Marginal::Base(d) => d.abs_moment(p),
            Marginal::TwoPoint { lo, hi, p_hi } => lo.abs().powf(p) * (1.0 - p_hi) + hi.abs().powf(p) * p_hi,
        }
    }

    /// `E[X^2 1{|X| >= a}]`.
    pub fn truncated_second_moment(&self, a: f64) -> f64 {
        match self {
            Marginal::Gaussian { variance } => super::dist::gaussian_truncated_second_moment(*variance, a),
            Marginal::Base(d) => d.truncated_second_moment(a),
            Marginal::TwoPoint { lo, hi, p_hi } => {
                let mut acc = 0.0;
                if lo.abs() >= a {
                    acc += lo * lo * (1.0 - p_hi);
                }
                if hi.abs() >= a {
                    acc += hi * hi * p_hi;
                }
                acc
            }
        }
    }
}

impl Marginal {
    /// `E[f(X)]` by composite Simpson quadrature (exact sums for discrete laws).
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        match self {
            Marginal::Gaussian { variance } => {
                let tau = variance.sqrt();
                simpson(|z| f(tau * z) * super::dist::std_normal_pdf(z), -12.0, 12.0, 24_000)
            }
            Marginal::TwoPoint { lo, hi, p_hi } => f(*lo) * (1.0 - p_hi) + f(*hi) * p_hi,
            Marginal::Base(d) => match *d {
                BaseDist::Normal => Marginal::Gaussian { variance: 1.0 }.expectation(f),
                BaseDist::Rademacher => 0.5 * (f(-1.0) + f(1.0)),
                BaseDist::CenteredUniform { half_width: h } => simpson(&f, -h, h, 20_000) / (2.0 * h),
                BaseDist::CenteredExponential { rate } => {
                    let lo = -1.0 / rate;
                    simpson(|y| f(y) * rate * (-rate * (y - lo)).exp(), lo, lo + 60.0 / rate, 60_000)
                }
            },
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
    let h = (hi - lo) / steps as f64;
    let mut acc = f(lo) + f(hi);
    for k in 1..steps {
        acc += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

impl FamilySpec {
    pub fn new(kind: FamilyKind) -> Self {
        FamilySpec { kind, centered: true }
    }

    pub fn iid(dist: BaseDist) -> Self {
        Self::new(FamilyKind::Iid { dist })
    }

    pub fn iid_normal() -> Self {
        Self::iid(BaseDist::Normal)
    }

    pub fn geometric_gaussian(rho: f64) -> Self {
        Self::new(FamilyKind::GaussianCov {
            autocov: Autocov::Geometric { rho, variance: 1.0 },
        })
    }

    pub fn gaussian_explicit(values: Vec<f64>) -> Self {
        Self::new(FamilyKind::GaussianCov {
            autocov: Autocov::Explicit { values },
        })
    }

    pub fn moving_average(weights: Vec<f64>, innovation: BaseDist) -> Self {
        Self::new(FamilyKind::MovingAverage { weights, innovation })
    }

    pub fn common_factor(dist: BaseDist) -> Self {
        Self::new(FamilyKind::CommonFactor { dist })
    }

    pub fn markov(p_stay0: f64, p_stay1: f64, centered: bool) -> Self {
        FamilySpec {
            kind: FamilyKind::MarkovTwoState { p_stay0, p_stay1 },
            centered,
        }
    }

    pub fn transform(base: FamilySpec, map: MonotoneMap, recenter: bool) -> Self {
        FamilySpec {
            kind: FamilyKind::MonotoneTransform {
                base: Box::new(base),
                map,
            },
            centered: recenter,
        }
    }

    pub fn antithetic(dist: BaseDist) -> Self {
        Self::new(FamilyKind::Antithetic { dist })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            FamilyKind::Iid { .. } => "iid",
            FamilyKind::GaussianCov { .. } => "gaussian_cov",
            FamilyKind::MovingAverage { .. } => "moving_average",
            FamilyKind::MonotoneTransform { .. } => "monotone_transform",
            FamilyKind::CommonFactor { .. } => "common_factor",
            FamilyKind::MarkovTwoState { .. } => "markov_two_state",
            FamilyKind::Antithetic { .. } => "antithetic",
        }
    }

    /// Every violated constraint; empty iff the family is well formed and
    /// satisfies its association-sufficient conditions.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        self.collect_violations("", &mut out);
        out
    }

    fn collect_violations(&self, prefix: &str, out: &mut Vec<Violation>) {
        let p = |s: &str| format!("{prefix}{s}");
        let dist_violations = |d: &BaseDist, name: &str, out: &mut Vec<Violation>| {
            for v in d.violations() {
                out.push(Violation::new("distribution-parameters", p(name), v));
            }
        };
        match &self.kind {
            FamilyKind::Iid { dist } => dist_violations(dist, "dist", out),
            FamilyKind::CommonFactor { dist } => dist_violations(dist, "dist", out),
            FamilyKind::GaussianCov { autocov } => match autocov {
                Autocov::Geometric { rho, variance } => {
                    if !(rho.is_finite() && *rho >= 0.0) {
                        out.push(Violation::new(
                            "nonnegative-correlation",
                            p("autocov.rho"),
                            format!("rho must be >= 0, got {rho}"),
                        ));
                    } else if *rho > 1.0 {
                        out.push(Violation::new(
                            "positive-semidefinite",
                            p("autocov.rho"),
                            format!("rho must be <= 1, got {rho}"),
                        ));
                    }
                    if !(variance.is_finite() && *variance > 0.0) {
                        out.push(Violation::new(
                            "positive-variance",
                            p("autocov.variance"),
                            format!("variance must be positive, got {variance}"),
                        ));
                    }
                }
                Autocov::Explicit { values } => {
                    if values.is_empty() || !(values[0] > 0.0) {
                        out.push(Violation::new(
                            "positive-variance",
                            p("autocov.values[0]"),
                            "gamma(0) must be positive",
                        ));
                    }
                    for (k, g) in values.iter().enumerate() {
                        if !g.is_finite() {
                            out.push(Violation::new("finite", p(&format!("autocov.values[{k}]")), "non-finite"));
                        } else if *g < 0.0 {
                            out.push(Violation::new(
                                "nonnegative-correlation",
                                p(&format!("autocov.values[{k}]")),
                                format!("gamma({k}) = {g} < 0"),
                            ));
                        } else if k > 0 && !values.is_empty() && *g > values[0] {
                            out.push(Violation::new(
                                "positive-semidefinite",
                                p(&format!("autocov.values[{k}]")),
                                format!("gamma({k}) = {g} exceeds gamma(0)"),
                            ));
                        }
                    }
                }
            },
            FamilyKind::MovingAverage { weights, innovation } => {
                if weights.is_empty() {
                    out.push(Violation::new("nonempty-weights", p("weights"), "no weights given"));
                }
                for (k, w) in weights.iter().enumerate() {
                    if !w.is_finite() || *w < 0.0 {
                        out.push(Violation::new(
                            "nonnegative-weights",
                            p(&format!("weights[{k}]")),
                            format!("weight {w} < 0"),
                        ));
                    }
                }
                if !weights.is_empty() && weights.iter().all(|w| *w == 0.0) {
                    out.push(Violation::new("positive-weight", p("weights"), "all weights are zero"));
                }
                dist_violations(innovation, "innovation", out);
            }
            FamilyKind::MonotoneTransform { base, map } => {
                base.collect_violations(&p("base."), out);
                for v in map.violations() {
                    out.push(Violation::new("nondecreasing-map", p("map"), v));
                }
            }
            FamilyKind::MarkovTwoState { p_stay0, p_stay1 } => {
                for (name, v) in [("p_stay0", p_stay0), ("p_stay1", p_stay1)] {
                    if !(0.0..=1.0).contains(v) {
                        out.push(Violation::new("probability", p(name), format!("{v} not in [0, 1]")));
                    }
                }
                if *p_stay1 < 1.0 - *p_stay0 {
                    out.push(Violation::new(
                        "stochastic-monotonicity",
                        p("p_stay1"),
                        format!("P(1 -> 1) = {p_stay1} < P(0 -> 1) = {}", 1.0 - p_stay0),
                    ));
                }
                if *p_stay0 + *p_stay1 >= 2.0 {
                    out.push(Violation::new(
                        "irreducible",
                        p("p_stay0"),
                        "both states absorbing; no stationary law",
                    ));
                }
            }
            FamilyKind::Antithetic { dist } => {
                dist_violations(dist, "dist", out);
                out.push(Violation::new(
                    "association",
                    p("kind"),
                    "antithetic pairs are negatively correlated (diagnostic input only)",
                ));
            }
        }
    }

    /// Stationary probability of state 1 and the chain's second eigenvalue.
    pub(crate) fn markov_params(p_stay0: f64, p_stay1: f64) -> (f64, f64) {
        let pi1 = (1.0 - p_stay0) / (2.0 - p_stay0 - p_stay1);
        (pi1, p_stay0 + p_stay1 - 1.0)
    }

    /// Marginal mean of the generated coordinates, if known analytically.
    pub fn analytic_mean(&self) -> Option<f64> {
        match &self.kind {
            FamilyKind::MarkovTwoState { p_stay0, p_stay1 } => {
                if self.centered {
                    Some(0.0)
                } else {
                    Some(Self::markov_params(*p_stay0, *p_stay1).0)
                }
            }
            FamilyKind::MonotoneTransform { base, map } => {
                if self.centered {
                    return Some(0.0);
                }
                let base_mean = base.analytic_mean()?;
                if let Some((a, b)) = map.is_affine() {
                    Some(a * base_mean + b)
                } else if map.is_odd() && base_mean == 0.0 && base.is_symmetric() {
                    Some(0.0)
                } else {
                    None
                }
            }
            _ => Some(0.0),
        }
    }

    /// True when every finite-dimensional law is symmetric about zero.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            FamilyKind::Iid { dist } | FamilyKind::CommonFactor { dist } | FamilyKind::Antithetic { dist } => {
                dist.is_symmetric()
            }
            FamilyKind::GaussianCov { .. } => true,
            FamilyKind::MovingAverage { innovation, .. } => innovation.is_symmetric(),
            FamilyKind::MarkovTwoState { p_stay0, p_stay1 } => self.centered && p_stay0 == p_stay1,
            FamilyKind::MonotoneTransform { base, map } => map.is_odd() && base.is_symmetric(),
        }
    }

    /// True when the whole sequence is jointly Gaussian.
    pub fn is_gaussian(&self) -> bool {
        match &self.kind {
            FamilyKind::Iid { dist } | FamilyKind::CommonFactor { dist } | FamilyKind::Antithetic { dist } => {
                dist.is_gaussian()
            }
            FamilyKind::GaussianCov { .. } => true,
            FamilyKind::MovingAverage { innovation, .. } => innovation.is_gaussian(),
            FamilyKind::MarkovTwoState { .. } => false,
            FamilyKind::MonotoneTransform { base, map } => map.is_affine().is_some() && base.is_gaussian(),
        }
    }

    /// Law of a single coordinate (all built-in families are stationary in
    /// their marginals, apart from asymmetric antithetic input).
    pub fn marginal(&self) -> Option<Marginal> {
        match &self.kind {
            FamilyKind::Iid { dist } | FamilyKind::CommonFactor { dist } => Some(if dist.is_gaussian() {
                Marginal::Gaussian { variance: 1.0 }
            } else {
                Marginal::Base(dist.clone())
            }),
            FamilyKind::Antithetic { dist } if dist.is_symmetric() => Some(Marginal::Base(dist.clone())),
            FamilyKind::Antithetic { .. } => None,
            FamilyKind::GaussianCov { autocov } => Some(Marginal::Gaussian { variance: autocov.at(0) }),
            FamilyKind::MovingAverage { weights, innovation } => {
                if innovation.is_gaussian() {
                    let v: f64 = weights.iter().map(|w| w * w).sum();
                    Some(Marginal::Gaussian { variance: v })
                } else if weights.iter().filter(|w| **w != 0.0).count() == 1 {
                    let w = weights.iter().copied().find(|w| *w != 0.0).unwrap_or(1.0);
                    if w == 1.0 {
                        Some(Marginal::Base(innovation.clone()))
                    } else {
                        None
                    }
                } else {
                    None
                }
            }
            FamilyKind::MarkovTwoState { p_stay0, p_stay1 } => {
                let (pi1, _) = Self::markov_params(*p_stay0, *p_stay1);
                let shift = if self.centered { pi1 } else { 0.0 };
                Some(Marginal::TwoPoint {
                    lo: -shift,
                    hi: 1.0 - shift,
                    p_hi: pi1,
                })
            }
            FamilyKind::MonotoneTransform { base, map } => {
                let (a, _) = map.is_affine()?;
                match base.marginal()? {
                    Marginal::Gaussian { variance } => Some(Marginal::Gaussian {
                        variance: a * a * variance,
                    }),
                    Marginal::TwoPoint { lo, hi, p_hi } if self.centered || base.analytic_mean() == Some(0.0) => {
                        let mean = a * (lo * (1.0 - p_hi) + hi * p_hi);
                        let mut m = Marginal::TwoPoint {
                            lo: a * lo,
                            hi: a * hi,
                            p_hi,
                        };
                        if let Marginal::TwoPoint { lo, hi, .. } = &mut m {
                            *lo -= mean;
                            *hi -= mean;
                        }
                        Some(m)
                    }
                    _ => None,
                }
            }
        }
    }

    /// Canonical JSON used for hashing and provenance.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("family serializes")
    }

    /// Short content hash (first 16 hex digits of SHA-256 of the canonical JSON).
    pub fn hash(&self) -> String {
        short_hash(self.canonical_json().as_bytes())
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
