//! Centered base distributions used as marginals, innovations and factors.

use std::f64::consts::{E, PI, SQRT_2};

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// A mean-zero scalar distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum BaseDist {
    /// Standard normal.
    Normal,
    /// `Exp(rate) - 1/rate`.
    CenteredExponential { rate: f64 },
    /// Uniform on `[-half_width, half_width]`.
    CenteredUniform { half_width: f64 },
    /// Uniform on `{-1, +1}`.
    Rademacher,
}

impl BaseDist {
    /// Parses a distribution id as used by the command line shorthand.
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "normal" | "gauss" | "gaussian" => Ok(BaseDist::Normal),
            "exp" | "exponential" => Ok(BaseDist::CenteredExponential { rate: 1.0 }),
            "uniform" => Ok(BaseDist::CenteredUniform {
                half_width: 3f64.sqrt(),
            }),
            "rademacher" => Ok(BaseDist::Rademacher),
            other => Err(Error::UnknownDistribution(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            BaseDist::Normal => "normal",
            BaseDist::CenteredExponential { .. } => "exp",
            BaseDist::CenteredUniform { .. } => "uniform",
            BaseDist::Rademacher => "rademacher",
        }
    }

    /// Parameter violations, empty when the distribution is well formed.
    pub fn violations(&self) -> Vec<String> {
        match *self {
            BaseDist::CenteredExponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                vec![format!("exponential rate must be positive and finite, got {rate}")]
            }
            BaseDist::CenteredUniform { half_width } if !(half_width > 0.0 && half_width.is_finite()) => {
                vec![format!("uniform half_width must be positive and finite, got {half_width}")]
            }
            _ => Vec::new(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            BaseDist::Normal | BaseDist::Rademacher => 1.0,
            BaseDist::CenteredExponential { rate } => 1.0 / (rate * rate),
            BaseDist::CenteredUniform { half_width } => half_width * half_width / 3.0,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, BaseDist::CenteredExponential { .. })
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, BaseDist::Normal)
    }

    /// `E|X|^p` for `p > 0`.
    pub fn abs_moment(&self, p: f64) -> f64 {
        match *self {
            BaseDist::Normal => normal_abs_moment(p),
            BaseDist::Rademacher => 1.0,
            BaseDist::CenteredUniform { half_width } => half_width.powf(p) / (p + 1.0),
            BaseDist::CenteredExponential { rate } => {
                // Y = E - 1 with E ~ Exp(1):
                //   E|Y|^p = e^{-1} int_0^1 u^p e^u du + e^{-1} Gamma(p + 1)
                // and the first integral is sum_k 1 / (k! (p + k + 1)).
                let mut series = 0.0;
                let mut fact = 1.0;
                for k in 0..60 {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    series += 1.0 / (fact * (p + k as f64 + 1.0));
                }
                (series + gamma(p + 1.0)) / E / rate.powf(p)
            }
        }
    }

    /// `E[X^2 1{|X| >= a}]`.
    pub fn truncated_second_moment(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return self.variance();
        }
        match *self {
            BaseDist::Normal => gaussian_truncated_second_moment(1.0, a),
            BaseDist::Rademacher => {
                if a <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            BaseDist::CenteredUniform { half_width: h } => {
                if a >= h {
                    0.0
                } else {
                    (h * h * h - a * a * a) / (3.0 * h)
                }
            }
            BaseDist::CenteredExponential { rate } => {
                let l = rate;
                let right = (-1.0 - l * a).exp() * (a * a + 2.0 * a / l + 2.0 / (l * l));
                let left = if a < 1.0 / l {
                    1.0 / (l * l) - (l * a - 1.0).exp() * (a * a - 2.0 * a / l + 2.0 / (l * l))
                } else {
                    0.0
                };
                right + left
            }
        }
    }

    /// Distribution function `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            BaseDist::Normal => std_normal_cdf(x),
            BaseDist::Rademacher => {
                if x < -1.0 {
                    0.0
                } else if x < 1.0 {
                    0.5
                } else {
                    1.0
                }
            }
            BaseDist::CenteredUniform { half_width: h } => ((x + h) / (2.0 * h)).clamp(0.0, 1.0),
            BaseDist::CenteredExponential { rate } => {
                let y = x + 1.0 / rate;
                if y <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * y).exp()
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            BaseDist::Normal => rng.sample(StandardNormal),
            BaseDist::CenteredExponential { rate } => {
                let e: f64 = rng.sample(Exp1);
                (e - 1.0) / rate
            }
            BaseDist::CenteredUniform { half_width } => {
                let u: f64 = rng.random();
                (2.0 * u - 1.0) * half_width
            }
            BaseDist::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// `E|N(0,1)|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)`.
pub fn normal_abs_moment(p: f64) -> f64 {
    2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / PI.sqrt()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `E[B^2 1{|B| >= a}]` for `B ~ N(0, variance)`:
/// `tau^2 (2 (1 - Phi(a/tau)) + 2 (a/tau) phi(a/tau))`.
pub fn gaussian_truncated_second_moment(variance: f64, a: f64) -> f64 {
    if variance <= 0.0 {
        return 0.0;
    }
    if a <= 0.0 {
        return variance;
    }
    let tau = variance.sqrt();
    let z = a / tau;
    variance * (2.0 * std_normal_cdf(-z) + 2.0 * z * std_normal_pdf(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_third_absolute_moment() {
        let m3 = normal_abs_moment(3.0);
        assert!((m3 - 2.0 * (2.0 / PI).sqrt()).abs() < 1e-12);
        assert!((m3 - 1.595_769_121_605_731).abs() < 1e-12);
        assert!((normal_abs_moment(2.0) - 1.0).abs() < 1e-12);
        assert!((normal_abs_moment(4.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_third_absolute_moment_closed_form() {
        let d = BaseDist::CenteredExponential { rate: 1.0 };
        assert!((d.abs_moment(3.0) - (12.0 / E - 2.0)).abs() < 1e-12);
        assert!((d.abs_moment(2.0) - 1.0).abs() < 1e-12);
        let d2 = BaseDist::CenteredExponential { rate: 2.0 };
        assert!((d2.abs_moment(2.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn truncated_moments_at_zero_equal_variance() {
        for d in [
            BaseDist::Normal,
            BaseDist::Rademacher,
            BaseDist::CenteredUniform { half_width: 2.0 },
            BaseDist::CenteredExponential { rate: 0.5 },
        ] {
            let v = d.variance();
            assert!((d.truncated_second_moment(1e-300) - v).abs() < 1e-9 * v.max(1.0), "{d:?}");
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

    #[test]
    fn truncated_moment_matches_quadrature() {
        let rate: f64 = 1.5;
        let d = BaseDist::CenteredExponential { rate };
        let dens = |y: f64| y * y * rate * (-rate * (y + 1.0 / rate)).exp();
        for a in [0.3, 0.9] {
            let mut q = simpson(dens, a, 60.0, 200_000);
            if a < 1.0 / rate {
                q += simpson(dens, -1.0 / rate, -a, 20_000);
            }
            assert!((d.truncated_second_moment(a) - q).abs() < 1e-10, "a = {a}");
        }
        let u = BaseDist::CenteredUniform { half_width: 2.0 };
        let q = 2.0 * simpson(|y| y * y / 4.0, 0.5, 2.0, 1000);
        assert!((u.truncated_second_moment(0.5) - q).abs() < 1e-12);
        let g = simpson(|y| y * y * std_normal_pdf(y), 1.3, 40.0, 200_000) * 2.0;
        assert!((BaseDist::Normal.truncated_second_moment(1.3) - g).abs() < 1e-10);
    }

    #[test]
    fn unknown_id_is_rejected() {
        assert!(matches!(BaseDist::from_id("cauchy"), Err(Error::UnknownDistribution(_))));
        assert_eq!(BaseDist::from_id("exp").unwrap().variance(), 1.0);
    }
}
