use crate::error::{Error, Result};
use crate::model::dist::std_normal_cdf;

/// One-sample Kolmogorov–Smirnov distance to the standard normal:
/// `max_i max(i/R - Phi(x_(i)), Phi(x_(i)) - (i-1)/R)` over the sorted sample.
pub fn ks_distance(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewReplicates { needed: 1, got: 0 });
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let r = xs.len() as f64;
    Ok(xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = std_normal_cdf(x);
        d.max((i + 1) as f64 / r - f).max(f - i as f64 / r)
    }))
}

/// Asymptotic critical value `sqrt(-ln(alpha/2) / 2) / sqrt(R)`
/// (1.358 / sqrt(R) at `alpha = 0.05`).
pub fn ks_critical(alpha: f64, reps: usize) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (reps as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn quantiles(r: usize) -> Vec<f64> {
        let n = Normal::standard();
        (1..=r).map(|i| n.inverse_cdf((i as f64 - 0.5) / r as f64)).collect()
    }

    #[test]
    fn quantile_sample_distance() {
        assert!((ks_distance(&quantiles(100)).unwrap() - 0.005).abs() < 1e-9);
        assert!(ks_distance(&quantiles(5000)).unwrap() < 0.0192);
    }

    #[test]
    fn point_mass_at_zero() {
        assert_eq!(ks_distance(&[0.0; 10]).unwrap(), 0.5);
        assert!(ks_distance(&[]).is_err());
    }

    #[test]
    fn critical_value() {
        assert!((ks_critical(0.05, 1) - 1.3581).abs() < 1e-4);
        assert!((ks_critical(0.05, 5000) - 0.019206).abs() < 1e-5);
    }
}
