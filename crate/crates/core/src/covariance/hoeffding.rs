use crate::error::{Error, Result};

/// Finitely supported bivariate law: atoms `(x, y, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBivariate {
    pub atoms: Vec<(f64, f64, f64)>,
}

impl DiscreteBivariate {
    pub fn new(atoms: Vec<(f64, f64, f64)>) -> Self {
        DiscreteBivariate { atoms }
    }

    /// Product of two marginal laws.
    pub fn independent(xs: &[(f64, f64)], ys: &[(f64, f64)]) -> Self {
        let mut atoms = Vec::with_capacity(xs.len() * ys.len());
        for &(x, px) in xs {
            for &(y, py) in ys {
                atoms.push((x, y, px * py));
            }
        }
        DiscreteBivariate { atoms }
    }
}

fn sorted_support(vals: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = vals.collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

/// `Cov(X, Y) = int int H(x, y) dx dy` with
/// `H(x, y) = P(X > x, Y > y) - P(X > x) P(Y > y)`.
///
/// `H` is constant on each cell `[x_a, x_{a+1}) x [y_b, y_{b+1})` of the
/// support grid and zero outside its hull, so the integral is a finite sum.
pub fn hoeffding_cov(joint: &DiscreteBivariate, tol: f64) -> Result<f64> {
    let atoms = &joint.atoms;
    if atoms.is_empty() {
        return Err(Error::InvalidArgument("empty support".into()));
    }
    if atoms.iter().any(|(x, y, p)| !x.is_finite() || !y.is_finite() || !p.is_finite()) {
        return Err(Error::NonFinite);
    }
    if atoms.iter().any(|a| a.2 < 0.0) {
        return Err(Error::InvalidArgument("negative probability".into()));
    }
    let total: f64 = atoms.iter().map(|a| a.2).sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::InvalidArgument(format!("probabilities sum to {total}, not 1")));
    }
    let xs = sorted_support(atoms.iter().map(|a| a.0));
    let ys = sorted_support(atoms.iter().map(|a| a.1));
    let mut acc = 0.0;
    for a in 0..xs.len().saturating_sub(1) {
        let x = xs[a];
        let px: f64 = atoms.iter().filter(|t| t.0 > x).map(|t| t.2).sum();
        for b in 0..ys.len().saturating_sub(1) {
            let y = ys[b];
            let py: f64 = atoms.iter().filter(|t| t.1 > y).map(|t| t.2).sum();
            let pxy: f64 = atoms.iter().filter(|t| t.0 > x && t.1 > y).map(|t| t.2).sum();
            acc += (pxy - px * py) * (xs[a + 1] - x) * (ys[b + 1] - y);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_marginals_give_zero() {
        let j = DiscreteBivariate::independent(&[(0.0, 0.3), (1.0, 0.7)], &[(-1.0, 0.5), (2.0, 0.25), (3.0, 0.25)]);
        assert!(hoeffding_cov(&j, 1e-10).unwrap().abs() < 1e-15);
    }

    #[test]
    fn two_point_examples() {
        let pos = DiscreteBivariate::new(vec![(0.0, 0.0, 0.5), (1.0, 1.0, 0.5)]);
        assert!((hoeffding_cov(&pos, 1e-10).unwrap() - 0.25).abs() < 1e-15);
        let neg = DiscreteBivariate::new(vec![(0.0, 1.0, 0.5), (1.0, 0.0, 0.5)]);
        assert!((hoeffding_cov(&neg, 1e-10).unwrap() + 0.25).abs() < 1e-15);
    }

    #[test]
    fn unnormalised_input_is_rejected() {
        let bad = DiscreteBivariate::new(vec![(0.0, 0.0, 0.5), (1.0, 1.0, 0.4)]);
        assert!(hoeffding_cov(&bad, 1e-10).is_err());
    }
}
