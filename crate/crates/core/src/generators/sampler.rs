use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::rng::RngStream;
use crate::error::{Error, Result};
use crate::model::{Autocov, BaseDist, FamilyKind, FamilySpec, MonotoneMap};

/// Diagonal jitter used when a Toeplitz factorisation hits a zero pivot.
pub const CHOLESKY_JITTER: f64 = 1e-10;

/// Largest banded factor stored for explicit Gaussian autocovariances.
const MAX_FACTOR_ENTRIES: usize = 400_000_000;

/// Draws calibration samples when a transform's mean has no closed form.
const CALIBRATION_SEED: u64 = 0x5eed_ca1b;
const CALIBRATION_DRAWS: u64 = 1 << 20;

/// Pre-factored sampler for one family at a fixed length `n`.
#[derive(Debug, Clone)]
pub struct PathSampler {
    n: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Iid(BaseDist),
    /// Exact AR(1) recursion for `gamma(k) = variance * rho^k`.
    Ar1 { rho: f64, sd: f64, innov_sd: f64 },
    Banded(BandedFactor),
    MovingAverage { weights: Vec<f64>, innovation: BaseDist },
    CommonFactor(BaseDist),
    Markov { p_stay0: f64, p_stay1: f64, pi1: f64, shift: f64 },
    Transform { base: Box<PathSampler>, map: MonotoneMap, shift: f64 },
    Antithetic(BaseDist),
}

/// Lower-triangular banded Cholesky factor: row `i` holds columns
/// `i - bw ..= i` (missing leading columns are zero).
#[derive(Debug, Clone)]
pub struct BandedFactor {
    n: usize,
    bw: usize,
    rows: Vec<f64>,
}

impl BandedFactor {
    fn at(&self, i: usize, j: usize) -> f64 {
        // caller guarantees i - bw <= j <= i
        self.rows[i * (self.bw + 1) + (j + self.bw - i)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.rows[i * (self.bw + 1) + (j + self.bw - i)] = v;
    }

    /// Factors the `n x n` Toeplitz matrix of `gamma` (zero beyond its length).
    pub fn toeplitz(gamma: &[f64], n: usize) -> Result<Self> {
        match Self::try_factor(gamma, n, 0.0) {
            Ok(f) => Ok(f),
            Err(_) => Self::try_factor(gamma, n, CHOLESKY_JITTER),
        }
    }

    fn try_factor(gamma: &[f64], n: usize, jitter: f64) -> Result<Self> {
        let support = gamma.iter().rposition(|g| *g != 0.0).map_or(0, |k| k + 1);
        let bw = support.saturating_sub(1).min(n.saturating_sub(1));
        if n.saturating_mul(bw + 1) > MAX_FACTOR_ENTRIES {
            return Err(Error::InvalidArgument(format!(
                "Gaussian factor for n = {n} with bandwidth {bw} exceeds the storage limit"
            )));
        }
        let mut f = BandedFactor {
            n,
            bw,
            rows: vec![0.0; n * (bw + 1)],
        };
        let g = |k: usize| gamma.get(k).copied().unwrap_or(0.0);
        // First pass insists on a pivot clearly above rounding noise; the
        // jittered retry only needs it positive.
        let floor = if jitter == 0.0 { 1e-14 * g(0) } else { 0.0 };
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = g(i - j);
                if i == j {
                    s += jitter;
                }
                for k in lo.max(j.saturating_sub(bw))..j {
                    s -= f.at(i, k) * f.at(j, k);
                }
                if i == j {
                    if !(s > floor) || !s.is_finite() {
                        return Err(Error::CovarianceNotPsd { row: i, pivot: s });
                    }
                    f.set(i, i, s.sqrt());
                } else {
                    f.set(i, j, s / f.at(j, j));
                }
            }
        }
        Ok(f)
    }

    /// `out = L z`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let mut s = 0.0;
            for (k, zk) in z.iter().enumerate().take(i + 1).skip(lo) {
                s += self.at(i, k) * zk;
            }
            out[i] = s;
        }
    }

    /// Dense copy, for tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate().take(i + 1).skip(i.saturating_sub(self.bw)) {
                *slot = self.at(i, j);
            }
        }
        d
    }
}

/// Maps family-constraint violations to generation errors. The antithetic
/// family is flagged as non-associated by design and is still generated.
pub(crate) fn check_generable(spec: &FamilySpec) -> Result<()> {
    for v in spec.validate() {
        if v.constraint == "association" {
            continue;
        }
        return Err(match v.constraint.as_str() {
            "nonnegative-correlation" | "nonnegative-weights" | "stochastic-monotonicity" | "nondecreasing-map" => {
                Error::AssociationViolation(v.to_string())
            }
            "positive-semidefinite" => Error::CovarianceNotPsd { row: 0, pivot: f64::NAN },
            _ => Error::InvalidFamily(v.to_string()),
        });
    }
    Ok(())
}

impl PathSampler {
    pub fn new(spec: &FamilySpec, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("path length must be positive".into()));
        }
        check_generable(spec)?;
        let kind = match &spec.kind {
            FamilyKind::Iid { dist } => Kind::Iid(dist.clone()),
            FamilyKind::GaussianCov { autocov } => match autocov {
                Autocov::Geometric { rho, variance } => Kind::Ar1 {
                    rho: *rho,
                    sd: variance.sqrt(),
                    innov_sd: (variance * (1.0 - rho * rho)).max(0.0).sqrt(),
                },
                Autocov::Explicit { values } => Kind::Banded(BandedFactor::toeplitz(values, n)?),
            },
            FamilyKind::MovingAverage { weights, innovation } => Kind::MovingAverage {
                weights: weights.clone(),
                innovation: innovation.clone(),
            },
            FamilyKind::CommonFactor { dist } => Kind::CommonFactor(dist.clone()),
            FamilyKind::MarkovTwoState { p_stay0, p_stay1 } => {
                let (pi1, _) = FamilySpec::markov_params(*p_stay0, *p_stay1);
                Kind::Markov {
                    p_stay0: *p_stay0,
                    p_stay1: *p_stay1,
                    pi1,
                    shift: if spec.centered { pi1 } else { 0.0 },
                }
            }
            FamilyKind::MonotoneTransform { base, map } => {
                let base_sampler = PathSampler::new(base, n)?;
                let shift = if spec.centered { transform_mean(base, map)? } else { 0.0 };
                Kind::Transform {
                    base: Box::new(base_sampler),
                    map: map.clone(),
                    shift,
                }
            }
            FamilyKind::Antithetic { dist } => Kind::Antithetic(dist.clone()),
        };
        Ok(PathSampler { n, kind })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Writes one path into `buf` (length `n`).
    pub fn fill<R: RngCore + ?Sized>(&self, rng: &mut R, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.n);
        match &self.kind {
            Kind::Iid(d) => buf.iter_mut().for_each(|x| *x = d.sample(rng)),
            Kind::Ar1 { rho, sd, innov_sd } => {
                let mut prev = sd * rng.sample::<f64, _>(StandardNormal);
                buf[0] = prev;
                for x in buf.iter_mut().skip(1) {
                    prev = rho * prev + innov_sd * rng.sample::<f64, _>(StandardNormal);
                    *x = prev;
                }
            }
            Kind::Banded(f) => {
                let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
                f.apply(&z, buf);
            }
            Kind::MovingAverage { weights, innovation } => {
                let q = weights.len();
                let e: Vec<f64> = (0..self.n + q - 1).map(|_| innovation.sample(rng)).collect();
                for (t, x) in buf.iter_mut().enumerate() {
                    // X_t = sum_k w_k e_{t-k}; e is offset by q - 1
                    let mut s = 0.0;
                    for (k, w) in weights.iter().enumerate() {
                        s += w * e[t + q - 1 - k];
                    }
                    *x = s;
                }
            }
            Kind::CommonFactor(d) => {
                let z = d.sample(rng);
                buf.iter_mut().for_each(|x| *x = z);
            }
            Kind::Markov {
                p_stay0,
                p_stay1,
                pi1,
                shift,
            } => {
                let mut state = rng.random::<f64>() < *pi1;
                for x in buf.iter_mut() {
                    *x = if state { 1.0 } else { 0.0 } - shift;
                    let u: f64 = rng.random();
                    state = if state { u < *p_stay1 } else { u >= *p_stay0 };
                }
            }
            Kind::Transform { base, map, shift } => {
                base.fill(rng, buf);
                buf.iter_mut().for_each(|x| *x = map.apply(*x) - shift);
            }
            Kind::Antithetic(d) => {
                for pair in buf.chunks_mut(2) {
                    let z = d.sample(rng);
                    pair[0] = z;
                    if pair.len() > 1 {
                        pair[1] = -z;
                    }
                }
            }
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        self.fill(rng, &mut v);
        v
    }
}

/// Mean of `map(X_1)`: closed form when possible, quadrature over a known
/// marginal otherwise, and a fixed-seed Monte Carlo calibration as a last resort.
fn transform_mean(base: &FamilySpec, map: &MonotoneMap) -> Result<f64> {
    let base_mean = base.analytic_mean();
    if let (Some((a, b)), Some(mu)) = (map.is_affine(), base_mean) {
        return Ok(a * mu + b);
    }
    if map.is_odd() && base_mean == Some(0.0) && base.is_symmetric() {
        return Ok(0.0);
    }
    if let Some(m) = base.marginal() {
        return Ok(m.expectation(|x| map.apply(x)));
    }
    // Only the first coordinate is used; all built-in families are stationary.
    let one = PathSampler::new(base, 1)?;
    let mut rng = RngStream::new(CALIBRATION_SEED, 0);
    let mut buf = [0.0];
    let mut acc = Vec::with_capacity(CALIBRATION_DRAWS as usize);
    for _ in 0..CALIBRATION_DRAWS {
        one.fill(&mut rng, &mut buf);
        acc.push(map.apply(buf[0]));
    }
    Ok(crate::exec::pairwise_mean(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense_cholesky(gamma: &[f64], n: usize) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |i, j| gamma.get(i.abs_diff(j)).copied().unwrap_or(0.0));
        m.cholesky().expect("positive definite").l()
    }

    #[test]
    fn banded_factor_matches_dense_cholesky() {
        for gamma in [vec![1.0, 0.5, 0.25], vec![2.0, 1.0], vec![1.0, 0.3, 0.2, 0.1, 0.05]] {
            let n = 12;
            let f = BandedFactor::toeplitz(&gamma, n).unwrap().to_dense();
            let l = dense_cholesky(&gamma, n);
            for i in 0..n {
                for j in 0..n {
                    assert!((f[i][j] - l[(i, j)]).abs() < 1e-12, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn ar1_recursion_is_the_cholesky_factor() {
        // Driving the recursion with unit vectors recovers L column by column.
        let (rho, n) = (0.5f64, 10);
        let gamma: Vec<f64> = (0..n).map(|k| rho.powi(k as i32)).collect();
        let l = dense_cholesky(&gamma, n);
        let sd = 1.0;
        let innov = (1.0f64 - rho * rho).sqrt();
        for col in 0..n {
            let mut x = vec![0.0; n];
            let mut prev = if col == 0 { sd } else { 0.0 };
            x[0] = prev;
            for t in 1..n {
                prev = rho * prev + if t == col { innov } else { 0.0 };
                x[t] = prev;
            }
            for i in 0..n {
                assert!((x[i] - l[(i, col)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn semidefinite_toeplitz_uses_jitter() {
        // all-ones matrix has rank one
        let f = BandedFactor::toeplitz(&[1.0, 1.0, 1.0], 3).unwrap().to_dense();
        assert!((f[2][0] - 1.0).abs() < 1e-6);
        let e = BandedFactor::toeplitz(&[1.0, 0.9, 0.0, 0.0, 0.9], 5).unwrap_err();
        assert!(matches!(e, Error::CovarianceNotPsd { .. }));
    }

    #[test]
    fn transform_mean_by_quadrature() {
        let base = FamilySpec::iid(BaseDist::CenteredExponential { rate: 1.0 });
        let m = transform_mean(&base, &MonotoneMap::Tanh { scale: 1.0 }).unwrap();
        // E tanh(E - 1) for E ~ Exp(1), by brute-force midpoint sum
        let h = 1e-4;
        let direct: f64 = (0..600_000).map(|k| {
            let e = (k as f64 + 0.5) * h;
            (e - 1.0).tanh() * (-e).exp() * h
        }).sum();
        assert!((m - direct).abs() < 1e-8, "{m} vs {direct}");
    }
}
