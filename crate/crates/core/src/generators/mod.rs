//! Seeded, reproducible sample paths.
//!
//! Every path is a pure function of `(family, n, master_seed, stream_id)`.
//! Replicate `i` of a set always uses stream `i`, so the execution order
//! never changes a result. A single path generated from `seed` is stream 0,
//! i.e. the first replicate of the set with master seed `seed`.

mod rng;
mod sampler;

use std::sync::Arc;

pub use rng::{derive_seed, RngStream};
pub use sampler::{BandedFactor, PathSampler, CHOLESKY_JITTER};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{Autocov, BaseDist, FamilyKind, FamilySpec, MonotoneMap};

/// One realised sequence `X_1, ..., X_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub family: Arc<FamilySpec>,
    pub seed: u64,
    pub stream_id: u64,
    pub values: Vec<f64>,
}

impl SamplePath {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn sum(&self) -> f64 {
        crate::exec::pairwise_sum(&self.values)
    }
}

/// `reps` independent paths sharing a family and length.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    pub family: Arc<FamilySpec>,
    pub n: usize,
    pub master_seed: u64,
    pub paths: Vec<SamplePath>,
}

impl ReplicateSet {
    pub fn reps(&self) -> usize {
        self.paths.len()
    }

    /// Builds a set from raw rows (tests and adversarial inputs).
    pub fn from_rows(family: FamilySpec, master_seed: u64, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let family = Arc::new(family);
        let mut paths = Vec::with_capacity(rows.len());
        for (i, values) in rows.into_iter().enumerate() {
            if values.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: values.len(),
                });
            }
            if values.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
            paths.push(SamplePath {
                family: family.clone(),
                seed: master_seed,
                stream_id: i as u64,
                values,
            });
        }
        Ok(ReplicateSet {
            family,
            n,
            master_seed,
            paths,
        })
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.paths.iter().map(|p| p.values.as_slice())
    }
}

/// Generates one path of `family` at stream 0 of `seed`.
pub fn generate(family: &FamilySpec, n: usize, seed: u64) -> Result<SamplePath> {
    let sampler = PathSampler::new(family, n)?;
    let mut rng = RngStream::new(seed, 0);
    Ok(SamplePath {
        family: Arc::new(family.clone()),
        seed,
        stream_id: 0,
        values: sampler.sample(&mut rng),
    })
}

pub fn gen_iid(dist: BaseDist, n: usize, seed: u64) -> Result<SamplePath> {
    generate(&FamilySpec::iid(dist), n, seed)
}

/// Centered Gaussian vector with Toeplitz covariance `gamma(|i - j|)`.
pub fn gen_gaussian(autocov: &[f64], n: usize, seed: u64) -> Result<SamplePath> {
    generate(&FamilySpec::gaussian_explicit(autocov.to_vec()), n, seed)
}

pub fn gen_geometric_gaussian(rho: f64, variance: f64, n: usize, seed: u64) -> Result<SamplePath> {
    let family = FamilySpec::new(FamilyKind::GaussianCov {
        autocov: Autocov::Geometric { rho, variance },
    });
    generate(&family, n, seed)
}

pub fn gen_moving_average(weights: &[f64], innovation: BaseDist, n: usize, seed: u64) -> Result<SamplePath> {
    generate(&FamilySpec::moving_average(weights.to_vec(), innovation), n, seed)
}

pub fn gen_monotone_transform(
    base: &FamilySpec,
    map: MonotoneMap,
    recenter: bool,
    n: usize,
    seed: u64,
) -> Result<SamplePath> {
    generate(&FamilySpec::transform(base.clone(), map, recenter), n, seed)
}

pub fn gen_common_factor(dist: BaseDist, n: usize, seed: u64) -> Result<SamplePath> {
    generate(&FamilySpec::common_factor(dist), n, seed)
}

pub fn gen_markov_two_state(p_stay0: f64, p_stay1: f64, n: usize, seed: u64, centered: bool) -> Result<SamplePath> {
    generate(&FamilySpec::markov(p_stay0, p_stay1, centered), n, seed)
}

/// Runs `f(i, path_i)` for every replicate without storing the paths.
/// Results come back in replicate order and do not depend on `exec`.
pub fn map_replicates<T, F>(
    family: &FamilySpec,
    n: usize,
    reps: usize,
    master_seed: u64,
    exec: Exec,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &[f64]) -> T + Sync + Send,
{
    if reps == 0 {
        return Err(Error::TooFewReplicates { needed: 1, got: 0 });
    }
    let sampler = PathSampler::new(family, n)?;
    Ok(exec.map_with(
        reps,
        || vec![0.0; n],
        |buf, i| {
            let mut rng = RngStream::new(master_seed, i as u64);
            sampler.fill(&mut rng, buf);
            f(i, buf)
        },
    ))
}

pub fn replicate(family: &FamilySpec, n: usize, reps: usize, master_seed: u64) -> Result<ReplicateSet> {
    replicate_with(family, n, reps, master_seed, Exec::default())
}

pub fn replicate_with(
    family: &FamilySpec,
    n: usize,
    reps: usize,
    master_seed: u64,
    exec: Exec,
) -> Result<ReplicateSet> {
    let shared = Arc::new(family.clone());
    let rows = map_replicates(family, n, reps, master_seed, exec, |_, x| x.to_vec())?;
    Ok(ReplicateSet {
        family: shared.clone(),
        n,
        master_seed,
        paths: rows
            .into_iter()
            .enumerate()
            .map(|(i, values)| SamplePath {
                family: shared.clone(),
                seed: master_seed,
                stream_id: i as u64,
                values,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{mean_and_stderr, pairwise_mean};

    #[test]
    fn generation_is_deterministic() {
        let a = gen_iid(BaseDist::Normal, 4, 7).unwrap();
        let b = gen_iid(BaseDist::Normal, 4, 7).unwrap();
        assert_eq!(a.values, b.values);
        let c = gen_iid(BaseDist::Normal, 4, 8).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn iid_normal_mean_within_clt_band() {
        let p = gen_iid(BaseDist::Normal, 100_000, 1).unwrap();
        assert!(pairwise_mean(&p.values).abs() < 3.0 / 100_000f64.sqrt());
    }

    #[test]
    fn rademacher_support() {
        let p = gen_iid(BaseDist::Rademacher, 100_000, 1).unwrap();
        assert!(p.values.iter().all(|x| *x == 1.0 || *x == -1.0));
    }

    #[test]
    fn negative_autocovariance_is_an_association_error() {
        assert!(matches!(gen_gaussian(&[1.0, -0.2], 5, 1), Err(Error::AssociationViolation(_))));
        assert!(matches!(
            gen_moving_average(&[1.0, -1.0], BaseDist::Normal, 5, 1),
            Err(Error::AssociationViolation(_))
        ));
        assert!(matches!(
            gen_markov_two_state(0.2, 0.1, 5, 1, true),
            Err(Error::AssociationViolation(_))
        ));
    }

    #[test]
    fn single_weight_moving_average_is_iid() {
        let a = gen_moving_average(&[1.0], BaseDist::Normal, 50, 3).unwrap();
        let b = gen_iid(BaseDist::Normal, 50, 3).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn identity_transform_is_a_no_op() {
        let base = FamilySpec::geometric_gaussian(0.3);
        let a = generate(&base, 64, 9).unwrap();
        let b = gen_monotone_transform(&base, MonotoneMap::Identity, true, 64, 9).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn common_factor_is_constant() {
        let p = gen_common_factor(BaseDist::Normal, 5, 11).unwrap();
        assert!(p.values.iter().all(|x| *x == p.values[0]));
    }

    #[test]
    fn markov_memoryless_case_is_fair_coin() {
        let p = gen_markov_two_state(0.5, 0.5, 100_000, 2, false).unwrap();
        let (m, se) = mean_and_stderr(&p.values);
        assert!((m - 0.5).abs() < 4.0 * se);
        let lag1: Vec<f64> = p.values.windows(2).map(|w| (w[0] - 0.5) * (w[1] - 0.5)).collect();
        assert!(pairwise_mean(&lag1).abs() < 0.01);
    }

    #[test]
    fn markov_lag_one_correlation() {
        let p = gen_markov_two_state(0.9, 0.9, 100_000, 5, true).unwrap();
        let x = &p.values;
        let var = pairwise_mean(&x.iter().map(|v| v * v).collect::<Vec<_>>());
        let c1 = pairwise_mean(&x.windows(2).map(|w| w[0] * w[1]).collect::<Vec<_>>());
        assert!((c1 / var - 0.8).abs() < 0.02, "{}", c1 / var);
    }

    #[test]
    fn replicate_is_independent_of_execution() {
        for fam in [
            FamilySpec::iid_normal(),
            FamilySpec::geometric_gaussian(0.5),
            FamilySpec::gaussian_explicit(vec![1.0, 0.4, 0.1]),
            FamilySpec::markov(0.7, 0.6, true),
            FamilySpec::transform(FamilySpec::iid(BaseDist::Rademacher), MonotoneMap::Tanh { scale: 2.0 }, true),
        ] {
            let a = replicate_with(&fam, 17, 3, 42, Exec::Sequential).unwrap();
            let b = replicate_with(&fam, 17, 3, 42, Exec::Parallel).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.paths[0].values, generate(&fam, 17, 42).unwrap().values);
        }
        assert!(matches!(
            replicate(&FamilySpec::iid_normal(), 3, 0, 1),
            Err(Error::TooFewReplicates { .. })
        ));
    }

    #[test]
    fn unit_variance_across_replicates() {
        let xs = map_replicates(&FamilySpec::iid_normal(), 1, 100_000, 3, Exec::default(), |_, x| x[0]).unwrap();
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!((pairwise_mean(&sq) - 1.0).abs() < 0.02);
    }
}
