use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::generators::{PathSampler, RngStream};
use crate::model::FamilySpec;

/// Replicates are accumulated in this many fixed chunks, so the summation
/// order (and hence every bit of the result) is independent of threading.
const CHUNKS: usize = 32;

/// Sample covariance rows `Cov(X_j, X_i)`, `i = 1..n`, for a few anchor
/// coordinates `j`, streamed over replicates without storing paths.
/// Used when a family has no closed-form covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceRows {
    pub n: usize,
    pub reps: usize,
    /// 0-based anchor indices.
    pub anchors: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    /// Sample `E|X_j|^3` at each anchor.
    pub abs_third: Vec<f64>,
}

struct Acc {
    sum: Vec<f64>,
    cross: Vec<Vec<f64>>,
    abs3: Vec<f64>,
}

impl Acc {
    fn new(n: usize, k: usize) -> Self {
        Acc {
            sum: vec![0.0; n],
            cross: vec![vec![0.0; n]; k],
            abs3: vec![0.0; k],
        }
    }

    fn add(&mut self, other: &Acc) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (ra, rb) in self.cross.iter_mut().zip(&other.cross) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
        for (a, b) in self.abs3.iter_mut().zip(&other.abs3) {
            *a += b;
        }
    }
}

impl CovarianceRows {
    pub fn estimate(
        family: &FamilySpec,
        n: usize,
        anchors: &[usize],
        reps: usize,
        seed: u64,
        exec: Exec,
    ) -> Result<Self> {
        if reps < 2 {
            return Err(Error::TooFewReplicates { needed: 2, got: reps });
        }
        if let Some(&bad) = anchors.iter().find(|&&j| j >= n) {
            return Err(Error::InvalidArgument(format!("anchor {bad} outside 0..{n}")));
        }
        let sampler = PathSampler::new(family, n)?;
        let k = anchors.len();
        let chunks = CHUNKS.min(reps);
        let parts = exec.map(chunks, |c| {
            let (lo, hi) = (c * reps / chunks, (c + 1) * reps / chunks);
            let mut acc = Acc::new(n, k);
            let mut x = vec![0.0; n];
            for i in lo..hi {
                sampler.fill(&mut RngStream::new(seed, i as u64), &mut x);
                for (s, v) in acc.sum.iter_mut().zip(&x) {
                    *s += v;
                }
                for (a, &j) in anchors.iter().enumerate() {
                    let xj = x[j];
                    for (s, v) in acc.cross[a].iter_mut().zip(&x) {
                        *s += xj * v;
                    }
                    acc.abs3[a] += xj.abs().powi(3);
                }
            }
            acc
        });
        let mut total = Acc::new(n, k);
        for p in &parts {
            total.add(p);
        }
        let r = reps as f64;
        let mean: Vec<f64> = total.sum.iter().map(|s| s / r).collect();
        let rows = anchors
            .iter()
            .enumerate()
            .map(|(a, &j)| {
                total.cross[a]
                    .iter()
                    .zip(&mean)
                    .map(|(c, mi)| (c - r * mean[j] * mi) / (r - 1.0))
                    .collect()
            })
            .collect();
        Ok(CovarianceRows {
            n,
            reps,
            anchors: anchors.to_vec(),
            rows,
            abs_third: total.abs3.iter().map(|s| s / r).collect(),
        })
    }

    /// `max` over anchors of `sum_{|i - j| >= r} Cov(X_i, X_j)`.
    pub fn cox_coefficient(&self, r: usize) -> f64 {
        self.anchors
            .iter()
            .zip(&self.rows)
            .map(|(&j, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(i, _)| i.abs_diff(j) >= r)
                    .map(|(_, c)| c)
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_variance(&self) -> f64 {
        self.anchors
            .iter()
            .zip(&self.rows)
            .map(|(&j, row)| row[j])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_third(&self) -> f64 {
        self.abs_third.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::analytic_profile;

    #[test]
    fn rows_match_analytic_covariance() {
        let fam = FamilySpec::geometric_gaussian(0.5);
        let rows = CovarianceRows::estimate(&fam, 32, &[0, 16], 20_000, 4, Exec::default()).unwrap();
        let p = analytic_profile(&fam, 32).unwrap();
        for (&j, row) in rows.anchors.iter().zip(&rows.rows) {
            for (i, c) in row.iter().enumerate() {
                assert!((c - p.get(i, j)).abs() < 0.05, "({i},{j}) {c}");
            }
        }
        assert!((rows.cox_coefficient(1) - p.cox_coefficient(1)).abs() < 0.3);
        assert!((rows.min_variance() - 1.0).abs() < 0.05);
        assert!((rows.max_abs_third() - 1.5958).abs() < 0.1);
    }

    #[test]
    fn independent_of_execution() {
        let fam = FamilySpec::markov(0.8, 0.7, true);
        let a = CovarianceRows::estimate(&fam, 10, &[0, 5], 100, 1, Exec::Sequential).unwrap();
        let b = CovarianceRows::estimate(&fam, 10, &[0, 5], 100, 1, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
