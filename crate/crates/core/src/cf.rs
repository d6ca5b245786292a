//! Empirical characteristic functions and block factorisation gaps.
//!
//! For associated variables the gap between a joint characteristic function
//! and the product of its marginals is controlled by covariances alone:
//! `|E e^{i sum t_j X_j} - prod E e^{i t_j X_j}| <= (1/2) sum_{j != k} |t_j t_k| Cov(X_j, X_k)`.
//! Applied to block sums at argument `t / s_n` this turns into bounds on the
//! cross-block covariance mass.

use num_complex::Complex64;
use serde::Serialize;

use crate::blocking::{block_stats, BlockStats, BlockSums};
use crate::covariance::CovarianceProfile;
use crate::error::{Error, Result};
use crate::exec::{mean_and_stderr, pairwise_sum};
use crate::model::BlockScheme;

/// Multiplier on standard errors in every `holds` flag.
pub const HOLDS_SIGMAS: f64 = 3.0;

/// `E e^{itX}` estimated from samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CFPoint {
    pub t: f64,
    pub re: f64,
    pub im: f64,
    /// `sqrt(se_re^2 + se_im^2)`.
    pub stderr: f64,
}

impl CFPoint {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

fn complex_mean_se(zs: &[Complex64]) -> (Complex64, f64) {
    let re: Vec<f64> = zs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = zs.iter().map(|z| z.im).collect();
    let (mr, sr) = mean_and_stderr(&re);
    let (mi, si) = mean_and_stderr(&im);
    (Complex64::new(mr, mi), sr.hypot(si))
}

fn complex_sum(zs: &[Complex64]) -> Complex64 {
    let re: Vec<f64> = zs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = zs.iter().map(|z| z.im).collect();
    Complex64::new(pairwise_sum(&re), pairwise_sum(&im))
}

#[inline]
fn cis(x: f64) -> Complex64 {
    Complex64::new(x.cos(), x.sin())
}

/// Sample mean of `e^{itX}` per `t`. `ecf(-t)` is the exact conjugate of `ecf(t)`.
pub fn ecf(samples: &[f64], t_grid: &[f64]) -> Result<Vec<CFPoint>> {
    if samples.is_empty() {
        return Err(Error::TooFewReplicates { needed: 1, got: 0 });
    }
    if samples.iter().chain(t_grid).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(t_grid
        .iter()
        .map(|&t| {
            let zs: Vec<Complex64> = samples.iter().map(|x| cis(t * x)).collect();
            let (v, se) = complex_mean_se(&zs);
            CFPoint {
                t,
                re: v.re,
                im: v.im,
                stderr: se,
            }
        })
        .collect())
}

fn check_t(t: f64) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// `(t^2/2) (Var(S_{m ell}) - nu^2) / s_n^2`: the covariance bound on the gap
/// between the characteristic function of `S_{m ell}/s_n` and the product
/// over the `m` full blocks.
pub fn newman_gap_bound(profile: &CovarianceProfile, scheme: &BlockScheme, t: f64) -> Result<f64> {
    check_t(t)?;
    head_gap_bound(&block_stats(profile, scheme)?, t)
}

/// [`newman_gap_bound`] from precomputed block statistics.
pub fn head_gap_bound(stats: &BlockStats, t: f64) -> Result<f64> {
    check_t(t)?;
    positive(stats.s_n_sq)?;
    Ok(t * t / 2.0 * stats.head_cross_mass() / stats.s_n_sq)
}

/// `(t^2/2) (s_n^2 - nu^2 - tail) / s_n^2`: the same bound for `S_n/s_n`
/// against the product over all `m + 1` blocks (tail included).
pub fn oliveira_gap_bound(stats: &BlockStats, t: f64) -> Result<f64> {
    check_t(t)?;
    positive(stats.s_n_sq)?;
    Ok(t * t / 2.0 * (stats.s_n_sq - stats.nu_sq - stats.tail_var) / stats.s_n_sq)
}

fn positive(s2: f64) -> Result<()> {
    if s2 > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateVariance("s_n^2"))
    }
}

/// Exact gap `|psi_{(X,Y)}(t, t) - psi_X(t) psi_Y(t)|` for a standard
/// bivariate normal pair with correlation `rho`.
pub fn gaussian_pair_gap(rho: f64, t: f64) -> f64 {
    let joint = (-(t * t) * (1.0 + rho)).exp();
    let product = (-(t * t)).exp();
    (joint - product).abs()
}

/// One `t` of a factorisation-gap diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapPoint {
    pub t: f64,
    pub gap: f64,
    pub stderr: f64,
    pub bound: f64,
    pub holds: bool,
}

impl GapPoint {
    fn new(t: f64, gap: f64, stderr: f64, bound: f64) -> Self {
        GapPoint {
            t,
            gap,
            stderr,
            bound,
            holds: gap <= bound + HOLDS_SIGMAS * stderr,
        }
    }
}

fn check_mc(sums: &BlockSums) -> Result<()> {
    if sums.reps < crate::blocking::MIN_MC_REPS {
        return Err(Error::TooFewReplicates {
            needed: crate::blocking::MIN_MC_REPS,
            got: sums.reps,
        });
    }
    Ok(())
}

/// `|mean(joint) - prod_j mean(block_j)|` with a jackknife standard error.
/// `joint[k]` and `blocks[j][k]` are `e^{i u .}` evaluated on replicate `k`.
fn factorisation_gap(joint: &[Complex64], blocks: &[Vec<Complex64>]) -> (f64, f64) {
    let r = joint.len() as f64;
    let js = complex_sum(joint);
    let bs: Vec<Complex64> = blocks.iter().map(|b| complex_sum(b)).collect();
    let product = |means: &mut dyn Iterator<Item = Complex64>| means.fold(Complex64::new(1.0, 0.0), |a, b| a * b);
    let gap = (js / r - product(&mut bs.iter().map(|s| s / r))).norm();
    let loo: Vec<f64> = (0..joint.len())
        .map(|k| {
            let jm = (js - joint[k]) / (r - 1.0);
            let pm = product(&mut bs.iter().zip(blocks).map(|(s, b)| (s - b[k]) / (r - 1.0)));
            (jm - pm).norm()
        })
        .collect();
    (gap, jackknife_se(&loo))
}

fn jackknife_se(loo: &[f64]) -> f64 {
    let r = loo.len() as f64;
    let mean = pairwise_sum(loo) / r;
    let ss: Vec<f64> = loo.iter().map(|g| (g - mean) * (g - mean)).collect();
    ((r - 1.0) / r * pairwise_sum(&ss)).sqrt()
}

/// Gap between `psi_{S_{m ell}/s_n}(t)` and the product of the `m` block
/// characteristic functions at `t / s_n`, from the same replicates; bound
/// from [`head_gap_bound`]. `s_n^2` comes from `stats`.
pub fn cf_block_gap(sums: &BlockSums, stats: &BlockStats, t_grid: &[f64]) -> Result<Vec<GapPoint>> {
    check_mc(sums)?;
    positive(stats.s_n_sq)?;
    let s_n = stats.s_n_sq.sqrt();
    let m = sums.scheme.m as usize;
    let head = sums.head_sums();
    t_grid
        .iter()
        .map(|&t| {
            let u = t / s_n;
            let joint: Vec<Complex64> = head.iter().map(|h| cis(u * h)).collect();
            let blocks: Vec<Vec<Complex64>> = (0..m).map(|j| sums.rows().map(|r| cis(u * r[j])).collect()).collect();
            let (gap, se) = factorisation_gap(&joint, &blocks);
            Ok(GapPoint::new(t, gap, se, head_gap_bound(stats, t)?))
        })
        .collect()
}

/// Gap between `psi_{S_n/s_n}(t)` and the product over all `m + 1` blocks
/// (tail included), bounded by [`oliveira_gap_bound`].
pub fn cf_full_block_gap(sums: &BlockSums, stats: &BlockStats, t_grid: &[f64]) -> Result<Vec<GapPoint>> {
    check_mc(sums)?;
    positive(stats.s_n_sq)?;
    let s_n = stats.s_n_sq.sqrt();
    let m = sums.scheme.m as usize;
    let totals = totals(sums);
    let width = if sums.scheme.r == 0 { m } else { m + 1 };
    t_grid
        .iter()
        .map(|&t| {
            let u = t / s_n;
            let joint: Vec<Complex64> = totals.iter().map(|s| cis(u * s)).collect();
            let blocks: Vec<Vec<Complex64>> =
                (0..width).map(|j| sums.rows().map(|r| cis(u * r[j])).collect()).collect();
            let (gap, se) = factorisation_gap(&joint, &blocks);
            Ok(GapPoint::new(t, gap, se, oliveira_gap_bound(stats, t)?))
        })
        .collect()
}

/// `S_n = S_{m ell} + tail` per replicate (exactly `S_{m ell}` when `r = 0`).
fn totals(sums: &BlockSums) -> Vec<f64> {
    let m = sums.scheme.m as usize;
    sums.head_sums().iter().zip(sums.rows()).map(|(h, r)| h + r[m]).collect()
}

/// `|prod_j psi_{B_j}(t / s_n) - e^{-t^2/2}|` per `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitPoint {
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
}

pub fn cf_product_limit(sums: &BlockSums, stats: &BlockStats, t_grid: &[f64]) -> Result<Vec<LimitPoint>> {
    check_mc(sums)?;
    positive(stats.s_n_sq)?;
    let s_n = stats.s_n_sq.sqrt();
    let m = sums.scheme.m as usize;
    let r = sums.reps as f64;
    t_grid
        .iter()
        .map(|&t| {
            let u = t / s_n;
            let target = Complex64::new((-t * t / 2.0).exp(), 0.0);
            let blocks: Vec<Vec<Complex64>> = (0..m).map(|j| sums.rows().map(|row| cis(u * row[j])).collect()).collect();
            let bs: Vec<Complex64> = blocks.iter().map(|b| complex_sum(b)).collect();
            let prod = |f: &dyn Fn(usize) -> Complex64| (0..m).fold(Complex64::new(1.0, 0.0), |a, j| a * f(j));
            let value = (prod(&|j| bs[j] / r) - target).norm();
            let loo: Vec<f64> = (0..sums.reps)
                .map(|k| (prod(&|j| (bs[j] - blocks[j][k]) / (r - 1.0)) - target).norm())
                .collect();
            Ok(LimitPoint {
                t,
                value,
                stderr: jackknife_se(&loo),
            })
        })
        .collect()
}

/// `|psi_{S_n/s_n}(t) - psi_{S_{m ell}/s_n}(t)|` with a paired standard error,
/// bounded by `|t| sqrt(tail) / s_n`.
pub fn cf_truncation_gap(sums: &BlockSums, stats: &BlockStats, t_grid: &[f64]) -> Result<Vec<GapPoint>> {
    check_mc(sums)?;
    positive(stats.s_n_sq)?;
    let s_n = stats.s_n_sq.sqrt();
    let head = sums.head_sums();
    let totals = totals(sums);
    t_grid
        .iter()
        .map(|&t| {
            let u = t / s_n;
            let diff: Vec<Complex64> = totals.iter().zip(&head).map(|(s, h)| cis(u * s) - cis(u * h)).collect();
            let (d, se) = complex_mean_se(&diff);
            let bound = t.abs() * stats.tail_var.max(0.0).sqrt() / s_n;
            Ok(GapPoint::new(t, d.norm(), se, bound))
        })
        .collect()
}

/// All CF diagnostics at one `t`, as emitted by the `cf` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfRow {
    pub t: f64,
    /// `psi_{S_n/s_n}(t)`.
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
    /// Head gap against the product over full blocks.
    pub gap: f64,
    pub gap_stderr: f64,
    pub bound: f64,
    pub holds: bool,
    pub full_gap: f64,
    pub full_gap_stderr: f64,
    pub full_bound: f64,
    pub full_holds: bool,
    pub product_limit: f64,
    pub product_limit_stderr: f64,
    pub truncation_gap: f64,
    pub truncation_bound: f64,
    pub truncation_holds: bool,
}

pub fn cf_report(sums: &BlockSums, stats: &BlockStats, t_grid: &[f64]) -> Result<Vec<CfRow>> {
    let s_n = stats.s_n_sq.sqrt();
    let normed: Vec<f64> = totals(sums).iter().map(|s| s / s_n).collect();
    let psi = ecf(&normed, t_grid)?;
    let head = cf_block_gap(sums, stats, t_grid)?;
    let full = cf_full_block_gap(sums, stats, t_grid)?;
    let lim = cf_product_limit(sums, stats, t_grid)?;
    let trunc = cf_truncation_gap(sums, stats, t_grid)?;
    Ok((0..t_grid.len())
        .map(|i| CfRow {
            t: t_grid[i],
            re: psi[i].re,
            im: psi[i].im,
            stderr: psi[i].stderr,
            gap: head[i].gap,
            gap_stderr: head[i].stderr,
            bound: head[i].bound,
            holds: head[i].holds,
            full_gap: full[i].gap,
            full_gap_stderr: full[i].stderr,
            full_bound: full[i].bound,
            full_holds: full[i].holds,
            product_limit: lim[i].value,
            product_limit_stderr: lim[i].stderr,
            truncation_gap: trunc[i].gap,
            truncation_bound: trunc[i].bound,
            truncation_holds: trunc[i].holds,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::analytic_profile;
    use crate::exec::Exec;
    use crate::model::FamilySpec;
    use approx::assert_abs_diff_eq;

    fn setup(fam: &FamilySpec, n: u64, ell: u64, reps: usize, seed: u64) -> (BlockSums, BlockStats) {
        let s = BlockScheme::new(n, ell).unwrap();
        let st = block_stats(&analytic_profile(fam, n as usize).unwrap(), &s).unwrap();
        (BlockSums::collect(fam, &s, reps, seed, Exec::default()).unwrap(), st)
    }

    #[test]
    fn ecf_basics() {
        let zeros = vec![0.0; 1000];
        for p in ecf(&zeros, &[-1.0, 2.0]).unwrap() {
            assert_eq!((p.re, p.im, p.stderr), (1.0, 0.0, 0.0));
        }
        let xs = crate::generators::gen_iid(crate::model::BaseDist::Normal, 100_000, 3).unwrap().values;
        let pts = ecf(&xs, &[0.0, 1.0, -1.0]).unwrap();
        assert_eq!((pts[0].re, pts[0].im, pts[0].stderr), (1.0, 0.0, 0.0));
        assert!((pts[1].value() - Complex64::new((-0.5f64).exp(), 0.0)).norm() < 3.0 * pts[1].stderr);
        assert_eq!(pts[2].value(), pts[1].value().conj());
        assert!(ecf(&[], &[1.0]).is_err());
    }

    #[test]
    fn gaussian_pair_closed_form() {
        let lhs = gaussian_pair_gap(0.1, 1.0);
        assert_abs_diff_eq!(lhs, (-1f64).exp() * (1.0 - (-0.1f64).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(lhs, 0.035008, epsilon = 1e-6);
        // two blocks of one variable: bound (1/2)(2 rho)/(2 + 2 rho) on the
        // normalised scale, rho on the raw scale
        let p = CovarianceProfile::dense(vec![vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap();
        let b = newman_gap_bound(&p, &BlockScheme::new(2, 1).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(b, 0.1 / 2.2, epsilon = 1e-15);
        assert!(lhs <= 0.1);
    }

    #[test]
    fn newman_bound_matches_double_sum() {
        let p = analytic_profile(&FamilySpec::geometric_gaussian(0.5), 4096).unwrap();
        let s = BlockScheme::new(4096, 64).unwrap();
        let b = newman_gap_bound(&p, &s, 1.0).unwrap();
        // direct sum over distinct full blocks, by lag
        let g = |k: usize| 0.5f64.powi(k as i32);
        let mut cross = 0.0;
        for j in 0..64usize {
            for k in 0..64usize {
                if j != k {
                    for a in 0..64usize {
                        for c in 0..64usize {
                            cross += g((j * 64 + a).abs_diff(k * 64 + c));
                        }
                    }
                }
            }
        }
        let s2 = p.s_n_squared().unwrap();
        assert!((b - cross / (2.0 * s2)).abs() < 1e-12 * b.max(1e-300) + 1e-15);
        assert_eq!(newman_gap_bound(&analytic_profile(&FamilySpec::iid_normal(), 64).unwrap(), &BlockScheme::new(64, 8).unwrap(), 2.0).unwrap(), 0.0);
    }

    #[test]
    fn iid_gaps_vanish() {
        let (sums, st) = setup(&FamilySpec::iid_normal(), 103, 10, 2000, 1);
        for g in cf_block_gap(&sums, &st, &[0.0, 1.0, -2.0]).unwrap() {
            assert!(g.gap <= 3.0 * g.stderr + 1e-15, "{g:?}");
            assert_eq!(g.bound, 0.0);
            assert!(g.holds);
        }
        let z = cf_block_gap(&sums, &st, &[0.0]).unwrap()[0];
        assert_eq!(z.gap, 0.0);
        let tr = cf_truncation_gap(&sums, &st, &[0.0, 1.0]).unwrap();
        assert_eq!((tr[0].gap, tr[0].bound), (0.0, 0.0));
        assert!((tr[1].bound - (3.0f64 / 103.0).sqrt()).abs() < 1e-12);
        assert!(tr[1].holds);
        let lim = cf_product_limit(&sums, &st, &[1.0]).unwrap()[0];
        let exact = ((-100.0f64 / 206.0).exp() - (-0.5f64).exp()).abs();
        assert!((exact - 0.0088976).abs() < 1e-7);
        assert!((lim.value - exact).abs() < 4.0 * lim.stderr + 1e-3, "{lim:?}");
    }

    #[test]
    fn exact_tail_free_truncation() {
        let (sums, st) = setup(&FamilySpec::geometric_gaussian(0.5), 100, 10, 1000, 2);
        for g in cf_truncation_gap(&sums, &st, &[-3.0, 0.5, 3.0]).unwrap() {
            assert_eq!(g.gap, 0.0);
        }
    }

    #[test]
    fn geometric_block_gap_within_bound() {
        let (sums, st) = setup(&FamilySpec::geometric_gaussian(0.5), 1024, 32, 2000, 4);
        let t = crate::model::config::d_t_grid();
        for g in cf_block_gap(&sums, &st, &t).unwrap() {
            assert!(g.holds, "{g:?}");
        }
        for g in cf_full_block_gap(&sums, &st, &t).unwrap() {
            assert!(g.holds, "{g:?}");
        }
    }

    #[test]
    fn common_factor_product_stays_away_from_gaussian() {
        let fam = FamilySpec::common_factor(crate::model::BaseDist::Normal);
        let (sums, st) = setup(&fam, 1024, 32, 1000, 5);
        let lim = cf_product_limit(&sums, &st, &[1.0]).unwrap()[0];
        // product ~ e^{-m ell^2 t^2 / (2 n^2)} = e^{-1/64}
        let exact = (-1.0f64 / 64.0).exp() - (-0.5f64).exp();
        assert!((lim.value - exact).abs() < 0.05, "{lim:?}");
    }
}
