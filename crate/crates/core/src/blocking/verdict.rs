use serde::Serialize;

use super::conditions::{ConditionValue, ValueSource};
use crate::model::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    HoldsEmpirically,
    FailsEmpirically,
    Inconclusive,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::HoldsEmpirically => "holds_empirically",
            Verdict::FailsEmpirically => "fails_empirically",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Conjunction: holds only if all hold, fails if any fails.
    pub fn all(vs: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::HoldsEmpirically;
        for v in vs {
            match v {
                Verdict::FailsEmpirically => return Verdict::FailsEmpirically,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                Verdict::HoldsEmpirically => {}
            }
        }
        out
    }

    /// Disjunction: holds if any holds, fails only if all fail.
    pub fn any(vs: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::FailsEmpirically;
        for v in vs {
            match v {
                Verdict::HoldsEmpirically => return Verdict::HoldsEmpirically,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                Verdict::FailsEmpirically => {}
            }
        }
        out
    }
}

/// What "the condition holds" means for a grid of values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    /// The value converges to its target.
    ToTarget,
    /// The value stays bounded away from zero.
    PositiveLowerBound,
    /// The value stays finite (does not grow along the grid).
    Bounded,
}

/// Slope below which a log-log trend counts as decaying.
pub const DECAY_SLOPE: f64 = -0.05;
/// Fewest grid points for a convergence verdict.
pub const MIN_TREND_POINTS: usize = 3;
/// Noise multiplier applied to Monte Carlo standard errors.
pub const STDERR_SIGMAS: f64 = 3.0;

/// Decision rule recorded next to every verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds {
    pub limit_tol: f64,
    pub analytic_tol: f64,
    pub decay_slope: f64,
    pub min_points: usize,
    pub rule: &'static str,
}

const RULE_TO_TARGET: &str = "holds: |value(n_max) - target| < limit_tol and the last three distances are \
nonincreasing (steps with both distances below limit_tol/10, or within 3 stderr, count as nonincreasing); \
fails: |value(n_max) - target| > 2 limit_tol and the log-log trend slope is above decay_slope; else inconclusive";
const RULE_LOWER: &str = "holds: min over the grid > limit_tol; fails: min <= analytic_tol; else inconclusive";
const RULE_BOUNDED: &str = "holds: last relative increment <= limit_tol; fails: the last two relative \
increments both exceed limit_tol; else inconclusive";

impl Thresholds {
    fn new(kind: ConditionKind, tol: &Tolerances) -> Self {
        Thresholds {
            limit_tol: tol.limit_tol,
            analytic_tol: tol.analytic_tol,
            decay_slope: DECAY_SLOPE,
            min_points: MIN_TREND_POINTS,
            rule: match kind {
                ConditionKind::ToTarget => RULE_TO_TARGET,
                ConditionKind::PositiveLowerBound => RULE_LOWER,
                ConditionKind::Bounded => RULE_BOUNDED,
            },
        }
    }
}

/// A condition evaluated along a grid, with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition_id: String,
    pub kind: ConditionKind,
    pub target: f64,
    /// `"n"` or `"lag"`.
    pub axis: &'static str,
    pub grid: Vec<ConditionValue>,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
    /// Least-squares slope of `log |value - target|` against `log x`.
    pub trend_slope: Option<f64>,
    pub source: ValueSource,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ConditionReport {
    /// Judges a grid of values along `n`.
    pub fn judge(id: &str, kind: ConditionKind, grid: Vec<ConditionValue>, tol: &Tolerances) -> Self {
        Self::build(id, kind, "n", grid, tol)
    }

    /// Judges a grid of values along a lag axis.
    pub fn judge_lag(id: &str, kind: ConditionKind, grid: Vec<ConditionValue>, tol: &Tolerances) -> Self {
        Self::build(id, kind, "lag", grid, tol)
    }

    fn build(id: &str, kind: ConditionKind, axis: &'static str, grid: Vec<ConditionValue>, tol: &Tolerances) -> Self {
        let target = grid.first().map_or(0.0, |v| v.target);
        let xs: Vec<f64> = grid
            .iter()
            .map(|v| if axis == "lag" { v.lag.unwrap_or(0) } else { v.n } as f64)
            .collect();
        let source = if grid.iter().all(|v| v.source == ValueSource::Analytic) {
            ValueSource::Analytic
        } else {
            ValueSource::Empirical
        };
        let trend_slope = trend_slope(&xs, &grid);
        let verdict = match kind {
            ConditionKind::ToTarget => to_target(&grid, trend_slope, tol),
            ConditionKind::PositiveLowerBound => lower_bound(&grid, tol),
            ConditionKind::Bounded => bounded(&grid, tol),
        };
        ConditionReport {
            condition_id: id.to_string(),
            kind,
            target,
            axis,
            grid,
            verdict,
            thresholds: Thresholds::new(kind, tol),
            trend_slope,
            source,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn last(&self) -> Option<&ConditionValue> {
        self.grid.last()
    }
}

/// Least-squares slope of `log |v - target|` on `log x`, over points with a
/// nonzero distance. `None` with fewer than two such points.
pub fn trend_slope(xs: &[f64], grid: &[ConditionValue]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(grid)
        .filter(|(x, v)| **x > 0.0 && v.distance() > 0.0)
        .map(|(x, v)| (x.ln(), v.distance().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

fn noise(v: &ConditionValue) -> f64 {
    v.stderr.map_or(0.0, |s| STDERR_SIGMAS * s)
}

fn to_target(grid: &[ConditionValue], slope: Option<f64>, tol: &Tolerances) -> Verdict {
    let Some(last) = grid.last() else {
        return Verdict::Inconclusive;
    };
    let d_last = last.distance();
    let band = tol.limit_tol / 10.0;
    let tail = &grid[grid.len().saturating_sub(MIN_TREND_POINTS)..];
    let monotone = grid.len() >= MIN_TREND_POINTS
        && tail.windows(2).all(|w| {
            let (a, b) = (w[0].distance(), w[1].distance());
            b <= a || (a <= band && b <= band) || b - a <= noise(&w[0]) + noise(&w[1])
        });
    if d_last < tol.limit_tol && monotone {
        return Verdict::HoldsEmpirically;
    }
    // a constant nonzero distance has no usable slope but is flat
    let flat = match slope {
        Some(s) => s > DECAY_SLOPE,
        None => grid.iter().all(|v| v.distance() == d_last),
    };
    if d_last > 2.0 * tol.limit_tol && flat {
        Verdict::FailsEmpirically
    } else {
        Verdict::Inconclusive
    }
}

fn lower_bound(grid: &[ConditionValue], tol: &Tolerances) -> Verdict {
    if grid.is_empty() {
        return Verdict::Inconclusive;
    }
    let min = grid.iter().map(|v| v.value).fold(f64::INFINITY, f64::min);
    if min > tol.limit_tol {
        Verdict::HoldsEmpirically
    } else if min <= tol.analytic_tol {
        Verdict::FailsEmpirically
    } else {
        Verdict::Inconclusive
    }
}

fn bounded(grid: &[ConditionValue], tol: &Tolerances) -> Verdict {
    let incs: Vec<f64> = grid
        .windows(2)
        .map(|w| {
            let step = w[1].value - w[0].value - noise(&w[0]) - noise(&w[1]);
            step.max(0.0) / w[0].value.abs().max(1.0)
        })
        .collect();
    match incs.as_slice() {
        [] => Verdict::Inconclusive,
        [.., a, b] if *a > tol.limit_tol && *b > tol.limit_tol => Verdict::FailsEmpirically,
        [.., b] if *b <= tol.limit_tol => Verdict::HoldsEmpirically,
        _ => Verdict::Inconclusive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(id: &str, pts: &[(u64, f64)], target: f64) -> Vec<ConditionValue> {
        pts.iter()
            .map(|(n, v)| ConditionValue::new(id, *n, *v, target, ValueSource::Analytic).unwrap())
            .collect()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn decaying_sequence_holds() {
        let g = grid("H0", &[(256, 1.0 / 16.0), (1024, 1.0 / 32.0), (4096, 1.0 / 64.0)], 0.0);
        let r = ConditionReport::judge("H0", ConditionKind::ToTarget, g, &tol());
        assert_eq!(r.verdict, Verdict::HoldsEmpirically);
        assert!((r.trend_slope.unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn flat_sequence_fails() {
        let g = grid("Ha", &[(256, 0.0625), (1024, 0.03125), (4096, 0.015625)], 1.0);
        let r = ConditionReport::judge("Ha", ConditionKind::ToTarget, g, &tol());
        assert_eq!(r.verdict, Verdict::FailsEmpirically);
    }

    #[test]
    fn small_but_rising_is_not_a_hold() {
        let g = grid("X", &[(1, 0.001), (2, 0.01), (4, 0.04)], 0.0);
        assert_eq!(
            ConditionReport::judge("X", ConditionKind::ToTarget, g, &tol()).verdict,
            Verdict::Inconclusive
        );
        let short = grid("X", &[(1, 0.001), (2, 0.0005)], 0.0);
        assert_eq!(
            ConditionReport::judge("X", ConditionKind::ToTarget, short, &tol()).verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn converged_band_tolerates_jitter() {
        // exact zeros alternating with tiny positive values (perfect squares)
        let g = grid("Ha", &[(1, 1.0), (2, 1.0 - 2e-4), (4, 1.0)], 1.0);
        let r = ConditionReport::judge("Ha", ConditionKind::ToTarget, g, &tol());
        assert_eq!(r.verdict, Verdict::HoldsEmpirically);
    }

    #[test]
    fn lower_bound_and_bounded() {
        let g = grid("B2", &[(1, 1.0), (2, 1.0)], 0.0);
        assert_eq!(
            ConditionReport::judge("B2", ConditionKind::PositiveLowerBound, g, &tol()).verdict,
            Verdict::HoldsEmpirically
        );
        let g = grid("B2", &[(1, 1.0), (2, 0.0)], 0.0);
        assert_eq!(
            ConditionReport::judge("B2", ConditionKind::PositiveLowerBound, g, &tol()).verdict,
            Verdict::FailsEmpirically
        );
        let g = grid("u1", &[(1, 255.0), (2, 511.0), (4, 1023.0)], 0.0);
        assert_eq!(
            ConditionReport::judge("u1", ConditionKind::Bounded, g, &tol()).verdict,
            Verdict::FailsEmpirically
        );
        let g = grid("u1", &[(1, 1.9), (2, 1.999), (4, 2.0)], 0.0);
        assert_eq!(
            ConditionReport::judge("u1", ConditionKind::Bounded, g, &tol()).verdict,
            Verdict::HoldsEmpirically
        );
    }

    #[test]
    fn conjunction() {
        use Verdict::*;
        assert_eq!(Verdict::all([HoldsEmpirically, HoldsEmpirically]), HoldsEmpirically);
        assert_eq!(Verdict::all([HoldsEmpirically, Inconclusive]), Inconclusive);
        assert_eq!(Verdict::all([Inconclusive, FailsEmpirically]), FailsEmpirically);
    }
}
