use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::pairwise_sum;
use crate::generators::ReplicateSet;
use crate::model::{FamilySpec, MonotoneMap};

/// Violation threshold for every statistical probe, in standard errors.
pub const PROBE_SIGMAS: f64 = 3.0;

/// Minimum sample size for the functional and association probes.
pub const MIN_PROBE_SAMPLES: usize = 1000;

/// Sample covariance (unbiased) and its standard error.
pub fn cov_with_stderr(a: &[f64], b: &[f64]) -> (f64, f64) {
    let r = a.len();
    if r < 2 {
        return (0.0, 0.0);
    }
    let ma = pairwise_sum(a) / r as f64;
    let mb = pairwise_sum(b) / r as f64;
    let mut prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let s = pairwise_sum(&prod);
    let cov = s / (r - 1) as f64;
    let mean = s / r as f64;
    for p in prod.iter_mut() {
        *p = (*p - mean) * (*p - mean);
    }
    let var = pairwise_sum(&prod) / (r - 1) as f64;
    (cov, (var / r as f64).sqrt())
}

/// Pairs of nondecreasing scalar maps with their derivative bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneTestBattery {
    pub pairs: Vec<(MonotoneMap, MonotoneMap)>,
}

impl Default for MonotoneTestBattery {
    fn default() -> Self {
        use MonotoneMap::*;
        let clip = PiecewiseLinear {
            knots: vec![(-1.0, -1.0), (1.0, 1.0)],
        };
        MonotoneTestBattery {
            pairs: vec![
                (Identity, Identity),
                (Tanh { scale: 1.0 }, Tanh { scale: 1.0 }),
                (Identity, Tanh { scale: 2.0 }),
                (clip.clone(), Affine { slope: 2.0, intercept: 0.0 }),
                (Tanh { scale: 0.5 }, clip),
            ],
        }
    }
}

impl MonotoneTestBattery {
    /// Re-checks monotonicity and the recorded derivative bounds of every map
    /// on a dense grid; returns the offending map and abscissa.
    pub fn verify(&self) -> Result<()> {
        for (f, g) in &self.pairs {
            for m in [f, g] {
                if !m.violations().is_empty() {
                    return Err(Error::InvalidArgument(format!("{m:?}: {}", m.violations().join("; "))));
                }
                if let Some(x) = m.check_on_grid(-10.0, 10.0, 200_001) {
                    return Err(Error::InvalidArgument(format!("{m:?} fails monotonicity/bound at {x}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewmanCheck {
    /// `|Cov(f(X), g(Y))|`
    pub lhs: f64,
    /// `||f'|| ||g'|| Cov(X, Y)`
    pub rhs: f64,
    pub margin: f64,
    pub stderr: f64,
    pub holds: bool,
}

/// `|Cov(f(X), g(Y))| <= ||f'|| ||g'|| Cov(X, Y)` on paired samples.
pub fn newman_functional_check(xs: &[f64], ys: &[f64], f: &MonotoneMap, g: &MonotoneMap) -> Result<NewmanCheck> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < MIN_PROBE_SAMPLES {
        return Err(Error::TooFewReplicates {
            needed: MIN_PROBE_SAMPLES,
            got: xs.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let fx: Vec<f64> = xs.iter().map(|&x| f.apply(x)).collect();
    let gy: Vec<f64> = ys.iter().map(|&y| g.apply(y)).collect();
    let (c_fg, se_fg) = cov_with_stderr(&fx, &gy);
    let (c_xy, se_xy) = cov_with_stderr(xs, ys);
    let k = f.derivative_bound() * g.derivative_bound();
    let lhs = c_fg.abs();
    let rhs = k * c_xy;
    let stderr = (se_fg * se_fg + k * k * se_xy * se_xy).sqrt();
    Ok(NewmanCheck {
        lhs,
        rhs,
        margin: rhs - lhs,
        stderr,
        holds: lhs <= rhs + PROBE_SIGMAS * stderr,
    })
}

/// Coordinatewise nondecreasing statistic of a whole path.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "stat", rename_all = "snake_case")]
pub enum PathStat {
    /// `map(x_index)` (0-based index).
    Coord { index: usize, map: MonotoneMap },
    /// `map(sum of x_a..x_b)`.
    RangeSum { start: usize, end: usize, map: MonotoneMap },
    Max,
    Min,
}

impl PathStat {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PathStat::Coord { index, map } => map.apply(x[*index]),
            PathStat::RangeSum { start, end, map } => map.apply(x[*start..*end].iter().sum()),
            PathStat::Max => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            PathStat::Min => x.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Pairs `(f, g)` of nondecreasing path statistics for the association probe.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationBattery {
    pub pairs: Vec<(PathStat, PathStat)>,
}

impl AssociationBattery {
    /// Default battery for paths of length `n`.
    pub fn for_len(n: usize) -> Self {
        use MonotoneMap::*;
        use PathStat::*;
        let x = |index: usize| Coord { index, map: Identity };
        let mut pairs = vec![(x(0), x(n.min(2) - 1))];
        if n >= 2 {
            let half = n / 2;
            pairs.push((x(0), x(n - 1)));
            pairs.push((
                RangeSum {
                    start: 0,
                    end: half,
                    map: Tanh { scale: 1.0 },
                },
                RangeSum {
                    start: half,
                    end: n,
                    map: Identity,
                },
            ));
            pairs.push((Max, Min));
            pairs.push((
                Coord {
                    index: 0,
                    map: PiecewiseLinear {
                        knots: vec![(-1.0, -1.0), (1.0, 1.0)],
                    },
                },
                Max,
            ));
        }
        AssociationBattery { pairs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeValue {
    pub label: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub values: Vec<ProbeValue>,
    pub min_value: f64,
    /// True when some value is below `-3 * stderr`.
    pub violation: bool,
}

fn summarize(values: Vec<ProbeValue>) -> ProbeResult {
    let min_value = values.iter().map(|v| v.value).fold(f64::INFINITY, f64::min);
    let violation = values.iter().any(|v| v.value < -PROBE_SIGMAS * v.stderr);
    ProbeResult {
        values,
        min_value,
        violation,
    }
}

/// Empirical `Cov(f(X), g(X))` for every battery pair.
pub fn association_probe(reps: &ReplicateSet, battery: &AssociationBattery) -> Result<ProbeResult> {
    if reps.reps() < MIN_PROBE_SAMPLES {
        return Err(Error::TooFewReplicates {
            needed: MIN_PROBE_SAMPLES,
            got: reps.reps(),
        });
    }
    let values = battery
        .pairs
        .iter()
        .map(|(f, g)| {
            let a: Vec<f64> = reps.rows().map(|x| f.eval(x)).collect();
            let b: Vec<f64> = reps.rows().map(|x| g.eval(x)).collect();
            let (value, stderr) = cov_with_stderr(&a, &b);
            ProbeValue {
                label: format!("{} ~ {}", stat_label(f), stat_label(g)),
                value,
                stderr,
            }
        })
        .collect();
    Ok(summarize(values))
}

fn stat_label(s: &PathStat) -> String {
    match s {
        PathStat::Coord { index, map } => format!("{}(x{})", map_label(map), index + 1),
        PathStat::RangeSum { start, end, map } => format!("{}(x{}+..+x{})", map_label(map), start + 1, end),
        PathStat::Max => "max".into(),
        PathStat::Min => "min".into(),
    }
}

fn map_label(m: &MonotoneMap) -> String {
    match m {
        MonotoneMap::Identity => "id".into(),
        MonotoneMap::Affine { slope, intercept } => format!("{slope}x+{intercept}"),
        MonotoneMap::Tanh { scale } => format!("tanh{scale}"),
        MonotoneMap::PiecewiseLinear { .. } => "pl".into(),
    }
}

/// Nondecreasing function of the partial sums `S_1, ..., S_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "g", rename_all = "snake_case")]
pub enum PrefixStat {
    /// `map(S_j)`.
    Last { map: MonotoneMap },
    /// `max_{i <= j} S_i`.
    RunningMax,
    /// `1{S_j > 0}`.
    Positive,
}

impl PrefixStat {
    fn eval(&self, last: f64, running_max: f64) -> f64 {
        match self {
            PrefixStat::Last { map } => map.apply(last),
            PrefixStat::RunningMax => running_max,
            PrefixStat::Positive => {
                if last > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn default_battery() -> Vec<PrefixStat> {
        vec![
            PrefixStat::Last {
                map: MonotoneMap::Identity,
            },
            PrefixStat::RunningMax,
            PrefixStat::Positive,
        ]
    }
}

/// Empirical `E[(S_{j+1} - S_j) g(S_1, ..., S_j)]` for `j = 1..n-1` and
/// every `g`. The family must be centered.
pub fn demimartingale_probe(reps: &ReplicateSet, battery: &[PrefixStat]) -> Result<ProbeResult> {
    match reps.family.analytic_mean() {
        Some(0.0) => {}
        Some(m) => return Err(Error::NotCentered(m)),
        None => return Err(Error::NotCentered(f64::NAN)),
    }
    if reps.reps() < MIN_PROBE_SAMPLES {
        return Err(Error::TooFewReplicates {
            needed: MIN_PROBE_SAMPLES,
            got: reps.reps(),
        });
    }
    let n = reps.n;
    let r = reps.reps();
    // products[(j, k)][rep]
    let mut products = vec![vec![0.0; r]; (n.saturating_sub(1)) * battery.len()];
    for (rep, x) in reps.rows().enumerate() {
        let mut s = 0.0;
        let mut mx = f64::NEG_INFINITY;
        for j in 0..n.saturating_sub(1) {
            s += x[j];
            mx = mx.max(s);
            for (k, g) in battery.iter().enumerate() {
                products[j * battery.len() + k][rep] = x[j + 1] * g.eval(s, mx);
            }
        }
    }
    let values = products
        .iter()
        .enumerate()
        .map(|(idx, p)| {
            let (j, k) = (idx / battery.len(), idx % battery.len());
            let (value, stderr) = crate::exec::mean_and_stderr(p);
            ProbeValue {
                label: format!("j={} g={:?}", j + 1, battery[k]),
                value,
                stderr,
            }
        })
        .collect();
    Ok(summarize(values))
}

/// True when `family` is expected to pass the probes (no association flag).
pub fn expected_associated(family: &FamilySpec) -> bool {
    family.validate().is_empty()
}
