//! Registry of nondecreasing scalar maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum MonotoneMap {
    Identity,
    /// `slope * x + intercept`, `slope > 0`.
    Affine { slope: f64, intercept: f64 },
    /// `tanh(scale * x)`, `scale > 0`.
    Tanh { scale: f64 },
    /// Linear interpolation through `knots`, constant outside them.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl MonotoneMap {
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "identity" | "id" => Ok(MonotoneMap::Identity),
            "tanh" => Ok(MonotoneMap::Tanh { scale: 1.0 }),
            "double" => Ok(MonotoneMap::Affine {
                slope: 2.0,
                intercept: 0.0,
            }),
            "clip" => Ok(MonotoneMap::PiecewiseLinear {
                knots: vec![(-1.0, -1.0), (1.0, 1.0)],
            }),
            other => Err(Error::UnknownMap(other.to_string())),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        match self {
            MonotoneMap::Identity => Vec::new(),
            MonotoneMap::Affine { slope, intercept } => {
                let mut v = Vec::new();
                if !(*slope > 0.0 && slope.is_finite()) {
                    v.push(format!("affine slope must be positive, got {slope}"));
                }
                if !intercept.is_finite() {
                    v.push("affine intercept must be finite".into());
                }
                v
            }
            MonotoneMap::Tanh { scale } => {
                if *scale > 0.0 && scale.is_finite() {
                    Vec::new()
                } else {
                    vec![format!("tanh scale must be positive, got {scale}")]
                }
            }
            MonotoneMap::PiecewiseLinear { knots } => {
                let mut v = Vec::new();
                if knots.len() < 2 {
                    v.push("piecewise-linear map needs at least two knots".into());
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        v.push(format!("knot abscissae must increase strictly ({} then {})", w[0].0, w[1].0));
                    }
                    if w[1].1 < w[0].1 {
                        v.push(format!("knot values must be nondecreasing ({} then {})", w[0].1, w[1].1));
                    }
                }
                if knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                    v.push("knots must be finite".into());
                }
                v
            }
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self {
            MonotoneMap::Identity => x,
            MonotoneMap::Affine { slope, intercept } => slope * x + intercept,
            MonotoneMap::Tanh { scale } => (scale * x).tanh(),
            MonotoneMap::PiecewiseLinear { knots } => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if x <= first.0 {
                    return first.1;
                }
                if x >= last.0 {
                    return last.1;
                }
                let k = knots.partition_point(|&(kx, _)| kx <= x);
                let (x0, y0) = knots[k - 1];
                let (x1, y1) = knots[k];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// `sup |f'|`.
    pub fn derivative_bound(&self) -> f64 {
        match self {
            MonotoneMap::Identity => 1.0,
            MonotoneMap::Affine { slope, .. } => *slope,
            MonotoneMap::Tanh { scale } => *scale,
            MonotoneMap::PiecewiseLinear { knots } => knots
                .windows(2)
                .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                .fold(0.0, f64::max),
        }
    }

    /// True when `f(-x) = -f(x)`.
    pub fn is_odd(&self) -> bool {
        match self {
            MonotoneMap::Identity | MonotoneMap::Tanh { .. } => true,
            MonotoneMap::Affine { intercept, .. } => *intercept == 0.0,
            MonotoneMap::PiecewiseLinear { knots } => {
                let n = knots.len();
                (0..n).all(|i| {
                    let (x, y) = knots[i];
                    let (xm, ym) = knots[n - 1 - i];
                    x == -xm && y == -ym
                })
            }
        }
    }

    pub fn is_affine(&self) -> Option<(f64, f64)> {
        match self {
            MonotoneMap::Identity => Some((1.0, 0.0)),
            MonotoneMap::Affine { slope, intercept } => Some((*slope, *intercept)),
            _ => None,
        }
    }

    /// Checks monotonicity and the recorded derivative bound on a dense grid
    /// over `[lo, hi]`. Returns the first offending point, if any.
    pub fn check_on_grid(&self, lo: f64, hi: f64, points: usize) -> Option<f64> {
        let bound = self.derivative_bound();
        let h = (hi - lo) / (points - 1) as f64;
        let mut prev = self.apply(lo);
        for k in 1..points {
            let x = lo + k as f64 * h;
            let y = self.apply(x);
            let slope = (y - prev) / h;
            if y < prev || slope > bound * (1.0 + 1e-9) + 1e-12 {
                return Some(x);
            }
            prev = y;
        }
        None
    }
}
