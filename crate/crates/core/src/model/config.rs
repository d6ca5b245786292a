use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::block::{make_block_scheme, BlockRule};
use super::family::{short_hash, FamilySpec};
use crate::error::{Error, Result};

/// Decision thresholds shared by every diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "d_limit_tol")]
    pub limit_tol: f64,
    #[serde(default = "d_analytic_tol")]
    pub analytic_tol: f64,
    #[serde(default = "d_ks_alpha")]
    pub ks_alpha: f64,
}

fn d_limit_tol() -> f64 {
    0.05
}
fn d_analytic_tol() -> f64 {
    1e-10
}
fn d_ks_alpha() -> f64 {
    0.05
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            limit_tol: d_limit_tol(),
            analytic_tol: d_analytic_tol(),
            ks_alpha: d_ks_alpha(),
        }
    }
}

/// How `S_n` is normalised in a Monte Carlo CLT run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// `sqrt(Var S_n)` from the analytic covariance.
    #[default]
    AnalyticSN,
    /// Sample standard deviation of `S_n` across replicates.
    EmpiricalSN,
    /// `sigma * sqrt(n)` with the long-run variance `sigma^2`.
    StationarySigmaSqrtN,
}

impl std::str::FromStr for Normalizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic_s_n" | "analytic" => Ok(Normalizer::AnalyticSN),
            "empirical_s_n" | "empirical" => Ok(Normalizer::EmpiricalSN),
            "stationary_sigma_sqrt_n" | "stationary" => Ok(Normalizer::StationarySigmaSqrtN),
            _ => Err(Error::InvalidArgument(format!("unknown normalizer `{s}`"))),
        }
    }
}

/// Full description of an experiment. Read from JSON; every field except
/// `family` and `n_grid` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    #[serde(default)]
    pub block_rule: BlockRule,
    pub n_grid: Vec<u64>,
    #[serde(default = "d_reps")]
    pub reps: u64,
    /// Moment exponent in the Lyapunov-type condition.
    #[serde(default = "d_delta")]
    pub delta: f64,
    /// Lindeberg truncation level.
    #[serde(default = "d_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Use the `ell^{3/2}` prefactor in the Lyapunov-type functional for every delta.
    #[serde(default)]
    pub hc_literal: bool,
    /// Lift the `reps * n <= 1e9` budget on CLT runs.
    #[serde(default)]
    pub allow_large: bool,
    #[serde(default = "d_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub normalizer: Normalizer,
}

fn d_reps() -> u64 {
    5000
}
fn d_delta() -> f64 {
    1.0
}
fn d_epsilon() -> f64 {
    0.1
}
pub fn d_t_grid() -> Vec<f64> {
    vec![-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0]
}

/// Maximum `reps * n` for a CLT run without `allow_large`.
pub const SAMPLE_BUDGET: u128 = 1_000_000_000;

impl ExperimentConfig {
    pub fn new(family: FamilySpec, n_grid: Vec<u64>) -> Self {
        ExperimentConfig {
            family,
            block_rule: BlockRule::default(),
            n_grid,
            reps: d_reps(),
            delta: d_delta(),
            epsilon: d_epsilon(),
            seed: 0,
            tolerances: Tolerances::default(),
            hc_literal: false,
            allow_large: false,
            t_grid: d_t_grid(),
            normalizer: Normalizer::default(),
        }
    }

    /// Powers of two `2^lo ..= 2^hi`.
    pub fn pow2_grid(lo: u32, hi: u32) -> Vec<u64> {
        (lo..=hi).map(|k| 1u64 << k).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.family.validate().into_iter().next() {
            return Err(Error::config(format!("family.{}", v.parameter), v.to_string()));
        }
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid", "must not be empty"));
        }
        if self.n_grid[0] == 0 {
            return Err(Error::config("n_grid[0]", "grid points must be positive"));
        }
        for (i, w) in self.n_grid.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::config(
                    format!("n_grid[{}]", i + 1),
                    format!("grid must be strictly increasing ({} then {})", w[0], w[1]),
                ));
            }
        }
        self.block_rule
            .validate()
            .map_err(|e| Error::config("block_rule", e.to_string()))?;
        for (i, &n) in self.n_grid.iter().enumerate() {
            make_block_scheme(n, &self.block_rule)
                .map_err(|e| Error::config(format!("n_grid[{i}]"), e.to_string()))?;
        }
        if self.reps == 0 {
            return Err(Error::config("reps", "must be positive"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::config("delta", "must be positive and finite"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("epsilon", "must be positive and finite"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.limit_tol", t.limit_tol),
            ("tolerances.analytic_tol", t.analytic_tol),
            ("tolerances.ks_alpha", t.ks_alpha),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be positive and finite"));
            }
        }
        if t.ks_alpha >= 1.0 {
            return Err(Error::config("tolerances.ks_alpha", "must be below 1"));
        }
        if self.t_grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("t_grid", "values must be finite"));
        }
        Ok(())
    }

    pub fn n_max(&self) -> u64 {
        *self.n_grid.last().expect("validated grid is nonempty")
    }

    /// Parses and validates; parse errors carry line and column.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Deserialises and validates.
    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_value(v)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        short_hash(self.canonical_json().as_bytes())
    }
}

/// Applies `key=value` to a JSON document. `key` is a dotted path
/// (`tolerances.limit_tol`, `family.rho`); `value` is parsed as JSON and
/// falls back to a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        let obj = match cur {
            Value::Object(map) => map,
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::config(key, format!("`{part}` is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::config(key, format!("index {idx} out of range ({len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                cur = slot;
                continue;
            }
            _ => return Err(Error::config(key, format!("`{part}` does not address an object"))),
        };
        if last {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::dist::BaseDist;

    fn sample() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            FamilySpec::moving_average(vec![1.0, 0.5, 0.1], BaseDist::CenteredExponential { rate: 0.7 }),
            ExperimentConfig::pow2_grid(8, 12),
        );
        c.delta = 0.1 + 0.2;
        c.epsilon = 1.0 / 3.0;
        c.seed = u64::MAX;
        c
    }

    #[test]
    fn round_trips_bit_exactly() {
        let c = sample();
        let s = c.canonical_json();
        let back = ExperimentConfig::from_json_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.delta.to_bits(), c.delta.to_bits());
        assert_eq!(back.canonical_json(), s);
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let c = ExperimentConfig::from_json_str(r#"{"family":{"kind":"iid","dist":{"dist":"normal"}},"n_grid":[256,512]}"#)
            .unwrap();
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.block_rule, BlockRule::Power { alpha: 0.5 });
        assert_eq!(c.delta, 1.0);
        assert_eq!(c.epsilon, 0.1);
    }

    #[test]
    fn rejects_bad_grids_and_schemes() {
        let mut c = sample();
        c.n_grid = vec![10, 5];
        match c.validate().unwrap_err() {
            Error::InvalidConfig { field, .. } => assert_eq!(field, "n_grid[1]"),
            e => panic!("{e}"),
        }
        c.n_grid = vec![5, 50];
        c.block_rule = BlockRule::Fixed { ell: 10 };
        match c.validate().unwrap_err() {
            Error::InvalidConfig { field, .. } => assert_eq!(field, "n_grid[0]"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let e = ExperimentConfig::from_json_str("{\n\"family\":{\"kind\":\"iid\",\"dist\":{\"dist\":\"normal\"}},\n\"n_grid\":[4],\n\"repz\":3}")
            .unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("repz") && msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn overrides_edit_nested_fields() {
        let mut v = sample().to_value();
        apply_override(&mut v, "tolerances.limit_tol=0.01").unwrap();
        apply_override(&mut v, "family.weights.1=0.25").unwrap();
        apply_override(&mut v, "normalizer=empirical_s_n").unwrap();
        let c = ExperimentConfig::from_value(v).unwrap();
        assert_eq!(c.tolerances.limit_tol, 0.01);
        assert_eq!(c.normalizer, Normalizer::EmpiricalSN);
        assert_eq!(
            c.family,
            FamilySpec::moving_average(vec![1.0, 0.25, 0.1], BaseDist::CenteredExponential { rate: 0.7 })
        );
    }
}
