//! Config loading and flag overrides.

use std::fs;
use std::path::PathBuf;

use assoclt::harness::Provenance;
use assoclt::model::{apply_override, parse_family, BlockRule, ExperimentConfig};
use assoclt::{Error, Exec, Result};
use clap::{Args, ValueEnum};
use serde_json::{json, Value};

/// Flags shared by every subcommand. Flags override the config file; `--set`
/// entries are applied last, in order.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (JSON). Without it, --family and --n-grid (or --n) are required.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Family shorthand `name:key=value,...`, e.g. `iid-normal`, `geo-gauss:rho=0.5`,
    /// `common-factor:dist=exp`.
    #[arg(long, value_name = "SHORTHAND")]
    pub family: Option<String>,

    /// Grid of n: `lo:hi:xK` (geometric), `lo:hi:+K` (arithmetic) or `a,b,c`.
    #[arg(long, value_name = "GRID")]
    pub n_grid: Option<String>,

    /// Single n (replaces the grid; subcommands working at one n default to the largest grid point).
    #[arg(long)]
    pub n: Option<u64>,

    /// Monte Carlo replicates.
    #[arg(long)]
    pub reps: Option<u64>,

    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Block length rule: `power:0.5`, `fixed:10` or `explicit:256=16/1024=32`.
    #[arg(long, value_name = "RULE")]
    pub block_rule: Option<String>,

    /// Moment exponent of the Lyapunov-type condition.
    #[arg(long)]
    pub delta: Option<f64>,

    /// Lindeberg truncation level.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// CLT normaliser: analytic_s_n, empirical_s_n or stationary_sigma_sqrt_n.
    #[arg(long)]
    pub normalizer: Option<String>,

    /// Lift the reps * n <= 1e9 sample budget.
    #[arg(long)]
    pub allow_large: bool,

    /// Config override `key=value` on a dotted path (repeatable), e.g. `tolerances.limit_tol=0.02`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Output directory; without it, single-file output goes to stdout.
    #[arg(long, env = "ASSOCLT_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Output format (default: csv for generate and cf, json otherwise).
    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// Replicate execution. Results are identical either way.
    #[arg(long, value_enum, default_value_t = ExecArg::Auto)]
    pub exec: ExecArg,

    /// Progress lines on stderr.
    #[arg(short, long)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    /// Raw little-endian f64 (generate only).
    Bin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExecArg {
    Auto,
    Sequential,
    Parallel,
}

impl From<ExecArg> for Exec {
    fn from(e: ExecArg) -> Exec {
        match e {
            ExecArg::Auto => Exec::default(),
            ExecArg::Sequential => Exec::Sequential,
            ExecArg::Parallel => Exec::Parallel,
        }
    }
}

fn grid_error(s: &str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field: "n_grid".into(),
        reason: format!("`{s}`: {}", reason.into()),
    }
}

/// Parses `lo:hi:xK`, `lo:hi:+K` or a comma list. The result must be
/// strictly increasing.
pub fn parse_grid(s: &str) -> Result<Vec<u64>> {
    let int = |v: &str| v.trim().parse::<u64>().map_err(|_| grid_error(s, format!("`{v}` is not an integer")));
    let grid = match s.split(':').collect::<Vec<_>>()[..] {
        [lo, hi, step] => {
            let (lo, hi) = (int(lo)?, int(hi)?);
            if lo == 0 {
                return Err(grid_error(s, "grid points must be positive"));
            }
            if hi < lo {
                return Err(grid_error(s, format!("grid not increasing ({lo} > {hi})")));
            }
            let (geometric, k) = match step.trim().split_at_checked(1) {
                Some(("x", k)) => (true, int(k)?),
                Some(("+", k)) => (false, int(k)?),
                _ => return Err(grid_error(s, "step must be `xK` or `+K`")),
            };
            if (geometric && k < 2) || k == 0 {
                return Err(grid_error(s, "step must make progress"));
            }
            let mut out = vec![lo];
            loop {
                let last = *out.last().expect("nonempty");
                let next = if geometric { last.checked_mul(k) } else { last.checked_add(k) };
                match next {
                    Some(v) if v <= hi => out.push(v),
                    _ => break,
                }
            }
            out
        }
        [list] => list.split(',').filter(|x| !x.trim().is_empty()).map(int).collect::<Result<_>>()?,
        _ => return Err(grid_error(s, "expected lo:hi:step or a comma list")),
    };
    if grid.is_empty() {
        return Err(grid_error(s, "empty grid"));
    }
    if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(grid_error(s, format!("grid not increasing ({} then {})", w[0], w[1])));
    }
    Ok(grid)
}

/// Loaded config plus what was overridden, for provenance.
pub struct Setup {
    pub config: ExperimentConfig,
    pub overrides: Vec<String>,
    pub exec: Exec,
}

impl Setup {
    pub fn provenance(&self) -> Provenance {
        let mut p = Provenance::for_config(&self.config);
        p.overrides = self.overrides.clone();
        p
    }

    /// `--n` if given, else the largest grid point.
    pub fn single_n(&self) -> u64 {
        self.config.n_max()
    }
}

fn set(doc: &mut Value, overrides: &mut Vec<String>, key: &str, value: Value, shown: String) {
    doc[key] = value;
    overrides.push(format!("{key}={shown}"));
}

pub fn load(c: &Common) -> Result<Setup> {
    let mut doc = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            serde_json::from_str::<Value>(&text).map_err(|e| Error::InvalidConfig {
                field: format!("{}:{}:{}", path.display(), e.line(), e.column()),
                reason: e.to_string(),
            })?
        }
        None => json!({}),
    };
    if !doc.is_object() {
        return Err(Error::InvalidConfig {
            field: "<root>".into(),
            reason: "config must be a JSON object".into(),
        });
    }
    let mut ov = Vec::new();
    if let Some(f) = &c.family {
        set(&mut doc, &mut ov, "family", serde_json::to_value(parse_family(f)?)?, f.clone());
    }
    if let Some(g) = &c.n_grid {
        set(&mut doc, &mut ov, "n_grid", json!(parse_grid(g)?), g.clone());
    }
    if let Some(n) = c.n {
        set(&mut doc, &mut ov, "n_grid", json!([n]), n.to_string());
    }
    if let Some(v) = c.reps {
        set(&mut doc, &mut ov, "reps", json!(v), v.to_string());
    }
    if let Some(v) = c.seed {
        set(&mut doc, &mut ov, "seed", json!(v), v.to_string());
    }
    if let Some(r) = &c.block_rule {
        set(&mut doc, &mut ov, "block_rule", serde_json::to_value(BlockRule::parse(r)?)?, r.clone());
    }
    if let Some(v) = c.delta {
        set(&mut doc, &mut ov, "delta", json!(v), v.to_string());
    }
    if let Some(v) = c.epsilon {
        set(&mut doc, &mut ov, "epsilon", json!(v), v.to_string());
    }
    if let Some(v) = &c.normalizer {
        let norm: assoclt::model::Normalizer = v.parse()?;
        set(&mut doc, &mut ov, "normalizer", serde_json::to_value(norm)?, v.clone());
    }
    if c.allow_large {
        set(&mut doc, &mut ov, "allow_large", json!(true), "true".into());
    }
    for a in &c.set {
        apply_override(&mut doc, a)?;
        ov.push(a.clone());
    }
    for key in ["family", "n_grid"] {
        if doc.get(key).is_none() {
            return Err(Error::InvalidConfig {
                field: key.into(),
                reason: format!("missing; pass --config or --{}", key.replace('_', "-")),
            });
        }
    }
    let config = ExperimentConfig::from_value(doc)?;
    Ok(Setup {
        config,
        overrides: ov,
        exec: c.exec.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("256:4096:x2").unwrap(), vec![256, 512, 1024, 2048, 4096]);
        assert_eq!(parse_grid("10:40:+10").unwrap(), vec![10, 20, 30, 40]);
        assert_eq!(parse_grid("8,16,64").unwrap(), vec![8, 16, 64]);
        assert_eq!(parse_grid("100").unwrap(), vec![100]);
        let e = parse_grid("10:5:x2").unwrap_err().to_string();
        assert!(e.contains("not increasing"), "{e}");
        assert!(parse_grid("8,8").is_err());
        assert!(parse_grid("0:8:x2").is_err());
        assert!(parse_grid("1:8:x1").is_err());
        assert!(parse_grid("1:8:*2").is_err());
    }
}
