use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Blocking decomposition `n = m * ell + r` with `0 <= r < ell`, `m >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockScheme {
    pub n: u64,
    pub ell: u64,
    pub m: u64,
    pub r: u64,
}

impl BlockScheme {
    /// Builds the scheme for an explicit block length.
    pub fn new(n: u64, ell: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("sequence length must be positive".into()));
        }
        if ell == 0 {
            return Err(Error::InvalidRule("block length must be positive".into()));
        }
        let m = n / ell;
        if m == 0 {
            return Err(Error::InvalidScheme { n, block_len: ell });
        }
        Ok(BlockScheme { n, ell, m, r: n - m * ell })
    }

    /// Length `m * ell` of the block-covered head.
    pub fn head_len(&self) -> u64 {
        self.m * self.ell
    }

    /// Half-open index range (0-based) of block `j` in `0..m`; `j == m` is the tail.
    pub fn block_range(&self, j: u64) -> std::ops::Range<usize> {
        let start = (j * self.ell) as usize;
        let end = if j < self.m { start + self.ell as usize } else { self.n as usize };
        start..end
    }
}

/// Schedule `n -> ell(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BlockRule {
    /// `ell(n) = max(1, floor(n^alpha))`, `0 < alpha < 1`.
    Power { alpha: f64 },
    Fixed { ell: u64 },
    /// Explicit `(n, ell)` pairs; every grid point must be listed.
    Explicit { table: Vec<(u64, u64)> },
}

impl Default for BlockRule {
    fn default() -> Self {
        BlockRule::Power { alpha: 0.5 }
    }
}

impl BlockRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            BlockRule::Power { alpha } if !(*alpha > 0.0 && *alpha < 1.0) => {
                Err(Error::InvalidRule(format!("power exponent must lie in (0, 1), got {alpha}")))
            }
            BlockRule::Fixed { ell: 0 } => Err(Error::InvalidRule("fixed block length must be positive".into())),
            BlockRule::Explicit { table } => {
                if let Some((n, _)) = table.iter().find(|(_, l)| *l == 0) {
                    return Err(Error::InvalidRule(format!("explicit block length for n = {n} is zero")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn block_len(&self, n: u64) -> Result<u64> {
        self.validate()?;
        match self {
            BlockRule::Power { alpha } => Ok(floor_power(n, *alpha).max(1)),
            BlockRule::Fixed { ell } => Ok(*ell),
            BlockRule::Explicit { table } => table
                .iter()
                .find(|(k, _)| *k == n)
                .map(|(_, l)| *l)
                .ok_or_else(|| Error::InvalidRule(format!("no explicit block length for n = {n}"))),
        }
    }

    /// Parses `power:0.5`, `fixed:10` or `explicit:256=16/1024=32`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let bad = || Error::InvalidRule(format!("cannot parse block rule `{s}`"));
        let rule = match name {
            "power" | "pow" => BlockRule::Power {
                alpha: if arg.is_empty() { 0.5 } else { arg.parse().map_err(|_| bad())? },
            },
            "fixed" => BlockRule::Fixed {
                ell: arg.parse().map_err(|_| bad())?,
            },
            "explicit" => {
                let mut table = Vec::new();
                for item in arg.split('/').filter(|x| !x.is_empty()) {
                    let (n, l) = item.split_once('=').ok_or_else(bad)?;
                    table.push((n.parse().map_err(|_| bad())?, l.parse().map_err(|_| bad())?));
                }
                BlockRule::Explicit { table }
            }
            _ => return Err(bad()),
        };
        rule.validate()?;
        Ok(rule)
    }
}

/// `floor(n^alpha)` robust to rounding in `powf` (e.g. `65536^0.5`, `1000^(1/3)`).
fn floor_power(n: u64, alpha: f64) -> u64 {
    let nf = n as f64;
    let mut l = nf.powf(alpha).floor() as u64;
    let inv = 1.0 / alpha;
    // l^(1/alpha) <= n must hold; compare in log space with a relative guard.
    let fits = |l: u64| l == 0 || (l as f64).ln() * inv <= nf.ln() + 1e-12;
    while !fits(l) {
        l -= 1;
    }
    while fits(l + 1) {
        l += 1;
    }
    l
}

/// Builds the scheme for `n` under `rule`. Fails rather than clamping when
/// `floor(n / ell) = 0`.
pub fn make_block_scheme(n: u64, rule: &BlockRule) -> Result<BlockScheme> {
    BlockScheme::new(n, rule.block_len(n)?)
}
