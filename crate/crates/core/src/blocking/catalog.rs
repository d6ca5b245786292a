use std::str::FromStr;
use std::sync::OnceLock;

use serde::Serialize;

use super::conditions::*;
use super::stats::{block_stats, empirical_block_stats, BlockStats, BlockSums};
use super::verdict::{ConditionKind, ConditionReport, Verdict};
use crate::covariance::{analytic_profile, CovarianceProfile, CovarianceRows};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::generators::derive_seed;
use crate::model::{make_block_scheme, BlockScheme, ExperimentConfig, Tolerances};

/// Conditions selectable by name (`--conditions`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Condition {
    H0,
    Ha,
    Hab,
    Hb,
    Hc,
    FellerMax,
    Lindeberg,
    HNab,
    Cox,
    OliveiraA,
    OliveiraB,
}

impl Condition {
    pub const ALL: [Condition; 11] = [
        Condition::H0,
        Condition::Ha,
        Condition::Hab,
        Condition::Hb,
        Condition::Hc,
        Condition::FellerMax,
        Condition::Lindeberg,
        Condition::HNab,
        Condition::Cox,
        Condition::OliveiraA,
        Condition::OliveiraB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::H0 => "H0",
            Condition::Ha => "Ha",
            Condition::Hab => "Hab",
            Condition::Hb => "Hb",
            Condition::Hc => "Hc",
            Condition::FellerMax => "FellerMax",
            Condition::Lindeberg => "Lindeberg",
            Condition::HNab => "HNab",
            Condition::Cox => "Cox",
            Condition::OliveiraA => "OliveiraA",
            Condition::OliveiraB => "OliveiraB",
        }
    }

    pub fn is_composite(self) -> bool {
        matches!(self, Condition::Cox | Condition::OliveiraA | Condition::OliveiraB)
    }

    /// Comma-separated list, e.g. `H0,Ha,Hc`.
    pub fn parse_list(s: &str) -> Result<Vec<Condition>> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Condition::from_str)
            .collect()
    }
}

impl FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Condition::ALL.iter().map(|c| c.name()).collect();
                Error::InvalidArgument(format!("unknown condition `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// Several sub-condition reports combined by conjunction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeReport {
    pub composite_id: String,
    pub verdict: Verdict,
    pub reports: Vec<ConditionReport>,
    /// Reported alongside the Oliveira B conditions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hab: Option<ConditionReport>,
    /// Set when the B conditions hold but the tail-block condition does not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_flag: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CompositeReport {
    fn new(id: &str, reports: Vec<ConditionReport>) -> Self {
        CompositeReport {
            composite_id: id.to_string(),
            verdict: Verdict::all(reports.iter().map(|r| r.verdict)),
            reports,
            hab: None,
            gap_flag: None,
            notes: Vec::new(),
        }
    }

    pub fn report(&self, id: &str) -> Option<&ConditionReport> {
        self.reports.iter().find(|r| r.condition_id == id)
    }
}

/// Output of a condition check: plain reports and composites, in request order.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct CheckOutput {
    pub reports: Vec<ConditionReport>,
    pub composites: Vec<CompositeReport>,
}

impl CheckOutput {
    pub fn report(&self, id: &str) -> Option<&ConditionReport> {
        self.reports.iter().find(|r| r.condition_id == id)
    }

    pub fn composite(&self, id: &str) -> Option<&CompositeReport> {
        self.composites.iter().find(|r| r.composite_id == id)
    }
}

/// Everything known about one grid point.
#[derive(Debug)]
pub struct GridPoint {
    pub scheme: BlockScheme,
    /// `None` when the family has no closed-form covariance.
    pub profile: Option<CovarianceProfile>,
    pub stats: BlockStats,
    sums: OnceLock<BlockSums>,
}

/// Evaluates conditions over the `n_grid` of a configuration. Monte Carlo
/// inputs are drawn lazily, once per grid point, from seeds derived from the
/// master seed and `n`.
#[derive(Debug)]
pub struct ConditionContext {
    pub config: ExperimentConfig,
    pub exec: Exec,
    pub points: Vec<GridPoint>,
    rows: OnceLock<CovarianceRows>,
}

impl ConditionContext {
    pub fn new(config: &ExperimentConfig, exec: Exec) -> Result<Self> {
        config.validate()?;
        let mut points = Vec::with_capacity(config.n_grid.len());
        for &n in &config.n_grid {
            let scheme = make_block_scheme(n, &config.block_rule)?;
            let profile = match analytic_profile(&config.family, n as usize) {
                Ok(p) => Some(p),
                Err(Error::NoAnalyticCovariance(_)) => None,
                Err(e) => return Err(e),
            };
            let sums = OnceLock::new();
            let stats = match &profile {
                Some(p) => block_stats(p, &scheme)?,
                None => {
                    let s = collect_sums(config, &scheme, exec)?;
                    let st = empirical_block_stats(&s)?;
                    let _ = sums.set(s);
                    st
                }
            };
            points.push(GridPoint {
                scheme,
                profile,
                stats,
                sums,
            });
        }
        Ok(ConditionContext {
            config: config.clone(),
            exec,
            points,
            rows: OnceLock::new(),
        })
    }

    fn tol(&self) -> &Tolerances {
        &self.config.tolerances
    }

    pub fn n_max(&self) -> u64 {
        self.config.n_max()
    }

    fn sums(&self, i: usize) -> Result<&BlockSums> {
        let pt = &self.points[i];
        if let Some(s) = pt.sums.get() {
            return Ok(s);
        }
        let s = collect_sums(&self.config, &pt.scheme, self.exec)?;
        Ok(pt.sums.get_or_init(|| s))
    }

    /// Covariance rows at `n_max` (anchors `1` and `n/2 + 1`), for families
    /// without a closed-form covariance.
    fn rows(&self) -> Result<&CovarianceRows> {
        if let Some(r) = self.rows.get() {
            return Ok(r);
        }
        let n = self.n_max() as usize;
        let seed = derive_seed(self.config.seed, "covariance-rows", n as u64);
        let r = CovarianceRows::estimate(
            &self.config.family,
            n,
            &[0, n / 2],
            self.config.reps as usize,
            seed,
            self.exec,
        )?;
        Ok(self.rows.get_or_init(|| r))
    }

    fn grid<F>(&self, f: F) -> Result<Vec<ConditionValue>>
    where
        F: Fn(usize, &GridPoint) -> Result<ConditionValue>,
    {
        self.points.iter().enumerate().map(|(i, p)| f(i, p)).collect()
    }

    fn judge(&self, id: &str, kind: ConditionKind, grid: Vec<ConditionValue>) -> ConditionReport {
        ConditionReport::judge(id, kind, grid, self.tol())
    }

    pub fn h0(&self) -> Result<ConditionReport> {
        let g = self.grid(|_, p| match &p.profile {
            Some(prof) => eval_h0(prof, &p.scheme),
            None => ConditionValue::new(
                "H0",
                p.scheme.n,
                p.scheme.ell as f64 / p.stats.s_n_sq,
                0.0,
                ValueSource::Empirical,
            ),
        })?;
        Ok(self.judge("H0", ConditionKind::ToTarget, g))
    }

    pub fn ha(&self) -> Result<ConditionReport> {
        let g = self.grid(|_, p| eval_ha(&p.stats, p.stats.s_n_sq))?;
        Ok(self.judge("Ha", ConditionKind::ToTarget, g))
    }

    pub fn hab(&self) -> Result<ConditionReport> {
        let g = self.grid(|_, p| eval_hab(&p.stats, p.stats.s_n_sq))?;
        Ok(self.judge("Hab", ConditionKind::ToTarget, g))
    }

    pub fn hb(&self) -> Result<ConditionReport> {
        let g = self.grid(|_, p| eval_hb(&p.stats, p.stats.s_n_sq))?;
        Ok(self.judge("Hb", ConditionKind::ToTarget, g))
    }

    pub fn feller_max(&self) -> Result<ConditionReport> {
        let g = self.grid(|_, p| eval_feller_max(&p.stats, p.stats.s_n_sq))?;
        Ok(self.judge("FellerMax", ConditionKind::ToTarget, g))
    }

    pub fn hc(&self) -> Result<ConditionReport> {
        let (delta, literal) = (self.config.delta, self.config.hc_literal);
        let mut fell_back = false;
        let mut g = Vec::with_capacity(self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            let analytic = match p.profile {
                Some(_) => match eval_hc(&self.config.family, &p.stats, delta, literal) {
                    Ok(v) => Some(v),
                    Err(Error::NoAnalyticCovariance(_)) => None,
                    Err(e) => return Err(e),
                },
                None => None,
            };
            g.push(match analytic {
                Some(v) => v,
                None => {
                    fell_back = true;
                    eval_hc_empirical(self.sums(i)?, p.stats.s_n_sq, delta, literal)?
                }
            });
        }
        let mut r = self.judge("Hc", ConditionKind::ToTarget, g);
        if fell_back {
            r = r.with_note("no closed-form block moments: Monte Carlo estimate");
        }
        if literal {
            r = r.with_note("literal ell^{3/2} prefactor");
        }
        Ok(r)
    }

    fn lindeberg(&self, norm: LindebergNorm) -> Result<(ConditionReport, bool)> {
        let eps = self.config.epsilon;
        let mut fell_back = false;
        let mut g = Vec::with_capacity(self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            let analytic = match p.profile {
                Some(_) => eval_lindeberg_analytic(&self.config.family, &p.stats, eps, norm)?,
                None => None,
            };
            g.push(match analytic {
                Some(v) => v,
                None => {
                    fell_back = true;
                    eval_lindeberg_blocks(self.sums(i)?, &p.stats, eps, norm)?
                }
            });
        }
        Ok((self.judge(norm.id(), ConditionKind::ToTarget, g), fell_back))
    }

    /// Block Lindeberg functionals truncated at `eps * nu` and at `eps * s_n`.
    pub fn lindeberg_pair(&self) -> Result<Vec<ConditionReport>> {
        [LindebergNorm::Nu, LindebergNorm::SN]
            .into_iter()
            .map(|norm| {
                let (r, mc) = self.lindeberg(norm)?;
                Ok(if mc { r.with_note("Monte Carlo block truncated moments") } else { r })
            })
            .collect()
    }

    pub fn hnab(&self) -> Result<ConditionReport> {
        let g = self.grid(|_, p| match &p.profile {
            Some(prof) => eval_hnab_max(prof, p.scheme.ell, p.stats.s_n_sq),
            None => {
                // stationary-in-law families only reach this branch
                let var = match self.config.family.marginal() {
                    Some(m) => m.variance(),
                    None => self.rows()?.min_variance(),
                };
                let w = (p.scheme.ell + 1).min(p.scheme.n) as f64;
                ConditionValue::new("HNab", p.scheme.n, w * var / p.stats.s_n_sq, 0.0, ValueSource::Empirical)
            }
        })?;
        Ok(self
            .judge("HNab", ConditionKind::ToTarget, g)
            .with_note("largest window t..=t+ell (1-based, inclusive)"))
    }

    /// Lags `1, 2, 4, ...` up to `n_max / 2`.
    pub fn lag_grid(&self) -> Vec<u64> {
        let half = (self.n_max() / 2).max(1);
        std::iter::successors(Some(1u64), |l| Some(l * 2)).take_while(|l| *l <= half).collect()
    }

    /// `u(r)` along the lag grid at `n_max`.
    fn cox_lag_report(&self, id: &str) -> Result<ConditionReport> {
        let n = self.n_max();
        let last = self.points.last().expect("validated grid is nonempty");
        let mut g = Vec::new();
        for r in self.lag_grid() {
            let (v, src) = match &last.profile {
                Some(p) => (p.cox_coefficient(r as usize), ValueSource::Analytic),
                None => (self.rows()?.cox_coefficient(r as usize), ValueSource::Empirical),
            };
            g.push(ConditionValue::new(id, n, v, 0.0, src)?.at_lag(r));
        }
        let mut rep = ConditionReport::judge_lag(id, ConditionKind::ToTarget, g, self.tol());
        if last.profile.is_none() {
            rep = rep.with_note("covariance rows estimated at anchors 1 and n/2 + 1");
        }
        Ok(rep)
    }

    /// `u_n(1)` along `n`.
    fn cox_u1_report(&self, id: &str) -> Result<ConditionReport> {
        let g = self.grid(|_, p| match &p.profile {
            Some(prof) => ConditionValue::new(id, p.scheme.n, prof.cox_coefficient(1), 0.0, ValueSource::Analytic),
            None => Err(Error::NoAnalyticCovariance("u_n(1) along the grid".into())),
        });
        match g {
            Ok(g) => Ok(self.judge(id, ConditionKind::Bounded, g)),
            Err(Error::NoAnalyticCovariance(_)) => {
                let v = self.rows()?.cox_coefficient(1);
                let g = vec![ConditionValue::new(id, self.n_max(), v, 0.0, ValueSource::Empirical)?];
                Ok(self
                    .judge(id, ConditionKind::Bounded, g)
                    .with_note("no closed-form covariance: single Monte Carlo point at n_max"))
            }
            Err(e) => Err(e),
        }
    }

    pub fn cox(&self) -> Result<CompositeReport> {
        let marg = self.config.family.marginal();
        let mut var_grid = Vec::new();
        let mut mom_grid = Vec::new();
        for p in &self.points {
            let n = p.scheme.n;
            match (&p.profile, &marg) {
                (Some(prof), _) => {
                    let d = prof.diagonal();
                    let v = d.iter().copied().fold(f64::INFINITY, f64::min);
                    var_grid.push(ConditionValue::new("coxA1_min_var", n, v, 0.0, ValueSource::Analytic)?);
                }
                (None, Some(m)) => {
                    var_grid.push(ConditionValue::new("coxA1_min_var", n, m.variance(), 0.0, ValueSource::Analytic)?)
                }
                (None, None) => {}
            }
            if let Some(m) = &marg {
                mom_grid.push(ConditionValue::new(
                    "coxA1_max_abs3",
                    n,
                    m.abs_moment(3.0),
                    0.0,
                    ValueSource::Analytic,
                )?);
            }
        }
        let mut notes = Vec::new();
        if var_grid.is_empty() {
            let r = self.rows()?;
            var_grid.push(ConditionValue::new("coxA1_min_var", self.n_max(), r.min_variance(), 0.0, ValueSource::Empirical)?);
        }
        if mom_grid.is_empty() {
            let r = self.rows()?;
            mom_grid.push(ConditionValue::new(
                "coxA1_max_abs3",
                self.n_max(),
                r.max_abs_third(),
                0.0,
                ValueSource::Empirical,
            )?);
            notes.push("third absolute moment estimated at anchors 1 and n/2 + 1".to_string());
        }
        let reports = vec![
            self.judge("coxA1_min_var", ConditionKind::PositiveLowerBound, var_grid),
            self.judge("coxA1_max_abs3", ConditionKind::Bounded, mom_grid),
            self.cox_lag_report("coxA2")?,
        ];
        let mut c = CompositeReport::new("Cox", reports);
        c.notes = notes;
        Ok(c)
    }

    pub fn oliveira_a(&self) -> Result<CompositeReport> {
        let a1 = self.grid(|_, p| {
            let mut v = eval_ha(&p.stats, p.stats.s_n_sq)?;
            v.condition_id = "OliveiraA1".into();
            Ok(v)
        })?;
        let t_max = self.config.t_grid.iter().fold(0.0f64, |a, t| a.max(t.abs()));
        let a2 = self.grid(|_, p| {
            let v = crate::cf::oliveira_gap_bound(&p.stats, t_max)?;
            ConditionValue::new("OliveiraA2", p.scheme.n, v, 0.0, p.stats.source.into())
        })?;
        let (mut a3, mc) = self.lindeberg(LindebergNorm::SN)?;
        a3.condition_id = "OliveiraA3".into();
        for v in &mut a3.grid {
            v.condition_id = "OliveiraA3".into();
        }
        if mc {
            a3 = a3.with_note("Monte Carlo block truncated moments");
        }
        let reports = vec![
            self.judge("OliveiraA1", ConditionKind::ToTarget, a1),
            self.judge("OliveiraA2", ConditionKind::ToTarget, a2)
                .with_note(format!("Newman bound on the m+1 block factorisation gap at |t| = {t_max}")),
            a3.with_note("squared integrand, truncation at eps * s_n"),
        ];
        Ok(CompositeReport::new("OliveiraA", reports))
    }

    pub fn oliveira_b(&self) -> Result<CompositeReport> {
        let b1 = self.cox_lag_report("OliveiraB1")?;
        let b1_u1 = self.cox_u1_report("OliveiraB1_u1")?;
        let b2 = self.grid(|_, p| {
            ConditionValue::new(
                "OliveiraB2",
                p.scheme.n,
                p.stats.s_n_sq / p.scheme.n as f64,
                0.0,
                p.stats.source.into(),
            )
        })?;
        let eps = self.config.epsilon;
        let mut b3 = Vec::with_capacity(self.points.len());
        for p in &self.points {
            let n = p.scheme.n;
            let mut v = match eval_variable_lindeberg(&self.config.family, n, p.stats.s_n_sq, eps)? {
                Some(v) => v,
                None => eval_variable_lindeberg_mc(
                    &self.config.family,
                    n,
                    p.stats.s_n_sq,
                    eps,
                    self.config.reps as usize,
                    derive_seed(self.config.seed, "variable-lindeberg", n),
                    self.exec,
                )?,
            };
            v.condition_id = "OliveiraB3".into();
            b3.push(v);
        }
        let reports = vec![
            b1,
            b1_u1,
            self.judge("OliveiraB2", ConditionKind::PositiveLowerBound, b2),
            self.judge("OliveiraB3", ConditionKind::ToTarget, b3).with_note("sum over all n variables"),
        ];
        let mut c = CompositeReport::new("OliveiraB", reports);
        let hab = self.hab()?;
        let gap = c.verdict == Verdict::HoldsEmpirically && hab.verdict != Verdict::HoldsEmpirically;
        if gap {
            c.notes
                .push("B conditions hold but the tail-block condition is not small: the tail is not controlled".into());
        }
        c.hab = Some(hab);
        c.gap_flag = Some(gap);
        Ok(c)
    }

    /// Evaluates the requested conditions in order.
    pub fn check(&self, conditions: &[Condition]) -> Result<CheckOutput> {
        let mut out = CheckOutput::default();
        for &c in conditions {
            match c {
                Condition::H0 => out.reports.push(self.h0()?),
                Condition::Ha => out.reports.push(self.ha()?),
                Condition::Hab => out.reports.push(self.hab()?),
                Condition::Hb => out.reports.push(self.hb()?),
                Condition::Hc => out.reports.push(self.hc()?),
                Condition::FellerMax => out.reports.push(self.feller_max()?),
                Condition::Lindeberg => out.reports.extend(self.lindeberg_pair()?),
                Condition::HNab => out.reports.push(self.hnab()?),
                Condition::Cox => out.composites.push(self.cox()?),
                Condition::OliveiraA => out.composites.push(self.oliveira_a()?),
                Condition::OliveiraB => out.composites.push(self.oliveira_b()?),
            }
        }
        Ok(out)
    }
}

fn collect_sums(config: &ExperimentConfig, scheme: &BlockScheme, exec: Exec) -> Result<BlockSums> {
    let seed = derive_seed(config.seed, "block-sums", scheme.n);
    BlockSums::collect(&config.family, scheme, config.reps as usize, seed, exec)
}

/// Convenience wrapper: builds the context and evaluates `conditions`.
pub fn check_conditions(config: &ExperimentConfig, conditions: &[Condition], exec: Exec) -> Result<CheckOutput> {
    ConditionContext::new(config, exec)?.check(conditions)
}
