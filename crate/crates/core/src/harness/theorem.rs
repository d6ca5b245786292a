use std::str::FromStr;

use serde::Serialize;

use super::clt::{check_budget, run_clt, CltOptions, CltVerdict};
use crate::blocking::{
    CompositeReport, ConditionContext, ConditionKind, ConditionReport, ConditionValue, Verdict,
};
use crate::covariance::{long_run_variance, LongRunVariance};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::generators::derive_seed;
use crate::model::{ExperimentConfig, FamilyKind, FamilySpec, Normalizer};

/// Version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "assoclt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TheoremId {
    #[serde(rename = "T1_stationary")]
    T1Stationary,
    #[serde(rename = "T1_general")]
    T1General,
    T2,
    T3,
    Cox,
    OliveiraA,
    OliveiraB,
    GapDemo,
}

impl TheoremId {
    pub const ALL: [TheoremId; 8] = [
        TheoremId::T1Stationary,
        TheoremId::T1General,
        TheoremId::T2,
        TheoremId::T3,
        TheoremId::Cox,
        TheoremId::OliveiraA,
        TheoremId::OliveiraB,
        TheoremId::GapDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::T1Stationary => "T1_stationary",
            TheoremId::T1General => "T1_general",
            TheoremId::T2 => "T2",
            TheoremId::T3 => "T3",
            TheoremId::Cox => "Cox",
            TheoremId::OliveiraA => "OliveiraA",
            TheoremId::OliveiraB => "OliveiraB",
            TheoremId::GapDemo => "GapDemo",
        }
    }

    /// The conjunction of conditions under which a passing CLT is expected.
    pub fn requirement(self) -> &'static str {
        match self {
            TheoremId::T1Stationary => "s_n^2 / (n sigma^2) -> 1 (finite long-run variance)",
            TheoremId::T1General => "H0 and Ha and Hb and Hc",
            TheoremId::T2 => "Ha and (Hab or Hb) and Lindeberg_nu",
            TheoremId::T3 => "C2 and Lindeberg_nu",
            TheoremId::Cox => "coxA1_min_var and coxA1_max_abs3 and coxA2",
            TheoremId::OliveiraA => "OliveiraA1 and OliveiraA2 and OliveiraA3",
            TheoremId::OliveiraB | TheoremId::GapDemo => "OliveiraB1 and OliveiraB1_u1 and OliveiraB2 and OliveiraB3",
        }
    }
}

impl FromStr for TheoremId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = TheoremId::ALL.iter().map(|t| t.name()).collect();
                Error::InvalidArgument(format!("unknown theorem `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// Header carried by every emitted file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub master_seed: u64,
    /// Command-line overrides applied after loading the configuration.
    pub overrides: Vec<String>,
}

impl Provenance {
    pub fn for_config(config: &ExperimentConfig) -> Self {
        Provenance {
            tool: TOOL_NAME,
            version: crate::VERSION,
            config_hash: config.hash(),
            master_seed: config.seed,
            overrides: Vec::new(),
        }
    }

    /// Single-line form used as the first line of CSV files.
    pub fn comment_line(&self) -> String {
        let mut s = format!(
            "# tool={} version={} config_hash={} master_seed={}",
            self.tool, self.version, self.config_hash, self.master_seed
        );
        if !self.overrides.is_empty() {
            s.push_str(&format!(" overrides={}", self.overrides.join(";")));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyStatus {
    /// The condition verdict predicted the CLT outcome.
    Consistent,
    /// Conditions held but the CLT failed, or conditions failed but it passed.
    Mismatch,
    /// Conditions inconclusive or the CLT was not run.
    NoExpectation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Consistency {
    pub expected_clt_pass: Option<bool>,
    pub clt_pass: Option<bool>,
    pub status: ConsistencyStatus,
}

impl Consistency {
    /// Conditions holding predict a pass, failing predicts a failure;
    /// inconclusive conditions predict nothing.
    pub fn from(verdict: Verdict, clt_pass: Option<bool>) -> Self {
        let expected = match verdict {
            Verdict::HoldsEmpirically => Some(true),
            Verdict::FailsEmpirically => Some(false),
            Verdict::Inconclusive => None,
        };
        let status = match (expected, clt_pass) {
            (Some(e), Some(p)) if e == p => ConsistencyStatus::Consistent,
            (Some(_), Some(_)) => ConsistencyStatus::Mismatch,
            _ => ConsistencyStatus::NoExpectation,
        };
        Consistency {
            expected_clt_pass: expected,
            clt_pass,
            status,
        }
    }
}

/// A sub-evaluator that failed; the report is then marked incomplete.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub evaluator: String,
    pub error: String,
}

/// Tail-block diagnostic at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HabPoint {
    pub n: u64,
    pub ell: u64,
    pub m: u64,
    pub r: u64,
    pub value: f64,
    /// `r / n` for independent identically distributed families.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSummary {
    pub b_verdict: Verdict,
    pub hab_verdict: Verdict,
    pub gap_flag: bool,
    pub hab: Vec<HabPoint>,
    pub clt_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub theorem_id: TheoremId,
    pub family: FamilySpec,
    pub n_grid: Vec<u64>,
    pub requirement: &'static str,
    pub reports: Vec<ConditionReport>,
    pub composites: Vec<CompositeReport>,
    pub conditions_verdict: Verdict,
    pub clt: Option<CltVerdict>,
    pub consistency: Consistency,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapSummary>,
    pub incomplete: bool,
    pub failures: Vec<Failure>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TheoremReport {
    pub fn report(&self, id: &str) -> Option<&ConditionReport> {
        self.reports
            .iter()
            .chain(self.composites.iter().flat_map(|c| c.reports.iter().chain(c.hab.iter())))
            .find(|r| r.condition_id == id)
    }
}

type Evaluator = fn(&ConditionContext) -> Result<ConditionReport>;

struct Builder {
    reports: Vec<ConditionReport>,
    composites: Vec<CompositeReport>,
    failures: Vec<Failure>,
    notes: Vec<String>,
}

impl Builder {
    fn run<T>(&mut self, evaluator: &str, f: impl FnOnce() -> Result<T>) -> Option<T> {
        match f() {
            Ok(v) => Some(v),
            Err(e) => {
                self.failures.push(Failure {
                    evaluator: evaluator.to_string(),
                    error: e.to_string(),
                });
                None
            }
        }
    }

    fn verdict_of(&self, id: &str) -> Verdict {
        self.reports
            .iter()
            .find(|r| r.condition_id == id)
            .map_or(Verdict::Inconclusive, |r| r.verdict)
    }

    fn composite_verdict(&self, id: &str) -> Verdict {
        self.composites
            .iter()
            .find(|c| c.composite_id == id)
            .map_or(Verdict::Inconclusive, |c| c.verdict)
    }
}

/// Largest grid point whose CLT run fits the sample budget.
pub fn clt_n(config: &ExperimentConfig) -> Option<u64> {
    config
        .n_grid
        .iter()
        .rev()
        .copied()
        .find(|&n| check_budget(n, config.reps as usize, config.allow_large).is_ok())
}

/// `max_t (t^2/2) (Var(S_{m ell}) - nu^2) / s_n^2` over `t_grid`.
fn c2_report(ctx: &ConditionContext) -> Result<ConditionReport> {
    let t_max = ctx.config.t_grid.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let grid = ctx
        .points
        .iter()
        .map(|p| {
            let v = crate::cf::head_gap_bound(&p.stats, t_max)?;
            ConditionValue::new("C2", p.scheme.n, v, 0.0, p.stats.source.into())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport::judge("C2", ConditionKind::ToTarget, grid, &ctx.config.tolerances)
        .with_note(format!("covariance bound on the head factorisation gap at |t| = {t_max}")))
}

/// `s_n^2 / (n sigma^2)` along the grid, or `s_n^2 / n` (bounded?) when the
/// long-run variance diverges.
fn stationary_report(ctx: &ConditionContext) -> Result<ConditionReport> {
    let tol = &ctx.config.tolerances;
    match long_run_variance(&ctx.config.family)? {
        LongRunVariance::Finite(sigma2) => {
            if sigma2 <= 0.0 {
                return Err(Error::DegenerateVariance("long-run variance"));
            }
            let grid = ctx
                .points
                .iter()
                .map(|p| {
                    let v = p.stats.s_n_sq / (p.scheme.n as f64 * sigma2);
                    ConditionValue::new("sigma_ratio", p.scheme.n, v, 1.0, p.stats.source.into())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ConditionReport::judge("sigma_ratio", ConditionKind::ToTarget, grid, tol))
        }
        LongRunVariance::Infinite => {
            let grid = ctx
                .points
                .iter()
                .map(|p| {
                    let v = p.stats.s_n_sq / p.scheme.n as f64;
                    ConditionValue::new("sigma_ratio", p.scheme.n, v, 0.0, p.stats.source.into())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ConditionReport::judge("sigma_ratio", ConditionKind::Bounded, grid, tol)
                .with_note("long-run variance diverges: values are s_n^2 / n"))
        }
    }
}

fn clt_normalizer(id: TheoremId, config: &ExperimentConfig) -> Normalizer {
    match id {
        TheoremId::T1Stationary => Normalizer::StationarySigmaSqrtN,
        _ => config.normalizer,
    }
}

/// Evaluates a theorem's conditions over the grid, runs the CLT at the
/// largest affordable grid point and compares the two. Sub-evaluator errors
/// produce a partial report; only an invalid configuration is an error.
pub fn run_theorem(id: TheoremId, config: &ExperimentConfig, exec: Exec) -> Result<TheoremReport> {
    config.validate()?;
    let mut b = Builder {
        reports: Vec::new(),
        composites: Vec::new(),
        failures: Vec::new(),
        notes: Vec::new(),
    };
    let ctx = b.run("block statistics", || ConditionContext::new(config, exec));
    let mut gap = None;
    if let Some(ctx) = &ctx {
        match id {
            TheoremId::T1Stationary => {
                if let Some(r) = b.run("sigma_ratio", || stationary_report(ctx)) {
                    b.reports.push(r);
                }
            }
            TheoremId::T1General => {
                for (name, f) in [
                    ("H0", ConditionContext::h0 as Evaluator),
                    ("Ha", ConditionContext::ha),
                    ("Hb", ConditionContext::hb),
                    ("Hc", ConditionContext::hc),
                ] {
                    if let Some(r) = b.run(name, || f(ctx)) {
                        b.reports.push(r);
                    }
                }
            }
            TheoremId::T2 | TheoremId::T3 => {
                let mut evals: Vec<(&str, Evaluator)> = Vec::new();
                if id == TheoremId::T2 {
                    evals.extend([
                        ("Ha", ConditionContext::ha as Evaluator),
                        ("Hab", ConditionContext::hab),
                        ("Hb", ConditionContext::hb),
                    ]);
                } else {
                    evals.push(("C2", c2_report));
                }
                evals.push(("FellerMax", ConditionContext::feller_max));
                for (name, f) in evals {
                    if let Some(r) = b.run(name, || f(ctx)) {
                        b.reports.push(r);
                    }
                }
                if let Some(rs) = b.run("Lindeberg", || ctx.lindeberg_pair()) {
                    b.reports.extend(rs);
                }
            }
            TheoremId::Cox => {
                if let Some(c) = b.run("Cox", || ctx.cox()) {
                    b.composites.push(c);
                }
            }
            TheoremId::OliveiraA => {
                if let Some(c) = b.run("OliveiraA", || ctx.oliveira_a()) {
                    b.composites.push(c);
                }
            }
            TheoremId::OliveiraB | TheoremId::GapDemo => {
                if let Some(c) = b.run("OliveiraB", || ctx.oliveira_b()) {
                    b.composites.push(c);
                }
            }
        }
    }

    let conditions_verdict = match id {
        TheoremId::T1Stationary => b.verdict_of("sigma_ratio"),
        TheoremId::T1General => Verdict::all(["H0", "Ha", "Hb", "Hc"].map(|c| b.verdict_of(c))),
        TheoremId::T2 => Verdict::all([
            b.verdict_of("Ha"),
            Verdict::any([b.verdict_of("Hab"), b.verdict_of("Hb")]),
            b.verdict_of("Lindeberg_nu"),
        ]),
        TheoremId::T3 => Verdict::all([b.verdict_of("C2"), b.verdict_of("Lindeberg_nu")]),
        TheoremId::Cox => b.composite_verdict("Cox"),
        TheoremId::OliveiraA => b.composite_verdict("OliveiraA"),
        TheoremId::OliveiraB | TheoremId::GapDemo => b.composite_verdict("OliveiraB"),
    };

    let clt = match clt_n(config) {
        None => {
            b.failures.push(Failure {
                evaluator: "clt".into(),
                error: Error::BudgetExceeded {
                    values: config.n_grid[0] as u128 * config.reps as u128,
                    limit: crate::model::config::SAMPLE_BUDGET,
                }
                .to_string(),
            });
            None
        }
        Some(n) => {
            if n != config.n_max() {
                b.notes.push(format!("CLT run at n = {n}: larger grid points exceed the sample budget"));
            }
            let opts = CltOptions {
                alpha: config.tolerances.ks_alpha,
                allow_large: config.allow_large,
                exec,
            };
            let seed = derive_seed(config.seed, "clt", n);
            let reps = config.reps as usize;
            let preferred = clt_normalizer(id, config);
            match run_clt(&config.family, n, reps, seed, preferred, opts) {
                Err(Error::NormalizerUnavailable { .. }) => {
                    let fallback = if preferred == Normalizer::StationarySigmaSqrtN {
                        config.normalizer
                    } else {
                        Normalizer::EmpiricalSN
                    };
                    b.notes.push(format!(
                        "normalizer {preferred:?} unavailable for this family; CLT run with {fallback:?}"
                    ));
                    b.run("clt", || run_clt(&config.family, n, reps, seed, fallback, opts))
                }
                other => b.run("clt", || other),
            }
        }
    };
    let clt_pass = clt.as_ref().map(|c| c.pass);

    if id == TheoremId::GapDemo {
        if let Some(c) = b.composites.iter().find(|c| c.composite_id == "OliveiraB") {
            let hab = c.hab.as_ref().expect("OliveiraB carries the tail report");
            let iid = matches!(config.family.kind, FamilyKind::Iid { .. });
            let points = ctx.as_ref().map_or(&[][..], |c| &c.points[..]);
            gap = Some(GapSummary {
                b_verdict: c.verdict,
                hab_verdict: hab.verdict,
                gap_flag: c.gap_flag.unwrap_or(false),
                hab: hab
                    .grid
                    .iter()
                    .zip(points)
                    .map(|(v, p)| {
                        let s = p.scheme;
                        let closed = iid.then(|| s.r as f64 / s.n as f64);
                        HabPoint {
                            n: s.n,
                            ell: s.ell,
                            m: s.m,
                            r: s.r,
                            value: v.value,
                            closed_form: closed,
                            abs_error: closed.map(|c| (c - v.value).abs()),
                        }
                    })
                    .collect(),
                clt_pass,
            });
        }
    }

    Ok(TheoremReport {
        schema_version: REPORT_SCHEMA_VERSION,
        provenance: Provenance::for_config(config),
        theorem_id: id,
        family: config.family.clone(),
        n_grid: config.n_grid.clone(),
        requirement: id.requirement(),
        reports: b.reports,
        composites: b.composites,
        conditions_verdict,
        consistency: Consistency::from(conditions_verdict, clt_pass),
        clt,
        gap,
        incomplete: !b.failures.is_empty(),
        failures: b.failures,
        notes: b.notes,
    })
}

/// Theorem report with the default execution strategy.
pub fn run_theorem_default(id: TheoremId, config: &ExperimentConfig) -> Result<TheoremReport> {
    run_theorem(id, config, Exec::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BaseDist;

    fn cfg(family: FamilySpec, lo: u32, hi: u32, reps: u64) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(family, ExperimentConfig::pow2_grid(lo, hi));
        c.reps = reps;
        c.seed = 1;
        c
    }

    #[test]
    fn parse_ids() {
        assert_eq!("t1_general".parse::<TheoremId>().unwrap(), TheoremId::T1General);
        assert!("T9".parse::<TheoremId>().is_err());
        assert_eq!(serde_json::to_string(&TheoremId::T1Stationary).unwrap(), "\"T1_stationary\"");
    }

    #[test]
    fn consistency_rule() {
        use ConsistencyStatus::*;
        assert_eq!(Consistency::from(Verdict::HoldsEmpirically, Some(true)).status, Consistent);
        assert_eq!(Consistency::from(Verdict::FailsEmpirically, Some(false)).status, Consistent);
        assert_eq!(Consistency::from(Verdict::HoldsEmpirically, Some(false)).status, Mismatch);
        assert_eq!(Consistency::from(Verdict::FailsEmpirically, Some(true)).status, Mismatch);
        assert_eq!(Consistency::from(Verdict::Inconclusive, Some(true)).status, NoExpectation);
        assert_eq!(Consistency::from(Verdict::HoldsEmpirically, None).status, NoExpectation);
    }

    #[test]
    fn geometric_cox_report() {
        let r = run_theorem(TheoremId::Cox, &cfg(FamilySpec::geometric_gaussian(0.5), 8, 12, 1000), Exec::default())
            .unwrap();
        assert_eq!(r.conditions_verdict, Verdict::HoldsEmpirically);
        assert!(r.clt.as_ref().unwrap().pass);
        assert_eq!(r.consistency.status, ConsistencyStatus::Consistent);
        assert!(!r.incomplete);
    }

    #[test]
    fn stationary_theorem_on_common_factor_falls_back() {
        let r = run_theorem(
            TheoremId::T1Stationary,
            &cfg(FamilySpec::common_factor(BaseDist::CenteredExponential { rate: 1.0 }), 6, 10, 1000),
            Exec::default(),
        )
        .unwrap();
        assert_eq!(r.conditions_verdict, Verdict::FailsEmpirically);
        assert!(!r.clt.as_ref().unwrap().pass);
        assert!(r.notes.iter().any(|n| n.contains("unavailable")));
    }

    #[test]
    fn partial_report_on_evaluator_failure() {
        // conditions are analytic; the CLT needs at least MIN_CLT_REPS
        let r = run_theorem(TheoremId::T1General, &cfg(FamilySpec::iid_normal(), 6, 10, 20), Exec::default()).unwrap();
        assert!(r.incomplete);
        assert_eq!(r.failures[0].evaluator, "clt");
        assert_eq!(r.reports.len(), 4);
        assert!(r.clt.is_none());
        assert_eq!(r.consistency.status, ConsistencyStatus::NoExpectation);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"incomplete\":true"));
    }

    #[test]
    fn budget_picks_largest_affordable_point() {
        let mut c = cfg(FamilySpec::iid_normal(), 8, 20, 5000);
        assert_eq!(clt_n(&c), Some(1 << 17));
        c.allow_large = true;
        assert_eq!(clt_n(&c), Some(1 << 20));
    }
}
