//! `assoclt` command-line runner.
//!
//! Exit code 0 means the requested output was produced, whatever the
//! verdicts say; 1 is an execution failure, 2 a usage error.

mod setup;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use assoclt::blocking::{
    block_stats, check_conditions, empirical_block_stats, BlockSums, CheckOutput, Condition, ConditionReport,
};
use assoclt::cf::cf_report;
use assoclt::covariance::{
    analytic_profile, association_probe, cox_coefficient_limit, demimartingale_probe, long_run_variance,
    AssociationBattery, CovarianceRows, LongRunVariance, PrefixStat, MIN_PROBE_SAMPLES,
};
use assoclt::exec::pairwise_sum;
use assoclt::generators::{derive_seed, map_replicates, replicate_with};
use assoclt::harness::{
    check_budget, condition_csv, run_clt, run_theorem, to_json, verdict_rows_csv, write_csv_bundle, CltOptions,
    CltVerdict, Provenance, SampleSummary, TheoremId,
};
use assoclt::model::make_block_scheme;
use assoclt::{Error, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use setup::{load, Common, Format, Setup};

#[derive(Debug, Parser)]
#[command(name = "assoclt", version, about = "Finite-sample CLT diagnostics for associated sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample paths as CSV (replicate, index, value) or raw f64.
    Generate(Common),
    /// Covariance summary at one n: s_n^2, long-run variance, Cox coefficients, association probes.
    Analyze(Common),
    /// Blocking conditions over the n grid.
    Check {
        #[command(flatten)]
        common: Common,
        /// Comma list of H0,Ha,Hab,Hb,Hc,FellerMax,Lindeberg,HNab,Cox,OliveiraA,OliveiraB (default: all).
        #[arg(long)]
        conditions: Option<String>,
    },
    /// Characteristic-function gaps at one n over the config t grid.
    Cf(Common),
    /// Monte Carlo CLT run at one n.
    Clt(Common),
    /// Theorem report: conditions, CLT run and their consistency.
    Report {
        #[command(flatten)]
        common: Common,
        /// T1_stationary, T1_general, T2, T3, Cox, OliveiraA, OliveiraB or GapDemo.
        #[arg(long)]
        theorem: String,
    },
}

/// Where output goes: a file in `--out`, or stdout.
struct Sink {
    dir: Option<PathBuf>,
    verbose: bool,
}

impl Sink {
    fn new(c: &Common) -> Self {
        Sink {
            dir: c.out.clone(),
            verbose: c.verbose,
        }
    }

    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("assoclt: {msg}");
        }
    }

    fn dir(&self, what: &str) -> Result<&Path> {
        let d = self
            .dir
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("{what} writes several files; pass --out DIR")))?;
        fs::create_dir_all(d).map_err(|e| io_at(d, e))?;
        Ok(d)
    }

    fn emit(&self, name: &str, bytes: &[u8]) -> Result<()> {
        match &self.dir {
            Some(d) => {
                fs::create_dir_all(d).map_err(|e| io_at(d, e))?;
                let path = d.join(name);
                fs::write(&path, bytes).map_err(|e| io_at(&path, e))?;
                self.log(&format!("wrote {}", path.display()));
            }
            None => std::io::stdout().write_all(bytes)?,
        }
        Ok(())
    }
}

fn io_at(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// The requested format, or the first allowed one.
fn format(c: &Common, allowed: &[Format], cmd: &str) -> Result<Format> {
    match c.format {
        None => Ok(allowed[0]),
        Some(f) if allowed.contains(&f) => Ok(f),
        Some(f) => Err(Error::InvalidArgument(format!("`{cmd}` does not support --format {f:?}"))),
    }
}

fn generate(c: &Common) -> Result<()> {
    let fmt = format(c, &[Format::Csv, Format::Bin], "generate")?;
    let s = load(c)?;
    let sink = Sink::new(c);
    let (n, reps) = (s.single_n(), s.config.reps as usize);
    check_budget(n, reps, s.config.allow_large)?;
    sink.log(&format!("generating {reps} paths of length {n}"));
    let set = replicate_with(&s.config.family, n as usize, reps, s.config.seed, s.exec)?;
    let prov = s.provenance();
    let header = format!(
        "{} family_hash={} seed={} n={n} reps={reps}",
        prov.comment_line(),
        s.config.family.hash(),
        s.config.seed
    );
    if fmt == Format::Bin {
        // header line, then reps * n little-endian f64 in replicate-major order
        let mut bytes = format!("{header}\n").into_bytes();
        for p in &set.paths {
            for v in &p.values {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        return sink.emit("generate.bin", &bytes);
    }
    let mut out = format!("{header}\nreplicate,index,value\n");
    for (i, p) in set.paths.iter().enumerate() {
        for (j, v) in p.values.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{v}", j + 1);
        }
    }
    sink.emit("generate.csv", out.as_bytes())
}

/// Lags `1, 2, 4, ...` below `n`.
fn lags(n: u64) -> Vec<u64> {
    std::iter::successors(Some(1u64), |r| Some(r * 2)).take_while(|&r| r < n.max(2)).collect()
}

/// Probes run on a prefix of this length; every family's prefix has the
/// law of its first coordinates.
const PROBE_LEN: usize = 64;

fn analyze(c: &Common) -> Result<()> {
    format(c, &[Format::Json], "analyze")?;
    let s = load(c)?;
    let sink = Sink::new(c);
    let cfg = &s.config;
    let n = s.single_n();
    let reps = cfg.reps as usize;
    let (source, s_n2, u): (&str, f64, Vec<(u64, f64)>) = match analytic_profile(&cfg.family, n as usize) {
        Ok(p) => ("analytic", p.s_n_squared()?, lags(n).into_iter().map(|r| (r, p.cox_coefficient(r as usize))).collect()),
        Err(Error::NoAnalyticCovariance(_)) => {
            sink.log("no closed-form covariance; estimating by Monte Carlo");
            check_budget(n, reps, cfg.allow_large)?;
            let sums = map_replicates(&cfg.family, n as usize, reps, derive_seed(cfg.seed, "s_n", n), s.exec, |_, x| {
                pairwise_sum(x)
            })?;
            let sd = SampleSummary::of(&sums).sd;
            let rows = CovarianceRows::estimate(
                &cfg.family,
                n as usize,
                &[0, n as usize / 2],
                reps,
                derive_seed(cfg.seed, "covariance-rows", n),
                s.exec,
            )?;
            ("empirical", sd * sd, lags(n).into_iter().map(|r| (r, rows.cox_coefficient(r as usize))).collect())
        }
        Err(e) => return Err(e),
    };
    let sigma2 = match long_run_variance(&cfg.family) {
        Ok(LongRunVariance::Finite(v)) => json!(v),
        Ok(LongRunVariance::Infinite) => json!("infinite"),
        Err(Error::NoAnalyticCovariance(_)) => Value::Null,
        Err(e) => return Err(e),
    };
    let u_limit = lags(n)
        .into_iter()
        .map(|r| match cox_coefficient_limit(&cfg.family, r as usize) {
            Ok(v) => Ok((r, v)),
            Err(Error::NoAnalyticCovariance(_)) => Ok((r, None)),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let probe_len = PROBE_LEN.min(n as usize);
    let probe_reps = reps.max(MIN_PROBE_SAMPLES);
    sink.log(&format!("association probes on {probe_reps} paths of length {probe_len}"));
    let set = replicate_with(&cfg.family, probe_len, probe_reps, derive_seed(cfg.seed, "probes", n), s.exec)?;
    let assoc = association_probe(&set, &AssociationBattery::for_len(probe_len))?;
    let demi = demimartingale_probe(&set, &PrefixStat::default_battery())?;
    let out = json!({
        "provenance": s.provenance(),
        "family": cfg.family,
        "n": n,
        "source": source,
        "s_n2": s_n2,
        "sigma2": sigma2,
        "u": u,
        "u_limit": u_limit,
        "probes": {
            "len": probe_len,
            "reps": probe_reps,
            "association": assoc,
            "demimartingale": demi,
        },
    });
    sink.emit("analyze.json", to_json(&out)?.as_bytes())
}

#[derive(Serialize)]
struct CheckDoc<'a> {
    provenance: Provenance,
    #[serde(flatten)]
    output: &'a CheckOutput,
}

fn check(c: &Common, conditions: Option<&str>) -> Result<()> {
    let fmt = format(c, &[Format::Json, Format::Csv], "check")?;
    let s = load(c)?;
    let sink = Sink::new(c);
    let conds = match conditions {
        Some(list) => Condition::parse_list(list)?,
        None => Condition::ALL.to_vec(),
    };
    sink.log(&format!("checking {} conditions over {} grid points", conds.len(), s.config.n_grid.len()));
    let output = check_conditions(&s.config, &conds, s.exec)?;
    let provenance = s.provenance();
    if fmt == Format::Csv {
        let dir = sink.dir("check --format csv")?;
        let grids: Vec<&ConditionReport> = output
            .reports
            .iter()
            .chain(output.composites.iter().flat_map(|c| c.reports.iter().chain(c.hab.iter())))
            .collect();
        let mut verdicts = format!("{}\ncondition_id,composite,verdict\n", provenance.comment_line());
        for r in &output.reports {
            let _ = writeln!(verdicts, "{},,{}", r.condition_id, r.verdict.label());
        }
        for comp in &output.composites {
            for r in comp.reports.iter().chain(comp.hab.iter()) {
                let _ = writeln!(verdicts, "{},{},{}", r.condition_id, comp.composite_id, r.verdict.label());
            }
            let _ = writeln!(verdicts, "{0},{0},{1}", comp.composite_id, comp.verdict.label());
        }
        for r in grids {
            let path = dir.join(format!("check_{}.csv", r.condition_id));
            fs::write(&path, condition_csv(r, &provenance)).map_err(|e| io_at(&path, e))?;
        }
        let path = dir.join("check_verdicts.csv");
        return fs::write(&path, verdicts).map_err(|e| io_at(&path, e));
    }
    let doc = CheckDoc {
        provenance,
        output: &output,
    };
    sink.emit("check.json", to_json(&doc)?.as_bytes())
}

fn cf(c: &Common) -> Result<()> {
    let fmt = format(c, &[Format::Csv, Format::Json], "cf")?;
    let s = load(c)?;
    let sink = Sink::new(c);
    let cfg = &s.config;
    let n = s.single_n();
    let reps = cfg.reps as usize;
    check_budget(n, reps, cfg.allow_large)?;
    let scheme = make_block_scheme(n, &cfg.block_rule)?;
    sink.log(&format!("block sums for {reps} paths, n = {n}, ell = {}", scheme.ell));
    let sums = BlockSums::collect(&cfg.family, &scheme, reps, derive_seed(cfg.seed, "block-sums", n), s.exec)?;
    let stats = match analytic_profile(&cfg.family, n as usize) {
        Ok(p) => block_stats(&p, &scheme)?,
        Err(Error::NoAnalyticCovariance(_)) => empirical_block_stats(&sums)?,
        Err(e) => return Err(e),
    };
    let rows = cf_report(&sums, &stats, &cfg.t_grid)?;
    let prov = s.provenance();
    if fmt == Format::Json {
        let doc = json!({ "provenance": prov, "scheme": scheme, "stats": stats, "reps": reps, "rows": rows });
        return sink.emit("cf.json", to_json(&doc)?.as_bytes());
    }
    let mut out = format!(
        "{}\n# n={} ell={} m={} r={} reps={reps}\n",
        prov.comment_line(),
        scheme.n,
        scheme.ell,
        scheme.m,
        scheme.r
    );
    out.push_str(
        "t,re,im,stderr,gap,bound,holds,gap_stderr,full_gap,full_gap_stderr,full_bound,full_holds,\
         product_limit,product_limit_stderr,truncation_gap,truncation_bound,truncation_holds\n",
    );
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.re,
            r.im,
            r.stderr,
            r.gap,
            r.bound,
            r.holds,
            r.gap_stderr,
            r.full_gap,
            r.full_gap_stderr,
            r.full_bound,
            r.full_holds,
            r.product_limit,
            r.product_limit_stderr,
            r.truncation_gap,
            r.truncation_bound,
            r.truncation_holds
        );
    }
    sink.emit("cf.csv", out.as_bytes())
}

#[derive(Serialize)]
struct CltDoc<'a> {
    provenance: Provenance,
    #[serde(flatten)]
    verdict: &'a CltVerdict,
}

fn clt(c: &Common) -> Result<()> {
    format(c, &[Format::Json], "clt")?;
    let s = load(c)?;
    let sink = Sink::new(c);
    let cfg = &s.config;
    let opts = CltOptions {
        alpha: cfg.tolerances.ks_alpha,
        allow_large: cfg.allow_large,
        exec: s.exec,
    };
    sink.log(&format!("CLT run: {} paths of length {}", cfg.reps, s.single_n()));
    let v = run_clt(&cfg.family, s.single_n(), cfg.reps as usize, cfg.seed, cfg.normalizer, opts)?;
    let doc = CltDoc {
        provenance: s.provenance(),
        verdict: &v,
    };
    sink.emit("clt.json", to_json(&doc)?.as_bytes())
}

fn report(c: &Common, theorem: &str) -> Result<()> {
    let fmt = format(c, &[Format::Json, Format::Csv], "report")?;
    let id: TheoremId = theorem.parse()?;
    let s: Setup = load(c)?;
    let sink = Sink::new(c);
    sink.log(&format!("theorem {}", id.name()));
    let mut r = run_theorem(id, &s.config, s.exec)?;
    r.provenance.overrides = s.overrides.clone();
    if fmt == Format::Csv {
        let dir = sink.dir("report --format csv")?;
        for p in write_csv_bundle(&r, dir)? {
            sink.log(&format!("wrote {}", p.display()));
        }
        return Ok(());
    }
    if sink.verbose {
        eprint!("{}", verdict_rows_csv(&r));
    }
    sink.emit(&format!("report_{}.json", id.name()), to_json(&r)?.as_bytes())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Generate(c) => generate(c),
        Command::Analyze(c) => analyze(c),
        Command::Check { common, conditions } => check(common, conditions.as_deref()),
        Command::Cf(c) => cf(c),
        Command::Clt(c) => clt(c),
        Command::Report { common, theorem } => report(common, theorem),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
