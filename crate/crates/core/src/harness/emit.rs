use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::theorem::{Provenance, TheoremReport};
use crate::blocking::ConditionReport;
use crate::error::{Error, Result};

/// Serialised name of a unit-like enum value.
fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline. Field order is fixed by the types and
/// floats round-trip, so equal reports give byte-identical output.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_json(value)?).map_err(|e| io(path, e))
}

/// One CSV per condition grid: provenance comment, header, one row per point.
pub fn condition_csv(report: &ConditionReport, prov: &Provenance) -> String {
    let mut s = prov.comment_line();
    s.push('\n');
    s.push_str("condition_id,n,lag,value,target,stderr,source\n");
    for v in &report.grid {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            v.condition_id,
            v.n,
            v.lag.map(|l| l.to_string()).unwrap_or_default(),
            v.value,
            v.target,
            opt(v.stderr),
            label(&v.source)
        );
    }
    s
}

/// Verdict table: one row per condition, composite and the CLT outcome.
pub fn verdict_rows_csv(report: &TheoremReport) -> String {
    let mut s = report.provenance.comment_line();
    s.push('\n');
    s.push_str("theorem_id,item,composite,verdict,trend_slope,source\n");
    let th = report.theorem_id.name();
    let mut row = |item: &str, composite: &str, verdict: String, slope: Option<f64>, source: String| {
        let _ = writeln!(s, "{th},{item},{composite},{verdict},{},{source}", opt(slope));
    };
    for r in &report.reports {
        row(&r.condition_id, "", label(&r.verdict), r.trend_slope, label(&r.source));
    }
    for c in &report.composites {
        for r in c.reports.iter().chain(c.hab.iter()) {
            row(&r.condition_id, &c.composite_id, label(&r.verdict), r.trend_slope, label(&r.source));
        }
        row(&c.composite_id, &c.composite_id, label(&c.verdict), None, String::new());
    }
    row("conditions", "", label(&report.conditions_verdict), None, String::new());
    if let Some(c) = &report.clt {
        row("clt", "", if c.pass { "pass" } else { "fail" }.into(), None, "empirical".into());
    }
    row("consistency", "", label(&report.consistency.status), None, String::new());
    s
}

/// Writes `<theorem>_<condition>.csv` for every grid and `<theorem>_verdicts.csv`
/// into `dir`, returning the paths in write order.
pub fn write_csv_bundle(report: &TheoremReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let th = report.theorem_id.name();
    let mut written = Vec::new();
    let grids = report
        .reports
        .iter()
        .chain(report.composites.iter().flat_map(|c| c.reports.iter().chain(c.hab.iter())));
    for r in grids {
        let path = dir.join(format!("{th}_{}.csv", r.condition_id));
        fs::write(&path, condition_csv(r, &report.provenance)).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    let path = dir.join(format!("{th}_verdicts.csv"));
    fs::write(&path, verdict_rows_csv(report)).map_err(|e| io(&path, e))?;
    written.push(path);
    Ok(written)
}
