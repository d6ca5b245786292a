//! Monte Carlo normality runs, theorem-level reports and their emission.

mod clt;
mod emit;
mod ks;
mod theorem;

pub use clt::{check_budget, run_clt, CltOptions, CltVerdict, SampleSummary, MIN_CLT_REPS};
pub use emit::{condition_csv, to_json, verdict_rows_csv, write_csv_bundle, write_json};
pub use ks::{ks_critical, ks_distance};
pub use theorem::{
    clt_n, run_theorem, run_theorem_default, Consistency, ConsistencyStatus, Failure, GapSummary, HabPoint,
    Provenance, TheoremId, TheoremReport, REPORT_SCHEMA_VERSION, TOOL_NAME,
};
