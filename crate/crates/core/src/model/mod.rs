//! Domain types: families, blocking schemes and experiment configuration.

pub mod block;
pub mod config;
pub mod dist;
pub mod family;
pub mod maps;
pub mod shorthand;

pub use block::{make_block_scheme, BlockRule, BlockScheme};
pub use config::{apply_override, ExperimentConfig, Normalizer, Tolerances};
pub use dist::BaseDist;
pub use family::{Autocov, FamilyKind, FamilySpec, Marginal, Violation};
pub use maps::MonotoneMap;
pub use shorthand::parse_family;

/// Every violated family constraint. Violations are data, never errors.
pub fn validate_family(spec: &FamilySpec) -> Vec<Violation> {
    spec.validate()
}
