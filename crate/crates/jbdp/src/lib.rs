//! Files, experiments and reports around [`jbdp_core`].
//!
//! The `jbdp` binary wraps this crate with `generate`, `solve`, `analyze` and
//! `experiment` subcommands.

pub mod error;
pub mod experiment;
pub mod format;
pub mod report;

pub use error::{Error, Result};
pub use experiment::{
    analyze_single, run_experiment, ExperimentSpec, InitMode, Scenario, SingleAnalysis,
};
pub use report::Row;

use jbdp_core::Partition;

/// Parses `"3,3,3"` into a partition.
pub fn parse_tau(s: &str) -> Result<Partition> {
    let sizes = parse_list::<usize>(s)?;
    Ok(Partition::new(sizes)?)
}

/// Parses a comma-separated list of values.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<T>()
                .map_err(|_| Error::Invalid(format!("cannot parse {p:?} in list {s:?}")))
        })
        .collect()
}
