//! The S-maup test: how sensitive is a spatially intensive variable to the
//! modifiable areal unit problem (MAUP)?
//!
//! The crate bundles the statistic itself ([`statistic`]) with the simulation
//! machinery used to build and validate it: rook contiguity weights
//! ([`weights`]), SAR random fields and rho estimation ([`sar`]), random
//! contiguous aggregation ([`regionalize`]), classical tests ([`stats`]) and
//! the Monte Carlo harnesses ([`experiments`]).
//!
//! Monte Carlo work fans out over rayon when the `parallel` feature is on
//! (the default). Every experiment derives its random streams from a master
//! seed by position, so results are identical for any worker count.

pub mod error;
pub mod experiments;
pub mod par;
pub mod regionalize;
pub mod sar;
pub mod seeds;
pub mod statistic;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
pub use regionalize::{aggregate_mean, random_regions, AggregatedVariable, Regionalization};
pub use sar::{
    estimate_rho, generate_sar, generate_with_target_rho, rank_permute, AreaVariable, SarSpec,
};
pub use statistic::{
    critical_value, m_statistic, min_safe_k, smaup_test, CriticalValueTable, Level,
    NullDistribution, SafeK, SmaupParams, SmaupResult, TestOptions,
};
pub use weights::SpatialWeights;

/// Toolkit version embedded in every serialized artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
