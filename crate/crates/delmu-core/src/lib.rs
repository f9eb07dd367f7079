//! Core model and solvers for utility-maximal rate allocation on sliced
//! mm-wave backhaul networks.
//!
//! The crate is `no_std` (with `alloc`) and fully deterministic: every
//! randomised routine takes an explicit seed. It provides:
//!
//! * [`model`] — topologies, demand instances, rate allocations and the
//!   per-node TDMA time constraints;
//! * [`channel`] — MIMO eigen-channel sampling, water-filling power
//!   allocation and link capacity;
//! * [`utility`] — the four per-flow utility families and network totals;
//! * [`baseline`] — the greedy solver and a grid brute-force oracle;
//! * [`globalsearch`] — multistart log-barrier ascent (the labelling
//!   oracle);
//! * [`repair`] — the two-phase feasibility repair pass;
//! * [`nn`] — the convolutional surrogate, trained with Adam to imitate
//!   the global search.
//!
//! IO, file formats, dataset handling and the CLI live in the companion
//! `delmu` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod channel;
pub mod globalsearch;
mod math;
pub mod model;
pub mod nn;
pub mod repair;
pub mod rng;
pub mod utility;

pub use model::{DemandInstance, Direction, RateAllocation, Topology, UsageReport};
pub use utility::{UtilityKind, UtilityParams, UtilitySpec};

use core::fmt;

/// Errors shared by the rate solvers (greedy, brute force, global search,
/// repair).
#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    /// The all-minimum-rate allocation already violates the node time
    /// constraints; no solver can produce a feasible point.
    InfeasibleMinRates,
    /// Brute-force search space exceeds the configured guard.
    SearchSpaceTooLarge { points: u128, limit: u128 },
    /// No grid point satisfies the constraints.
    NoFeasiblePoint,
    /// Allocation/instance dimensions do not match the topology.
    DimensionMismatch,
    /// A solver argument (step, grid, option) is out of range.
    InvalidArgument { what: &'static str },
    /// The objective evaluated to a non-finite value.
    NonFiniteObjective,
    /// A utility evaluation failed (domain error or bad spec).
    Utility(utility::UtilityError),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::InfeasibleMinRates => {
                write!(f, "minimum-rate allocation violates node time constraints")
            }
            SolveError::SearchSpaceTooLarge { points, limit } => {
                write!(f, "brute-force grid has {points} points, limit is {limit}")
            }
            SolveError::NoFeasiblePoint => write!(f, "no feasible grid point"),
            SolveError::DimensionMismatch => write!(f, "dimension mismatch"),
            SolveError::InvalidArgument { what } => write!(f, "invalid argument: {what}"),
            SolveError::NonFiniteObjective => write!(f, "objective is not finite"),
            SolveError::Utility(e) => write!(f, "utility evaluation failed: {e}"),
        }
    }
}

impl core::error::Error for SolveError {}

impl From<utility::UtilityError> for SolveError {
    fn from(e: utility::UtilityError) -> Self {
        SolveError::Utility(e)
    }
}
