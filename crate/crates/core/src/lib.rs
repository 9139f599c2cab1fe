//! Stochastic traffic equilibria with late-arrival penalties.
//!
//! Paths carry an expected disutility built from generalized BPR travel times
//! under random arc capacities plus a lateness penalty, either the nonsmooth
//! `max(C − τ, 0)` or its quadratically smoothed counterpart. Equilibria of
//! the sample-average problem are computed by a projected extragradient
//! method; the [`robustness`] module measures how those equilibria respond to
//! contaminated or shifted capacity data.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod disutility;
pub mod equilibrium;
pub mod error;
pub mod instance;
pub mod network;
pub mod report;
pub mod robustness;
pub mod stochastics;

pub use disutility::{Gbpr, PenaltyConfig, PenaltyMode, SaaOperator, ScenarioSet};
pub use equilibrium::{EquilibriumResult, SolverOptions};
pub use error::{Error, Result};
pub use instance::Instance;
pub use network::{IncidenceMatrices, Network};
pub use stochastics::{CapacityModel, EmpiricalDistribution};
