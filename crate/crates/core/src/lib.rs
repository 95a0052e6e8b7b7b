//! Comonotone Pareto-optimal risk sharing among agents who measure risk with
//! law-invariant coherent risk measures.
//!
//! Each agent's risk measure is the worst case over a finitely generated
//! convex hull of concave distortion functions. The optimal allocation is
//! found in two stages:
//!
//! 1. [`solver::solve`] maximizes the integral of the pointwise minimum of the
//!    agents' distorted tail probabilities over the product of their
//!    distortion hulls.
//! 2. [`allocation`] reads off the layer sets (which agents are the most
//!    optimistic about each layer of the aggregate risk), integrates marginal
//!    shares into retention functions and picks individually rational side
//!    payments.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command-line front end live in the `riskshare` crate.
#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod allocation;
pub mod choquet;
pub mod distortion;
pub mod distribution;
mod error;
mod lp;
pub mod normal;
pub mod oracle;
pub mod quadrature;
pub mod retention;
pub mod scan;
pub mod solver;
pub mod special;

pub use allocation::{
    balanced_retentions, build_retentions, layer_structure, side_payments, verify, GainSplit, LayerStructure,
    RetentionProfile, SidePayments, TieRule, VerificationReport,
};
pub use choquet::{choquet_integral, coherent_risk, risk_of_retention};
pub use distortion::{concavity_check, DistortionFunction, DistortionSet};
pub use distribution::{Law, RiskDistribution};
pub use error::{Error, Result};
pub use quadrature::QuadratureConfig;
pub use retention::Retention;
pub use solver::{objective, solve, MinMaxProblem, MinMaxSolution, SolverOptions};
