//! Run report written as `report.json`. Every float carries 12 significant
//! digits so identical inputs give byte-identical files.

use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Verified,
    VerificationFailed,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Verified => 0,
            Self::VerificationFailed => 2,
            Self::NotConverged => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub status: Status,
    pub aggregate: AggregateSummary,
    pub solver: SolverSummary,
    pub layers: LayerSummary,
    pub agents: Vec<AgentReport>,
    pub totals: Totals,
    pub verification: VerificationSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateSummary {
    pub law: String,
    pub lower: f64,
    pub upper: f64,
    pub span: f64,
    pub truncation_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSummary {
    /// Optimal `∫ min_i T_i*(P(S > s + x)) dx`, excluding `s`.
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_gap: f64,
    pub gap_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSummary {
    pub tie_rule: String,
    /// From 0 to the span of `S`, in units of `S − ess inf S`.
    pub breakpoints: Vec<f64>,
    /// Labels of the optimistic agents on each interval.
    pub sets: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentReport {
    pub label: String,
    /// Optimal mixing weights over the agent's generators.
    pub weights: Vec<f64>,
    /// Marginal share on each layer interval.
    pub slopes: Vec<f64>,
    pub rho_initial: f64,
    /// Risk of the retained layers `g_i(S − s)`.
    pub rho_retained: f64,
    pub side_payment: f64,
    pub rho_final: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Totals {
    pub before: f64,
    pub after: f64,
    /// Solver value plus `ess inf S`.
    pub target: f64,
    pub lower_bound: f64,
    pub total_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationSummary {
    pub passed: bool,
    pub feasibility_residual: f64,
    pub feasible: bool,
    pub comonotone: bool,
    pub layer_residual: f64,
    pub layer_condition: bool,
    pub optimality_residual: f64,
    pub optimal: bool,
    pub individually_rational: Vec<bool>,
}

/// Wall-clock timings, kept out of the report so the report stays
/// reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_ms: f64,
    pub solve_ms: f64,
    pub layers_ms: f64,
    pub allocation_ms: f64,
    pub verify_ms: f64,
    pub total_ms: f64,
}

/// Result of the `oracle` subcommand, written as `oracle.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleReport {
    pub schema_version: u32,
    pub passed: bool,
    pub solver_value: f64,
    pub grid_value: f64,
    pub grid_weights: Vec<Vec<f64>>,
    pub gap: f64,
    pub scale: f64,
    pub tolerance: f64,
    /// Present when every set is a singleton and the instance is small
    /// enough to enumerate layer allocations.
    pub layer_enumeration: Option<LayerEnumerationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEnumerationReport {
    pub allocations: u64,
    pub min_total: f64,
    pub max_total: f64,
    pub closed_form: f64,
    pub min_violating_total: Option<f64>,
    pub matches_closed_form: bool,
}
