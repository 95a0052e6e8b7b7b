//! Market configuration: a versioned JSON document describing the aggregate
//! risk, the agents and the numerical options.

use std::path::{Path, PathBuf};

use riskshare_core::{
    DistortionFunction, DistortionSet, QuadratureConfig, RiskDistribution, SolverOptions,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
const THETA_TOL: f64 = 1e-9;
const JOINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub schema_version: u32,
    pub aggregate: AggregateSpec,
    #[serde(default)]
    pub truncation_mass: Option<f64>,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub tie_rule: TieRuleSpec,
    #[serde(default)]
    pub gain_split: GainSplitSpec,
    #[serde(default)]
    pub layers: LayerSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AggregateSpec {
    Gamma { shape: f64, scale: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Either inline `samples` or a CSV `path` with a named `column`.
    Empirical {
        #[serde(default)]
        samples: Option<Vec<f64>>,
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default)]
        column: Option<String>,
    },
    Discrete { atoms: Vec<f64>, probabilities: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub label: String,
    pub distortions: Vec<DistortionSpec>,
    pub initial_position: InitialPosition,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistortionSpec {
    Es { alpha: f64 },
    Power { alpha: f64, exponent: f64 },
    Wang { shift: f64 },
    Identity,
    Piecewise { knots: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialPosition {
    /// `X_i = θ_i S`.
    Proportional { theta: f64 },
    Precomputed { rho_x: f64 },
    /// Column of a joint sample matrix whose rows sum to the aggregate.
    EmpiricalColumn { path: PathBuf, column: String },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub gap_tol: f64,
    pub max_iters: usize,
    pub inner_grid: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            gap_tol: o.gap_tol,
            max_iters: o.max_iters,
            inner_grid: o.inner_grid,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        Self {
            abs_tol: q.abs_tol,
            rel_tol: q.rel_tol,
            max_subdivisions: q.max_subdivisions,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRuleSpec {
    Lowest,
    #[default]
    Equal,
    Balanced,
}

impl TieRuleSpec {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lowest => "lowest",
            Self::Equal => "equal",
            Self::Balanced => "balanced",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GainSplitSpec {
    #[default]
    Equal,
    Weighted(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayerSpec {
    pub tie_tol: f64,
    pub scan_grid: usize,
}

impl Default for LayerSpec {
    fn default() -> Self {
        Self {
            tie_tol: riskshare_core::allocation::DEFAULT_TIE_TOL,
            scan_grid: riskshare_core::allocation::DEFAULT_SCAN_GRID,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub out_dir: PathBuf,
    /// Points on the uniform grid of the figure data files.
    pub curve_points: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            curve_points: 1001,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSpec {
    pub weight_grid_step: f64,
    pub share_grid: usize,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            weight_grid_step: riskshare_core::oracle::DEFAULT_WEIGHT_GRID_STEP,
            share_grid: riskshare_core::oracle::MAX_SHARE_GRID,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub gap_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub tie_rule: Option<TieRuleSpec>,
    pub grid: Option<usize>,
    pub truncation_mass: Option<f64>,
}

/// How each agent's stand-alone risk is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Endowment {
    Proportional(f64),
    Precomputed(f64),
    Samples(Vec<f64>),
}

/// A validated configuration with every input resolved.
#[derive(Debug, Clone)]
pub struct Market {
    pub spec: MarketConfig,
    pub dist: RiskDistribution,
    pub sets: Vec<DistortionSet>,
    pub endowments: Vec<Endowment>,
    pub quad: QuadratureConfig,
    pub solver: SolverOptions,
}

impl Market {
    pub fn labels(&self) -> Vec<String> {
        self.spec.agents.iter().map(|a| a.label.clone()).collect()
    }
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Reads, parses and validates a config file. Relative paths inside it are
/// resolved against the file's directory.
pub fn load(path: &Path, overrides: &Overrides) -> Result<Market, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let spec: MarketConfig = serde_json::from_str(&text).map_err(|e| CliError::Schema {
        path: path.to_path_buf(),
        source: e,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    build(spec, base, overrides)
}

pub fn build(mut spec: MarketConfig, base: &Path, overrides: &Overrides) -> Result<Market, CliError> {
    apply(&mut spec, overrides);
    if spec.schema_version != SCHEMA_VERSION {
        return Err(invalid(
            "schema_version",
            format!("expected {SCHEMA_VERSION}, found {}", spec.schema_version),
        ));
    }
    if spec.agents.is_empty() {
        return Err(invalid("agents", "at least one agent is required"));
    }

    let (mut dist, ordered_samples) = aggregate(&spec.aggregate, base)?;
    if let Some(mass) = spec.truncation_mass {
        dist = dist
            .with_truncation_mass(mass)
            .map_err(|e| invalid("truncation_mass", e.to_string()))?;
    }

    let mut sets = Vec::with_capacity(spec.agents.len());
    for (i, a) in spec.agents.iter().enumerate() {
        let gens = a
            .distortions
            .iter()
            .enumerate()
            .map(|(k, d)| {
                distortion(d).map_err(|e| {
                    invalid(format!("agents[{i}].distortions[{k}]"), e.to_string())
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let set = DistortionSet::new(a.label.clone(), gens)
            .map_err(|e| invalid(format!("agents[{i}].distortions"), e.to_string()))?;
        sets.push(set);
    }

    let endowments = endowments(&spec, base, ordered_samples.as_deref())?;

    let quad = QuadratureConfig {
        abs_tol: spec.quadrature.abs_tol,
        rel_tol: spec.quadrature.rel_tol,
        max_subdivisions: spec.quadrature.max_subdivisions,
    };
    quad.validate()
        .map_err(|e| invalid("quadrature", e.to_string()))?;
    let solver = SolverOptions {
        gap_tol: spec.solver.gap_tol,
        max_iters: spec.solver.max_iters,
        inner_grid: spec.solver.inner_grid,
    };
    if !(solver.gap_tol > 0.0) {
        return Err(invalid("solver.gap_tol", "must be positive"));
    }
    if solver.inner_grid < 1 {
        return Err(invalid("solver.inner_grid", "must be at least 1"));
    }
    if spec.layers.scan_grid < 64 {
        return Err(invalid("layers.scan_grid", "must be at least 64"));
    }
    if !(spec.layers.tie_tol >= 0.0) {
        return Err(invalid("layers.tie_tol", "must be non-negative"));
    }
    if spec.output.curve_points < 2 {
        return Err(invalid("output.curve_points", "must be at least 2"));
    }
    if let GainSplitSpec::Weighted(w) = &spec.gain_split {
        if w.len() != spec.agents.len() {
            return Err(invalid("gain_split", "one weight per agent is required"));
        }
    }
    Ok(Market {
        spec,
        dist,
        sets,
        endowments,
        quad,
        solver,
    })
}

fn apply(spec: &mut MarketConfig, o: &Overrides) {
    if let Some(d) = &o.out_dir {
        spec.output.out_dir = d.clone();
    }
    if let Some(v) = o.gap_tol {
        spec.solver.gap_tol = v;
    }
    if let Some(v) = o.abs_tol {
        spec.quadrature.abs_tol = v;
    }
    if let Some(v) = o.rel_tol {
        spec.quadrature.rel_tol = v;
    }
    if let Some(v) = o.tie_rule {
        spec.tie_rule = v;
    }
    if let Some(v) = o.grid {
        spec.output.curve_points = v;
    }
    if let Some(v) = o.truncation_mass {
        spec.truncation_mass = Some(v);
    }
}

fn distortion(d: &DistortionSpec) -> riskshare_core::Result<DistortionFunction> {
    match d {
        DistortionSpec::Es { alpha } => DistortionFunction::expected_shortfall(*alpha),
        DistortionSpec::Power { alpha, exponent } => DistortionFunction::power_tail(*alpha, *exponent),
        DistortionSpec::Wang { shift } => DistortionFunction::wang(*shift),
        DistortionSpec::Identity => Ok(DistortionFunction::Identity),
        DistortionSpec::Piecewise { knots, values } => {
            DistortionFunction::piecewise_linear(knots.clone(), values.clone())
        }
    }
}

// The aggregate law, plus its samples in file order when empirical.
fn aggregate(
    spec: &AggregateSpec,
    base: &Path,
) -> Result<(RiskDistribution, Option<Vec<f64>>), CliError> {
    let law = |r: riskshare_core::Result<RiskDistribution>| {
        r.map_err(|e| invalid("aggregate", e.to_string()))
    };
    Ok(match spec {
        AggregateSpec::Gamma { shape, scale } => (law(RiskDistribution::gamma(*shape, *scale))?, None),
        AggregateSpec::Lognormal { mu, sigma } => {
            (law(RiskDistribution::lognormal(*mu, *sigma))?, None)
        }
        AggregateSpec::Uniform { lo, hi } => (law(RiskDistribution::uniform(*lo, *hi))?, None),
        AggregateSpec::Discrete {
            atoms,
            probabilities,
        } => (
            law(RiskDistribution::discrete(atoms.clone(), probabilities.clone()))?,
            None,
        ),
        AggregateSpec::Empirical {
            samples,
            path,
            column,
        } => {
            let samples = match (samples, path, column) {
                (Some(s), None, None) => s.clone(),
                (None, Some(p), Some(c)) => read_column(&base.join(p), c)?,
                _ => {
                    return Err(invalid(
                        "aggregate",
                        "empirical needs either `samples` or both `path` and `column`",
                    ))
                }
            };
            (law(RiskDistribution::empirical(samples.clone()))?, Some(samples))
        }
    })
}

fn endowments(
    spec: &MarketConfig,
    base: &Path,
    aggregate_samples: Option<&[f64]>,
) -> Result<Vec<Endowment>, CliError> {
    let mut out = Vec::with_capacity(spec.agents.len());
    for (i, a) in spec.agents.iter().enumerate() {
        let field = format!("agents[{i}].initial_position");
        out.push(match &a.initial_position {
            InitialPosition::Proportional { theta } => {
                if !(*theta >= 0.0) {
                    return Err(invalid(format!("{field}.theta"), "must be non-negative"));
                }
                Endowment::Proportional(*theta)
            }
            InitialPosition::Precomputed { rho_x } => {
                if !rho_x.is_finite() {
                    return Err(invalid(format!("{field}.rho_x"), "must be finite"));
                }
                Endowment::Precomputed(*rho_x)
            }
            InitialPosition::EmpiricalColumn { path, column } => {
                Endowment::Samples(read_column(&base.join(path), column)?)
            }
        });
    }

    let thetas: Vec<f64> = out
        .iter()
        .filter_map(|e| match e {
            Endowment::Proportional(t) => Some(*t),
            _ => None,
        })
        .collect();
    if thetas.len() == out.len() {
        let total: f64 = thetas.iter().sum();
        if (total - 1.0).abs() > THETA_TOL {
            return Err(invalid(
                "agents[].initial_position.theta",
                format!("shares sum to {total}, not 1"),
            ));
        }
    } else if !thetas.is_empty() && thetas.iter().sum::<f64>() > 1.0 + THETA_TOL {
        return Err(invalid(
            "agents[].initial_position.theta",
            "proportional shares exceed 1",
        ));
    }

    let columns: Vec<&Vec<f64>> = out
        .iter()
        .filter_map(|e| match e {
            Endowment::Samples(s) => Some(s),
            _ => None,
        })
        .collect();
    if !columns.is_empty() {
        if columns.len() != out.len() {
            return Err(invalid(
                "agents[].initial_position",
                "empirical columns must be given for every agent or for none",
            ));
        }
        let Some(total) = aggregate_samples else {
            return Err(invalid(
                "aggregate",
                "empirical columns need an empirical aggregate",
            ));
        };
        for (i, c) in columns.iter().enumerate() {
            if c.len() != total.len() {
                return Err(invalid(
                    format!("agents[{i}].initial_position"),
                    format!("{} rows, aggregate has {}", c.len(), total.len()),
                ));
            }
        }
        for (r, s) in total.iter().enumerate() {
            let row: f64 = columns.iter().map(|c| c[r]).sum();
            if (row - s).abs() > JOINT_TOL * s.abs().max(1.0) {
                return Err(invalid(
                    "agents[].initial_position",
                    format!("row {r} sums to {row}, aggregate sample is {s}"),
                ));
            }
        }
    }
    Ok(out)
}

/// A numeric column of a headed CSV file.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let headers = reader.headers().map_err(|e| CliError::csv(path, e))?.clone();
    let idx = headers.iter().position(|h| h.trim() == column).ok_or_else(|| {
        invalid(
            format!("{}:{column}", path.display()),
            "column not found in header",
        )
    })?;
    let mut values = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        let cell = rec.get(idx).unwrap_or("").trim();
        let v: f64 = cell.parse().map_err(|_| {
            invalid(
                format!("{}:{column}", path.display()),
                format!("row {} is not a number: {cell:?}", r + 1),
            )
        })?;
        values.push(v);
    }
    Ok(values)
}
