//! solve → layers → retentions → side payments → verify.

use std::time::Instant;

use riskshare_core::oracle::{
    brute_force_layer_allocations, brute_force_minmax, DiscreteInstance, MAX_SLOPE_CHOICES,
};
use riskshare_core::{
    balanced_retentions, build_retentions, coherent_risk, layer_structure, side_payments, solve,
    verify, GainSplit, Law, LayerStructure, MinMaxProblem, MinMaxSolution, RetentionProfile,
    RiskDistribution, TieRule, VerificationReport,
};

use crate::config::{Endowment, GainSplitSpec, Market, TieRuleSpec};
use crate::error::CliError;
use crate::format::{sig12, sig12_vec};
use crate::report::*;

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub problem: MinMaxProblem,
    pub solution: MinMaxSolution,
    pub layers: LayerStructure,
    pub profile: RetentionProfile,
    pub verification: VerificationReport,
    pub report: RunReport,
    pub timings: Timings,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Stand-alone risk `ρ_i(X_i)` of every agent.
pub fn initial_risks(market: &Market) -> Result<Vec<f64>, CliError> {
    market
        .sets
        .iter()
        .zip(&market.endowments)
        .map(|(set, e)| {
            Ok(match e {
                Endowment::Proportional(theta) => {
                    theta * coherent_risk(&market.dist, set, &market.quad)?.0
                }
                Endowment::Precomputed(rho) => *rho,
                Endowment::Samples(s) => {
                    let d = RiskDistribution::empirical(s.clone())?;
                    coherent_risk(&d, set, &market.quad)?.0
                }
            })
        })
        .collect()
}

pub fn run(market: &Market) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let mut timings = Timings::default();

    let problem = MinMaxProblem::new(market.dist.clone(), market.sets.clone(), market.quad)?;
    let initial = initial_risks(market)?;
    timings.setup_ms = ms(start);

    let t = Instant::now();
    let solution = solve(&problem, &market.solver)?;
    timings.solve_ms = ms(t);

    let t = Instant::now();
    let layers = layer_structure(
        &solution,
        problem.dist(),
        market.spec.layers.tie_tol,
        market.spec.layers.scan_grid,
    )?;
    timings.layers_ms = ms(t);

    let t = Instant::now();
    let base = match market.spec.tie_rule {
        TieRuleSpec::Lowest => build_retentions(&layers, &TieRule::LowestIndex)?,
        TieRuleSpec::Equal => build_retentions(&layers, &TieRule::EqualSplit)?,
        TieRuleSpec::Balanced => balanced_retentions(&layers, &problem, &solution)?,
    };
    let split = match &market.spec.gain_split {
        GainSplitSpec::Equal => GainSplit::Equal,
        GainSplitSpec::Weighted(w) => GainSplit::Weighted(w.clone()),
    };
    let payments = side_payments(&base, &problem, &initial, &split)?;
    let mut profile = base.with_side_payments(payments.c.clone());
    profile.s_lower = problem.lower_bound();
    timings.allocation_ms = ms(t);

    let t = Instant::now();
    let verification = verify(&profile, &problem, &solution, &initial)?;
    timings.verify_ms = ms(t);
    timings.total_ms = ms(start);

    let status = if !solution.convergence.converged {
        Status::NotConverged
    } else if verification.passed() {
        Status::Verified
    } else {
        Status::VerificationFailed
    };
    let labels = market.labels();
    let (lo, hi) = problem.dist().essential_bounds();
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        status,
        aggregate: AggregateSummary {
            law: law_name(problem.dist().law()).into(),
            lower: sig12(lo),
            upper: sig12(hi),
            span: sig12(hi - lo),
            truncation_mass: sig12(problem.dist().truncation_mass()),
        },
        solver: SolverSummary {
            value: sig12(solution.value),
            converged: solution.convergence.converged,
            iterations: solution.convergence.iterations,
            final_gap: sig12(solution.convergence.final_gap),
            gap_tol: sig12(market.solver.gap_tol),
        },
        layers: LayerSummary {
            tie_rule: market.spec.tie_rule.name().into(),
            breakpoints: sig12_vec(&layers.breakpoints),
            sets: layers
                .sets
                .iter()
                .map(|l| l.iter().map(|i| labels[*i].clone()).collect())
                .collect(),
        },
        agents: (0..labels.len())
            .map(|i| AgentReport {
                label: labels[i].clone(),
                weights: sig12_vec(&solution.weights[i]),
                slopes: sig12_vec(&profile.slopes[i]),
                rho_initial: sig12(initial[i]),
                rho_retained: sig12(payments.retained_risks[i]),
                side_payment: sig12(payments.c[i]),
                rho_final: sig12(verification.risks_after[i]),
                gain: sig12(payments.gains[i]),
            })
            .collect(),
        totals: Totals {
            before: sig12(initial.iter().sum()),
            after: sig12(verification.total_after),
            target: sig12(verification.target),
            lower_bound: sig12(lo),
            total_gain: sig12(payments.total_gain),
        },
        verification: VerificationSummary {
            passed: verification.passed(),
            feasibility_residual: sig12(verification.feasibility_residual),
            feasible: verification.feasible,
            comonotone: verification.comonotone,
            layer_residual: sig12(verification.layer_residual),
            layer_condition: verification.layer_condition,
            optimality_residual: sig12(verification.optimality_residual),
            optimal: verification.optimal,
            individually_rational: verification.individually_rational.clone(),
        },
    };
    Ok(Outcome {
        problem,
        solution,
        layers,
        profile,
        verification,
        report,
        timings,
    })
}

fn law_name(law: &Law) -> &'static str {
    match law {
        Law::Gamma { .. } => "gamma",
        Law::Lognormal { .. } => "lognormal",
        Law::Uniform { .. } => "uniform",
        Law::Empirical { .. } => "empirical",
        Law::Discrete { .. } => "discrete",
    }
}

/// Agreement tolerance of the oracle check, relative to the span of `S`.
pub const ORACLE_TOL: f64 = 2e-3;

/// Solver against the brute-force grid on a small discrete market.
pub fn oracle_check(market: &Market) -> Result<OracleReport, CliError> {
    let inst = DiscreteInstance::new(
        market.dist.clone(),
        market.sets.clone(),
        market.spec.oracle.weight_grid_step,
    )?;
    let problem = MinMaxProblem::new(market.dist.clone(), market.sets.clone(), market.quad)?;
    let solution = solve(&problem, &market.solver)?;
    let (grid_value, grid_weights) = brute_force_minmax(&inst)?;
    let scale = problem.scale();
    let gap = (solution.value - grid_value).abs();
    let gaps = market.dist.atoms().map_or(0, |a| a.values.len() - 1);
    let layer_enumeration = if market.sets.iter().all(|s| s.len() == 1)
        && market.sets.len() * gaps <= MAX_SLOPE_CHOICES
    {
        match brute_force_layer_allocations(&inst, market.spec.oracle.share_grid) {
            Ok(e) => Some(LayerEnumerationReport {
                allocations: e.count,
                min_total: sig12(e.min_total),
                max_total: sig12(e.max_total),
                closed_form: sig12(e.closed_form),
                min_violating_total: e.min_violating_total.map(sig12),
                matches_closed_form: (e.min_total - e.closed_form).abs() <= 1e-12,
            }),
            Err(riskshare_core::Error::InstanceTooLarge(_)) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let passed = gap <= ORACLE_TOL * scale
        && layer_enumeration
            .as_ref()
            .is_none_or(|e| e.matches_closed_form);
    Ok(OracleReport {
        schema_version: REPORT_SCHEMA_VERSION,
        passed,
        solver_value: sig12(solution.value),
        grid_value: sig12(grid_value),
        grid_weights: grid_weights.iter().map(|w| sig12_vec(w)).collect(),
        gap: sig12(gap),
        scale: sig12(scale),
        tolerance: sig12(ORACLE_TOL * scale),
        layer_enumeration,
    })
}
