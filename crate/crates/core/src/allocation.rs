//! From an optimal distortion vector to a comonotone Pareto-optimal
//! allocation `Y_i = g_i(S − s) + c_i`.
//!
//! Layer `x` of the aggregate risk (the event `S > s + x`) is absorbed by the
//! agents whose optimal distortion assigns it the smallest probability. The
//! retention `g_i` grows with the marginal share `h_i` that agent `i` takes
//! of each layer, and the constants `c_i` are side payments making every
//! agent at least as well off as under the status quo.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::choquet::{distorted_retention, risk_of_retention};
use crate::distortion::DistortionFunction;
use crate::distribution::RiskDistribution;
use crate::error::{Error, Result};
use crate::retention::Retention;
use crate::scan::locate_changes;
use crate::solver::{MinMaxProblem, MinMaxSolution};

pub const DEFAULT_TIE_TOL: f64 = 1e-9;
pub const DEFAULT_SCAN_GRID: usize = 4096;
/// Intervals shorter than this fraction of the span are merged away.
const MIN_INTERVAL: f64 = 1e-8;
const FEASIBILITY_GRID: usize = 10_001;
const FEASIBILITY_TOL: f64 = 1e-9;
const L_CONDITION_TOL: f64 = 1e-9;
const OPTIMALITY_REL_TOL: f64 = 1e-5;
const IR_TOL: f64 = 1e-9;
const INFEASIBILITY_TOL: f64 = 1e-6;

/// Agents attaining the smallest distorted tail probability.
///
/// `survival = P(S > y)` and `cdf = P(S ≤ y)` are passed separately so the
/// comparison can be made on whichever side is resolved in floating point:
/// distorted values at most 1/2 are compared directly, larger ones through
/// their complements `1 − T(P(S > y))`. Agent `i` ties with the minimum when
/// it is within `tie_tol` of it, relative to the compared magnitude.
pub fn optimistic_agents(
    distortions: &[DistortionFunction],
    survival: f64,
    cdf: f64,
    tie_tol: f64,
) -> Vec<usize> {
    let values: Vec<f64> = distortions.iter().map(|t| t.value(survival)).collect();
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    if vmin <= 0.5 {
        return (0..values.len())
            .filter(|i| values[*i] - vmin <= tie_tol * vmin)
            .collect();
    }
    let comps: Vec<f64> = distortions.iter().map(|t| t.complement(cdf)).collect();
    let cmax = comps.iter().copied().fold(0.0, f64::max);
    (0..comps.len())
        .filter(|i| cmax - comps[*i] <= tie_tol * cmax)
        .collect()
}

/// Intervals of `[0, span]` with the set `L` of optimistic agents on each.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStructure {
    /// `intervals + 1` increasing points from 0 to the span.
    pub breakpoints: Vec<f64>,
    /// Optimistic agents per interval (0-based, ascending).
    pub sets: Vec<Vec<usize>>,
    pub n_agents: usize,
    pub tie_tol: f64,
}

impl LayerStructure {
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, &[usize])> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.sets)
            .map(|(w, l)| (w[0], w[1], l.as_slice()))
    }

    /// Interior breakpoints, where the optimistic set changes.
    pub fn switches(&self) -> &[f64] {
        let n = self.breakpoints.len();
        if n <= 2 {
            &[]
        } else {
            &self.breakpoints[1..n - 1]
        }
    }
}

/// Splits `[0, ess sup S − ess inf S]` into intervals of constant
/// optimistic set for the solution's distortions.
///
/// Continuous laws are scanned on `scan_grid` uniform cells, boundaries are
/// bisected to `1e-8 · span` and intervals shorter than that are merged into
/// their neighbours. Discrete laws are handled exactly gap by gap.
pub fn layer_structure(
    solution: &MinMaxSolution,
    dist: &RiskDistribution,
    tie_tol: f64,
    scan_grid: usize,
) -> Result<LayerStructure> {
    if scan_grid < 64 {
        return Err(Error::InvalidProblem(format!(
            "scan_grid must be at least 64, got {scan_grid}"
        )));
    }
    if !(tie_tol >= 0.0) {
        return Err(Error::InvalidProblem(format!(
            "tie_tol must be non-negative, got {tie_tol}"
        )));
    }
    let ts = &solution.optimal_distortions;
    let n = ts.len();
    let (lo, hi) = dist.essential_bounds();
    let span = hi - lo;
    let everyone: Vec<usize> = (0..n).collect();
    if !(span > 0.0) {
        return Ok(LayerStructure {
            breakpoints: vec![0.0, 0.0],
            sets: vec![everyone],
            n_agents: n,
            tie_tol,
        });
    }

    let (breakpoints, sets) = if let Some(atoms) = dist.atoms() {
        let v = &atoms.values;
        let mut bps = vec![0.0];
        let mut sets: Vec<Vec<usize>> = Vec::new();
        for j in 0..v.len() - 1 {
            let l = optimistic_agents(ts, atoms.tail[j], atoms.head[j], tie_tol);
            if sets.last() == Some(&l) {
                *bps.last_mut().unwrap() = v[j + 1] - lo;
            } else {
                sets.push(l);
                bps.push(v[j + 1] - lo);
            }
        }
        (bps, sets)
    } else {
        let key = |x: f64| {
            let (u, p) = dist.tails(lo + x);
            optimistic_agents(ts, p, u, tie_tol)
        };
        let min_len = MIN_INTERVAL * span;
        let mut bps = vec![0.0];
        for b in locate_changes(key, 0.0, span, scan_grid, min_len) {
            if b - bps.last().unwrap() >= min_len && span - b >= min_len {
                bps.push(b);
            }
        }
        bps.push(span);
        let mut merged_bps = vec![0.0];
        let mut sets: Vec<Vec<usize>> = Vec::new();
        for w in bps.windows(2) {
            let l = key(0.5 * (w[0] + w[1]));
            if sets.last() == Some(&l) {
                *merged_bps.last_mut().unwrap() = w[1];
            } else {
                sets.push(l);
                merged_bps.push(w[1]);
            }
        }
        (merged_bps, sets)
    };
    Ok(LayerStructure {
        breakpoints,
        sets,
        n_agents: n,
        tie_tol,
    })
}

/// How a layer shared by several optimistic agents is split.
#[derive(Debug, Clone, PartialEq)]
pub enum TieRule {
    /// The whole layer goes to the smallest index.
    LowestIndex,
    /// Equal shares.
    EqualSplit,
    /// Shares proportional to a weight vector over all agents, renormalized
    /// on each optimistic set.
    WeightVector(Vec<f64>),
}

/// Retention functions `g_i` on a common set of breakpoints plus side
/// payments `c_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RetentionProfile {
    pub breakpoints: Vec<f64>,
    /// `slopes[i][j]`: marginal share of agent `i` on interval `j`.
    pub slopes: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub s_lower: f64,
}

impl RetentionProfile {
    pub fn n_agents(&self) -> usize {
        self.slopes.len()
    }

    pub fn retention(&self, i: usize) -> Result<Retention> {
        Retention::new(self.breakpoints.clone(), self.slopes[i].clone())
    }

    /// `g_i(x)`.
    pub fn g(&self, i: usize, x: f64) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.slopes[i])
            .take_while(|(w, _)| w[0] < x)
            .map(|(w, s)| s * (x.min(w[1]) - w[0]))
            .sum()
    }

    pub fn with_side_payments(mut self, c: Vec<f64>) -> Self {
        self.c = c;
        self
    }
}

/// Integrates marginal shares over the layer structure. Side payments are
/// left at zero.
pub fn build_retentions(layers: &LayerStructure, tie_rule: &TieRule) -> Result<RetentionProfile> {
    let n = layers.n_agents;
    if let TieRule::WeightVector(w) = tie_rule {
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: w.len(),
            });
        }
        crate::distortion::check_simplex(w)?;
    }
    let mut slopes = vec![Vec::with_capacity(layers.sets.len()); n];
    for l in &layers.sets {
        let mut share = vec![0.0; n];
        match tie_rule {
            TieRule::LowestIndex => share[l[0]] = 1.0,
            TieRule::EqualSplit => l.iter().for_each(|i| share[*i] = 1.0 / l.len() as f64),
            TieRule::WeightVector(w) => {
                let total: f64 = l.iter().map(|i| w[*i].max(0.0)).sum();
                if !(total > 0.0) {
                    return Err(Error::OffSimplex {
                        reason: "weight vector puts no mass on an optimistic set",
                    });
                }
                l.iter().for_each(|i| share[*i] = w[*i].max(0.0) / total);
            }
        }
        for i in 0..n {
            slopes[i].push(share[i]);
        }
    }
    Ok(RetentionProfile {
        breakpoints: layers.breakpoints.clone(),
        slopes,
        c: vec![0.0; n],
        s_lower: 0.0,
    })
}

/// Retentions whose shares on intervals with several optimistic agents are
/// chosen so that each agent's optimal distortion is, as nearly as
/// possible, a worst case for that agent's own retention.
///
/// Solves a small linear program minimizing the largest excess
/// `∫ T_k dg_i − ∫ T_i* dg_i` over agents `i` and generators `k`. Intervals
/// with a single optimistic agent are assigned as usual. On discrete laws
/// the optimal distortions typically tie on whole atom gaps, and a fixed
/// tie rule then leaves the total risk above the optimum.
pub fn balanced_retentions(
    layers: &LayerStructure,
    problem: &MinMaxProblem,
    solution: &MinMaxSolution,
) -> Result<RetentionProfile> {
    let mut profile = build_retentions(layers, &TieRule::EqualSplit)?;
    let n = layers.n_agents;
    if n != problem.n_agents() || solution.optimal_distortions.len() != n {
        return Err(Error::DimensionMismatch {
            expected: problem.n_agents(),
            found: n,
        });
    }
    let tied: Vec<usize> = (0..layers.sets.len())
        .filter(|j| layers.sets[*j].len() > 1)
        .collect();
    if tied.is_empty() {
        return Ok(profile);
    }
    let (dist, quad) = (problem.dist(), problem.quad());
    let scale = problem.scale();
    // excess[i][k][j] = ∫ over interval j of (T_ik − T_i*)(P(S > s + x)) dx
    let mut excess: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
    for i in 0..n {
        let gens = problem.sets()[i].generators();
        let mut per_gen = vec![vec![0.0; layers.sets.len()]; gens.len()];
        if gens.len() > 1 {
            for j in 0..layers.sets.len() {
                let (a, b) = (layers.breakpoints[j], layers.breakpoints[j + 1]);
                if !(b > a) || !layers.sets[j].contains(&i) {
                    continue;
                }
                let piece = Retention::new(vec![0.0, a, b], vec![0.0, 1.0])?;
                let mix = distorted_retention(dist, &piece, &solution.optimal_distortions[i], quad)?;
                for (k, t) in gens.iter().enumerate() {
                    per_gen[k][j] = (distorted_retention(dist, &piece, t, quad)? - mix) / scale;
                }
            }
        }
        excess.push(per_gen);
    }

    // variables: one share per (tied interval, member), then the bound
    let mut index = Vec::new();
    for &j in &tied {
        for &i in &layers.sets[j] {
            index.push((j, i));
        }
    }
    let nv = index.len() + 1;
    let mut c = vec![0.0; nv];
    c[nv - 1] = 1.0;
    let mut a_eq = Vec::new();
    let mut b_eq = Vec::new();
    for &j in &tied {
        let mut row = vec![0.0; nv];
        for (v, (jj, _)) in index.iter().enumerate() {
            if *jj == j {
                row[v] = 1.0;
            }
        }
        a_eq.push(row);
        b_eq.push(1.0);
    }
    let mut a_ub = Vec::new();
    let mut b_ub = Vec::new();
    for i in 0..n {
        for per_interval in excess[i].iter().filter(|_| excess[i].len() > 1) {
            let mut row = vec![0.0; nv];
            for (v, (j, owner)) in index.iter().enumerate() {
                if *owner == i {
                    row[v] = per_interval[*j];
                }
            }
            row[nv - 1] = -1.0;
            let fixed: f64 = (0..layers.sets.len())
                .filter(|j| layers.sets[*j] == [i])
                .map(|j| per_interval[j])
                .sum();
            a_ub.push(row);
            b_ub.push(-fixed);
        }
    }
    let x = crate::lp::minimize(&c, &a_eq, &b_eq, &a_ub, &b_ub).ok_or_else(|| {
        Error::InvalidProblem("tie balancing linear program did not solve".into())
    })?;
    for &j in &tied {
        let members: Vec<(usize, f64)> = index
            .iter()
            .zip(&x)
            .filter(|((jj, _), _)| *jj == j)
            .map(|((_, i), h)| (*i, h.max(0.0)))
            .collect();
        let total: f64 = members.iter().map(|(_, h)| h).sum();
        for (i, h) in members {
            profile.slopes[i][j] = h / total;
        }
    }
    Ok(profile)
}

/// How the aggregate welfare gain is shared among agents.
#[derive(Debug, Clone, PartialEq)]
pub enum GainSplit {
    Equal,
    Weighted(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidePayments {
    pub c: Vec<f64>,
    /// `ρ_i(g_i(S − s))`.
    pub retained_risks: Vec<f64>,
    pub gains: Vec<f64>,
    /// `Σ ρ_i(X_i) − Σ ρ_i(g_i(S − s)) − s`.
    pub total_gain: f64,
}

/// Constants `c_i` with `Σ c_i = s` that make `g_i(S − s) + c_i`
/// individually rational, each agent gaining its share of the total.
///
/// Agent `i` ends at `ρ_i(X_i) − gain_i`, with `gain_i = Δ / n` under
/// [`GainSplit::Equal`].
pub fn side_payments(
    profile: &RetentionProfile,
    problem: &MinMaxProblem,
    initial_risks: &[f64],
    split: &GainSplit,
) -> Result<SidePayments> {
    let n = problem.n_agents();
    if initial_risks.len() != n || profile.n_agents() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: initial_risks.len().min(profile.n_agents()),
        });
    }
    let shares: Vec<f64> = match split {
        GainSplit::Equal => vec![1.0 / n as f64; n],
        GainSplit::Weighted(w) => {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: w.len(),
                });
            }
            crate::distortion::check_simplex(w)?;
            w.clone()
        }
    };
    let retained = retained_risks(profile, problem)?;
    let s = problem.lower_bound();
    let total_gain: f64 =
        initial_risks.iter().sum::<f64>() - retained.iter().sum::<f64>() - s;
    if total_gain < -INFEASIBILITY_TOL * problem.scale() {
        return Err(Error::Infeasible { slack: total_gain });
    }
    let gains: Vec<f64> = shares.iter().map(|w| w * total_gain).collect();
    let c = (0..n)
        .map(|i| initial_risks[i] - retained[i] - gains[i])
        .collect();
    Ok(SidePayments {
        c,
        retained_risks: retained,
        gains,
        total_gain,
    })
}

fn retained_risks(profile: &RetentionProfile, problem: &MinMaxProblem) -> Result<Vec<f64>> {
    (0..problem.n_agents())
        .map(|i| {
            risk_of_retention(
                problem.dist(),
                &profile.retention(i)?,
                &problem.sets()[i],
                problem.quad(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// `max |Σ g_i(x) − x|` over a uniform grid of the span.
    pub feasibility_residual: f64,
    pub feasible: bool,
    /// Every slope lies in `[0, 1]`, so each `g_i` is non-decreasing and
    /// 1-Lipschitz and the allocation is comonotone.
    pub comonotone: bool,
    /// Worst violation of "shares sum to one on `L`, zero off `L`".
    pub layer_residual: f64,
    pub layer_condition: bool,
    pub risks_before: Vec<f64>,
    /// `ρ_i(g_i(S − s) + c_i) = ρ_i(g_i(S − s)) + c_i`.
    pub risks_after: Vec<f64>,
    pub total_after: f64,
    /// `solution.value + s`.
    pub target: f64,
    /// `total_after − target`; positive when the profile wastes risk capital.
    pub optimality_residual: f64,
    pub optimal: bool,
    pub individually_rational: Vec<bool>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.feasible
            && self.comonotone
            && self.layer_condition
            && self.optimal
            && self.individually_rational.iter().all(|b| *b)
    }
}

/// Checks a retention profile against the solved problem: feasibility,
/// comonotonicity, the layer condition, total risk against the optimum and
/// individual rationality against `initial_risks`.
pub fn verify(
    profile: &RetentionProfile,
    problem: &MinMaxProblem,
    solution: &MinMaxSolution,
    initial_risks: &[f64],
) -> Result<VerificationReport> {
    let n = problem.n_agents();
    if initial_risks.len() != n || profile.n_agents() != n || profile.c.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: initial_risks.len(),
        });
    }
    let span = problem.span();
    let scale = problem.scale();

    let mut feasibility_residual = 0.0f64;
    for j in 0..FEASIBILITY_GRID {
        let x = span * j as f64 / (FEASIBILITY_GRID - 1) as f64;
        let total: f64 = (0..n).map(|i| profile.g(i, x)).sum();
        feasibility_residual = feasibility_residual.max((total - x).abs());
    }
    let feasible = feasibility_residual <= FEASIBILITY_TOL * scale;
    let comonotone = profile
        .slopes
        .iter()
        .flatten()
        .all(|s| (0.0..=1.0).contains(s));

    let dist = problem.dist();
    let lo = problem.lower_bound();
    let mut layer_residual = 0.0f64;
    for (j, w) in profile.breakpoints.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            continue;
        }
        let (u, p) = dist.tails(lo + 0.5 * (w[0] + w[1]));
        let l = optimistic_agents(&solution.optimal_distortions, p, u, DEFAULT_TIE_TOL);
        let inside: f64 = l.iter().map(|i| profile.slopes[*i][j]).sum();
        let outside: f64 = (0..n)
            .filter(|i| !l.contains(i))
            .map(|i| profile.slopes[i][j])
            .sum();
        layer_residual = layer_residual.max((inside - 1.0).abs() + outside);
    }
    let layer_condition = layer_residual <= L_CONDITION_TOL;

    let retained = retained_risks(profile, problem)?;
    let risks_after: Vec<f64> = retained.iter().zip(&profile.c).map(|(r, c)| r + c).collect();
    let total_after: f64 = risks_after.iter().sum();
    let target = solution.value + lo;
    let optimality_residual = total_after - target;
    let optimal =
        optimality_residual.abs() <= OPTIMALITY_REL_TOL * target.abs() + 1e-12 * scale;
    let individually_rational = risks_after
        .iter()
        .zip(initial_risks)
        .map(|(after, before)| *after <= before + IR_TOL * scale)
        .collect();
    Ok(VerificationReport {
        feasibility_residual,
        feasible,
        comonotone,
        layer_residual,
        layer_condition,
        risks_before: initial_risks.to_vec(),
        risks_after,
        total_after,
        target,
        optimality_residual,
        optimal,
        individually_rational,
    })
}
