//! Brute-force reference computations on small discrete instances.
//!
//! Everything here works on exact finite sums over atom gaps and shares no
//! code path with the solver beyond distortion evaluation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::distortion::DistortionSet;
use crate::distribution::RiskDistribution;
use crate::error::{Error, Result};

pub const MAX_ATOMS: usize = 12;
pub const MAX_AGENTS: usize = 3;
pub const MAX_GENERATORS: usize = 2;
pub const DEFAULT_WEIGHT_GRID_STEP: f64 = 1e-3;
pub const MAX_SHARE_GRID: usize = 11;
pub const MAX_SLOPE_CHOICES: usize = 12;
pub const MAX_EVALUATIONS: u64 = 10_000_000;

#[derive(Debug, Clone)]
pub struct DiscreteInstance {
    dist: RiskDistribution,
    sets: Vec<DistortionSet>,
    weight_grid_step: f64,
}

impl DiscreteInstance {
    pub fn new(
        dist: RiskDistribution,
        sets: Vec<DistortionSet>,
        weight_grid_step: f64,
    ) -> Result<Self> {
        let Some(atoms) = dist.atoms() else {
            return Err(Error::InvalidProblem(
                "oracle instances need a discrete or empirical law".into(),
            ));
        };
        if atoms.values.len() > MAX_ATOMS {
            return Err(Error::InstanceTooLarge(format!(
                "{} atoms, at most {MAX_ATOMS} allowed",
                atoms.values.len()
            )));
        }
        if atoms.values[0] < 0.0 {
            return Err(Error::InvalidDistribution(
                "oracle instances need non-negative atoms".into(),
            ));
        }
        if sets.is_empty() || sets.len() > MAX_AGENTS {
            return Err(Error::InstanceTooLarge(format!(
                "{} agents, between 1 and {MAX_AGENTS} allowed",
                sets.len()
            )));
        }
        if sets.iter().any(|s| s.len() > MAX_GENERATORS) {
            return Err(Error::InstanceTooLarge(format!(
                "at most {MAX_GENERATORS} generators per set"
            )));
        }
        if !(weight_grid_step > 0.0 && weight_grid_step <= 1.0) {
            return Err(Error::Domain {
                what: "weight_grid_step",
                value: weight_grid_step,
            });
        }
        Ok(Self {
            dist,
            sets,
            weight_grid_step,
        })
    }

    pub fn dist(&self) -> &RiskDistribution {
        &self.dist
    }

    pub fn sets(&self) -> &[DistortionSet] {
        &self.sets
    }

    pub fn weight_grid_step(&self) -> f64 {
        self.weight_grid_step
    }

    /// Gap widths and, per agent and generator, generator values on each gap.
    fn tabulate(&self) -> (Vec<f64>, Vec<Vec<Vec<f64>>>) {
        let atoms = self.dist.atoms().expect("checked in new");
        let v = &atoms.values;
        let widths: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
        let table = self
            .sets
            .iter()
            .map(|s| {
                s.generators()
                    .iter()
                    .map(|t| (0..widths.len()).map(|j| t.value(atoms.tail[j])).collect())
                    .collect()
            })
            .collect();
        (widths, table)
    }
}

/// Grid maximum of `Σ_gaps Δx · min_i mix_i(P(S > x))` over per-agent
/// weights.
///
/// Agents with two generators get weight `λ` on the second one, `λ` on the
/// grid `{0, step, …, 1}`. The last such agent is not gridded: for fixed
/// other weights the objective is concave and piecewise linear in its `λ`,
/// so it is maximized exactly over the kinks. Ties keep the first point in
/// lexicographic order. Returns the value and the full weight vectors.
pub fn brute_force_minmax(inst: &DiscreteInstance) -> Result<(f64, Vec<Vec<f64>>)> {
    let (widths, table) = inst.tabulate();
    let n = table.len();
    let free: Vec<usize> = (0..n).filter(|i| table[*i].len() == 2).collect();
    let levels = libm::round(1.0 / inst.weight_grid_step).max(1.0) as u64;
    let gridded = free.len().saturating_sub(1);
    let outer = (levels + 1).saturating_pow(gridded as u32);
    if outer > MAX_EVALUATIONS {
        return Err(Error::InstanceTooLarge(format!(
            "{outer} grid points exceed the budget of {MAX_EVALUATIONS}"
        )));
    }

    let mut lambda = vec![0.0; n];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut index = vec![0u64; gridded];
    let mixed = |i: usize, l: f64, j: usize| -> f64 {
        match table[i].len() {
            1 => table[i][0][j],
            _ => (1.0 - l) * table[i][0][j] + l * table[i][1][j],
        }
    };
    loop {
        for (slot, agent) in free.iter().take(gridded).enumerate() {
            lambda[*agent] = index[slot] as f64 / levels as f64;
        }
        let (value, last) = match free.last() {
            None => {
                let v = widths
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * (0..n).map(|i| mixed(i, lambda[i], j)).fold(f64::INFINITY, f64::min))
                    .sum();
                (v, None)
            }
            Some(&a) => {
                // others' minimum per gap, and the last agent's line a0 + l (a1 - a0)
                let others: Vec<f64> = (0..widths.len())
                    .map(|j| {
                        (0..n)
                            .filter(|i| *i != a)
                            .map(|i| mixed(i, lambda[i], j))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect();
                let f = |l: f64| -> f64 {
                    widths
                        .iter()
                        .enumerate()
                        .map(|(j, w)| w * mixed(a, l, j).min(others[j]))
                        .sum()
                };
                let mut candidates = vec![0.0, 1.0];
                for j in 0..widths.len() {
                    let (a0, a1) = (table[a][0][j], table[a][1][j]);
                    let slope = a1 - a0;
                    if slope != 0.0 && others[j].is_finite() {
                        let l = (others[j] - a0) / slope;
                        if l > 0.0 && l < 1.0 {
                            candidates.push(l);
                        }
                    }
                }
                candidates.sort_by(f64::total_cmp);
                let mut top = (f(candidates[0]), candidates[0]);
                for l in &candidates[1..] {
                    let v = f(*l);
                    if v > top.0 {
                        top = (v, *l);
                    }
                }
                (top.0, Some((a, top.1)))
            }
        };
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            let mut l = lambda.clone();
            if let Some((a, la)) = last {
                l[a] = la;
            }
            best = Some((value, l));
        }
        // odometer over the gridded agents
        let mut k = 0;
        while k < gridded {
            index[k] += 1;
            if index[k] <= levels {
                break;
            }
            index[k] = 0;
            k += 1;
        }
        if k == gridded {
            break;
        }
    }
    let (value, lambda) = best.expect("at least one grid point");
    let weights = (0..n)
        .map(|i| match table[i].len() {
            1 => vec![1.0],
            _ => vec![1.0 - lambda[i], lambda[i]],
        })
        .collect();
    Ok((value, weights))
}

/// Totals over every enumerated layer allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerEnumeration {
    /// Smallest `Σ_i ρ_i(Y_i)` over the enumerated allocations, including
    /// the constant `ess inf S`.
    pub min_total: f64,
    pub max_total: f64,
    pub count: u64,
    /// `ess inf S + Σ_gaps Δx · min_i T_i(P(S > x))`.
    pub closed_form: f64,
    /// Smallest total among allocations that give a positive share of some
    /// gap to an agent whose distortion is not minimal there. `None` when
    /// no such allocation exists.
    pub min_violating_total: Option<f64>,
}

/// Enumerates slope assignments `h_i ∈ {0, 1/k, …, 1}` with `Σ_i h_i = 1` on
/// every atom gap (`k = share_grid − 1`) for dual-utility agents, i.e.
/// singleton distortion sets, and evaluates each total exactly.
pub fn brute_force_layer_allocations(
    inst: &DiscreteInstance,
    share_grid: usize,
) -> Result<LayerEnumeration> {
    if inst.sets.iter().any(|s| s.len() != 1) {
        return Err(Error::InvalidProblem(
            "layer enumeration needs singleton distortion sets".into(),
        ));
    }
    if !(2..=MAX_SHARE_GRID).contains(&share_grid) {
        return Err(Error::InstanceTooLarge(format!(
            "share_grid must lie in 2..={MAX_SHARE_GRID}, got {share_grid}"
        )));
    }
    let (widths, table) = inst.tabulate();
    let n = table.len();
    let gaps = widths.len();
    if n * gaps > MAX_SLOPE_CHOICES {
        return Err(Error::InstanceTooLarge(format!(
            "{n} agents times {gaps} gaps exceeds {MAX_SLOPE_CHOICES} slope choices"
        )));
    }
    let k = share_grid - 1;
    let shares = compositions(k, n);
    let per_gap = shares.len() as u64;
    let count = per_gap.checked_pow(gaps as u32).unwrap_or(u64::MAX);
    if count > MAX_EVALUATIONS {
        return Err(Error::InstanceTooLarge(format!(
            "{count} allocations exceed the budget of {MAX_EVALUATIONS}"
        )));
    }

    let lo = inst.dist.essential_bounds().0;
    let t = |i: usize, j: usize| table[i][0][j];
    let gap_min: Vec<f64> = (0..gaps)
        .map(|j| (0..n).map(|i| t(i, j)).fold(f64::INFINITY, f64::min))
        .collect();
    let closed_form = lo + (0..gaps).map(|j| gap_min[j] * widths[j]).sum::<f64>();

    // contribution and L-violation flag of each share vector on each gap
    let mut contrib = vec![vec![0.0; shares.len()]; gaps];
    let mut violates = vec![vec![false; shares.len()]; gaps];
    for j in 0..gaps {
        let distinct = (0..n).any(|i| t(i, j) != gap_min[j]);
        for (a, h) in shares.iter().enumerate() {
            contrib[j][a] = (0..n)
                .map(|i| t(i, j) * (h[i] as f64 / k as f64) * widths[j])
                .sum();
            violates[j][a] = distinct && (0..n).any(|i| h[i] > 0 && t(i, j) > gap_min[j]);
        }
    }

    let mut choice = vec![0usize; gaps];
    let mut min_total = f64::INFINITY;
    let mut max_total = f64::NEG_INFINITY;
    let mut min_violating: Option<f64> = None;
    loop {
        let total = lo + (0..gaps).map(|j| contrib[j][choice[j]]).sum::<f64>();
        min_total = min_total.min(total);
        max_total = max_total.max(total);
        if (0..gaps).any(|j| violates[j][choice[j]]) {
            min_violating = Some(min_violating.map_or(total, |m| m.min(total)));
        }
        let mut g = 0;
        while g < gaps {
            choice[g] += 1;
            if choice[g] < shares.len() {
                break;
            }
            choice[g] = 0;
            g += 1;
        }
        if g == gaps {
            break;
        }
    }
    Ok(LayerEnumeration {
        min_total,
        max_total,
        count,
        closed_form,
        min_violating_total: min_violating,
    })
}

/// All ways of writing `total` as an ordered sum of `parts` non-negative
/// integers, in lexicographic order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}
