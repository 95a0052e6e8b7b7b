//! The central min-max problem
//!
//! ```text
//! maximize  ∫₀^span  min_i  T_i(P(S > s + x)) dx   over  (T_1, …, T_n) ∈ ∏ hull(set_i)
//! ```
//!
//! where `s = ess inf S`. Writing each `T_i` as a weight vector on its
//! generator simplex makes the objective a concave function of the stacked
//! weights: it integrates a pointwise minimum of functions that are linear
//! in the weights. A supergradient is obtained by crediting each layer `x` to
//! the lowest-index agent attaining the minimum there.
//!
//! [`solve`] runs a central-cut ellipsoid method on the free coordinates of
//! the simplices (bisection when there is a single free coordinate). Every
//! supergradient cut yields an upper bound on the optimum, so the reported
//! gap is a certified bound up to quadrature error, and the method does not
//! rely on smoothness: objectives with positive-measure ties between agents
//! are handled like any other.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::choquet::{absolute_tolerance, kink_points};
use crate::distortion::{DistortionFunction, DistortionSet};
use crate::distribution::RiskDistribution;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_vec, QuadratureConfig};
use crate::scan::locate_changes;

/// Ellipsoid axes below this length stop the iteration.
const MIN_AXIS: f64 = 1e-10;
/// Weights this small are tried at zero once the main iteration stops.
const SNAP_WEIGHT: f64 = 1e-3;

/// The aggregate risk and one distortion set per agent.
#[derive(Debug, Clone)]
pub struct MinMaxProblem {
    dist: RiskDistribution,
    sets: Vec<DistortionSet>,
    quad: QuadratureConfig,
    lower_bound: f64,
}

impl MinMaxProblem {
    pub fn new(
        dist: RiskDistribution,
        sets: Vec<DistortionSet>,
        quad: QuadratureConfig,
    ) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidProblem("at least one agent is required".into()));
        }
        if let Some(i) = sets.iter().position(|s| s.is_empty()) {
            return Err(Error::InvalidProblem(format!(
                "agent {i} has an empty distortion set"
            )));
        }
        quad.validate()?;
        let lower_bound = dist.essential_bounds().0;
        Ok(Self {
            dist,
            sets,
            quad,
            lower_bound,
        })
    }

    pub fn dist(&self) -> &RiskDistribution {
        &self.dist
    }

    pub fn sets(&self) -> &[DistortionSet] {
        &self.sets
    }

    pub fn quad(&self) -> &QuadratureConfig {
        &self.quad
    }

    /// `s = ess inf S`; allocations are written as `g_i(S − s) + c_i`.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn span(&self) -> f64 {
        self.dist.span()
    }

    /// Length scale for absolute tolerances: the span, or 1 when it is zero.
    pub fn scale(&self) -> f64 {
        let s = self.span();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    pub fn n_agents(&self) -> usize {
        self.sets.len()
    }

    fn mixes(&self, weights: &[Vec<f64>]) -> Result<Vec<DistortionFunction>> {
        if weights.len() != self.sets.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sets.len(),
                found: weights.len(),
            });
        }
        self.sets
            .iter()
            .zip(weights)
            .map(|(s, w)| s.mix(w))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative optimality gap at which the solver stops. Weights are only
    /// resolved to roughly the square root of this near a smooth optimum.
    pub gap_tol: f64,
    pub max_iters: usize,
    /// Uniform cells scanned for switches of the minimizing agent before
    /// each objective integration; switches become quadrature breakpoints.
    pub inner_grid: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-10,
            max_iters: 500,
            inner_grid: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub iterations: usize,
    /// Certified upper bound minus the returned value (absolute).
    pub final_gap: f64,
    pub converged: bool,
    /// Best objective value after each evaluation; non-decreasing.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxSolution {
    pub weights: Vec<Vec<f64>>,
    pub optimal_distortions: Vec<DistortionFunction>,
    pub value: f64,
    pub convergence: Convergence,
}

/// Objective value and a supergradient with respect to every weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub supergradient: Vec<Vec<f64>>,
}

/// `∫₀^span min_i mix_i(P(S > s + x)) dx` at the given weights.
pub fn objective(problem: &MinMaxProblem, weights: &[Vec<f64>]) -> Result<f64> {
    Ok(evaluate(problem, weights, SolverOptions::default().inner_grid)?.value)
}

/// Objective and supergradient. `inner_grid` controls the switch scan.
pub fn evaluate(
    problem: &MinMaxProblem,
    weights: &[Vec<f64>],
    inner_grid: usize,
) -> Result<Evaluation> {
    let mixes = problem.mixes(weights)?;
    let sets = problem.sets();
    let dist = problem.dist();
    let (lo, hi) = dist.essential_bounds();
    let span = hi - lo;
    let mut supergradient: Vec<Vec<f64>> = sets.iter().map(|s| vec![0.0; s.len()]).collect();

    // Generator values at one survival probability, and the minimizing agent.
    let n = sets.len();
    let assess = |p: f64, gens: &mut Vec<Vec<f64>>| -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for i in 0..n {
            let mut m = 0.0;
            for (k, g) in sets[i].generators().iter().enumerate() {
                let v = g.value(p);
                gens[i][k] = v;
                m += weights[i][k] * v;
            }
            if m < best.1 {
                best = (i, m);
            }
        }
        best
    };
    let mut gens: Vec<Vec<f64>> = sets.iter().map(|s| vec![0.0; s.len()]).collect();

    if let Some(atoms) = dist.atoms() {
        let v = &atoms.values;
        let mut value = 0.0;
        for j in 0..v.len().saturating_sub(1) {
            let width = v[j + 1] - v[j];
            let (i, m) = assess(atoms.tail[j], &mut gens);
            value += width * m;
            for (k, g) in gens[i].iter().enumerate() {
                supergradient[i][k] += width * g;
            }
        }
        return Ok(Evaluation {
            value,
            supergradient,
        });
    }

    let mut points = vec![0.0];
    let kinks: Vec<f64> = sets.iter().flat_map(|s| s.kinks()).collect();
    points.extend(kink_points(dist, &kinks, lo, hi).into_iter().map(|x| x - lo));
    let argmin = |x: f64| {
        let p = dist.survival(lo + x);
        let mut best = (0, f64::INFINITY);
        for (i, t) in mixes.iter().enumerate() {
            let m = t.value(p);
            if m < best.1 {
                best = (i, m);
            }
        }
        best.0
    };
    points.extend(locate_changes(argmin, 0.0, span, inner_grid, 1e-10 * span));
    points.push(span);

    let offsets: Vec<usize> = sets
        .iter()
        .scan(1, |acc, s| {
            let o = *acc;
            *acc += s.len();
            Some(o)
        })
        .collect();
    let dim = 1 + sets.iter().map(|s| s.len()).sum::<usize>();
    let q = problem.quad();
    let integral = integrate_vec(
        |x, out| {
            out.iter_mut().for_each(|o| *o = 0.0);
            let (i, m) = assess(dist.survival(lo + x), &mut gens);
            out[0] = m;
            for (k, g) in gens[i].iter().enumerate() {
                out[offsets[i] + k] = *g;
            }
        },
        dim,
        &points,
        absolute_tolerance(q, span),
        q.rel_tol,
        q.max_subdivisions,
    )?;
    for (i, s) in supergradient.iter_mut().enumerate() {
        for (k, g) in s.iter_mut().enumerate() {
            *g = integral.values[offsets[i] + k];
        }
    }
    Ok(Evaluation {
        value: integral.values[0],
        supergradient,
    })
}

/// Maps free coordinates to per-agent simplex weights. Agent `i` with `K`
/// generators contributes `K − 1` coordinates `y`, and its weights are
/// `(1 − Σy, y_1, …, y_{K−1})`.
struct Layout {
    sizes: Vec<usize>,
    dim: usize,
}

impl Layout {
    fn new(sets: &[DistortionSet]) -> Self {
        let sizes: Vec<usize> = sets.iter().map(|s| s.len()).collect();
        let dim = sizes.iter().map(|k| k - 1).sum();
        Self { sizes, dim }
    }

    fn blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.sizes.iter().scan(0, |acc, k| {
            let start = *acc;
            *acc += k - 1;
            Some((start, k - 1))
        })
    }

    fn uniform(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.dim);
        for k in &self.sizes {
            y.extend(core::iter::repeat_n(1.0 / *k as f64, k - 1));
        }
        y
    }

    /// A violated constraint at `y` as the direction of the halfspace to keep.
    fn infeasibility(&self, y: &[f64]) -> Option<Vec<f64>> {
        if let Some(j) = y.iter().position(|v| *v < 0.0) {
            let mut g = vec![0.0; self.dim];
            g[j] = 1.0;
            return Some(g);
        }
        for (start, len) in self.blocks() {
            let sum: f64 = y[start..start + len].iter().sum();
            if sum > 1.0 {
                let mut g = vec![0.0; self.dim];
                g[start..start + len].iter_mut().for_each(|v| *v = -1.0);
                return Some(g);
            }
        }
        None
    }

    fn weights(&self, y: &[f64]) -> Vec<Vec<f64>> {
        self.sizes
            .iter()
            .zip(self.blocks())
            .map(|(k, (start, len))| {
                let mut w = Vec::with_capacity(*k);
                let free = &y[start..start + len];
                let rest: f64 = free.iter().map(|v| v.max(0.0)).sum();
                w.push((1.0 - rest).max(0.0));
                w.extend(free.iter().map(|v| v.max(0.0)));
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|v| *v /= total);
                w
            })
            .collect()
    }

    /// `y` with generator weights below [`SNAP_WEIGHT`] set to zero.
    fn snap(&self, y: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        for mut w in self.weights(y) {
            w.iter_mut().filter(|v| **v < SNAP_WEIGHT).for_each(|v| *v = 0.0);
            let total: f64 = w.iter().sum();
            out.extend(w[1..].iter().map(|v| v / total));
        }
        out
    }

    fn reduce(&self, grad: &[Vec<f64>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        for g in grad {
            out.extend(g[1..].iter().map(|v| v - g[0]));
        }
        out
    }
}

struct Tracker {
    best_value: f64,
    best_y: Vec<f64>,
    best_upper: f64,
    history: Vec<f64>,
}

impl Tracker {
    fn record(&mut self, y: &[f64], value: f64, upper: f64) {
        if value > self.best_value {
            self.best_value = value;
            self.best_y = y.to_vec();
        }
        self.best_upper = self.best_upper.min(upper);
        self.history.push(self.best_value);
    }

    fn gap(&self) -> f64 {
        (self.best_upper - self.best_value).max(0.0)
    }

    fn done(&self, gap_tol: f64) -> bool {
        self.gap() <= gap_tol * self.best_value.abs().max(f64::MIN_POSITIVE)
    }
}

/// Maximizes the objective over the product of distortion simplices.
///
/// Deterministic: starts from uniform weights and uses no randomness. When
/// `max_iters` is exhausted the best iterate is returned with
/// `convergence.converged == false`.
pub fn solve(problem: &MinMaxProblem, opts: &SolverOptions) -> Result<MinMaxSolution> {
    if !(opts.gap_tol > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "gap_tol must be positive, got {}",
            opts.gap_tol
        )));
    }
    let layout = Layout::new(problem.sets());
    let eval_at = |y: &[f64]| -> Result<(f64, Vec<f64>)> {
        let e = evaluate(problem, &layout.weights(y), opts.inner_grid)?;
        Ok((e.value, layout.reduce(&e.supergradient)))
    };

    let mut center = layout.uniform();
    let mut tracker = Tracker {
        best_value: f64::NEG_INFINITY,
        best_y: center.clone(),
        best_upper: f64::INFINITY,
        history: Vec::new(),
    };
    let mut iterations = 0;
    let mut exhausted = false;

    match layout.dim {
        0 => {
            let (v, _) = eval_at(&center)?;
            tracker.record(&center, v, v);
        }
        1 => {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            loop {
                if iterations >= opts.max_iters {
                    exhausted = true;
                    break;
                }
                iterations += 1;
                center[0] = 0.5 * (lo + hi);
                let (v, g) = eval_at(&center)?;
                let radius = 0.5 * (hi - lo);
                tracker.record(&center, v, v + g[0].abs() * radius);
                if g[0] == 0.0 || tracker.done(opts.gap_tol) || radius < MIN_AXIS {
                    break;
                }
                if g[0] > 0.0 {
                    lo = center[0];
                } else {
                    hi = center[0];
                }
            }
            // the interval ends are feasible candidates too
            for end in [lo, hi] {
                let (v, _) = eval_at(&[end])?;
                tracker.record(&[end], v, f64::INFINITY);
            }
        }
        d => {
            let df = d as f64;
            let radius2 = df; // squared radius of a ball containing every simplex product
            let mut shape: Vec<f64> = vec![0.0; d * d];
            for j in 0..d {
                shape[j * d + j] = radius2;
            }
            loop {
                if iterations >= opts.max_iters {
                    exhausted = true;
                    break;
                }
                iterations += 1;
                let (g, upper_from) = match layout.infeasibility(&center) {
                    Some(g) => (g, None),
                    None => {
                        let (v, g) = eval_at(&center)?;
                        (g, Some(v))
                    }
                };
                let pg = mat_vec(&shape, &g, d);
                let gpg: f64 = g.iter().zip(&pg).map(|(a, b)| a * b).sum();
                if let Some(v) = upper_from {
                    tracker.record(&center, v, v + libm::sqrt(gpg.max(0.0)));
                    if gpg <= 0.0 || tracker.done(opts.gap_tol) {
                        break;
                    }
                }
                let norm = libm::sqrt(gpg);
                if !(norm > 0.0) {
                    break;
                }
                let b: Vec<f64> = pg.iter().map(|v| v / norm).collect();
                for j in 0..d {
                    center[j] += b[j] / (df + 1.0);
                }
                let factor = df * df / (df * df - 1.0);
                for r in 0..d {
                    for c in 0..d {
                        shape[r * d + c] =
                            factor * (shape[r * d + c] - 2.0 / (df + 1.0) * b[r] * b[c]);
                    }
                }
                for r in 0..d {
                    for c in (r + 1)..d {
                        let s = 0.5 * (shape[r * d + c] + shape[c * d + r]);
                        shape[r * d + c] = s;
                        shape[c * d + r] = s;
                    }
                }
                let max_axis = (0..d).map(|j| shape[j * d + j]).fold(0.0f64, f64::max);
                if libm::sqrt(max_axis) < MIN_AXIS {
                    break;
                }
            }
        }
    }

    // Optima on a face of the simplex product are approached slowly; keep the
    // face point when it is at least as good.
    if layout.dim > 0 {
        let snapped = layout.snap(&tracker.best_y);
        if snapped != tracker.best_y {
            let (v, _) = eval_at(&snapped)?;
            if v >= tracker.best_value {
                tracker.best_value = v;
                tracker.best_y = snapped;
            }
            tracker.history.push(tracker.best_value);
        }
    }

    let weights = layout.weights(&tracker.best_y);
    let optimal_distortions = problem.mixes(&weights)?;
    let converged = !exhausted || tracker.done(opts.gap_tol);
    Ok(MinMaxSolution {
        weights,
        optimal_distortions,
        value: tracker.best_value,
        convergence: Convergence {
            iterations,
            final_gap: if tracker.best_upper.is_finite() {
                tracker.gap()
            } else {
                f64::INFINITY
            },
            converged,
            history: tracker.history,
        },
    })
}

fn mat_vec(m: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|r| (0..d).map(|c| m[r * d + c] * v[c]).sum())
        .collect()
}
