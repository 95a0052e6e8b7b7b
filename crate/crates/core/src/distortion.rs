//! Distortion functions and finitely generated convex sets of them.
//!
//! A distortion is a non-decreasing map `T: [0, 1] -> [0, 1]` with `T(0) = 0`
//! and `T(1) = 1`. Concave distortions give coherent distortion risk measures
//! `ρ(Z) = ∫ Z d(T∘P)`, and a [`DistortionSet`] turns a finite list of them into
//! the worst-case risk measure over their convex hull.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::normal;

/// Slack accepted on probabilities and simplex weights.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Default number of grid points for [`concavity_check`].
pub const DEFAULT_CONCAVITY_GRID: usize = 1001;

const CONCAVITY_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum DistortionFunction {
    /// `T(t) = min(t / alpha, 1)`.
    ExpectedShortfall { alpha: f64 },
    /// `T(t) = min((t / alpha)^exponent, 1)`.
    PowerTail { alpha: f64, exponent: f64 },
    /// `T(t) = Φ(Φ⁻¹(t) + shift)`, pinned to 0 and 1 at the endpoints.
    WangTransform { shift: f64 },
    Identity,
    /// Linear interpolation through `(knots[j], values[j])`.
    PiecewiseLinear { knots: Vec<f64>, values: Vec<f64> },
    /// `Σ weights[k] · components[k]`, the result of [`DistortionSet::mix`].
    Mixture {
        weights: Vec<f64>,
        components: Vec<DistortionFunction>,
    },
}

impl DistortionFunction {
    pub fn expected_shortfall(alpha: f64) -> Result<Self> {
        let t = Self::ExpectedShortfall { alpha };
        t.validate()?;
        Ok(t)
    }

    pub fn power_tail(alpha: f64, exponent: f64) -> Result<Self> {
        let t = Self::PowerTail { alpha, exponent };
        t.validate()?;
        Ok(t)
    }

    pub fn wang(shift: f64) -> Result<Self> {
        let t = Self::WangTransform { shift };
        t.validate()?;
        Ok(t)
    }

    pub fn piecewise_linear(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let t = Self::PiecewiseLinear { knots, values };
        t.validate()?;
        Ok(t)
    }

    /// Checks the parameter constraints of each variant.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ExpectedShortfall { alpha } => check_level(*alpha),
            Self::PowerTail { alpha, exponent } => {
                check_level(*alpha)?;
                if !(*exponent > 0.0 && *exponent <= 1.0) {
                    return Err(Error::InvalidDistortion(format!(
                        "power exponent {exponent} must lie in (0, 1]"
                    )));
                }
                Ok(())
            }
            Self::WangTransform { shift } => {
                if !shift.is_finite() {
                    return Err(Error::InvalidDistortion(format!(
                        "Wang shift {shift} must be finite"
                    )));
                }
                Ok(())
            }
            Self::Identity => Ok(()),
            Self::PiecewiseLinear { knots, values } => validate_piecewise(knots, values),
            Self::Mixture {
                weights,
                components,
            } => {
                if weights.len() != components.len() || components.is_empty() {
                    return Err(Error::DimensionMismatch {
                        expected: components.len(),
                        found: weights.len(),
                    });
                }
                check_simplex(weights)?;
                components.iter().try_for_each(Self::validate)
            }
        }
    }

    /// `T(t)` for `t` in `[0, 1]`, with `1e-12` slack at either end.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&t) {
            return Err(Error::Domain {
                what: "distortion argument",
                value: t,
            });
        }
        Ok(self.value(t.clamp(0.0, 1.0)))
    }

    /// Infallible evaluation; `t` is clamped to `[0, 1]`.
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let v = match self {
            Self::ExpectedShortfall { alpha } => t / alpha,
            Self::PowerTail { alpha, exponent } => {
                if t >= *alpha {
                    1.0
                } else {
                    libm::pow(t / alpha, *exponent)
                }
            }
            Self::WangTransform { shift } => normal::cdf(normal::quantile(t) + shift),
            Self::Identity => t,
            Self::PiecewiseLinear { knots, values } => interpolate(knots, values, t),
            Self::Mixture {
                weights,
                components,
            } => weights
                .iter()
                .zip(components)
                .map(|(w, c)| w * c.value(t))
                .sum(),
        };
        v.clamp(0.0, 1.0)
    }

    /// `1 - T(1 - u)`, evaluated without cancellation when `T` is close to 1.
    ///
    /// Distorted tail probabilities of small layers sit just below 1; callers
    /// that need to rank them pass the distribution function `u = P(Z ≤ x)`
    /// instead of the survival probability.
    pub fn complement(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let v = match self {
            Self::ExpectedShortfall { alpha } => (alpha - 1.0 + u) / alpha,
            Self::PowerTail { alpha, exponent } => {
                let t = 1.0 - u;
                if t >= *alpha {
                    0.0
                } else {
                    // 1 - r^e = -expm1(e ln r)
                    -libm::expm1(exponent * libm::log(t / alpha))
                }
            }
            Self::WangTransform { shift } => normal::cdf(normal::quantile(u) - shift),
            Self::Identity => u,
            Self::PiecewiseLinear { knots, values } => 1.0 - interpolate(knots, values, 1.0 - u),
            Self::Mixture {
                weights,
                components,
            } => weights
                .iter()
                .zip(components)
                .map(|(w, c)| w * c.complement(u))
                .sum(),
        };
        v.clamp(0.0, 1.0)
    }

    /// Arguments in `(0, 1)` where `T` is not differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_kinks(&mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_kinks(&self, out: &mut Vec<f64>) {
        match self {
            Self::ExpectedShortfall { alpha } | Self::PowerTail { alpha, .. } => {
                if *alpha < 1.0 {
                    out.push(*alpha);
                }
            }
            Self::WangTransform { .. } | Self::Identity => {}
            Self::PiecewiseLinear { knots, .. } => {
                out.extend(knots.iter().copied().filter(|k| *k > 0.0 && *k < 1.0));
            }
            Self::Mixture { components, .. } => {
                components.iter().for_each(|c| c.collect_kinks(out));
            }
        }
    }
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDistortion(format!(
            "level {alpha} must lie in (0, 1]"
        )))
    }
}

fn validate_piecewise(knots: &[f64], values: &[f64]) -> Result<()> {
    if knots.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: knots.len(),
            found: values.len(),
        });
    }
    if knots.len() < 2 {
        return Err(Error::InvalidDistortion(
            "piecewise-linear distortion needs at least two knots".into(),
        ));
    }
    if knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 {
        return Err(Error::InvalidDistortion(
            "knots must start at 0 and end at 1".into(),
        ));
    }
    if values[0] != 0.0 || values[values.len() - 1] != 1.0 {
        return Err(Error::InvalidDistortion(
            "values must start at 0 and end at 1".into(),
        ));
    }
    if knots.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidDistortion(
            "knots must be strictly increasing".into(),
        ));
    }
    if values.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidDistortion(
            "values must be non-decreasing".into(),
        ));
    }
    Ok(())
}

fn interpolate(knots: &[f64], values: &[f64], t: f64) -> f64 {
    let j = knots.partition_point(|k| *k <= t).clamp(1, knots.len() - 1);
    let (x0, x1) = (knots[j - 1], knots[j]);
    let (y0, y1) = (values[j - 1], values[j]);
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

/// Validates a weight vector against the probability simplex.
pub fn check_simplex(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::OffSimplex {
            reason: "non-finite weight",
        });
    }
    if weights.iter().any(|w| *w < -SIMPLEX_TOL) {
        return Err(Error::OffSimplex {
            reason: "negative weight",
        });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::OffSimplex {
            reason: "weights do not sum to one",
        });
    }
    Ok(())
}

/// Midpoint concavity on a uniform grid of `grid_size` points.
///
/// Every pair `a < b` of grid points is tested for
/// `T((a + b) / 2) ≥ (T(a) + T(b)) / 2 − 1e-10`. Returns false for
/// `grid_size < 3`.
pub fn concavity_check(t: &DistortionFunction, grid_size: usize) -> bool {
    if grid_size < 3 {
        return false;
    }
    // Midpoints of grid pairs land on the half-step grid.
    let fine = 2 * (grid_size - 1);
    let vals: Vec<f64> = (0..=fine)
        .map(|j| t.value(j as f64 / fine as f64))
        .collect();
    for i in 0..grid_size {
        for j in (i + 1)..grid_size {
            let mid = vals[i + j];
            let chord = 0.5 * (vals[2 * i] + vals[2 * j]);
            if mid < chord - CONCAVITY_SLACK {
                return false;
            }
        }
    }
    true
}

/// The convex hull of finitely many concave distortions; one agent's risk
/// measure is the supremum of the Choquet integral over this hull.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionSet {
    label: String,
    generators: Vec<DistortionFunction>,
}

impl DistortionSet {
    pub fn new(label: impl Into<String>, generators: Vec<DistortionFunction>) -> Result<Self> {
        let label = label.into();
        if generators.is_empty() {
            return Err(Error::InvalidDistortion(format!(
                "distortion set '{label}' has no generators"
            )));
        }
        for (k, g) in generators.iter().enumerate() {
            g.validate()?;
            if !concavity_check(g, DEFAULT_CONCAVITY_GRID) {
                return Err(Error::InvalidDistortion(format!(
                    "generator {k} of '{label}' is not concave"
                )));
            }
        }
        Ok(Self { label, generators })
    }

    pub fn singleton(label: impl Into<String>, generator: DistortionFunction) -> Result<Self> {
        Self::new(label, vec![generator])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn generators(&self) -> &[DistortionFunction] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// The hull member `Σ weights[k] · generators[k]`.
    pub fn mix(&self, weights: &[f64]) -> Result<DistortionFunction> {
        if weights.len() != self.generators.len() {
            return Err(Error::DimensionMismatch {
                expected: self.generators.len(),
                found: weights.len(),
            });
        }
        check_simplex(weights)?;
        if let Some(k) = weights.iter().position(|w| *w == 1.0) {
            if weights.iter().enumerate().all(|(j, w)| j == k || *w == 0.0) {
                return Ok(self.generators[k].clone());
            }
        }
        Ok(DistortionFunction::Mixture {
            weights: weights.iter().map(|w| w.max(0.0)).collect(),
            components: self.generators.clone(),
        })
    }

    /// All kinks of all generators.
    pub fn kinks(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.generators.iter().flat_map(|g| g.kinks()).collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}
