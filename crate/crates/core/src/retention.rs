//! Piecewise-linear, non-decreasing, 1-Lipschitz retention functions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const SLOPE_TOL: f64 = 1e-12;

/// `g(x) = ∫₀ˣ h(z) dz` where `h` is constant on each segment
/// `[breakpoints[j], breakpoints[j + 1])` and zero past the last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Retention {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
}

impl Retention {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != slopes.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: slopes.len() + 1,
                found: breakpoints.len(),
            });
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidRetention(format!(
                "first breakpoint must be 0, got {}",
                breakpoints[0]
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::InvalidRetention(
                "breakpoints must be finite and non-decreasing".into(),
            ));
        }
        if let Some(s) = slopes
            .iter()
            .find(|s| !(**s >= -SLOPE_TOL && **s <= 1.0 + SLOPE_TOL))
        {
            return Err(Error::InvalidRetention(format!(
                "slope {s} outside [0, 1]"
            )));
        }
        let slopes = slopes.into_iter().map(|s| s.clamp(0.0, 1.0)).collect();
        Ok(Self {
            breakpoints,
            slopes,
        })
    }

    /// Full retention `g(x) = x` on `[0, span]`.
    pub fn identity(span: f64) -> Self {
        Self {
            breakpoints: vec![0.0, span.max(0.0)],
            slopes: vec![1.0],
        }
    }

    pub fn zero() -> Self {
        Self {
            breakpoints: vec![0.0],
            slopes: Vec::new(),
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Segments `(start, end, slope)` with positive length.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.slopes)
            .filter(|(w, _)| w[1] > w[0])
            .map(|(w, s)| (w[0], w[1], *s))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.segments()
            .take_while(|(a, _, _)| *a < x)
            .map(|(a, b, s)| s * (x.min(b) - a))
            .sum()
    }
}
