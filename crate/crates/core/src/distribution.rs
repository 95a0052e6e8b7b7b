//! Laws of bounded risks: survival function, distribution function, quantiles
//! and essential bounds.
//!
//! Unbounded analytic families are truncated at their `1 - truncation_mass`
//! quantile so that every modelled risk is essentially bounded; the mass
//! above the cut is placed on the cut itself.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::{normal, special};

/// Default probability mass removed from the upper tail of unbounded laws.
pub const DEFAULT_TRUNCATION_MASS: f64 = 1e-9;

const PROB_TOL: f64 = 1e-12;
// Atom cumulative sums are compared with this much slack in quantile lookups.
const CUMULATIVE_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Gamma { shape: f64, scale: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Equally weighted samples, sorted ascending.
    Empirical { samples: Vec<f64> },
    Discrete { atoms: Vec<f64>, probabilities: Vec<f64> },
}

/// Finite support points with tail and head probabilities, for the exact
/// finite-sum paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Atoms {
    pub values: Vec<f64>,
    pub masses: Vec<f64>,
    /// `tail[k] = P(Z > values[k])`, summed from the top.
    pub tail: Vec<f64>,
    /// `head[k] = P(Z ≤ values[k])`, summed from the bottom.
    pub head: Vec<f64>,
}

impl Atoms {
    fn new(values: Vec<f64>, masses: Vec<f64>) -> Self {
        let m = values.len();
        let mut tail = alloc::vec![0.0; m];
        for k in (0..m.saturating_sub(1)).rev() {
            tail[k] = tail[k + 1] + masses[k + 1];
        }
        let mut head = alloc::vec![0.0; m];
        let mut acc = 0.0;
        for k in 0..m {
            acc += masses[k];
            head[k] = acc;
        }
        if m > 0 {
            head[m - 1] = 1.0;
        }
        Self {
            values,
            masses,
            tail,
            head,
        }
    }

    /// Index of the largest atom `≤ x`.
    fn floor_index(&self, x: f64) -> Option<usize> {
        self.values.partition_point(|v| *v <= x).checked_sub(1)
    }
}

/// The law of a bounded real random variable.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskDistribution {
    law: Law,
    truncation_mass: f64,
    lower: f64,
    upper: f64,
    atoms: Option<Atoms>,
}

impl RiskDistribution {
    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "gamma needs positive shape and scale, got ({shape}, {scale})"
            )));
        }
        Self::analytic(Law::Gamma { shape, scale })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu.is_finite() && sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "lognormal needs finite mu and positive sigma, got ({mu}, {sigma})"
            )));
        }
        Self::analytic(Law::Lognormal { mu, sigma })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidDistribution(format!(
                "uniform needs finite lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(Self {
            law: Law::Uniform { lo, hi },
            truncation_mass: 0.0,
            lower: lo,
            upper: hi,
            atoms: None,
        })
    }

    /// Equally weighted samples; order does not matter.
    pub fn empirical(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidDistribution(
                "empirical distribution needs at least one sample".into(),
            ));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidDistribution(
                "empirical samples must be finite".into(),
            ));
        }
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        let mut values: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for &s in &samples {
            if values.last() == Some(&s) {
                *counts.last_mut().unwrap() += 1;
            } else {
                values.push(s);
                counts.push(1);
            }
        }
        // Exact counting: tail[k] = (#samples > values[k]) / n.
        let mut atoms = Atoms::new(values, counts.iter().map(|c| *c as f64 / n).collect());
        let mut above = 0usize;
        for k in (0..counts.len()).rev() {
            atoms.tail[k] = above as f64 / n;
            above += counts[k];
        }
        let mut below = 0usize;
        for k in 0..counts.len() {
            below += counts[k];
            atoms.head[k] = below as f64 / n;
        }
        Ok(Self {
            lower: samples[0],
            upper: samples[samples.len() - 1],
            law: Law::Empirical { samples },
            truncation_mass: 0.0,
            atoms: Some(atoms),
        })
    }

    pub fn discrete(atoms: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != probabilities.len() {
            return Err(Error::InvalidDistribution(format!(
                "discrete law needs matching non-empty atoms and probabilities ({} vs {})",
                atoms.len(),
                probabilities.len()
            )));
        }
        if atoms.iter().any(|a| !a.is_finite()) || atoms.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidDistribution(
                "atoms must be finite and strictly increasing".into(),
            ));
        }
        if probabilities.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::InvalidDistribution(
                "atom probabilities must be positive".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "atom probabilities sum to {total}, not 1"
            )));
        }
        let table = Atoms::new(atoms.clone(), probabilities.clone());
        Ok(Self {
            lower: atoms[0],
            upper: atoms[atoms.len() - 1],
            law: Law::Discrete {
                atoms,
                probabilities,
            },
            truncation_mass: 0.0,
            atoms: Some(table),
        })
    }

    /// Re-truncates an unbounded family at the `1 - mass` quantile. No effect
    /// on bounded laws.
    pub fn with_truncation_mass(self, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass < 0.5) {
            return Err(Error::InvalidDistribution(format!(
                "truncation mass {mass} must lie in (0, 0.5)"
            )));
        }
        match self.law {
            Law::Gamma { .. } | Law::Lognormal { .. } => {
                let mut d = self;
                d.truncation_mass = mass;
                d.upper = d.raw_upper_quantile(mass);
                Ok(d)
            }
            _ => Ok(self),
        }
    }

    fn analytic(law: Law) -> Result<Self> {
        let mut d = Self {
            law,
            truncation_mass: DEFAULT_TRUNCATION_MASS,
            lower: 0.0,
            upper: f64::INFINITY,
            atoms: None,
        };
        d.upper = d.raw_upper_quantile(DEFAULT_TRUNCATION_MASS);
        Ok(d)
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    pub fn truncation_mass(&self) -> f64 {
        self.truncation_mass
    }

    /// Support points and their tail sums for discrete and empirical laws.
    pub fn atoms(&self) -> Option<&Atoms> {
        self.atoms.as_ref()
    }

    /// `(essential_inf, essential_sup)`; the supremum is the truncation point
    /// for unbounded families.
    pub fn essential_bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// `essential_sup - essential_inf`.
    pub fn span(&self) -> f64 {
        self.upper - self.lower
    }

    /// `P(Z > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        self.tails(x).1
    }

    /// `P(Z ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.tails(x).0
    }

    /// `(P(Z ≤ x), P(Z > x))`, each computed on its accurate side.
    pub fn tails(&self, x: f64) -> (f64, f64) {
        if let Some(atoms) = &self.atoms {
            return match atoms.floor_index(x) {
                None => (0.0, 1.0),
                Some(k) => (atoms.head[k], atoms.tail[k]),
            };
        }
        if x < self.lower {
            return (0.0, 1.0);
        }
        if x >= self.upper {
            return (1.0, 0.0);
        }
        match &self.law {
            Law::Gamma { shape, scale } => special::gamma_pq(*shape, x / scale),
            Law::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    return (0.0, 1.0);
                }
                let z = (libm::log(x) - mu) / sigma;
                (normal::cdf(z), normal::cdf(-z))
            }
            Law::Uniform { lo, hi } => {
                let w = hi - lo;
                ((x - lo) / w, (hi - x) / w)
            }
            Law::Empirical { .. } | Law::Discrete { .. } => unreachable!("atoms handled above"),
        }
    }

    /// Probability density of the untruncated continuous families; `None`
    /// for discrete and empirical laws.
    pub fn density(&self, x: f64) -> Option<f64> {
        match &self.law {
            Law::Gamma { shape, scale } => Some(if x <= 0.0 {
                if *shape == 1.0 && x == 0.0 {
                    1.0 / scale
                } else {
                    0.0
                }
            } else {
                let z = x / scale;
                libm::exp((shape - 1.0) * libm::log(z) - z - libm::lgamma(*shape)) / scale
            }),
            Law::Lognormal { mu, sigma } => Some(if x <= 0.0 {
                0.0
            } else {
                normal::pdf((libm::log(x) - mu) / sigma) / (x * sigma)
            }),
            Law::Uniform { lo, hi } => Some(if x < *lo || x > *hi {
                0.0
            } else {
                1.0 / (hi - lo)
            }),
            Law::Empirical { .. } | Law::Discrete { .. } => None,
        }
    }

    /// Left-continuous generalized inverse `inf { t : P(Z > t) ≤ 1 − p }` for
    /// `p` in the open unit interval.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain {
                what: "quantile level",
                value: p,
            });
        }
        if let Some(atoms) = &self.atoms {
            let k = atoms.head.partition_point(|h| *h < p - CUMULATIVE_SLACK);
            return Ok(atoms.values[k.min(atoms.values.len() - 1)]);
        }
        Ok(self.raw_quantile(p).clamp(self.lower, self.upper))
    }

    // Quantile of the untruncated continuous law.
    fn raw_quantile(&self, p: f64) -> f64 {
        match &self.law {
            Law::Gamma { shape, scale } => gamma_quantile(*shape, *scale, p, 1.0 - p),
            Law::Lognormal { mu, sigma } => libm::exp(mu + sigma * normal::quantile(p)),
            Law::Uniform { lo, hi } => lo + p * (hi - lo),
            Law::Empirical { .. } | Law::Discrete { .. } => unreachable!(),
        }
    }

    // Point with untruncated upper tail `mass`, without forming `1 - mass`.
    fn raw_upper_quantile(&self, mass: f64) -> f64 {
        match &self.law {
            Law::Gamma { shape, scale } => gamma_quantile(*shape, *scale, 1.0 - mass, mass),
            Law::Lognormal { mu, sigma } => libm::exp(mu - sigma * normal::quantile(mass)),
            _ => self.raw_quantile(1.0 - mass),
        }
    }
}

// Bisection on the accurate tail of the incomplete gamma function. `p` and
// `q` are the lower and upper tail masses of the target point.
fn gamma_quantile(shape: f64, scale: f64, p: f64, q: f64) -> f64 {
    let reached = |x: f64| {
        let (lower, upper) = special::gamma_pq(shape, x / scale);
        if p < 0.5 {
            lower >= p
        } else {
            upper <= q
        }
    };
    let mut lo = 0.0;
    let mut hi = shape * scale;
    while !reached(hi) {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if reached(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
