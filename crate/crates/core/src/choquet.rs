//! Choquet integrals of distortion risk measures, and their worst case over a
//! distortion set.

use alloc::vec::Vec;

use crate::distortion::{DistortionFunction, DistortionSet};
use crate::distribution::RiskDistribution;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::retention::Retention;

const RETENTION_RANGE_TOL: f64 = 1e-9;

/// Points in `(lo, hi)` where `T(P(Z > x))` has a kink, from the quantiles
/// at which the survival function crosses each kink of `T`.
pub(crate) fn kink_points(dist: &RiskDistribution, kinks: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    kinks
        .iter()
        .filter_map(|t| dist.quantile(1.0 - t).ok())
        .filter(|x| *x > lo && *x < hi)
        .collect()
}

pub(crate) fn absolute_tolerance(q: &QuadratureConfig, width: f64) -> f64 {
    q.abs_tol * width.max(f64::MIN_POSITIVE)
}

/// `∫ Z d(T∘P)` for the law of `Z`.
///
/// Evaluated as `ess inf Z + ∫_{ess inf}^{ess sup} T(P(Z > t)) dt`, which
/// equals the two-branch definition `∫₀^∞ T(P(Z>t)) dt + ∫_{−∞}^0 [T(P(Z>t)) − 1] dt`
/// for bounded `Z` of either sign. Discrete and empirical laws are summed
/// exactly over atom gaps.
pub fn choquet_integral(
    dist: &RiskDistribution,
    t: &DistortionFunction,
    q: &QuadratureConfig,
) -> Result<f64> {
    let (lo, hi) = dist.essential_bounds();
    if let Some(atoms) = dist.atoms() {
        let v = &atoms.values;
        let sum: f64 = (0..v.len().saturating_sub(1))
            .map(|k| t.value(atoms.tail[k]) * (v[k + 1] - v[k]))
            .sum();
        return Ok(v[0] + sum);
    }
    q.validate()?;
    let mut points = Vec::with_capacity(8);
    points.push(lo);
    points.extend(kink_points(dist, &t.kinks(), lo, hi));
    points.push(hi);
    let body = integrate(
        |x| t.value(dist.survival(x)),
        &points,
        absolute_tolerance(q, hi - lo),
        q.rel_tol,
        q.max_subdivisions,
    )?;
    Ok(lo + body)
}

/// `max_k ∫ Z d(T_k∘P)` over the generators of `set`, with the index of a
/// maximizing generator (lowest index on ties).
///
/// The supremum over the convex hull of a functional linear in `T` is
/// attained at a generator.
pub fn coherent_risk(
    dist: &RiskDistribution,
    set: &DistortionSet,
    q: &QuadratureConfig,
) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (k, g) in set.generators().iter().enumerate() {
        let v = choquet_integral(dist, g, q)?;
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, k));
        }
    }
    best.ok_or_else(|| Error::InvalidDistortion("empty distortion set".into()))
}

/// `∫₀^span T(P(S > s + x)) g'(x) dx` with `s = ess inf S`: the distortion
/// risk of the retained amount `g(S − s)`.
pub fn distorted_retention(
    dist: &RiskDistribution,
    g: &Retention,
    t: &DistortionFunction,
    q: &QuadratureConfig,
) -> Result<f64> {
    let (lo, hi) = dist.essential_bounds();
    let span = hi - lo;
    if let Some(last) = g.breakpoints().last() {
        if *last > span + RETENTION_RANGE_TOL * span.max(1.0) {
            return Err(Error::InvalidRetention(alloc::format!(
                "retention breakpoint {last} exceeds the span {span} of the aggregate risk"
            )));
        }
    }
    if let Some(atoms) = dist.atoms() {
        let v = &atoms.values;
        return Ok((0..v.len().saturating_sub(1))
            .map(|k| t.value(atoms.tail[k]) * (g.eval(v[k + 1] - lo) - g.eval(v[k] - lo)))
            .sum());
    }
    q.validate()?;
    let kinks: Vec<f64> = kink_points(dist, &t.kinks(), lo, hi)
        .into_iter()
        .map(|x| x - lo)
        .collect();
    let mut total = 0.0;
    for (a, b, slope) in g.segments() {
        if slope == 0.0 {
            continue;
        }
        let b = b.min(span);
        if b <= a {
            continue;
        }
        let mut points = Vec::with_capacity(kinks.len() + 2);
        points.push(a);
        points.extend(kinks.iter().copied().filter(|x| *x > a && *x < b));
        points.push(b);
        total += slope
            * integrate(
                |x| t.value(dist.survival(lo + x)),
                &points,
                absolute_tolerance(q, b - a),
                q.rel_tol,
                q.max_subdivisions,
            )?;
    }
    Ok(total)
}

/// Coherent risk of the retained amount `g(S − ess inf S)`: the maximum of
/// [`distorted_retention`] over the generators of `set`.
pub fn risk_of_retention(
    dist: &RiskDistribution,
    g: &Retention,
    set: &DistortionSet,
    q: &QuadratureConfig,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for t in set.generators() {
        best = best.max(distorted_retention(dist, g, t, q)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn es(a: f64) -> DistortionFunction {
        DistortionFunction::expected_shortfall(a).unwrap()
    }

    fn two_point() -> RiskDistribution {
        RiskDistribution::discrete(vec![0.0, 10.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn identity_gives_mean() {
        let q = QuadratureConfig::default();
        let v = choquet_integral(&two_point(), &DistortionFunction::Identity, &q).unwrap();
        assert_eq!(v, 5.0);
        let u = RiskDistribution::uniform(-1.0, 3.0).unwrap();
        let v = choquet_integral(&u, &DistortionFunction::Identity, &q).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_is_returned_for_any_distortion() {
        let c = RiskDistribution::discrete(vec![4.2], vec![1.0]).unwrap();
        let q = QuadratureConfig::default();
        for t in [es(0.1), DistortionFunction::wang(1.0).unwrap(), DistortionFunction::Identity] {
            assert_eq!(choquet_integral(&c, &t, &q).unwrap(), 4.2);
        }
    }

    #[test]
    fn uniform_expected_shortfall_closed_form() {
        // ES_α of U(0,1) is 1 - α/2
        let u = RiskDistribution::uniform(0.0, 1.0).unwrap();
        let q = QuadratureConfig::default();
        for a in [0.01, 0.25, 0.6] {
            let v = choquet_integral(&u, &es(a), &q).unwrap();
            assert!((v - (1.0 - a / 2.0)).abs() < 1e-12, "a={a} v={v}");
        }
    }

    #[test]
    fn coherent_risk_examples() {
        let q = QuadratureConfig::default();
        let set = DistortionSet::singleton("id", DistortionFunction::Identity).unwrap();
        assert_eq!(coherent_risk(&two_point(), &set, &q).unwrap(), (5.0, 0));

        let g = RiskDistribution::gamma(2.0, 10.0).unwrap();
        let set = DistortionSet::new("agent 1", vec![es(0.025), es(0.01)]).unwrap();
        let (v, k) = coherent_risk(&g, &set, &q).unwrap();
        assert_eq!(k, 1);
        assert_eq!(v, choquet_integral(&g, &es(0.01), &q).unwrap());

        // two atoms {0, 1} with P(S = 1) = 0.1: the integral is T(0.1)
        let d = RiskDistribution::discrete(vec![0.0, 1.0], vec![0.9, 0.1]).unwrap();
        let t2 = DistortionFunction::power_tail(0.05, 0.3).unwrap();
        let set = DistortionSet::new("agent 2", vec![es(0.025), t2]).unwrap();
        let (v, k) = coherent_risk(&d, &set, &q).unwrap();
        // ES_2.5%: min(0.1/0.025, 1) = 1; power: min((0.1/0.05)^0.3, 1) = 1 -> tie, index 0
        assert_eq!((v, k), (1.0, 0));
        let d = RiskDistribution::discrete(vec![0.0, 1.0], vec![0.99, 0.01]).unwrap();
        let (v, k) = coherent_risk(&d, &set, &q).unwrap();
        let by_hand = (0.01f64 / 0.05).powf(0.3);
        assert!(by_hand > 0.4);
        assert_eq!(k, 1);
        assert!((v - by_hand).abs() < 1e-15);
    }

    #[test]
    fn retention_examples() {
        let q = QuadratureConfig::default();
        let g = RiskDistribution::gamma(2.0, 10.0).unwrap();
        let span = g.span();
        let id = DistortionSet::singleton("id", DistortionFunction::Identity).unwrap();
        let mean = risk_of_retention(&g, &Retention::identity(span), &id, &q).unwrap();
        assert!((mean - 20.0).abs() < 1e-5);
        assert_eq!(risk_of_retention(&g, &Retention::zero(), &id, &q).unwrap(), 0.0);

        let d = RiskDistribution::discrete(vec![2.0, 5.0, 9.0], vec![0.2, 0.5, 0.3]).unwrap();
        let v = risk_of_retention(&d, &Retention::identity(d.span()), &id, &q).unwrap();
        assert!((v - (0.2 * 0.0 + 0.5 * 3.0 + 0.3 * 7.0)).abs() < 1e-14);
    }

    #[test]
    fn retention_outside_span_is_rejected() {
        let q = QuadratureConfig::default();
        let d = two_point();
        let id = DistortionSet::singleton("id", DistortionFunction::Identity).unwrap();
        let err = risk_of_retention(&d, &Retention::identity(11.0), &id, &q).unwrap_err();
        assert!(matches!(err, Error::InvalidRetention(_)));
    }
}
