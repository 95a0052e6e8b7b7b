#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use riskshare_core::{DistortionFunction, DistortionSet, RiskDistribution};

pub fn es(alpha: f64) -> DistortionFunction {
    DistortionFunction::expected_shortfall(alpha).unwrap()
}

pub fn random_distortion(rng: &mut ChaCha8Rng) -> DistortionFunction {
    match rng.gen_range(0..5) {
        0 => es(rng.gen_range(0.05..0.95)),
        1 => DistortionFunction::power_tail(rng.gen_range(0.05..0.95), rng.gen_range(0.2..0.9))
            .unwrap(),
        2 => DistortionFunction::wang(rng.gen_range(0.1..2.0)).unwrap(),
        3 => DistortionFunction::Identity,
        _ => {
            // concave: decreasing increments
            let k = rng.gen_range(0.1..0.6);
            let v = rng.gen_range(k..1.0);
            DistortionFunction::piecewise_linear(vec![0.0, k, 1.0], vec![0.0, v, 1.0]).unwrap()
        }
    }
}

/// Strictly increasing non-negative atoms with random positive masses.
pub fn random_discrete(rng: &mut ChaCha8Rng, max_atoms: usize) -> RiskDistribution {
    let m = rng.gen_range(2..=max_atoms);
    let mut x = rng.gen_range(0.0..5.0);
    let mut atoms = Vec::with_capacity(m);
    for _ in 0..m {
        atoms.push(x);
        x += rng.gen_range(0.1..10.0);
    }
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let head: f64 = probs[..m - 1].iter().sum();
    probs[m - 1] = 1.0 - head;
    RiskDistribution::discrete(atoms, probs).unwrap()
}

pub fn random_sets(rng: &mut ChaCha8Rng, agents: usize, max_generators: usize) -> Vec<DistortionSet> {
    (0..agents)
        .map(|i| {
            let k = rng.gen_range(1..=max_generators);
            DistortionSet::new(format!("agent {}", i + 1), (0..k).map(|_| random_distortion(rng)).collect())
                .unwrap()
        })
        .collect()
}

/// `Σ_k p_k f(z_k)` style expectation helpers on equally likely samples are
/// left to the tests; this computes `ES_α` of a Gamma(2, θ) law truncated at
/// `upper` from its quantile function, independently of the library.
pub fn gamma2_truncated_es(scale: f64, upper: f64, alpha: f64) -> f64 {
    // (1 + z) e^{-z} = u solved by Newton in log form
    let var = |u: f64| -> f64 {
        let target = u.ln();
        let mut z: f64 = -target + (1.0 - target).ln();
        for _ in 0..100 {
            let f = (1.0 + z).ln() - z - target;
            let df = -z / (1.0 + z);
            let step = f / df;
            z -= step;
            if step.abs() < 1e-15 * z.max(1.0) {
                break;
            }
        }
        (scale * z).min(upper)
    };
    // tail of mass below the truncation point sits at `upper`
    let cut = {
        let zu = upper / scale;
        (1.0 + zu) * (-zu).exp()
    };
    let (a, b) = (cut.ln(), alpha.ln());
    let panels = 200_000;
    let h = (b - a) / panels as f64;
    let f = |t: f64| var(t.exp()) * t.exp();
    let mut sum = f(a) + f(b);
    for k in 1..panels {
        sum += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    (sum * h / 3.0 + cut * upper) / alpha
}
