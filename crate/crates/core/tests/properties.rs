mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riskshare_core::allocation::{DEFAULT_SCAN_GRID, DEFAULT_TIE_TOL};
use riskshare_core::solver::evaluate;
use riskshare_core::{
    balanced_retentions, build_retentions, choquet_integral, coherent_risk, concavity_check, layer_structure, objective,
    side_payments, solve, verify, DistortionFunction, DistortionSet, GainSplit, MinMaxProblem,
    QuadratureConfig, RiskDistribution, SolverOptions, TieRule,
};

fn distortion() -> impl Strategy<Value = DistortionFunction> {
    prop_oneof![
        (0.01f64..1.0).prop_map(|a| DistortionFunction::expected_shortfall(a).unwrap()),
        (0.01f64..1.0, 0.1f64..1.0)
            .prop_map(|(a, e)| DistortionFunction::power_tail(a, e).unwrap()),
        (0.0f64..3.0).prop_map(|c| DistortionFunction::wang(c).unwrap()),
        Just(DistortionFunction::Identity),
    ]
}

fn set() -> impl Strategy<Value = DistortionSet> {
    prop::collection::vec(distortion(), 1..=3).prop_map(|g| DistortionSet::new("s", g).unwrap())
}

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 1..25)
}

fn risk(samples: &[f64], set: &DistortionSet) -> f64 {
    let d = RiskDistribution::empirical(samples.to_vec()).unwrap();
    coherent_risk(&d, set, &QuadratureConfig::default()).unwrap().0
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

fn seed() -> impl Strategy<Value = u64> {
    any::<u64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn positive_homogeneity(z in samples(), s in set(), c in 0.0f64..20.0) {
        let scaled: Vec<f64> = z.iter().map(|v| c * v).collect();
        let (a, b) = (risk(&scaled, &s), c * risk(&z, &s));
        prop_assert!(close(a, b, 50.0 * c), "{a} vs {b}");
    }

    #[test]
    fn translation_invariance(z in samples(), s in set(), m in -30.0f64..30.0) {
        let shifted: Vec<f64> = z.iter().map(|v| v + m).collect();
        let (a, b) = (risk(&shifted, &s), risk(&z, &s) + m);
        prop_assert!(close(a, b, 80.0), "{a} vs {b}");
    }

    #[test]
    fn monotonicity(z in samples(), s in set(), bumps in prop::collection::vec(0.0f64..10.0, 25)) {
        let w: Vec<f64> = z.iter().zip(&bumps).map(|(v, d)| v + d).collect();
        prop_assert!(risk(&z, &s) <= risk(&w, &s) + 1e-9 * 60.0);
    }

    #[test]
    fn comonotone_additivity(
        mut z in samples(),
        seedw in seed(),
        t in distortion(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seedw);
        use rand::Rng;
        let mut w: Vec<f64> = z.iter().map(|_| rng.gen_range(-20.0..20.0)).collect();
        z.sort_by(f64::total_cmp);
        w.sort_by(f64::total_cmp);
        let sum: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a + b).collect();
        let s = DistortionSet::singleton("t", t).unwrap();
        let (lhs, rhs) = (risk(&sum, &s), risk(&z, &s) + risk(&w, &s));
        prop_assert!(close(lhs, rhs, 70.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn subadditivity(z in samples(), s in set(), seedw in seed()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seedw);
        let w: Vec<f64> = z.iter().map(|_| rng.gen_range(-20.0..20.0)).collect();
        let sum: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a + b).collect();
        prop_assert!(risk(&sum, &s) <= risk(&z, &s) + risk(&w, &s) + 1e-9 * 70.0);
    }

    #[test]
    fn distortions_are_concave_and_monotone(t in distortion()) {
        prop_assert!(concavity_check(&t, 1001));
        prop_assert_eq!(t.value(0.0), 0.0);
        prop_assert_eq!(t.value(1.0), 1.0);
    }

    #[test]
    fn identity_risk_is_the_mean(z in samples()) {
        let s = DistortionSet::singleton("id", DistortionFunction::Identity).unwrap();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        prop_assert!(close(risk(&z, &s), mean, 50.0));
    }

    #[test]
    fn objective_is_concave(seedv in seed(), theta in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seedv);
        let p = MinMaxProblem::new(
            common::random_discrete(&mut rng, 12),
            common::random_sets(&mut rng, 3, 3),
            QuadratureConfig::default(),
        ).unwrap();
        let a = random_weights(&mut rng, &p);
        let b = random_weights(&mut rng, &p);
        let mid: Vec<Vec<f64>> = a.iter().zip(&b)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| theta * u + (1.0 - theta) * v).collect())
            .collect();
        let (fa, fb, fm) = (objective(&p, &a).unwrap(), objective(&p, &b).unwrap(), objective(&p, &mid).unwrap());
        prop_assert!(fm >= theta * fa + (1.0 - theta) * fb - 1e-9 * p.scale());
    }

    #[test]
    fn supergradient_inequality(seedv in seed()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seedv);
        let p = MinMaxProblem::new(
            common::random_discrete(&mut rng, 12),
            common::random_sets(&mut rng, 3, 3),
            QuadratureConfig::default(),
        ).unwrap();
        let a = random_weights(&mut rng, &p);
        let b = random_weights(&mut rng, &p);
        let e = evaluate(&p, &a, 64).unwrap();
        let fb = objective(&p, &b).unwrap();
        let lin: f64 = e.supergradient.iter().flatten()
            .zip(b.iter().flatten().zip(a.iter().flatten()))
            .map(|(g, (x, y))| g * (x - y))
            .sum();
        prop_assert!(fb <= e.value + lin + 1e-9 * p.scale());
    }
}

fn random_weights(rng: &mut ChaCha8Rng, p: &MinMaxProblem) -> Vec<Vec<f64>> {
    use rand::Rng;
    p.sets()
        .iter()
        .map(|s| {
            let raw: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.0..1.0f64) + 1e-3).collect();
            let t: f64 = raw.iter().sum();
            raw.iter().map(|r| r / t).collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn solver_value_dominates_every_feasible_point(seedv in seed()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seedv);
        let p = MinMaxProblem::new(
            common::random_discrete(&mut rng, 10),
            common::random_sets(&mut rng, 3, 2),
            QuadratureConfig::default(),
        ).unwrap();
        let s = solve(&p, &SolverOptions::default()).unwrap();
        prop_assert!(s.convergence.converged);
        prop_assert!(s.convergence.history.windows(2).all(|w| w[1] >= w[0]));
        for _ in 0..20 {
            let w = random_weights(&mut rng, &p);
            prop_assert!(objective(&p, &w).unwrap() <= s.value + 1e-9 * p.scale());
        }
        // each agent alone bears at least the optimum
        for set in p.sets() {
            let r = coherent_risk(p.dist(), set, p.quad()).unwrap().0;
            prop_assert!(s.value + p.lower_bound() <= r + 1e-9 * p.scale());
        }
    }

    #[test]
    fn pipeline_verifies_with_proportional_shares(seedv in seed(), rule in 0..3usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seedv);
        let p = MinMaxProblem::new(
            common::random_discrete(&mut rng, 10),
            common::random_sets(&mut rng, 3, 2),
            QuadratureConfig::default(),
        ).unwrap();
        let s = solve(&p, &SolverOptions::default()).unwrap();
        let theta = [0.5, 0.3, 0.2];
        let initial: Vec<f64> = p.sets().iter().zip(theta)
            .map(|(set, t)| t * coherent_risk(p.dist(), set, p.quad()).unwrap().0)
            .collect();
        let l = layer_structure(&s, p.dist(), DEFAULT_TIE_TOL, DEFAULT_SCAN_GRID).unwrap();
        let prof = match rule {
            0 => balanced_retentions(&l, &p, &s).unwrap(),
            1 => build_retentions(&l, &TieRule::EqualSplit).unwrap(),
            _ => build_retentions(&l, &TieRule::LowestIndex).unwrap(),
        };
        let sp = side_payments(&prof, &p, &initial, &GainSplit::Equal).unwrap();
        prop_assert!(((sp.c.iter().sum::<f64>()) - p.lower_bound()).abs() <= 1e-9 * p.scale());
        let mut prof = prof.with_side_payments(sp.c);
        prof.s_lower = p.lower_bound();
        let r = verify(&prof, &p, &s, &initial).unwrap();
        if rule == 0 {
            prop_assert!(r.passed(), "{:?}", r);
        } else {
            // a fixed split of tied atom gaps can waste risk capital, never create it
            prop_assert!(r.feasible && r.comonotone && r.layer_condition, "{:?}", r);
            prop_assert!(r.individually_rational.iter().all(|b| *b));
            prop_assert!(r.optimality_residual >= -1e-5 * r.target.abs(), "{:?}", r);
        }
    }
}

#[test]
fn constant_risk_has_no_layers() {
    let d = RiskDistribution::discrete(vec![5.0], vec![1.0]).unwrap();
    let q = QuadratureConfig::default();
    assert_eq!(choquet_integral(&d, &common::es(0.3), &q).unwrap(), 5.0);
}
