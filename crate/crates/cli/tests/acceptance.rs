//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskshare::config::Endowment;
use riskshare::{load, run, Overrides};
use riskshare_core::allocation::{DEFAULT_SCAN_GRID, DEFAULT_TIE_TOL};
use riskshare_core::oracle::{
    brute_force_layer_allocations, brute_force_minmax, DiscreteInstance, DEFAULT_WEIGHT_GRID_STEP,
    MAX_EVALUATIONS, MAX_SHARE_GRID,
};
use riskshare_core::quadrature::integrate;
use riskshare_core::{
    choquet_integral, coherent_risk, layer_structure, solve, verify, DistortionFunction,
    DistortionSet, GainSplit, MinMaxProblem, MinMaxSolution, QuadratureConfig, RiskDistribution,
    SolverOptions,
};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: u64, what: &str) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_s as f64 {
        Ok(())
    } else {
        Err(format!("{what} took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()))
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn gamma_market() -> MinMaxProblem {
    let es = |a| DistortionFunction::expected_shortfall(a).unwrap();
    let sets = vec![
        DistortionSet::singleton("1", es(0.01)).unwrap(),
        DistortionSet::new("2", vec![es(0.025), DistortionFunction::power_tail(0.05, 0.3).unwrap()])
            .unwrap(),
        DistortionSet::new("3", vec![es(0.025), DistortionFunction::wang(2.8).unwrap()]).unwrap(),
    ];
    MinMaxProblem::new(
        RiskDistribution::gamma(2.0, 10.0).unwrap(),
        sets,
        QuadratureConfig::default(),
    )
    .unwrap()
}

fn solve_gamma(p: &MinMaxProblem) -> Result<(MinMaxSolution, String), String> {
    let t = Instant::now();
    let s = solve(p, &SolverOptions::default()).map_err(|e| e.to_string())?;
    within(t.elapsed(), 60, "solve")?;
    let detail = format!(
        "agent 3 weight on ES 2.5% = {:.6}, agent 2 weights = ({:.2e}, {:.6}), {} ms",
        s.weights[2][0],
        s.weights[1][0],
        s.weights[1][1],
        t.elapsed().as_millis()
    );
    Ok((s, detail))
}

fn weights(p: &MinMaxProblem) -> Outcome {
    let (s, detail) = solve_gamma(p)?;
    let ok = s.convergence.converged
        && (s.weights[2][0] - 0.2269).abs() <= 0.005
        && s.weights[1][1] >= 1.0 - 1e-3
        && s.weights[0] == [1.0];
    check(ok, detail)
}

fn layers(p: &MinMaxProblem) -> Outcome {
    let (s, _) = solve_gamma(p)?;
    let t = Instant::now();
    let l = layer_structure(&s, p.dist(), DEFAULT_TIE_TOL, DEFAULT_SCAN_GRID)
        .map_err(|e| e.to_string())?;
    within(t.elapsed(), 10, "layer extraction")?;
    let labels: Vec<Vec<String>> = l
        .sets
        .iter()
        .map(|set| set.iter().map(|i| p.sets()[*i].label().to_string()).collect())
        .collect();
    let sw = l.switches();
    let want = [53.302, 68.164, 74.287];
    let ok = sw.len() == 3
        && sw.iter().zip(want).all(|(b, w)| (b - w).abs() <= 0.1)
        && labels == [["3"], ["2"], ["3"], ["1"]];
    check(ok, format!("breakpoints {sw:.3?}, sets {labels:?}"))
}

fn moments() -> Outcome {
    let g = RiskDistribution::gamma(2.0, 10.0).unwrap();
    let (lo, hi) = g.essential_bounds();
    let quad = |f: &dyn Fn(f64) -> f64| {
        integrate(f, &[lo, hi], 1e-12, 1e-12, 1 << 12).map_err(|e| e.to_string())
    };
    let mean = quad(&|x| g.survival(x))?;
    let var = quad(&|x| 2.0 * x * g.survival(x))? - mean * mean;
    let ok = (mean - 20.0).abs() <= 1e-3 * 20.0 && (var - 200.0).abs() <= 1e-3 * 200.0;
    check(ok, format!("mean {mean:.9}, variance {var:.9}"))
}

fn expected_shortfall() -> Outcome {
    let g = RiskDistribution::gamma(2.0, 10.0).unwrap();
    let upper = g.essential_bounds().1;
    let mut worst: f64 = 0.0;
    for alpha in [0.01, 0.025, 0.05] {
        let t = DistortionFunction::expected_shortfall(alpha).unwrap();
        let choquet = choquet_integral(&g, &t, &QuadratureConfig::default())
            .map_err(|e| e.to_string())?;
        let oracle = common::gamma2_truncated_es(10.0, upper, alpha);
        worst = worst.max((choquet - oracle).abs() / oracle);
    }
    check(worst <= 1e-5, format!("worst relative error {worst:.2e}"))
}

// `ess inf S + Σ Δx · min_i T_i(P(S > x))`, straight from the masses.
fn min_distortion_integral(dist: &RiskDistribution, ts: &[&DistortionFunction]) -> f64 {
    let atoms = dist.atoms().unwrap();
    let v = &atoms.values;
    let mut total = v[0];
    for k in 0..v.len() - 1 {
        let tail: f64 = atoms.masses[k + 1..].iter().sum();
        let m = ts.iter().map(|t| t.value(tail)).fold(f64::INFINITY, f64::min);
        total += (v[k + 1] - v[k]) * m;
    }
    total
}

// Finest share grid whose enumeration fits the oracle's budget.
fn share_grid(inst: &DiscreteInstance) -> usize {
    let agents = inst.sets().len() as u64;
    let gaps = inst.dist().atoms().unwrap().values.len() as u32 - 1;
    (2..=MAX_SHARE_GRID)
        .rev()
        .find(|g| {
            let k = *g as u64 - 1;
            // compositions of k into `agents` parts
            let per_gap = (1..agents).fold(1u64, |acc, j| acc * (k + j) / j);
            per_gap.checked_pow(gaps).is_some_and(|c| c <= MAX_EVALUATIONS)
        })
        .unwrap_or(2)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let dist = common::random_discrete(&mut rng, 12);
        let agents = rng.gen_range(2..=3);
        let sets = common::random_sets(&mut rng, agents, 2);
        let inst = DiscreteInstance::new(dist.clone(), sets.clone(), DEFAULT_WEIGHT_GRID_STEP)
            .map_err(|e| e.to_string())?;
        let (grid, _) = brute_force_minmax(&inst).map_err(|e| e.to_string())?;
        let p = MinMaxProblem::new(dist, sets, QuadratureConfig::default()).unwrap();
        let s = solve(&p, &SolverOptions::default()).map_err(|e| e.to_string())?;
        worst = worst.max((s.value - grid).abs() / p.scale());
    }

    // dual-utility instances: the bundled three-atom market and random ones
    let market = load(&configs().join("dual_utility.json"), &Overrides::default())
        .map_err(|e| e.to_string())?;
    let mut instances = vec![(market.dist, market.sets)];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let dist = common::random_discrete(&mut rng, 5);
        let agents = rng.gen_range(2..=3);
        let sets = common::random_sets(&mut rng, agents, 1);
        instances.push((dist, sets));
    }
    let mut worst_layer: f64 = 0.0;
    for (dist, sets) in instances {
        let ts: Vec<&DistortionFunction> = sets.iter().map(|s| &s.generators()[0]).collect();
        let want = min_distortion_integral(&dist, &ts);
        let inst = DiscreteInstance::new(dist, sets.clone(), DEFAULT_WEIGHT_GRID_STEP)
            .map_err(|e| e.to_string())?;
        let e = brute_force_layer_allocations(&inst, share_grid(&inst)).map_err(|e| e.to_string())?;
        worst_layer = worst_layer.max((e.min_total - want).abs() / want.abs().max(1.0));
    }
    within(start.elapsed(), 60, "oracle comparison")?;
    check(
        worst <= 2e-3 && worst_layer <= 1e-12,
        format!(
            "worst solver gap {worst:.2e}·scale, worst layer-enumeration error {worst_layer:.1e}, {} ms",
            start.elapsed().as_millis()
        ),
    )
}

fn degeneracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let dist = common::random_discrete(&mut rng, 5);
        let t = common::random_distortion(&mut rng);
        let agents = rng.gen_range(2..=3);
        let sets: Vec<DistortionSet> = (0..agents)
            .map(|i| DistortionSet::singleton(format!("{i}"), t.clone()).unwrap())
            .collect();
        let rho = choquet_integral(&dist, &t, &QuadratureConfig::default()).unwrap();
        let inst = DiscreteInstance::new(dist, sets, DEFAULT_WEIGHT_GRID_STEP).unwrap();
        let e = brute_force_layer_allocations(&inst, share_grid(&inst)).map_err(|e| e.to_string())?;
        let spread = (e.max_total - rho).abs().max((e.min_total - rho).abs());
        worst = worst.max(spread / rho.abs().max(1.0));
    }
    check(worst <= 1e-12, format!("worst deviation from rho(S) {worst:.1e}"))
}

// Law of a random variable on a finite probability space.
fn law(values: &[f64], probs: &[f64]) -> RiskDistribution {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(probs.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut atoms: Vec<f64> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    for (v, p) in pairs {
        if atoms.last() == Some(&v) {
            *masses.last_mut().unwrap() += p;
        } else {
            atoms.push(v);
            masses.push(p);
        }
    }
    RiskDistribution::discrete(atoms, masses).unwrap()
}

fn coherence() -> Outcome {
    let q = QuadratureConfig::default();
    let rho = |v: &[f64], p: &[f64], s: &DistortionSet| coherent_risk(&law(v, p), s, &q).unwrap().0;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = [0.0f64; 4];
    for _ in 0..200 {
        let m = rng.gen_range(2..=12);
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|r| r / sum).collect();
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let set = common::random_sets(&mut rng, 1, 3).remove(0);
        let base = rho(&x, &p, &set);

        let c = rng.gen_range(0.0..20.0);
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        worst[0] = worst[0].max((rho(&scaled, &p, &set) - c * base).abs());

        let shift = rng.gen_range(-30.0..30.0);
        let moved: Vec<f64> = x.iter().map(|v| v + shift).collect();
        worst[1] = worst[1].max((rho(&moved, &p, &set) - base - shift).abs());

        let bigger: Vec<f64> = x.iter().map(|v| v + rng.gen_range(0.0..10.0)).collect();
        worst[2] = worst[2].max(base - rho(&bigger, &p, &set));

        let mut xs = x.clone();
        xs.sort_by(f64::total_cmp);
        let mut ys: Vec<f64> = (0..m).map(|_| rng.gen_range(-20.0..20.0)).collect();
        ys.sort_by(f64::total_cmp);
        let zs: Vec<f64> = xs.iter().zip(&ys).map(|(a, b)| a + b).collect();
        let single = DistortionSet::singleton("t", common::random_distortion(&mut rng)).unwrap();
        let lhs = rho(&zs, &p, &single);
        let rhs = rho(&xs, &p, &single) + rho(&ys, &p, &single);
        worst[3] = worst[3].max((lhs - rhs).abs());
    }
    check(
        worst.iter().all(|w| *w <= 1e-9),
        format!(
            "homogeneity {:.1e}, translation {:.1e}, monotonicity {:.1e}, comonotone additivity {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn allocation() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for name in ["gamma_three_agents.json", "small_discrete.json"] {
        let market = load(&configs().join(name), &Overrides::default()).map_err(|e| e.to_string())?;
        if !market.endowments.iter().all(|e| matches!(e, Endowment::Proportional(_))) {
            return Err(format!("{name}: initial positions are not proportional shares"));
        }
        let out = run(&market).map_err(|e| e.to_string())?;
        let v = &out.verification;
        let target = out.solution.value + out.problem.lower_bound();
        let rel = (v.total_after - target).abs() / target.abs();
        ok &= rel <= 1e-3 && v.individually_rational.iter().all(|b| *b);
        ok &= out.report.agents.iter().all(|a| a.gain == out.report.agents[0].gain);
        details.push(format!("{name}: sum rho(Y) off by {rel:.1e}, IR {:?}", v.individually_rational));
    }

    // hand the (53, 68) layer of the Gamma market to agent 1 instead of agent 2
    let market = load(&configs().join("gamma_three_agents.json"), &Overrides::default())
        .map_err(|e| e.to_string())?;
    let out = run(&market).map_err(|e| e.to_string())?;
    let mut bad = out.profile.clone();
    bad.slopes[0][1] = 1.0;
    bad.slopes[1][1] = 0.0;
    let initial = riskshare::pipeline::initial_risks(&market).map_err(|e| e.to_string())?;
    let sp = riskshare_core::side_payments(&bad, &out.problem, &initial, &GainSplit::Equal)
        .map_err(|e| e.to_string())?;
    let mut bad = bad.with_side_payments(sp.c);
    bad.s_lower = out.problem.lower_bound();
    let r = verify(&bad, &out.problem, &out.solution, &initial).map_err(|e| e.to_string())?;
    ok &= r.layer_residual > 0.0 && !r.passed();
    details.push(format!("corrupted profile layer residual {:.3e}", r.layer_residual));
    check(ok, details.join("; "))
}

fn main() -> ExitCode {
    let gamma = gamma_market();
    let criteria: Vec<Criterion> = vec![
        ("optimal weights on the Gamma(2, 10) market", Box::new(|| weights(&gamma))),
        ("layer breakpoints and sets", Box::new(|| layers(&gamma))),
        ("Gamma(2, 10) mean and variance", Box::new(moments)),
        ("expected shortfall against the quantile side", Box::new(expected_shortfall)),
        ("solver against brute-force oracles", Box::new(oracle_equivalence)),
        ("identical sets make every allocation optimal", Box::new(degeneracy)),
        ("coherence axioms on discrete laws", Box::new(coherence)),
        ("allocation pipeline verification", Box::new(allocation)),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("PASS {}. {name}: {d}", k + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {}. {name}: {d}", k + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
