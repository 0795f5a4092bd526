//! Monte Carlo against exact values at 4 standard errors.

use minpair::chain::{f_regularity_probe, hitting_analysis_exact, BetaFamily, BirthResetChain, CostFamily, ExpectedTime};
use minpair::models::{gen_example1, gen_random_mdp, random_policy, RandomMdpConfig};
use minpair::rng::{derive_seed, stream};
use minpair::{
    empirical_occupancy, exact_cesaro_occupancy, expected_average_cost, hitting_analysis_mc, pathwise_average_cost,
    simulate, ActionSpec, FiniteMdp, StationaryPolicy,
};
use rand::Rng;

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn one_step_frequencies() {
    let m = gen_random_mdp(&RandomMdpConfig::new(4, 2, 11)).unwrap();
    let pair = m.pair_index(2, 0);
    let row = m.row(pair);
    let choice: Vec<usize> = (0..4).map(|_| 0).collect();
    let pol = StationaryPolicy::deterministic(&m, &choice);
    let trials = 100_000u64;
    let mut counts = [0u64; 4];
    for i in 0..trials {
        let t = simulate(&m, &pol, &m.point_mass(2), 2, derive_seed(99, i)).unwrap();
        counts[t.steps[1].state] += 1;
    }
    for &(y, p) in row {
        let freq = counts[y] as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((freq - p).abs() <= 4.0 * se, "y={y} freq {freq} p {p}");
    }
}

#[test]
fn exact_average_within_mc_error() {
    let m = gen_random_mdp(&RandomMdpConfig::new(5, 3, 5).sparsity(0.3)).unwrap();
    let pol = random_policy(&m, 8);
    let init = m.point_mass(1);
    let n = 500;
    let exact = expected_average_cost(&m, &pol, &init, n, None).unwrap();
    let mc = pathwise_average_cost(&m, &pol, &init, n, 4000, 17).unwrap();
    let (mean, se) = mean_se(&mc.final_averages());
    assert!((mean - exact.j_n_over_n).abs() <= 4.0 * se, "{mean} ± {se} vs {}", exact.j_n_over_n);
}

#[test]
fn empirical_occupancy_converges_to_exact() {
    let m = gen_random_mdp(&RandomMdpConfig::new(3, 2, 21).sparsity(0.3)).unwrap();
    let pol = random_policy(&m, 4);
    let init = vec![0.2, 0.5, 0.3];
    let n = 40;
    let exact = exact_cesaro_occupancy(&m, &pol, &init, n).unwrap();
    let runs = 2000;
    let samples: Vec<Vec<f64>> = (0..runs)
        .map(|r| {
            let t = simulate(&m, &pol, &init, n, derive_seed(5, r)).unwrap();
            empirical_occupancy(&m, &t).unwrap().weights().to_vec()
        })
        .collect();
    for j in 0..m.n_pairs() {
        let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        let (mean, se) = mean_se(&col);
        let e = exact.weights()[j];
        assert!((mean - e).abs() <= 4.0 * se.max(1e-12), "pair {j}: {mean} ± {se} vs {e}");
    }
}

#[test]
fn expected_hitting_time_matches_simulation() {
    // β_i = 1/2: E_i[τ₀] = 2
    let (m, chain) = gen_example1(BetaFamily::Constant(0.5), CostFamily::Indicator, 200).unwrap();
    let exact = hitting_analysis_exact(&chain, 10_000).unwrap();
    let e1 = match exact.state(1).unwrap().expected_hitting_time {
        ExpectedTime::Finite { value, .. } => value,
        other => panic!("unexpected {other}"),
    };
    assert!((e1 - 2.0).abs() < 1e-12);
    let pol = StationaryPolicy::uniform(&m);
    let mc = hitting_analysis_mc(&m, &pol, &[0], &[1, 3], 20_000, 1000, 3).unwrap();
    for x in [1, 3] {
        let s = mc.state(x).unwrap();
        let ev = s.monte_carlo.unwrap();
        assert_eq!(ev.censored_fraction, 0.0);
        match s.expected_hitting_time {
            ExpectedTime::Estimated { mean, std_error } => {
                assert!((mean - 2.0).abs() <= 4.0 * std_error, "{mean} ± {std_error}");
            }
            other => panic!("unexpected {other}"),
        }
    }
}

#[test]
fn f_sum_matches_simulation() {
    // β_i = 1 − 1/(i+1)², f(i) = i + 1
    let beta = BetaFamily::custom("1-1/(i+1)^2", |i| 1.0 - 1.0 / ((i + 1) as f64).powi(2));
    let chain = BirthResetChain::new(beta.clone(), CostFamily::Indicator, 10).unwrap();
    let f = |i: usize| (i + 1) as f64;
    let probe = f_regularity_probe(&chain, &f, 10_000).unwrap();
    assert_eq!(probe.verdict, minpair::Ternary::Yes);
    let exact = probe.per_state[0].1.partial();
    // Σ f(x_k) over k < τ₀ from x₀ = 1
    let runs = 50_000u64;
    let sums: Vec<f64> = (0..runs)
        .map(|r| {
            let mut rng = stream(derive_seed(77, r));
            let mut x = 1usize;
            let mut total = 0.0;
            loop {
                total += f(x);
                if rng.random::<f64>() < beta.beta(x) {
                    break;
                }
                x += 1;
            }
            total
        })
        .collect();
    let (mean, se) = mean_se(&sums);
    assert!((mean - exact).abs() <= 4.0 * se, "{mean} ± {se} vs {exact}");
}

#[test]
fn harris_variant_hits_reset_state() {
    let n = 10_000;
    let (m, _) = gen_example1(BetaFamily::Harmonic, CostFamily::Linear { offset: 0.0 }, n + 2).unwrap();
    let pol = StationaryPolicy::uniform(&m);
    let r = hitting_analysis_mc(&m, &pol, &[0], &[1], 1000, n, 12).unwrap();
    assert!(r.state(1).unwrap().hitting_probability >= 0.99);
    // running averages from state 1 concentrate at ρ* = 0
    let pw = pathwise_average_cost(&m, &pol, &m.point_mass(1), n, 400, 5).unwrap();
    assert!(pw.quantiles.q50 < 0.01, "median {}", pw.quantiles.q50);
}

#[test]
fn nonharris_escape_fraction() {
    let n = 10_000;
    let (m, _) = gen_example1(BetaFamily::Telescoping, CostFamily::Indicator, n + 2).unwrap();
    let pol = StationaryPolicy::uniform(&m);
    let paths = 2000;
    let r = hitting_analysis_mc(&m, &pol, &[0], &[1], paths, n, 8).unwrap();
    let esc = r.state(1).unwrap().escape_probability;
    let se = (1.0 / 3.0 * 2.0 / 3.0 / paths as f64).sqrt();
    assert!((esc - 1.0 / 3.0).abs() <= 3.0 * se, "escape {esc}");
    assert_eq!(r.classification, minpair::Classification::PositiveNotHarris);
}

#[test]
fn single_state_pathwise_is_exact() {
    let m = FiniteMdp::new(1, vec![vec![ActionSpec::dense(0, &[1.0], 3.0)]]);
    let pw = pathwise_average_cost(&m, &StationaryPolicy::uniform(&m), &[1.0], 100, 10, 0).unwrap();
    for p in &pw.paths {
        assert!(p.averages.iter().all(|&a| a == 3.0));
    }
}
