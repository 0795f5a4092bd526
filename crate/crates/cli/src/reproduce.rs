//! Composite reports for the two worked examples. Every row is one numeric
//! claim with its target and tolerance; Monte Carlo rows draw their seeds
//! from the single `--seed`.

use minpair::certify::{
    check_g_example2, check_m_density, check_m_example2, check_m_finite, check_su_example2, DensityProblem, Interval,
    Kernel,
};
use minpair::evaluator::DEFAULT_VI_TOL;
use minpair::models::{example2_argmin_policy, gen_example2, Example1Preset, Example2Config};
use minpair::rng::derive_seed;
use minpair::{
    classify_series, discount_sweep, expected_average_cost, f_regularity_probe, hitting_analysis_exact,
    hitting_analysis_mc, pathwise_average_cost, solve_min_pair, verify_minimum_pair, Classification, Policy,
    StationaryPolicy, Ternary, VerifyOptions,
};

use crate::report::{CheckRow, Failure};

const EXACT_DEPTH: usize = 1_000_000;

/// Base seed of Monte Carlo run `k`; runs are 2³² paths apart so their
/// per-path streams never overlap.
fn sub_seed(seed: u64, k: u64) -> u64 {
    derive_seed(seed, k << 32)
}

fn core(module: &'static str, invariant: &'static str) -> impl Fn(minpair::Error) -> Failure {
    move |e| Failure::from_core(module, invariant, e)
}

pub fn example1(seed: u64) -> Result<Vec<CheckRow>, Failure> {
    let mut rows = Vec::new();
    let gen = "model-gen";

    // transition structure
    let (harris, _) = Example1Preset::Harris.build(50).map_err(core(gen, "example1-valid"))?;
    rows.push(CheckRow::holds(gen, "ex1_state0_absorbing", harris.row(harris.pair_index(0, 0)) == [(0, 1.0)]));
    let indicator_ok = (0..harris.n_states()).all(|x| harris.cost(harris.pair_index(x, 0)) == if x == 0 { 0.0 } else { 1.0 });
    rows.push(CheckRow::holds(gen, "ex1_indicator_cost_vector", indicator_ok));
    let (linear, _) = Example1Preset::LinearCost.build(50).map_err(core(gen, "example1-valid"))?;
    rows.push(CheckRow::holds(gen, "ex1_harmonic_model_valid", linear.validate().is_empty()));
    let weight = |m: &minpair::FiniteMdp, x: usize, y: usize| {
        m.row(m.pair_index(x, 0)).iter().find(|e| e.0 == y).map_or(0.0, |e| e.1)
    };
    rows.push(CheckRow::near(gen, "ex1_harmonic_row5_to_0", weight(&linear, 5, 0), 1.0 / 6.0, 1e-15));
    rows.push(CheckRow::near(gen, "ex1_harmonic_row5_to_6", weight(&linear, 5, 6), 5.0 / 6.0, 1e-15));
    let (nonharris, _) = Example1Preset::NonHarris.build(50).map_err(core(gen, "example1-valid"))?;
    rows.push(CheckRow::near(gen, "ex1_telescoping_row1_to_0", weight(&nonharris, 1, 0), 1.0 / 3.0, 1e-15));
    rows.push(CheckRow::near(gen, "ex1_telescoping_row1_to_2", weight(&nonharris, 1, 2), 2.0 / 3.0, 1e-15));

    // J(i) = i for β_i = 1/(i+1), c(i) = i + 1
    let n = 10_000;
    let (lin_long, _) = Example1Preset::LinearCost.build(n + 30).map_err(core(gen, "example1-valid"))?;
    let uniform = StationaryPolicy::uniform(&lin_long);
    for i in [1usize, 5, 20] {
        let est = expected_average_cost(&lin_long, &uniform, &lin_long.point_mass(i), n, None)
            .map_err(core("evaluator", "expected-average-cost"))?;
        rows.push(CheckRow::near("evaluator", &format!("ex1_linear_cost_J_over_n_i{i}"), est.j_n_over_n, i as f64, 0.01 * i as f64));
    }

    // ρ* = 0 at δ₀, m_α = 0
    let (hl, _) = Example1Preset::HarrisLinear.build(200).map_err(core(gen, "example1-valid"))?;
    let s = solve_min_pair(&hl).map_err(core("minpair-solver", "lp-optimal"))?;
    rows.push(CheckRow::near("minpair-solver", "ex1_rho_star", s.rho_star, 0.0, 1e-9));
    rows.push(CheckRow::near("minpair-solver", "ex1_p_star_mass_at_0", s.pair.state_marginal[0], 1.0, 1e-9));
    for e in discount_sweep(&hl, &[0.9, 0.99, 0.999], DEFAULT_VI_TOL).map_err(core("evaluator", "discount-sweep"))? {
        match e.outcome {
            Ok(p) => {
                rows.push(CheckRow::near("evaluator", &format!("ex1_m_alpha_{}", e.alpha), p.m_alpha, 0.0, 1e-9));
                rows.push(CheckRow::near("evaluator", &format!("ex1_scaled_m_alpha_{}", e.alpha), p.scaled_m_alpha, 0.0, 1e-9));
            }
            Err(_) => rows.push(CheckRow::holds("evaluator", &format!("ex1_m_alpha_{}_converged", e.alpha), false)),
        }
    }

    // non-Harris truncation: J(i) > ρ* off the support is informational
    let (nh, _) = Example1Preset::NonHarris.build(30).map_err(core(gen, "example1-valid"))?;
    let snh = solve_min_pair(&nh).map_err(core("minpair-solver", "lp-optimal"))?;
    let opts = VerifyOptions {
        horizon: 2000,
        ..Default::default()
    };
    let ver = verify_minimum_pair(&nh, &snh, &[StationaryPolicy::uniform(&nh)], &opts)
        .map_err(core("minpair-solver", "verify-minimum-pair"))?;
    let informational = ver.checks.iter().any(|c| c.informational && !c.passed);
    rows.push(CheckRow::holds("minpair-solver", "ex1_nonharris_off_support_informational", ver.passed() && informational));

    // harmonic family: positive Harris, E_1[τ₀] = ∞, not regular
    let (_, h_chain) = Example1Preset::Harris.build(5).map_err(core(gen, "example1-valid"))?;
    let hr = hitting_analysis_exact(&h_chain, EXACT_DEPTH).map_err(core("chain-diagnostics", "hitting-exact"))?;
    let h1 = hr.state(1).expect("state 1 reported");
    rows.push(CheckRow::near("chain-diagnostics", "ex1_harmonic_escape_from_1", h1.escape_probability, 0.0, 1e-6));
    rows.push(CheckRow::holds("chain-diagnostics", "ex1_harmonic_positive_harris", hr.classification == Classification::PositiveHarris));
    rows.push(CheckRow::holds("chain-diagnostics", "ex1_harmonic_return_time_infinite", h1.expected_hitting_time.is_infinite()));
    // P_1(τ₀ > k) = 1/(k+1)
    let terms: Vec<f64> = (0..EXACT_DEPTH).map(|k| 1.0 / (k as f64 + 1.0)).collect();
    let log_depth = classify_series(&terms).log_depth_to_exceed(1e4).unwrap_or(f64::INFINITY);
    rows.push(CheckRow::at_most("chain-diagnostics", "ex1_harmonic_log_depth_to_exceed_1e4", log_depth, 1e4, 100.0));
    let probe = f_regularity_probe(&h_chain, &|_| 1.0, EXACT_DEPTH).map_err(core("chain-diagnostics", "f-regularity"))?;
    rows.push(CheckRow::holds("chain-diagnostics", "ex1_harmonic_not_regular", probe.verdict == Ternary::No));

    // telescoping family: escape 1/3
    let (_, t_chain) = Example1Preset::NonHarris.build(5).map_err(core(gen, "example1-valid"))?;
    let tr = hitting_analysis_exact(&t_chain, EXACT_DEPTH).map_err(core("chain-diagnostics", "hitting-exact"))?;
    let t1 = tr.state(1).expect("state 1 reported");
    rows.push(CheckRow::near("chain-diagnostics", "ex1_telescoping_escape_from_1", t1.escape_probability, 1.0 / 3.0, 1e-6));
    rows.push(CheckRow::holds(
        "chain-diagnostics",
        "ex1_telescoping_positive_not_harris",
        tr.classification == Classification::PositiveNotHarris,
    ));
    let paths = 10_000;
    let (nh_long, _) = Example1Preset::NonHarris.build(n + 2).map_err(core(gen, "example1-valid"))?;
    let mc = hitting_analysis_mc(&nh_long, &StationaryPolicy::uniform(&nh_long), &[0], &[1], paths, n, sub_seed(seed, 1))
        .map_err(core("chain-diagnostics", "hitting-monte-carlo"))?;
    let se = (1.0 / 3.0 * 2.0 / 3.0 / paths as f64).sqrt();
    rows.push(CheckRow::near(
        "chain-diagnostics",
        "ex1_telescoping_escape_mc",
        mc.state(1).expect("state 1 reported").escape_probability,
        1.0 / 3.0,
        3.0 * se,
    ));

    // Harris variant with c(i) = i: running averages from 1 settle at ρ* = 0
    let (hl_long, _) = Example1Preset::HarrisLinear.build(n + 2).map_err(core(gen, "example1-valid"))?;
    let pw = pathwise_average_cost(&hl_long, &StationaryPolicy::uniform(&hl_long), &hl_long.point_mass(1), n, 400, sub_seed(seed, 2))
        .map_err(core("evaluator", "pathwise-average-cost"))?;
    rows.push(CheckRow::at_most("evaluator", "ex1_harris_pathwise_median", pw.quantiles.q50, 0.0, 0.01));

    // (M) with D = whole space holds trivially
    let all: Vec<usize> = (0..harris.n_states()).collect();
    let vac = check_m_finite(&harris, &all, &all, &vec![0.0; harris.n_states()])
        .map_err(core("assumption-certify", "majorization-finite"))?;
    rows.push(CheckRow::holds("assumption-certify", "ex1_majorization_vacuous_whole_space", vac.passed));
    Ok(rows)
}

pub fn example2(seed: u64) -> Result<Vec<CheckRow>, Failure> {
    let mut rows = Vec::new();
    let cert = "assumption-certify";
    let cfg = Example2Config::gaussian();
    let m = gen_example2(&cfg).map_err(core("model-gen", "example2-valid"))?;
    rows.push(CheckRow::holds("model-gen", "ex2_model_valid", m.validate().is_empty()));

    let su = check_su_example2(&cfg, 20, 100.0).map_err(core(cert, "su-generator"))?;
    let mut r = CheckRow::at_least(cert, "ex2_su_last_infimum", su.infima.last().copied().unwrap_or(0.0), 100.0);
    r.passed &= su.nondecreasing;
    rows.push(r);

    for j in [1usize, 2, 4] {
        let c = check_m_example2(&cfg, j).map_err(core(cert, "majorization-density"))?;
        let mut r = CheckRow::at_most(cert, &format!("ex2_majorization_lebesgue_j{j}"), c.max_violation, 0.0, c.tolerance);
        r.passed = c.passed;
        rows.push(r);
    }

    // Dirac kernel: y = x below 1, y = x/2 above; atoms land in O \ D
    let atoms = |x: f64, _: f64| vec![(if x < 1.0 { x } else { x / 2.0 }, 1.0)];
    let grid: Vec<(f64, f64)> = (0..=200).map(|k| (k as f64 * 0.01, 0.0)).collect();
    let cells: Vec<Interval> = (0..22).map(|k| Interval::new(-0.05 + 0.1 * k as f64, 0.05 + 0.1 * k as f64)).collect();
    let dirac = check_m_density(&DensityProblem {
        ell: 1e6,
        open: Interval::new(-0.05, 2.05),
        closed: vec![Interval::new(-0.05, 0.9), Interval::new(1.0, 2.05)],
        kernel: Kernel::Atomic(&atoms),
        pair_grid: grid,
        cells,
    })
    .map_err(core(cert, "majorization-density"))?;
    rows.push(CheckRow::holds(cert, "ex2_dirac_kernel_fails_majorization", !dirac.passed));

    let bound = cfg.g_bound();
    let g = check_g_example2(&cfg, &m, 5000, 500, sub_seed(seed, 1)).map_err(core(cert, "finite-average-cost"))?;
    rows.push(CheckRow::at_most(cert, "ex2_g_exact_tail_sup", g.tail_sup, bound, 0.0));
    let a = g.analytic.expect("analytic bound attached");
    rows.push(CheckRow::at_most(cert, "ex2_g_mc_mean_from_0", a.mc_mean, bound, 3.0 * a.mc_std_error));

    // one step from x = 0 under the argmin policy
    let pol = example2_argmin_policy(&cfg);
    let x0 = cfg.state_of(0.0);
    let mut second = 0.0;
    for (local, &w) in pol.stage_row(0, x0).iter().enumerate() {
        for &(y, p) in m.row(m.pair_index(x0, local)) {
            second += w * p * cfg.state_center(y).powi(2);
        }
    }
    let s2 = cfg.noise.variance_bound();
    rows.push(CheckRow::at_most("model-gen", "ex2_one_step_second_moment", second, cfg.delta.powi(2) + s2, 0.0));

    let a_delta = m.actions(x0).iter().position(|&l| (cfg.action_value(l) - cfg.delta).abs() < 1e-12);
    let mean = a_delta.map_or(f64::NAN, |local| {
        m.row(m.pair_index(x0, local)).iter().map(|&(y, p)| p * cfg.state_center(y)).sum()
    });
    rows.push(CheckRow::near("model-gen", "ex2_row_mean_action_delta", mean, cfg.delta, cfg.h));

    // discontinuous cost weight
    let step = Example2Config::step_weight();
    let ms = gen_example2(&step).map_err(core("model-gen", "example2-valid"))?;
    let sus = check_su_example2(&step, 20, 50.0).map_err(core(cert, "su-generator"))?;
    rows.push(CheckRow::holds(cert, "ex2_step_su", sus.passed));
    let gs = check_g_example2(&step, &ms, 3000, 300, sub_seed(seed, 2)).map_err(core(cert, "finite-average-cost"))?;
    let a = gs.analytic.expect("analytic bound attached");
    rows.push(CheckRow::at_most(cert, "ex2_step_g_mc_mean_from_0", a.mc_mean, step.g_bound(), 3.0 * a.mc_std_error));
    Ok(rows)
}
