use std::path::Path;

use serde::Serialize;

use minpair::certify::{
    check_g, check_g_example2, check_m_example2, check_m_finite, check_su, check_su_example2, envelope_nu,
    CompactExhaustion, MajorizationCertificate,
};
use minpair::evaluator::DEFAULT_VI_TOL;
use minpair::io::model_to_json;
use minpair::minpair::{solution_to_json, summary_table};
use minpair::models::example2_argmin_policy;
use minpair::rng::derive_seed;
use minpair::{
    discount_sweep, expected_average_cost, f_regularity_probe, hitting_analysis_exact, hitting_analysis_mc,
    pathwise_average_cost, solve_min_pair, verify_minimum_pair, FiniteMdp, StationaryPolicy, VerifyOptions,
};

use crate::report::{write_json, write_rows, write_text, Failure};
use crate::source::Loaded;

pub type Outcome = Result<Vec<Failure>, Failure>;

/// Deterministic policies are enumerated as verification candidates up to this count.
const MAX_ENUMERATED: usize = 4096;

fn candidates(model: &FiniteMdp) -> Vec<StationaryPolicy> {
    let mut out = vec![StationaryPolicy::uniform(model)];
    let count = (0..model.n_states())
        .try_fold(1usize, |acc, x| acc.checked_mul(model.n_actions(x)).filter(|&c| c <= MAX_ENUMERATED));
    if count.is_none() {
        return out;
    }
    let mut choice = vec![0usize; model.n_states()];
    loop {
        out.push(StationaryPolicy::deterministic(model, &choice));
        let mut x = 0;
        loop {
            if x == choice.len() {
                return out;
            }
            choice[x] += 1;
            if choice[x] < model.n_actions(x) {
                break;
            }
            choice[x] = 0;
            x += 1;
        }
    }
}

pub fn solve(src: &Loaded, out: &Path, horizon: usize) -> Outcome {
    let m = &src.model;
    let s = solve_min_pair(m).map_err(|e| Failure::from_core("minpair-solver", "lp-optimal", e))?;
    print!("{}", summary_table(m, &s));
    write_text(&out.join("solution.json"), &(solution_to_json(m, &s) + "\n"))?;
    let opts = VerifyOptions {
        horizon,
        ..Default::default()
    };
    let report = verify_minimum_pair(m, &s, &candidates(m), &opts)
        .map_err(|e| Failure::from_core("minpair-solver", "verify-minimum-pair", e))?;
    write_json(&out.join("verification.json"), &report)?;
    Ok(report
        .failures()
        .map(|c| Failure::check("minpair-solver", &c.name, format!("value {} bound {}", c.value, c.bound)))
        .collect())
}

#[derive(Serialize)]
struct SweepRow {
    alpha: f64,
    m_alpha: Option<f64>,
    scaled_m_alpha: Option<f64>,
    iterations: Option<usize>,
    residual: Option<f64>,
    status: String,
}

pub fn sweep(src: &Loaded, out: &Path, alphas: &[f64], tol: Option<f64>) -> Outcome {
    let tol = tol.unwrap_or(DEFAULT_VI_TOL);
    let entries =
        discount_sweep(&src.model, alphas, tol).map_err(|e| Failure::from_core("evaluator", "sweep-arguments", e))?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    println!("{:>10}  {:>18}  {:>18}  {:>10}  {:>10}", "alpha", "m_alpha", "(1-alpha)m_alpha", "iters", "residual");
    for e in entries {
        match e.outcome {
            Ok(p) => {
                println!(
                    "{:>10}  {:>18.10}  {:>18.12}  {:>10}  {:>10.2e}",
                    p.alpha, p.m_alpha, p.scaled_m_alpha, p.iterations, p.residual
                );
                rows.push(SweepRow {
                    alpha: p.alpha,
                    m_alpha: Some(p.m_alpha),
                    scaled_m_alpha: Some(p.scaled_m_alpha),
                    iterations: Some(p.iterations),
                    residual: Some(p.residual),
                    status: "converged".into(),
                });
            }
            Err(err) => {
                println!("{:>10}  {err}", e.alpha);
                failures.push(Failure::check("evaluator", "value-iteration-converges", err.to_string()));
                rows.push(SweepRow {
                    alpha: e.alpha,
                    m_alpha: None,
                    scaled_m_alpha: None,
                    iterations: None,
                    residual: None,
                    status: "nonconvergence".into(),
                });
            }
        }
    }
    write_rows(&out.join("sweep.csv"), &rows)?;
    Ok(failures)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PolicyChoice {
    Uniform,
    /// Minimizer of |x + a| over the action grid (control example only).
    Argmin,
    /// Stationary policy of the LP minimum pair.
    Lp,
}

fn pick_policy(src: &Loaded, choice: Option<PolicyChoice>) -> Result<StationaryPolicy, Failure> {
    let choice = choice.unwrap_or(if src.ex2.is_some() { PolicyChoice::Argmin } else { PolicyChoice::Uniform });
    match choice {
        PolicyChoice::Uniform => Ok(StationaryPolicy::uniform(&src.model)),
        PolicyChoice::Argmin => match &src.ex2 {
            Some(cfg) => Ok(example2_argmin_policy(cfg)),
            None => Err(Failure::config("cli", "policy-applicable", "argmin policy needs an ex2 preset")),
        },
        PolicyChoice::Lp => solve_min_pair(&src.model)
            .map(|s| s.pair.policy)
            .map_err(|e| Failure::from_core("minpair-solver", "lp-optimal", e)),
    }
}

fn check_start(src: &Loaded, start: Option<usize>) -> Result<usize, Failure> {
    let x = start.unwrap_or_else(|| src.default_start());
    if x >= src.model.n_states() {
        return Err(Failure::config("cli", "start-in-range", format!("start state {x} of {}", src.model.n_states())));
    }
    Ok(x)
}

#[derive(Serialize)]
struct PathRow {
    path: usize,
    seed: u64,
    step: usize,
    running_average: f64,
}

#[derive(Serialize)]
struct EstimateRow {
    horizon: usize,
    window: usize,
    paths: usize,
    j_n_over_n: f64,
    tail_inf: f64,
    tail_sup: f64,
    mc_mean: f64,
    mc_std_error: f64,
    mc_q05: f64,
    mc_q50: f64,
    mc_q95: f64,
}

pub struct SimulateArgs {
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    pub start: Option<usize>,
    pub policy: Option<PolicyChoice>,
}

pub fn simulate(src: &Loaded, out: &Path, a: &SimulateArgs) -> Outcome {
    let m = &src.model;
    let pol = pick_policy(src, a.policy)?;
    let x0 = check_start(src, a.start)?;
    let init = m.point_mass(x0);
    let exact = expected_average_cost(m, &pol, &init, a.horizon, None)
        .map_err(|e| Failure::from_core("evaluator", "expected-average-cost", e))?;
    let pw = pathwise_average_cost(m, &pol, &init, a.horizon, a.paths, derive_seed(a.seed, 0))
        .map_err(|e| Failure::from_core("evaluator", "pathwise-average-cost", e))?;
    let mut rows = Vec::with_capacity(pw.paths.len() * pw.checkpoints.len());
    for (i, p) in pw.paths.iter().enumerate() {
        for (&step, &avg) in pw.checkpoints.iter().zip(&p.averages) {
            rows.push(PathRow {
                path: i,
                seed: p.seed,
                step,
                running_average: avg,
            });
        }
    }
    write_rows(&out.join("pathwise.csv"), &rows)?;
    let q = pw.quantiles;
    let est = EstimateRow {
        horizon: a.horizon,
        window: exact.window,
        paths: a.paths,
        j_n_over_n: exact.j_n_over_n,
        tail_inf: exact.tail_inf,
        tail_sup: exact.tail_sup,
        mc_mean: q.mean,
        mc_std_error: q.std_dev / (a.paths as f64).sqrt(),
        mc_q05: q.q05,
        mc_q50: q.q50,
        mc_q95: q.q95,
    };
    println!("start {x0}  horizon {}  paths {}", a.horizon, a.paths);
    println!("J_n/n {:.10}  tail [{:.10}, {:.10}] over last {} stages", est.j_n_over_n, est.tail_inf, est.tail_sup, est.window);
    println!("pathwise mean {:.10} (se {:.2e})  q05 {:.10}  q50 {:.10}  q95 {:.10}", est.mc_mean, est.mc_std_error, q.q05, q.q50, q.q95);
    write_rows(&out.join("estimate.csv"), &[est])?;
    Ok(vec![])
}

#[derive(Serialize)]
struct MajorizationSet<'a> {
    certificates: &'a [MajorizationCertificate],
}

fn print_m(c: &MajorizationCertificate) {
    let worst = c
        .worst
        .as_ref()
        .map(|w| format!("  worst at x={} a={} set={:?} violation={:.3e}", w.x, w.a, w.set, w.violation))
        .unwrap_or_default();
    println!("M  {}  {}{}", if c.passed { "pass" } else { "FAIL" }, c.scope, worst);
}

pub struct CertifyArgs {
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    pub su_depth: usize,
    pub su_threshold: f64,
    pub m_radii: Vec<usize>,
}

pub fn certify(src: &Loaded, out: &Path, a: &CertifyArgs) -> Outcome {
    let mut failures = Vec::new();
    let m = &src.model;
    let (su, ms, g) = if let Some(cfg) = &src.ex2 {
        let su = check_su_example2(cfg, a.su_depth, a.su_threshold)
            .map_err(|e| Failure::from_core("assumption-certify", "su-generator", e))?;
        let ms = a
            .m_radii
            .iter()
            .map(|&j| check_m_example2(cfg, j))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::from_core("assumption-certify", "majorization-density", e))?;
        let g = check_g_example2(cfg, m, a.horizon, a.paths, derive_seed(a.seed, 0))
            .map_err(|e| Failure::from_core("assumption-certify", "finite-average-cost", e))?;
        (su, ms, g)
    } else {
        let mut levels: Vec<f64> = m.costs().to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let ex = CompactExhaustion::by_cost_levels(m, &levels)
            .map_err(|e| Failure::from_core("assumption-certify", "su-exhaustion", e))?;
        let su = check_su(&ex, a.su_threshold.min(m.max_cost()));
        let all: Vec<usize> = (0..m.n_states()).collect();
        let nu = envelope_nu(m, &all, &[]);
        let mc = check_m_finite(m, &all, &[], &nu)
            .map_err(|e| Failure::from_core("assumption-certify", "majorization-finite", e))?;
        let x0 = check_start(src, None)?;
        let g = check_g(m, &StationaryPolicy::uniform(m), &m.point_mass(x0), a.horizon, m.max_cost())
            .map_err(|e| Failure::from_core("assumption-certify", "finite-average-cost", e))?;
        (su, vec![mc], g)
    };
    println!("SU {}  infima {:?}  threshold {}", if su.passed { "pass" } else { "FAIL" }, su.infima.last(), su.threshold);
    if !su.passed {
        failures.push(Failure::check("assumption-certify", "strictly-unbounded-cost", format!("last infimum {:?}", su.infima.last())));
    }
    for c in &ms {
        print_m(c);
        if !c.passed {
            failures.push(Failure::check("assumption-certify", "majorization", format!("max violation {}", c.max_violation)));
        }
    }
    println!("G  {}  tail_sup {:.6}  threshold {:.6}", if g.passed { "pass" } else { "FAIL" }, g.tail_sup, g.threshold);
    if !g.passed {
        failures.push(Failure::check("assumption-certify", "finite-average-cost", format!("tail_sup {} threshold {}", g.tail_sup, g.threshold)));
    }
    write_json(&out.join("su.json"), &su)?;
    write_json(&out.join("m.json"), &MajorizationSet { certificates: &ms })?;
    write_json(&out.join("g.json"), &g)?;
    Ok(failures)
}

pub struct DiagnoseArgs {
    pub depth: usize,
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    pub target: Vec<usize>,
}

pub fn diagnose(src: &Loaded, out: &Path, a: &DiagnoseArgs) -> Outcome {
    let report = if let Some(chain) = &src.chain {
        let probe = f_regularity_probe(chain, &|_| 1.0, a.depth)
            .map_err(|e| Failure::from_core("chain-diagnostics", "f-regularity", e))?;
        hitting_analysis_exact(chain, a.depth)
            .map_err(|e| Failure::from_core("chain-diagnostics", "hitting-exact", e))?
            .with_regularity(probe.verdict)
    } else {
        let m = &src.model;
        if let Some(&x) = a.target.iter().find(|&&x| x >= m.n_states()) {
            return Err(Failure::config("cli", "target-in-range", format!("target state {x}")));
        }
        let starts: Vec<usize> = (0..m.n_states()).collect();
        hitting_analysis_mc(m, &StationaryPolicy::uniform(m), &a.target, &starts, a.paths, a.horizon, derive_seed(a.seed, 0))
            .map_err(|e| Failure::from_core("chain-diagnostics", "hitting-monte-carlo", e))?
    };
    print!("{}", report.table());
    write_json(&out.join("recurrence.json"), &report)?;
    Ok(vec![])
}

pub fn generate(src: &Loaded, out: &Path) -> Outcome {
    let path = out.join("model.json");
    write_text(&path, &(model_to_json(&src.model) + "\n"))?;
    println!("{} states, {} pairs -> {}", src.model.n_states(), src.model.n_pairs(), path.display());
    Ok(vec![])
}
