//! Acceptance run: one line per criterion, with its runtime budget.
//! Runs sequentially so timings are not shared with other tests.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use minpair::certify::{check_g_example2, check_m_example2, check_su_example2, NuDescriptor, SetDescriptor};
use minpair::evaluator::DEFAULT_VI_TOL;
use minpair::models::{gen_example2, gen_random_mdp, random_policy, Example1Preset, Example2Config, RandomMdpConfig};
use minpair::rng::derive_seed;
use minpair::{
    decompose, discount_sweep, exact_cesaro_occupancy, expected_average_cost, f_regularity_probe,
    hitting_analysis_exact, hitting_analysis_mc, pathwise_average_cost, solve_min_pair, Classification, FiniteMdp,
    SeriesVerdict, StationaryPolicy, Ternary,
};

type Verdict = Result<String, String>;
type Criterion<'a> = (u32, &'static str, Option<u64>, Box<dyn Fn() -> Verdict + 'a>);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn core<T>(r: minpair::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn to_oracle(m: &FiniteMdp) -> minpair_oracle::Model {
    (0..m.n_states())
        .map(|x| {
            m.pair_range(x)
                .map(|p| {
                    let mut row = vec![0.0; m.n_states()];
                    for &(y, w) in m.row(p) {
                        row[y] += w;
                    }
                    minpair_oracle::Action { row, cost: m.cost(p) }
                })
                .collect()
        })
        .collect()
}

/// The 100 models shared by criteria 5 and 6: up to 5 states, up to 3 actions.
fn oracle_models() -> Vec<FiniteMdp> {
    (0..100u64)
        .map(|seed| {
            let n = 1 + (seed as usize % 5);
            gen_random_mdp(&RandomMdpConfig::new(n, 3, 1000 + seed).sparsity(0.4)).expect("valid config")
        })
        .collect()
}

fn c1() -> Verdict {
    let n = 10_000;
    let (m, _) = core(Example1Preset::LinearCost.build(n + 30))?;
    let pol = StationaryPolicy::uniform(&m);
    let mut worst: f64 = 0.0;
    for i in [1usize, 5, 20] {
        let est = core(expected_average_cost(&m, &pol, &m.point_mass(i), n, None))?;
        let rel = (est.j_n_over_n - i as f64).abs() / i as f64;
        ensure(rel <= 0.01, format!("i={i}: J_n/n = {}", est.j_n_over_n))?;
        worst = worst.max(rel);
    }
    Ok(format!("max relative error {worst:.2e} <= 0.01"))
}

fn c2() -> Verdict {
    let mut detail = Vec::new();
    for preset in [Example1Preset::Harris, Example1Preset::HarrisLinear] {
        let (m, _) = core(preset.build(200))?;
        let s = core(solve_min_pair(&m))?;
        ensure(s.rho_star.abs() <= 1e-9, format!("{preset:?}: rho* = {}", s.rho_star))?;
        ensure((s.pair.state_marginal[0] - 1.0).abs() <= 1e-9, format!("{preset:?}: p*(0) = {}", s.pair.state_marginal[0]))?;
        for e in core(discount_sweep(&m, &[0.9, 0.99, 0.999], DEFAULT_VI_TOL))? {
            let p = core(e.outcome)?;
            ensure(p.scaled_m_alpha.abs() <= 1e-9, format!("{preset:?} alpha {}: {}", p.alpha, p.scaled_m_alpha))?;
        }
        detail.push(format!("{preset:?} rho*={:.1e}", s.rho_star));
    }
    Ok(format!("{}; (1-alpha)m_alpha = 0 at 0.9, 0.99, 0.999", detail.join(", ")))
}

fn c3() -> Verdict {
    let n = 10_000;
    let paths = 10_000;
    let (m, _) = core(Example1Preset::NonHarris.build(n + 2))?;
    let r = core(hitting_analysis_mc(&m, &StationaryPolicy::uniform(&m), &[0], &[1], paths, n, 2024))?;
    let esc = r.state(1).ok_or("state 1 missing")?.escape_probability;
    let se = (1.0 / 3.0 * (2.0 / 3.0) / paths as f64).sqrt();
    let z = (esc - 1.0 / 3.0) / se;
    ensure(z.abs() <= 3.0, format!("escape {esc}, z = {z:.2}"))?;
    Ok(format!("escape fraction {esc:.4}, z = {z:.2}"))
}

fn c4() -> Verdict {
    let depth = 1_000_000;
    let (_, chain) = core(Example1Preset::Harris.build(5))?;
    let r = core(hitting_analysis_exact(&chain, depth))?;
    ensure(r.classification == Classification::PositiveHarris, format!("classified {:?}", r.classification))?;
    let e1 = r.state(1).ok_or("state 1 missing")?.expected_hitting_time;
    ensure(e1.is_infinite(), format!("E_1[tau_0] = {e1}"))?;
    let probe = core(f_regularity_probe(&chain, &|_| 1.0, depth))?;
    ensure(probe.verdict == Ternary::No, format!("f-regularity verdict {:?}", probe.verdict))?;
    // with f ≡ 1 the probed series from state 1 is Σ P_1(τ₀ > k) = E_1[τ₀]
    let (x, series) = probe.per_state.first().ok_or("no probed state")?;
    ensure(*x == 1, "first probed state is not 1")?;
    ensure(matches!(series, SeriesVerdict::Diverges { .. }), format!("series verdict {series:?}"))?;
    let ld = series.log_depth_to_exceed(1e4).ok_or("no depth bound")?;
    ensure(ld <= 1e4, format!("partial sums pass 1e4 only by depth e^{ld:.0}"))?;
    Ok(format!("positive Harris, E_1[tau_0] = {e1}, sums > 1e4 by depth e^{ld:.1}, not regular"))
}

fn c5(models: &[FiniteMdp]) -> Verdict {
    let mut worst_gap: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for (k, m) in models.iter().enumerate() {
        let s = core(solve_min_pair(m))?;
        let (rho_enum, _) = minpair_oracle::enumerate_rho(&to_oracle(m));
        let gap = (s.rho_star - rho_enum).abs();
        ensure(gap <= 1e-8, format!("model {k}: lp {} enumeration {rho_enum}", s.rho_star))?;
        let res = core(decompose(m, &s.gamma_star))?.invariance_residual;
        ensure(res <= 1e-9, format!("model {k}: residual {res:e}"))?;
        worst_gap = worst_gap.max(gap);
        worst_res = worst_res.max(res);
    }
    Ok(format!("{} models, max |lp - enum| {worst_gap:.1e}, max residual {worst_res:.1e}", models.len()))
}

fn c6(models: &[FiniteMdp]) -> Verdict {
    let mut by_ratio = 0;
    let mut by_abs = 0;
    for (k, m) in models.iter().enumerate() {
        let rho = core(solve_min_pair(m))?.rho_star;
        let sweep = core(discount_sweep(m, &[0.99, 0.999], DEFAULT_VI_TOL))?;
        let mut scaled = Vec::new();
        for e in sweep {
            let p = core(e.outcome)?;
            ensure(p.scaled_m_alpha <= rho + 1e-6, format!("model {k} alpha {}: {} > rho* {rho}", p.alpha, p.scaled_m_alpha))?;
            scaled.push(p.scaled_m_alpha);
        }
        let (d99, d999) = ((scaled[0] - rho).abs(), (scaled[1] - rho).abs());
        if d999 <= 10.0 * d99 {
            by_ratio += 1;
        } else if d999 <= 1e-3 {
            by_abs += 1;
        } else {
            return Err(format!("model {k}: gap {d999:e} at 0.999 vs {d99:e} at 0.99"));
        }
    }
    Ok(format!("{by_ratio} by ratio, {by_abs} by 1e-3 absolute; Tauberian side holds"))
}

fn c7() -> Verdict {
    let n = 10_000;
    let paths = 200;
    let mut worst_exact = f64::INFINITY;
    let mut worst_mc = f64::INFINITY;
    for seed in 0..20u64 {
        let ns = 2 + (seed as usize % 4);
        let m = core(gen_random_mdp(&RandomMdpConfig::new(ns, 3, 5000 + seed).sparsity(0.3)))?;
        let rho = core(solve_min_pair(&m))?.rho_star;
        for k in 0..10u64 {
            let pol = random_policy(&m, derive_seed(seed, k));
            let init = m.point_mass(0);
            let est = core(expected_average_cost(&m, &pol, &init, n, None))?;
            let margin = est.tail_inf - rho;
            ensure(margin >= -1e-6, format!("model {seed} policy {k}: tail min {} < rho* {rho}", est.tail_inf))?;
            worst_exact = worst_exact.min(margin);
            let pw = core(pathwise_average_cost(&m, &pol, &init, n, paths, derive_seed(seed, 100 + k)))?;
            // standard error of one path's running average as an estimate of its limit
            let se = pw.quantiles.std_dev;
            let mc_margin = pw.quantiles.q05 - (rho - 5.0 * se);
            ensure(mc_margin >= 0.0, format!("model {seed} policy {k}: q05 {} < rho* - 5 se ({rho}, se {se})", pw.quantiles.q05))?;
            worst_mc = worst_mc.min(mc_margin);
        }
    }
    Ok(format!("200 policies; min tail_inf - rho* = {worst_exact:.2e}, min q05 margin {worst_mc:.2e}"))
}

fn c8() -> Verdict {
    let cfg = Example2Config::gaussian();
    let m = core(gen_example2(&cfg))?;
    let su = core(check_su_example2(&cfg, 20, 100.0))?;
    ensure(su.passed, format!("SU infima {:?}", su.infima))?;
    let ell = cfg.noise.sup_density();
    for j in [1usize, 2, 4] {
        let c = core(check_m_example2(&cfg, j))?;
        ensure(c.passed, format!("M fails at j={j}: {:?}", c.worst))?;
        ensure(
            matches!(c.nu, NuDescriptor::LebesgueMultiple { ell: l, .. } if l == ell),
            format!("nu is not {ell} x Lebesgue"),
        )?;
        ensure(matches!(&c.closed_set, SetDescriptor::Intervals(v) if v.is_empty()), "D is not empty")?;
    }
    let g = core(check_g_example2(&cfg, &m, 10_000, 1000, 8))?;
    let a = g.analytic.as_ref().ok_or("no Monte Carlo bound")?;
    ensure(g.passed && a.passed, format!("G: {g:?}"))?;
    ensure(a.mc_mean <= cfg.g_bound() + 3.0 * a.mc_std_error, "MC mean above bound")?;
    Ok(format!(
        "SU last infimum {:.2}, M at j=1,2,4 with nu = {ell:.4} x Lebesgue, average cost {:.4} (se {:.1e}) <= {}",
        su.infima.last().copied().unwrap_or(f64::NAN),
        a.mc_mean,
        a.mc_std_error,
        cfg.g_bound()
    ))
}

fn c9() -> Verdict {
    let n = 10_000;
    let mut worst_res: f64 = 0.0;
    for seed in 0..20u64 {
        let ns = 2 + (seed as usize % 4);
        // dense rows: every policy chain is irreducible
        let m = core(gen_random_mdp(&RandomMdpConfig::new(ns, 3, 9000 + seed)))?;
        let pol = random_policy(&m, seed);
        let init = m.point_mass(0);
        let g = core(exact_cesaro_occupancy(&m, &pol, &init, n))?;
        let rep = core(decompose(&m, &g))?;
        let jn = core(expected_average_cost(&m, &pol, &init, n, Some(1)))?.j_n_over_n;
        ensure(rep.invariance_residual <= 1e-3, format!("model {seed}: residual {}", rep.invariance_residual))?;
        ensure(rep.average_cost <= jn + 1e-6, format!("model {seed}: {} > J_n/n {jn}", rep.average_cost))?;
        worst_res = worst_res.max(rep.invariance_residual);
    }
    Ok(format!("20 models, max residual {worst_res:.1e}, pair cost <= J_n/n"))
}

fn run_reproduce(dir: &Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_minpair"))
        .arg("--out")
        .arg(dir)
        .args(["reproduce", "ex1", "--seed", "7"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))?;
    std::fs::read(dir.join("report.csv")).map_err(|e| e.to_string())
}

fn c10() -> Verdict {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_reproduce(a.path())?;
    let second = run_reproduce(b.path())?;
    ensure(first == second, "report.csv differs between runs")?;
    Ok(format!("report.csv identical ({} bytes)", first.len()))
}

fn main() {
    let models = oracle_models();
    let criteria: Vec<Criterion> = vec![
        (1, "birth-reset average cost J(i) = i", Some(5), Box::new(c1)),
        (2, "birth-reset minimum cost and m_alpha", Some(5), Box::new(c2)),
        (3, "non-Harris escape probability 1/3", Some(60), Box::new(c3)),
        (4, "regularity dichotomy", Some(10), Box::new(c4)),
        (5, "LP vs enumeration", Some(30), Box::new(|| c5(&models))),
        (6, "vanishing discount", Some(60), Box::new(|| c6(&models))),
        (7, "average cost lower bound, sampled", Some(120), Box::new(c7)),
        (8, "noisy linear system certification", Some(60), Box::new(c8)),
        (9, "occupancy route consistency", Some(30), Box::new(c9)),
        (10, "reproduce ex1 determinism", None, Box::new(c10)),
    ];
    let mut failed = 0;
    for (id, name, budget, f) in &criteria {
        let t = Instant::now();
        let mut verdict = f();
        let dt = t.elapsed();
        if let (Ok(_), Some(b)) = (&verdict, budget) {
            if dt > Duration::from_secs(*b) {
                verdict = Err(format!("runtime {:.2} s over {b} s budget", dt.as_secs_f64()));
            }
        }
        let budget = budget.map_or(String::new(), |b| format!(" < {b} s"));
        let (tag, detail) = match &verdict {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} {tag}  {name}  [{:.2} s{budget}]  {detail}", dt.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
