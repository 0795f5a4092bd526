//! Cost criteria: exact finite-horizon expected costs, pathwise running
//! averages, and discounted values by value iteration.
//!
//! lim sup / lim inf cannot be read off a finite prefix. Both the exact and the
//! pathwise routes report the min and max of the running average over a tail
//! window (default `max(100, n/10)` points, capped at `n`) as proxies.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{check_inputs, FiniteMdp, Policy, StationaryPolicy, Walker};
use crate::rng::derive_seed;

pub const DEFAULT_VI_TOL: f64 = 1e-10;

pub fn default_window(horizon: usize) -> usize {
    (horizon / 10).max(100).min(horizon)
}

/// Pushes `initial` through `policy` and the model for `n` stages, calling
/// `visit(stage, pair, mass)` for every pair carrying mass at that stage.
///
/// Only states with mass are touched, so chains whose reachable set grows
/// slowly (birth-reset chains) cost O(support) per stage.
pub(crate) fn forward_pass<P, F>(model: &FiniteMdp, policy: &P, initial: &[f64], n: usize, mut visit: F)
where
    P: Policy + ?Sized,
    F: FnMut(usize, usize, f64),
{
    let ns = model.n_states();
    let mut cur = initial.to_vec();
    let mut active: Vec<usize> = (0..ns).filter(|&x| cur[x] > 0.0).collect();
    let mut next = vec![0.0; ns];
    let mut next_active = Vec::new();
    let mut marked = vec![false; ns];
    for k in 0..n {
        let last = k + 1 == n;
        for &x in &active {
            let mass = cur[x];
            cur[x] = 0.0;
            if mass == 0.0 {
                continue;
            }
            for (local, &mu) in policy.stage_row(k, x).iter().enumerate() {
                if mu == 0.0 {
                    continue;
                }
                let w = mass * mu;
                let pair = model.pair_index(x, local);
                visit(k, pair, w);
                if last {
                    continue;
                }
                for &(y, p) in model.row(pair) {
                    if !marked[y] {
                        marked[y] = true;
                        next_active.push(y);
                    }
                    next[y] += w * p;
                }
            }
        }
        for &y in &next_active {
            marked[y] = false;
        }
        std::mem::swap(&mut cur, &mut next);
        std::mem::swap(&mut active, &mut next_active);
        next_active.clear();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AverageCostEstimate {
    pub horizon: usize,
    pub window: usize,
    /// Jₙ/n at n = horizon.
    pub j_n_over_n: f64,
    pub tail_inf: f64,
    pub tail_sup: f64,
    /// Jₖ/k for k = 1..=horizon.
    pub averages: Vec<f64>,
}

impl AverageCostEstimate {
    /// Jₖ (not divided by k) for k = 1..=horizon.
    pub fn totals(&self) -> impl Iterator<Item = f64> + '_ {
        self.averages.iter().enumerate().map(|(i, a)| a * (i + 1) as f64)
    }
}

/// Jₙ(π, ζ)/n computed exactly by forward recursion (no sampling).
pub fn expected_average_cost<P: Policy + ?Sized>(
    model: &FiniteMdp,
    policy: &P,
    initial: &[f64],
    horizon: usize,
    window: Option<usize>,
) -> Result<AverageCostEstimate> {
    check_inputs(model, policy, initial)?;
    let window = window.unwrap_or_else(|| default_window(horizon));
    if window == 0 || horizon < window {
        return Err(Error::InvalidArgument(format!(
            "need horizon >= window >= 1 (horizon {horizon}, window {window})"
        )));
    }
    let mut stage_cost = vec![0.0; horizon];
    forward_pass(model, policy, initial, horizon, |k, pair, w| {
        stage_cost[k] += w * model.cost(pair);
    });
    let mut total = 0.0;
    let averages: Vec<f64> = stage_cost
        .iter()
        .enumerate()
        .map(|(k, c)| {
            total += c;
            total / (k + 1) as f64
        })
        .collect();
    let (tail_inf, tail_sup) = min_max(&averages[horizon - window..]);
    Ok(AverageCostEstimate {
        horizon,
        window,
        j_n_over_n: averages[horizon - 1],
        tail_inf,
        tail_sup,
        averages,
    })
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Logarithmically spaced checkpoints (ten per decade) ending at `horizon`.
pub fn log_checkpoints(horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut j = 0;
    loop {
        let n = 10f64.powf(j as f64 / 10.0).round() as usize;
        if n >= horizon {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
        j += 1;
    }
    out.push(horizon);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSummary {
    pub seed: u64,
    /// Running average n⁻¹ Σ_{k<n} c(xₖ, aₖ) at each checkpoint.
    pub averages: Vec<f64>,
    pub final_average: f64,
    pub tail_min: f64,
    pub tail_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub mean: f64,
    pub std_dev: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            q05: quantile_sorted(&v, 0.05),
            q25: quantile_sorted(&v, 0.25),
            q50: quantile_sorted(&v, 0.5),
            q75: quantile_sorted(&v, 0.75),
            q95: quantile_sorted(&v, 0.95),
            mean,
            std_dev: var.sqrt(),
        }
    }
}

/// Linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathwiseEstimate {
    pub horizon: usize,
    pub window: usize,
    pub checkpoints: Vec<usize>,
    pub paths: Vec<PathSummary>,
    /// Aggregate over paths of the final running average.
    pub quantiles: Quantiles,
}

impl PathwiseEstimate {
    pub fn final_averages(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.final_average).collect()
    }
}

/// Simulates `n_paths` independent trajectories (path `i` seeded with
/// `seed + i`) and records running averages.
pub fn pathwise_average_cost<P: Policy + ?Sized>(
    model: &FiniteMdp,
    policy: &P,
    initial: &[f64],
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathwiseEstimate> {
    check_inputs(model, policy, initial)?;
    if horizon == 0 || n_paths == 0 {
        return Err(Error::InvalidArgument("horizon and n_paths must be at least 1".into()));
    }
    let window = default_window(horizon);
    let checkpoints = log_checkpoints(horizon);
    let tail_start = horizon - window + 1;
    let paths: Vec<PathSummary> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path_seed = derive_seed(seed, i);
            let mut walker = Walker::new(model, policy, initial, path_seed);
            let mut total = 0.0;
            let mut averages = Vec::with_capacity(checkpoints.len());
            let mut next_cp = 0;
            let (mut tail_min, mut tail_max) = (f64::INFINITY, f64::NEG_INFINITY);
            for n in 1..=horizon {
                total += walker.step().cost;
                let avg = total / n as f64;
                if n >= tail_start {
                    tail_min = tail_min.min(avg);
                    tail_max = tail_max.max(avg);
                }
                if checkpoints[next_cp] == n {
                    averages.push(avg);
                    next_cp += 1;
                }
            }
            PathSummary {
                seed: path_seed,
                final_average: total / horizon as f64,
                averages,
                tail_min,
                tail_max,
            }
        })
        .collect();
    let finals: Vec<f64> = paths.iter().map(|p| p.final_average).collect();
    Ok(PathwiseEstimate {
        horizon,
        window,
        checkpoints,
        quantiles: Quantiles::of(&finals),
        paths,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscountedSolution {
    pub alpha: f64,
    /// v*_α per state.
    pub values: Vec<f64>,
    /// min over states of v*_α.
    pub m_alpha: f64,
    pub iterations: usize,
    /// Sup-norm change of the final iteration; bounds the Bellman residual.
    pub residual: f64,
}

/// One Bellman update `out = T v` minimizing over admissible actions only.
/// Returns the sup-norm change.
pub fn bellman_update(model: &FiniteMdp, alpha: f64, v: &[f64], out: &mut [f64]) -> f64 {
    let mut change: f64 = 0.0;
    for x in 0..model.n_states() {
        let best = model
            .pair_range(x)
            .map(|pair| model.cost(pair) + alpha * model.row(pair).iter().map(|&(y, p)| p * v[y]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        change = change.max((best - v[x]).abs());
        out[x] = best;
    }
    change
}

/// Iteration cap: iterations needed for αᵏ·max(1, max c) to fall below
/// tol·(1 − α), plus a fixed margin.
pub fn default_max_iter(alpha: f64, tol: f64, max_cost: f64) -> usize {
    let target = tol * (1.0 - alpha) / max_cost.max(1.0);
    (target.ln() / alpha.ln()).ceil().max(0.0) as usize + 1000
}

/// Value iteration from v₀ = 0, stopping once the sup-norm change is ≤ `tol`.
pub fn discounted_value_iteration(
    model: &FiniteMdp,
    alpha: f64,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<DiscountedSolution> {
    model.ensure_valid()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} not in (0,1)")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol {tol} must be positive")));
    }
    let max_iter = max_iter.unwrap_or_else(|| default_max_iter(alpha, tol, model.max_cost()));
    let mut v = vec![0.0; model.n_states()];
    let mut next = v.clone();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        residual = bellman_update(model, alpha, &v, &mut next);
        std::mem::swap(&mut v, &mut next);
        if residual <= tol {
            let m_alpha = v.iter().cloned().fold(f64::INFINITY, f64::min);
            return Ok(DiscountedSolution {
                alpha,
                values: v,
                m_alpha,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        alpha,
        iterations: max_iter,
        residual,
    })
}

/// Deterministic policy attaining the minimum in the Bellman operator for
/// `values`, ties to the lowest local action index.
pub fn greedy_policy(model: &FiniteMdp, alpha: f64, values: &[f64]) -> StationaryPolicy {
    let choice: Vec<usize> = (0..model.n_states())
        .map(|x| {
            let mut best = (f64::INFINITY, 0);
            for (local, pair) in model.pair_range(x).enumerate() {
                let q = model.cost(pair) + alpha * model.row(pair).iter().map(|&(y, p)| p * values[y]).sum::<f64>();
                if q < best.0 {
                    best = (q, local);
                }
            }
            best.1
        })
        .collect();
    StationaryPolicy::deterministic(model, &choice)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub m_alpha: f64,
    /// (1 − α)·m_α
    pub scaled_m_alpha: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug)]
pub struct SweepEntry {
    pub alpha: f64,
    pub outcome: Result<SweepPoint>,
}

/// One value-iteration run per α, in input order. A nonconvergent entry
/// carries its error and does not stop the sweep.
pub fn discount_sweep(model: &FiniteMdp, alphas: &[f64], tol: f64) -> Result<Vec<SweepEntry>> {
    model.ensure_valid()?;
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::InvalidArgument(format!("alpha {a} not in (0,1)")));
    }
    Ok(alphas
        .iter()
        .map(|&alpha| SweepEntry {
            alpha,
            outcome: discounted_value_iteration(model, alpha, tol, None).map(|s| SweepPoint {
                alpha,
                m_alpha: s.m_alpha,
                scaled_m_alpha: (1.0 - alpha) * s.m_alpha,
                iterations: s.iterations,
                residual: s.residual,
            }),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{ActionSpec, MarkovPolicySequence, HorizonMode};

    fn self_loop(cost: f64) -> FiniteMdp {
        FiniteMdp::new(1, vec![vec![ActionSpec::dense(0, &[1.0], cost)]])
    }

    fn cycle(c0: f64, c1: f64) -> FiniteMdp {
        FiniteMdp::new(
            2,
            vec![
                vec![ActionSpec::dense(0, &[0.0, 1.0], c0)],
                vec![ActionSpec::dense(0, &[1.0, 0.0], c1)],
            ],
        )
    }

    #[test]
    fn constant_cost_average() {
        let m = self_loop(3.0);
        let pol = StationaryPolicy::uniform(&m);
        let est = expected_average_cost(&m, &pol, &[1.0], 50, None).unwrap();
        assert!(est.averages.iter().all(|&a| (a - 3.0).abs() < 1e-15));
        assert_eq!(est.window, 50);
        assert_eq!(est.tail_inf, 3.0);
    }

    #[test]
    fn alternating_costs_average_to_two() {
        // hand sum: J_k = 4 * floor(k/2), so J_k/k = 2 for even k, 2(k-1)/k for odd k
        let m = cycle(0.0, 4.0);
        let pol = StationaryPolicy::uniform(&m);
        let est = expected_average_cost(&m, &pol, &[1.0, 0.0], 1000, Some(10)).unwrap();
        for (i, a) in est.averages.iter().enumerate() {
            let k = (i + 1) as f64;
            let expect = 4.0 * ((i + 1) / 2) as f64 / k;
            assert!((a - expect).abs() < 1e-12);
        }
        assert!((est.j_n_over_n - 2.0).abs() < 1e-12);
        assert!((est.tail_inf - 2.0 * 990.0 / 991.0).abs() < 1e-12);
        assert!((est.tail_sup - 2.0).abs() < 1e-12);
    }

    #[test]
    fn window_larger_than_horizon_is_rejected() {
        let m = self_loop(1.0);
        let pol = StationaryPolicy::uniform(&m);
        assert!(expected_average_cost(&m, &pol, &[1.0], 5, Some(6)).is_err());
        assert!(expected_average_cost(&m, &pol, &[1.0], 5, Some(0)).is_err());
    }

    #[test]
    fn markov_sequence_is_evaluated_stagewise() {
        let m = FiniteMdp::new(
            1,
            vec![vec![ActionSpec::dense(0, &[1.0], 1.0), ActionSpec::dense(1, &[1.0], 3.0)]],
        );
        let seq = MarkovPolicySequence::new(
            vec![
                StationaryPolicy::deterministic(&m, &[0]),
                StationaryPolicy::deterministic(&m, &[1]),
            ],
            HorizonMode::Cyclic,
        )
        .unwrap();
        let est = expected_average_cost(&m, &seq, &[1.0], 10, Some(1)).unwrap();
        assert!((est.j_n_over_n - 2.0).abs() < 1e-15);
    }

    #[test]
    fn pathwise_constant_cost() {
        let m = self_loop(3.0);
        let pol = StationaryPolicy::uniform(&m);
        let est = pathwise_average_cost(&m, &pol, &[1.0], 200, 4, 1).unwrap();
        for p in &est.paths {
            assert!(p.averages.iter().all(|&a| a == 3.0));
            assert_eq!((p.tail_min, p.tail_max), (3.0, 3.0));
        }
        assert_eq!(est.quantiles.q50, 3.0);
        assert_eq!(*est.checkpoints.last().unwrap(), 200);
    }

    #[test]
    fn checkpoints_are_increasing() {
        let cps = log_checkpoints(10_000);
        assert!(cps.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(cps[0], 1);
        assert_eq!(*cps.last().unwrap(), 10_000);
        assert_eq!(log_checkpoints(1), vec![1]);
    }

    #[test]
    fn geometric_value() {
        let m = self_loop(3.0);
        let s = discounted_value_iteration(&m, 0.5, 1e-12, None).unwrap();
        assert!((s.values[0] - 6.0).abs() < 1e-11);
        assert!((s.m_alpha - 6.0).abs() < 1e-11);
    }

    #[test]
    fn value_iteration_reports_nonconvergence() {
        let m = self_loop(3.0);
        match discounted_value_iteration(&m, 0.99, 1e-12, Some(5)) {
            Err(Error::NonConvergence { iterations, residual, .. }) => {
                assert_eq!(iterations, 5);
                assert!(residual > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(discounted_value_iteration(&m, 1.0, 1e-6, None).is_err());
        assert!(discounted_value_iteration(&m, 0.5, 0.0, None).is_err());
    }

    #[test]
    fn sweep_keeps_going_after_failure() {
        let m = self_loop(3.0);
        let out = discount_sweep(&m, &[0.9, 0.99], 1e-10).unwrap();
        for e in &out {
            let p = e.outcome.as_ref().unwrap();
            assert!((p.scaled_m_alpha - 3.0).abs() < 1e-9);
        }
        assert!(discount_sweep(&m, &[0.5, 1.5], 1e-10).is_err());
    }

    #[test]
    fn greedy_picks_cheaper_action() {
        let m = FiniteMdp::new(
            1,
            vec![vec![ActionSpec::dense(0, &[1.0], 5.0), ActionSpec::dense(1, &[1.0], 2.0)]],
        );
        let s = discounted_value_iteration(&m, 0.9, 1e-10, None).unwrap();
        assert_eq!(greedy_policy(&m, 0.9, &s.values).row(0), &[0.0, 1.0]);
    }

    #[test]
    fn quantiles_of_known_sample() {
        let q = Quantiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!(q.q50, 3.0);
        assert_eq!(q.q25, 2.0);
        assert!((q.q05 - 1.2).abs() < 1e-12);
        assert_eq!(q.mean, 3.0);
        assert!((q.std_dev - 2.5f64.sqrt()).abs() < 1e-12);
    }
}
