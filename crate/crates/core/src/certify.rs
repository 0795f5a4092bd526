//! Checks for the finite-cost witness (G), strictly unbounded costs (SU) and
//! majorization (M) on concrete models.
//!
//! Every certificate states its guarantee level. The finite majorization
//! route is exact (singleton test sets suffice by additivity). The density
//! route only covers the tested pair grid and test-set family. Continuity of
//! the kernel on D × A and lower semicontinuity of the cost are assumed and
//! never checked.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluator::{expected_average_cost, pathwise_average_cost};
use crate::mdp::{FiniteMdp, Policy};
use crate::models::{example2_argmin_policy, Example2Config};
use crate::occupancy::OccupationMeasure;

/// Slack allowed by the density route.
pub const DENSITY_TOL: f64 = 1e-12;

const SIMPSON_PANELS: usize = 64;

const CONTINUITY_NOTE: &str = "continuity of q on D x A and lower semicontinuity of c are assumed, not checked";

fn inf_json<S: serde::Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        if x.is_finite() {
            seq.serialize_element(x)?;
        } else {
            seq.serialize_element(&format!("{x}"))?;
        }
    }
    seq.end()
}

/// Nested pair sets Γ₁ ⊆ Γ₂ ⊆ … in the model's pair numbering, with
/// inf_{Γ_jᶜ} c recorded per j (+∞ when the complement is empty).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompactExhaustion {
    sets: Vec<Vec<usize>>,
    #[serde(serialize_with = "inf_json")]
    infima: Vec<f64>,
}

impl CompactExhaustion {
    pub fn new(model: &FiniteMdp, mut sets: Vec<Vec<usize>>) -> Result<Self> {
        let np = model.n_pairs();
        for s in sets.iter_mut() {
            s.sort_unstable();
            s.dedup();
            if let Some(&bad) = s.iter().find(|&&p| p >= np) {
                return Err(Error::InvalidArgument(format!("exhaustion: pair {bad} out of range ({np} pairs)")));
            }
        }
        for j in 1..sets.len() {
            let next = &sets[j];
            if let Some(&p) = sets[j - 1].iter().find(|p| next.binary_search(p).is_err()) {
                return Err(Error::InvalidArgument(format!(
                    "exhaustion not nested: pair {p} is in set {} but not in set {}",
                    j - 1,
                    j
                )));
            }
        }
        let infima = sets
            .iter()
            .map(|s| {
                let mut inside = vec![false; np];
                s.iter().for_each(|&p| inside[p] = true);
                (0..np)
                    .filter(|&p| !inside[p])
                    .map(|p| model.cost(p))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        Ok(Self { sets, infima })
    }

    /// Γ_j = {(x, a) : c(x, a) ≤ levels[j]}; levels must be nondecreasing.
    pub fn by_cost_levels(model: &FiniteMdp, levels: &[f64]) -> Result<Self> {
        let sets = levels
            .iter()
            .map(|&l| (0..model.n_pairs()).filter(|&p| model.cost(p) <= l).collect())
            .collect();
        Self::new(model, sets)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn set(&self, j: usize) -> &[usize] {
        &self.sets[j]
    }

    pub fn infima(&self) -> &[f64] {
        &self.infima
    }

    /// γ(Γ_jᶜ)
    pub fn mass_outside(&self, j: usize, gamma: &OccupationMeasure) -> f64 {
        let inside: f64 = self.sets[j].iter().map(|&p| gamma.weights()[p]).sum();
        (1.0 - inside).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuReport {
    pub passed: bool,
    #[serde(serialize_with = "inf_json")]
    pub infima: Vec<f64>,
    pub threshold: f64,
    pub nondecreasing: bool,
    /// Set for generator checks: infima are minima over a finite probe grid.
    pub probe_points: Option<usize>,
    pub scope: String,
}

fn su_verdict(infima: Vec<f64>, threshold: f64, probe_points: Option<usize>, scope: String) -> SuReport {
    let nondecreasing = infima.windows(2).all(|w| w[1] >= w[0]);
    let last = infima.last().copied().unwrap_or(f64::NEG_INFINITY);
    SuReport {
        passed: nondecreasing && last >= threshold,
        infima,
        threshold,
        nondecreasing,
        probe_points,
        scope,
    }
}

/// Passes iff the infima are nondecreasing and the last one reaches `threshold`.
/// An empty complement counts as +∞.
pub fn check_su(exhaustion: &CompactExhaustion, threshold: f64) -> SuReport {
    su_verdict(
        exhaustion.infima.clone(),
        threshold,
        None,
        "exact over the finite pair set".into(),
    )
}

/// Γ_j = [−x_radius[j], x_radius[j]] × {a : |a| ≤ action_radius[j]}.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxExhaustion {
    pub x_radius: Vec<f64>,
    pub action_radius: Vec<f64>,
}

impl BoxExhaustion {
    fn contains(&self, j: usize, x: f64, a: f64) -> bool {
        x.abs() <= self.x_radius[j] && a.abs() <= self.action_radius[j]
    }
}

/// Probe points (x, a) standing in for Γ in the generator route.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeGrid {
    pub xs: Vec<f64>,
    pub actions: Vec<f64>,
}

/// SU for a cost function on a continuous space: infima over probe points
/// outside each box.
pub fn check_su_generator(
    cost: &(dyn Fn(f64, f64) -> f64 + Sync),
    boxes: &BoxExhaustion,
    probe: &ProbeGrid,
    threshold: f64,
) -> Result<SuReport> {
    if boxes.x_radius.len() != boxes.action_radius.len() {
        return Err(Error::InvalidArgument("box exhaustion: radius lists differ in length".into()));
    }
    let nested = |r: &[f64]| r.windows(2).all(|w| w[1] >= w[0]);
    if !nested(&boxes.x_radius) || !nested(&boxes.action_radius) {
        return Err(Error::InvalidArgument("exhaustion not nested: radii must be nondecreasing".into()));
    }
    let infima = (0..boxes.x_radius.len())
        .into_par_iter()
        .map(|j| {
            let mut m = f64::INFINITY;
            for &x in &probe.xs {
                for &a in &probe.actions {
                    if !boxes.contains(j, x, a) {
                        m = m.min(cost(x, a));
                    }
                }
            }
            m
        })
        .collect();
    let points = probe.xs.len() * probe.actions.len();
    Ok(su_verdict(
        infima,
        threshold,
        Some(points),
        format!("sampled on a probe grid of {points} points"),
    ))
}

/// Boxes Γ_j = [−j, j] × {kδ : |k| ≤ j} for j = 1..=depth and a probe grid
/// reaching two units beyond the largest box.
pub fn example2_exhaustion(config: &Example2Config, depth: usize) -> (BoxExhaustion, ProbeGrid) {
    let boxes = BoxExhaustion {
        x_radius: (1..=depth).map(|j| j as f64).collect(),
        action_radius: (1..=depth).map(|j| j as f64 * config.delta + 1e-9).collect(),
    };
    let reach = depth as f64 + 2.0;
    let step = 0.05;
    let nx = (reach / step).round() as i64;
    let xs = (-nx..=nx).map(|k| k as f64 * step).collect();
    let ka = depth as i64 + 2;
    let actions = (-ka..=ka).map(|k| k as f64 * config.delta).collect();
    (boxes, ProbeGrid { xs, actions })
}

pub fn check_su_example2(config: &Example2Config, depth: usize, threshold: f64) -> Result<SuReport> {
    let (boxes, probe) = example2_exhaustion(config, depth);
    check_su_generator(&|x, a| config.cost(x, a), &boxes, &probe, threshold)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    fn intersect(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SetDescriptor {
    /// Finite union of intervals.
    Intervals(Vec<Interval>),
    Point(f64),
    States(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NuDescriptor {
    /// ν(B) = ℓ · Leb(B ∩ O)
    LebesgueMultiple { ell: f64, total_mass: f64 },
    Finite { weights: Vec<f64>, total_mass: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestedPairs {
    Grid { points: Vec<(f64, f64)> },
    AllOfGamma { count: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestedFamily {
    /// Each cell, the union of all cells, and singletons at atoms.
    Cells { cells: Vec<Interval>, atoms: Vec<f64> },
    Singletons { states: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Worst {
    /// State coordinate (state index for finite models).
    pub x: f64,
    /// Action coordinate (action label for finite models).
    pub a: f64,
    pub set: SetDescriptor,
    pub violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MajorizationCertificate {
    pub scope: String,
    pub open_set: SetDescriptor,
    pub closed_set: SetDescriptor,
    pub nu: NuDescriptor,
    pub pairs: TestedPairs,
    pub family: TestedFamily,
    pub tolerance: f64,
    /// max over tested (pair, B) of q((O∖D) ∩ B) − ν(B) − tolerance; −∞ when nothing was tested.
    pub max_violation: f64,
    pub worst: Option<Worst>,
    pub passed: bool,
    pub notes: Vec<String>,
}

/// Transition law of the next state given (x, a).
#[derive(Clone, Copy)]
pub enum Kernel<'a> {
    /// Density of the next state at y given (x, a).
    Density(&'a (dyn Fn(f64, f64, f64) -> f64 + Sync)),
    /// Atoms (y, mass) of the next state given (x, a).
    Atomic(&'a (dyn Fn(f64, f64) -> Vec<(f64, f64)> + Sync)),
}

pub struct DensityProblem<'a> {
    pub ell: f64,
    pub open: Interval,
    pub closed: Vec<Interval>,
    pub kernel: Kernel<'a>,
    pub pair_grid: Vec<(f64, f64)>,
    pub cells: Vec<Interval>,
}

fn simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = SIMPSON_PANELS;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

// B ∖ D as disjoint intervals; D is closed but boundaries carry no density mass.
fn subtract(b: Interval, closed: &[Interval]) -> Vec<Interval> {
    let mut pieces = vec![b];
    for d in closed {
        pieces = pieces
            .into_iter()
            .flat_map(|p| {
                let mut out = Vec::with_capacity(2);
                let left = Interval::new(p.lo, p.hi.min(d.lo));
                let right = Interval::new(p.lo.max(d.hi), p.hi);
                if !left.is_empty() {
                    out.push(left);
                }
                if !right.is_empty() {
                    out.push(right);
                }
                out
            })
            .collect();
    }
    pieces
}

fn in_open_minus_closed(y: f64, open: &Interval, closed: &[Interval]) -> bool {
    y > open.lo && y < open.hi && !closed.iter().any(|d| y >= d.lo && y <= d.hi)
}

fn better(a: &Option<Worst>, b: &Option<Worst>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a.violation > b.violation,
        (Some(_), None) => true,
        _ => false,
    }
}

/// Checks q((O∖D) ∩ B | x, a) ≤ ℓ·Leb(B ∩ O) + 1e−12 for each grid pair and
/// each B in the tested family (cells, their union, and atom singletons).
/// The result covers the tested family only.
pub fn check_m_density(problem: &DensityProblem<'_>) -> Result<MajorizationCertificate> {
    let DensityProblem {
        ell,
        open,
        closed,
        kernel,
        pair_grid,
        cells,
    } = problem;
    if !(*ell > 0.0 && ell.is_finite()) {
        return Err(Error::InvalidArgument("density bound must be positive and finite".into()));
    }
    if open.is_empty() || !open.lo.is_finite() || !open.hi.is_finite() {
        return Err(Error::InvalidArgument("open set must be a bounded nonempty interval".into()));
    }
    let mut sorted = cells.clone();
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut reach = open.lo;
    for c in &sorted {
        if c.lo > reach + 1e-9 {
            break;
        }
        reach = reach.max(c.hi);
    }
    if sorted.first().is_none_or(|c| c.lo > open.lo + 1e-9) || reach < open.hi - 1e-9 {
        return Err(Error::InvalidArgument("cell partition does not cover the open set".into()));
    }
    let union = Interval::new(sorted[0].lo, sorted.iter().map(|c| c.hi).fold(f64::NEG_INFINITY, f64::max));

    let mut atoms: Vec<f64> = Vec::new();
    if let Kernel::Atomic(f) = kernel {
        for &(x, a) in pair_grid {
            for (y, _) in f(x, a) {
                if in_open_minus_closed(y, open, closed) {
                    atoms.push(y);
                }
            }
        }
        atoms.sort_by(f64::total_cmp);
        atoms.dedup();
    }
    let nu_of = |b: &Interval| ell * b.intersect(open).len();

    let per_pair = pair_grid
        .par_iter()
        .map(|&(x, a)| -> Result<Option<Worst>> {
            let mut worst: Option<Worst> = None;
            let mut record = |set: SetDescriptor, violation: f64| {
                if worst.as_ref().is_none_or(|w| violation > w.violation) {
                    worst = Some(Worst { x, a, set, violation });
                }
            };
            let mass_in = |b: &Interval| -> Result<f64> {
                match kernel {
                    Kernel::Density(f) => {
                        let mut total = 0.0;
                        for piece in subtract(b.intersect(open), closed) {
                            let bad = std::cell::Cell::new(None);
                            let m = simpson(
                                &|y| {
                                    let v = f(x, a, y);
                                    if !(v.is_finite() && v >= 0.0) {
                                        bad.set(Some(y));
                                    }
                                    v
                                },
                                piece.lo,
                                piece.hi,
                            );
                            if let Some(y) = bad.get() {
                                return Err(Error::DensityEvaluation { x, a, y });
                            }
                            total += m;
                        }
                        Ok(total)
                    }
                    Kernel::Atomic(f) => Ok(f(x, a)
                        .into_iter()
                        .filter(|&(y, _)| y >= b.lo && y < b.hi && in_open_minus_closed(y, open, closed))
                        .map(|(_, p)| p)
                        .sum()),
                }
            };
            for c in cells.iter().chain(std::iter::once(&union)) {
                let v = mass_in(c)? - nu_of(c) - DENSITY_TOL;
                record(SetDescriptor::Intervals(vec![*c]), v);
            }
            if let Kernel::Atomic(f) = kernel {
                for (y, p) in f(x, a) {
                    if in_open_minus_closed(y, open, closed) {
                        record(SetDescriptor::Point(y), p - DENSITY_TOL);
                    }
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = per_pair.into_iter().fold(None, |acc, w| if better(&w, &acc) { w } else { acc });
    let max_violation = worst.as_ref().map_or(f64::NEG_INFINITY, |w| w.violation);
    let mut notes = vec![CONTINUITY_NOTE.to_string()];
    if matches!(kernel, Kernel::Atomic(_)) {
        notes.push("atomic kernel: singleton test sets added at every atom inside O minus D".into());
    }
    Ok(MajorizationCertificate {
        scope: "certificate over tested family only".into(),
        open_set: SetDescriptor::Intervals(vec![*open]),
        closed_set: SetDescriptor::Intervals(closed.clone()),
        nu: NuDescriptor::LebesgueMultiple {
            ell: *ell,
            total_mass: ell * open.len(),
        },
        pairs: TestedPairs::Grid {
            points: pair_grid.clone(),
        },
        family: TestedFamily::Cells { cells: cells.clone(), atoms },
        tolerance: DENSITY_TOL,
        passed: max_violation <= 0.0,
        max_violation,
        worst,
        notes,
    })
}

/// Density route for the discretized scalar model: O = (−j−1, j+1), D = ∅,
/// ν = ℓ·Lebesgue with ℓ the noise density bound, pairs on the model grid
/// with |x| ≤ j and |a| ≤ jδ, cells of width h.
pub fn check_m_example2(config: &Example2Config, j: usize) -> Result<MajorizationCertificate> {
    let jf = j as f64;
    let open = Interval::new(-jf - 1.0, jf + 1.0);
    let h = config.h;
    let n_cells = ((open.hi - open.lo) / h).ceil() as usize;
    let cells = (0..n_cells)
        .map(|k| Interval::new(open.lo + k as f64 * h, (open.lo + (k + 1) as f64 * h).min(open.hi)))
        .collect();
    let mut pair_grid = Vec::new();
    for xi in 0..config.n_states() {
        let x = config.state_center(xi);
        if x.abs() > jf + 1e-9 {
            continue;
        }
        for label in 0..=2 * config.action_radius {
            let a = config.action_value(label);
            if a.abs() <= jf * config.delta + 1e-9 {
                pair_grid.push((x, a));
            }
        }
    }
    let noise = &config.noise;
    let density = move |x: f64, a: f64, y: f64| noise.density(x, a, y - x - a);
    check_m_density(&DensityProblem {
        ell: noise.sup_density(),
        open,
        closed: vec![],
        kernel: Kernel::Density(&density),
        pair_grid,
        cells,
    })
}

/// ν(y) = max over Γ of q(y | x, a) on O∖D, zero elsewhere.
pub fn envelope_nu(model: &FiniteMdp, open: &[usize], closed: &[usize]) -> Vec<f64> {
    let target = target_states(model.n_states(), open, closed);
    let mut nu = vec![0.0f64; model.n_states()];
    for p in model.pairs() {
        for &(y, q) in p.row {
            if target[y] {
                nu[y] = nu[y].max(q);
            }
        }
    }
    nu
}

fn target_states(n: usize, open: &[usize], closed: &[usize]) -> Vec<bool> {
    let mut t = vec![false; n];
    open.iter().filter(|&&y| y < n).for_each(|&y| t[y] = true);
    closed.iter().filter(|&&y| y < n).for_each(|&y| t[y] = false);
    t
}

/// Exhaustive check of q({y} | x, a) ≤ ν({y}) over Γ and every y ∈ O∖D.
pub fn check_m_finite(model: &FiniteMdp, open: &[usize], closed: &[usize], nu: &[f64]) -> Result<MajorizationCertificate> {
    let n = model.n_states();
    if nu.len() != n {
        return Err(Error::InvalidArgument(format!("nu has {} entries, model has {n} states", nu.len())));
    }
    if let Some(&y) = open.iter().chain(closed).find(|&&y| y >= n) {
        return Err(Error::InvalidArgument(format!("state {y} out of range")));
    }
    if nu.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("nu must be finite and nonnegative".into()));
    }
    let target = target_states(n, open, closed);
    let singletons: Vec<usize> = (0..n).filter(|&y| target[y]).collect();
    let worst = (0..model.n_pairs())
        .into_par_iter()
        .map(|pair| {
            let x = model.pair_state(pair);
            let a = model.pair(pair).action as f64;
            let row = model.row(pair);
            let mut w: Option<Worst> = None;
            for &y in &singletons {
                let q = row.binary_search_by(|e| e.0.cmp(&y)).map(|k| row[k].1).unwrap_or(0.0);
                let v = q - nu[y];
                if w.as_ref().is_none_or(|b| v > b.violation) {
                    w = Some(Worst {
                        x: x as f64,
                        a,
                        set: SetDescriptor::States(vec![y]),
                        violation: v,
                    });
                }
            }
            w
        })
        .reduce(|| None, |l, r| if better(&r, &l) { r } else { l });
    let max_violation = worst.as_ref().map_or(f64::NEG_INFINITY, |w| w.violation);
    Ok(MajorizationCertificate {
        scope: "exact: all pairs and all singletons of O minus D".into(),
        open_set: SetDescriptor::States(open.to_vec()),
        closed_set: SetDescriptor::States(closed.to_vec()),
        nu: NuDescriptor::Finite {
            weights: nu.to_vec(),
            total_mass: nu.iter().sum(),
        },
        pairs: TestedPairs::AllOfGamma { count: model.n_pairs() },
        family: TestedFamily::Singletons { states: singletons },
        tolerance: 0.0,
        passed: max_violation <= 0.0,
        max_violation,
        worst,
        notes: vec![CONTINUITY_NOTE.to_string()],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyticBound {
    pub bound: f64,
    pub n_paths: usize,
    pub mc_mean: f64,
    pub mc_std_error: f64,
    /// mc_mean ≤ bound + 3·mc_std_error
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GReport {
    pub passed: bool,
    pub threshold: f64,
    pub horizon: usize,
    pub window: usize,
    pub j_n_over_n: f64,
    pub tail_inf: f64,
    pub tail_sup: f64,
    pub analytic: Option<AnalyticBound>,
}

/// Passes iff the exact Jₖ/k tail stays at or below `threshold`.
pub fn check_g<P: Policy + ?Sized>(
    model: &FiniteMdp,
    policy: &P,
    initial: &[f64],
    horizon: usize,
    threshold: f64,
) -> Result<GReport> {
    let est = expected_average_cost(model, policy, initial, horizon, None)?;
    Ok(GReport {
        passed: est.tail_sup <= threshold,
        threshold,
        horizon,
        window: est.window,
        j_n_over_n: est.j_n_over_n,
        tail_inf: est.tail_inf,
        tail_sup: est.tail_sup,
        analytic: None,
    })
}

/// Argmin policy from x = 0 against the bound 2(δ² + σ²)·sup β, both on the
/// exact tail and on the Monte Carlo mean of final running averages.
pub fn check_g_example2(
    config: &Example2Config,
    model: &FiniteMdp,
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<GReport> {
    let policy = example2_argmin_policy(config);
    let initial = model.point_mass(config.state_of(0.0));
    let bound = config.g_bound();
    let mut report = check_g(model, &policy, &initial, horizon, bound)?;
    let mc = pathwise_average_cost(model, &policy, &initial, horizon, n_paths, seed)?;
    let se = mc.quantiles.std_dev / (n_paths as f64).sqrt();
    let analytic = AnalyticBound {
        bound,
        n_paths,
        mc_mean: mc.quantiles.mean,
        mc_std_error: se,
        passed: mc.quantiles.mean <= bound + 3.0 * se,
    };
    report.passed &= analytic.passed;
    report.analytic = Some(analytic);
    Ok(report)
}
