//! Recurrence diagnostics: hitting probabilities, expected hitting times,
//! positive Harris recurrence and f-regularity.
//!
//! Birth-reset chains (P(0,0) = 1, P(i,0) = βᵢ, P(i,i+1) = 1 − βᵢ) are handled
//! exactly through their survival series. From i ≥ 1,
//!
//! ```text
//! P_i(τ₀ > k) = Π_{j=i}^{i+k-1} (1 − β_j),     E_i[τ₀] = Σ_{k≥0} P_i(τ₀ > k).
//! ```
//!
//! Such a chain is ψ-irreducible with the single reset state 0, so it is
//! positive Harris iff Σ βⱼ = ∞ (escape probability zero). General models
//! are only probed by simulation.
//!
//! Series are classified from a finite prefix by tail tests over the second
//! half of the probed range:
//! * all tail terms vanish, or the tail term ratio stays below some r < 1
//!   (geometric bound), or k^1.5·t_k is nonincreasing (bound 2K·t_K): converges;
//! * k·t_k is nondecreasing (comparison with the harmonic series), or the
//!   partial sum passes [`DIVERGENCE_THRESHOLD`]: diverges.
//!
//! The tail tests extrapolate behaviour seen on the probed range; they are
//! exact for the built-in β families.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mdp::{check_inputs, FiniteMdp, Policy, Walker};
use crate::rng::derive_seed;

pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

/// Censoring fraction below which Monte Carlo mean hitting times are reported.
pub const MAX_CENSORING: f64 = 0.01;

type SeqFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// Reset probabilities βᵢ, i ≥ 1.
#[derive(Clone)]
pub enum BetaFamily {
    /// βᵢ = 1/(i+1)
    Harmonic,
    /// βᵢ = 1 − (1 + 2/(i+1))/(1 + 2/i); Π (1 − βᵢ) = 1/3
    Telescoping,
    Constant(f64),
    Custom { label: String, beta: SeqFn },
}

impl BetaFamily {
    pub fn custom(label: impl Into<String>, beta: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        BetaFamily::Custom {
            label: label.into(),
            beta: Arc::new(beta),
        }
    }

    pub fn label(&self) -> String {
        match self {
            BetaFamily::Harmonic => "harmonic".into(),
            BetaFamily::Telescoping => "telescoping".into(),
            BetaFamily::Constant(b) => format!("constant({b})"),
            BetaFamily::Custom { label, .. } => label.clone(),
        }
    }

    pub fn beta(&self, i: usize) -> f64 {
        match self {
            BetaFamily::Harmonic => 1.0 / (i as f64 + 1.0),
            BetaFamily::Telescoping => {
                let i = i as f64;
                2.0 / ((i + 1.0) * (i + 2.0))
            }
            BetaFamily::Constant(b) => *b,
            BetaFamily::Custom { beta, .. } => beta(i),
        }
    }

    /// 1 − βᵢ, evaluated without cancellation for the built-in families.
    pub fn stay(&self, i: usize) -> f64 {
        match self {
            BetaFamily::Harmonic => i as f64 / (i as f64 + 1.0),
            BetaFamily::Telescoping => {
                let i = i as f64;
                (1.0 + 2.0 / (i + 1.0)) / (1.0 + 2.0 / i)
            }
            _ => 1.0 - self.beta(i),
        }
    }

    /// −ln(1 − βᵢ), accurate when βᵢ is tiny.
    pub fn neg_log_stay(&self, i: usize) -> f64 {
        let b = self.beta(i);
        if b < 0.5 {
            -(-b).ln_1p()
        } else {
            -self.stay(i).ln()
        }
    }
}

impl fmt::Debug for BetaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// One-stage costs of the birth-reset chain. All built-in families have c(0) = 0.
#[derive(Clone)]
pub enum CostFamily {
    /// c(0) = 0, c(i) = 1
    Indicator,
    /// c(0) = 0, c(i) = i + offset
    Linear { offset: f64 },
    Custom { label: String, cost: SeqFn },
}

impl CostFamily {
    pub fn custom(label: impl Into<String>, cost: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        CostFamily::Custom {
            label: label.into(),
            cost: Arc::new(cost),
        }
    }

    pub fn label(&self) -> String {
        match self {
            CostFamily::Indicator => "indicator".into(),
            CostFamily::Linear { offset } => format!("linear(+{offset})"),
            CostFamily::Custom { label, .. } => label.clone(),
        }
    }

    pub fn cost(&self, i: usize) -> f64 {
        match self {
            CostFamily::Indicator => (i > 0) as u8 as f64,
            CostFamily::Linear { offset } => {
                if i == 0 {
                    0.0
                } else {
                    i as f64 + offset
                }
            }
            CostFamily::Custom { cost, .. } => cost(i),
        }
    }
}

impl fmt::Debug for CostFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Clone, Debug)]
pub struct BirthResetChain {
    pub beta: BetaFamily,
    pub cost: CostFamily,
    /// Largest state kept in finite realizations.
    pub truncation: usize,
}

impl BirthResetChain {
    pub fn new(beta: BetaFamily, cost: CostFamily, truncation: usize) -> Result<Self> {
        let chain = Self { beta, cost, truncation };
        for i in 1..=truncation {
            chain.check_beta(i)?;
        }
        Ok(chain)
    }

    fn check_beta(&self, i: usize) -> Result<()> {
        let b = self.beta.beta(i);
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::InvalidArgument(format!("beta_{i} = {b} is not in (0, 1]")));
        }
        Ok(())
    }

    /// P_i(τ₀ > k) for k = 0..=depth, stopping early once terms underflow.
    fn survival_terms(&self, i: usize, depth: usize) -> Result<Vec<f64>> {
        let mut terms = Vec::with_capacity(depth.min(1 << 20) + 1);
        terms.push(1.0);
        let mut s = 1.0;
        for k in 1..=depth {
            let j = i + k - 1;
            self.check_beta(j)?;
            s *= self.beta.stay(j);
            terms.push(s);
            if s < 1e-300 {
                break;
            }
        }
        Ok(terms)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    PositiveHarris,
    PositiveNotHarris,
    NotClassified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ternary {
    Yes,
    No,
    NotClassified,
}

/// Outcome of the tail tests on a nonnegative series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SeriesVerdict {
    Converges {
        partial: f64,
        tail_bound: f64,
        terms: usize,
    },
    Diverges {
        partial: f64,
        depth: usize,
        /// K₀·t_{K₀} at the start of the tested tail: t_k ≥ this / k beyond it.
        harmonic_constant: f64,
        tail_start: usize,
    },
    Undecided {
        partial: f64,
        depth: usize,
    },
}

impl SeriesVerdict {
    pub fn partial(&self) -> f64 {
        match *self {
            SeriesVerdict::Converges { partial, .. }
            | SeriesVerdict::Diverges { partial, .. }
            | SeriesVerdict::Undecided { partial, .. } => partial,
        }
    }

    /// ln of the depth by which the partial sums provably exceed `threshold`,
    /// from the harmonic lower bound Σ_{K₀<k≤K} t_k ≥ C·ln(K/K₀).
    pub fn log_depth_to_exceed(&self, threshold: f64) -> Option<f64> {
        match *self {
            SeriesVerdict::Diverges {
                partial,
                harmonic_constant,
                tail_start,
                ..
            } => {
                if partial >= threshold {
                    return Some(0.0);
                }
                if harmonic_constant <= 0.0 {
                    return None;
                }
                Some((tail_start.max(1) as f64).ln() + (threshold - partial) / harmonic_constant)
            }
            _ => None,
        }
    }
}

/// Runs the tail tests on `terms` (t_0, t_1, ...) over the second half of
/// the probed range.
pub fn classify_series(terms: &[f64]) -> SeriesVerdict {
    let partial: f64 = terms.iter().sum();
    let depth = terms.len().saturating_sub(1);
    if partial > DIVERGENCE_THRESHOLD {
        return SeriesVerdict::Diverges {
            partial,
            depth,
            harmonic_constant: 0.0,
            tail_start: depth,
        };
    }
    if depth < 4 {
        if terms.last().is_some_and(|&t| t == 0.0) {
            return SeriesVerdict::Converges { partial, tail_bound: 0.0, terms: terms.len() };
        }
        return SeriesVerdict::Undecided { partial, depth };
    }
    let k0 = depth / 2;
    let tail = &terms[k0..];
    let last = *terms.last().unwrap();
    if tail.iter().all(|&t| t == 0.0) || last == 0.0 {
        return SeriesVerdict::Converges { partial, tail_bound: 0.0, terms: terms.len() };
    }
    // geometric; ratios creeping toward 1 like 1 − c/k do not count
    let r = tail
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::INFINITY })
        .fold(0.0, f64::max);
    if r < 1.0 - 10.0 / depth as f64 {
        return SeriesVerdict::Converges {
            partial,
            tail_bound: last * r / (1.0 - r),
            terms: terms.len(),
        };
    }
    let slack = 1.0 + 1e-12;
    let weighted = |p: f64| tail.iter().enumerate().map(move |(o, &t)| ((k0 + o) as f64).powf(p) * t);
    let nonincreasing = |p: f64| {
        let w: Vec<f64> = weighted(p).collect();
        w.windows(2).all(|w| w[1] <= w[0] * slack)
    };
    if k0 >= 1 && nonincreasing(1.5) {
        return SeriesVerdict::Converges {
            partial,
            tail_bound: 2.0 * depth as f64 * last,
            terms: terms.len(),
        };
    }
    let w1: Vec<f64> = weighted(1.0).collect();
    if k0 >= 1 && w1.windows(2).all(|w| w[1] * slack >= w[0]) {
        return SeriesVerdict::Diverges {
            partial,
            depth,
            harmonic_constant: w1[0],
            tail_start: k0,
        };
    }
    SeriesVerdict::Undecided { partial, depth }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExpectedTime {
    /// Certified finite: `value` is the partial sum, the limit lies in
    /// `[value, value + tail_bound]`.
    Finite { value: f64, tail_bound: f64 },
    /// Certified divergent.
    Infinite { partial: f64, depth: usize },
    /// Monte Carlo mean of uncensored hitting times.
    Estimated { mean: f64, std_error: f64 },
    /// Not decided (series undecided or censoring too heavy).
    Unresolved { partial: f64, depth: usize },
}

impl ExpectedTime {
    pub fn is_infinite(&self) -> bool {
        matches!(self, ExpectedTime::Infinite { .. })
    }

    pub fn value(&self) -> f64 {
        match *self {
            ExpectedTime::Finite { value, .. } => value,
            ExpectedTime::Estimated { mean, .. } => mean,
            ExpectedTime::Infinite { .. } => f64::INFINITY,
            ExpectedTime::Unresolved { .. } => f64::NAN,
        }
    }
}

impl fmt::Display for ExpectedTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ExpectedTime::Finite { value, tail_bound } => write!(f, "{value:.9}(+{tail_bound:.1e})"),
            ExpectedTime::Infinite { partial, depth } => write!(f, "inf(partial={partial:.6}, depth={depth})"),
            ExpectedTime::Estimated { mean, std_error } => write!(f, "{mean:.6}(se={std_error:.2e})"),
            ExpectedTime::Unresolved { partial, depth } => write!(f, "unresolved(partial={partial:.6}, depth={depth})"),
        }
    }
}

impl Serialize for ExpectedTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEvidence {
    pub paths: usize,
    pub hits: usize,
    pub std_error: f64,
    pub censored_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateHitting {
    pub state: usize,
    /// P_x{τ_B < ∞} (finite-horizon frequency for Monte Carlo reports)
    pub hitting_probability: f64,
    pub escape_probability: f64,
    /// Interval known to contain the escape probability.
    pub escape_bounds: (f64, f64),
    pub expected_hitting_time: ExpectedTime,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<McEvidence>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrenceReport {
    pub target: Vec<usize>,
    pub states: Vec<StateHitting>,
    pub classification: Classification,
    pub f_regular: Ternary,
    pub method: String,
}

impl RecurrenceReport {
    pub fn state(&self, x: usize) -> Option<&StateHitting> {
        self.states.iter().find(|s| s.state == x)
    }

    pub fn with_regularity(mut self, verdict: Ternary) -> Self {
        self.f_regular = verdict;
        self
    }

    /// Fixed-width table, one line per reported state.
    pub fn table(&self) -> String {
        let mut out = format!(
            "target {:?}  classification {:?}  f-regular {:?}  ({})\n",
            self.target, self.classification, self.f_regular, self.method
        );
        out.push_str(&format!(
            "{:>6}  {:>12}  {:>12}  {:>27}  {}\n",
            "state", "P(hit)", "P(escape)", "escape bounds", "E[tau]"
        ));
        for s in &self.states {
            out.push_str(&format!(
                "{:>6}  {:>12.9}  {:>12.9}  [{:>12.9}, {:>12.9}]  {}\n",
                s.state, s.hitting_probability, s.escape_probability, s.escape_bounds.0, s.escape_bounds.1, s.expected_hitting_time
            ));
        }
        out
    }
}

/// Exact escape probabilities and E_i[τ₀] for i = 0..=truncation.
pub fn hitting_analysis_exact(chain: &BirthResetChain, depth: usize) -> Result<RecurrenceReport> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let mut states = vec![StateHitting {
        state: 0,
        hitting_probability: 1.0,
        escape_probability: 0.0,
        escape_bounds: (0.0, 0.0),
        expected_hitting_time: ExpectedTime::Finite { value: 1.0, tail_bound: 0.0 },
        monte_carlo: None,
    }];
    let mut classification = Classification::NotClassified;
    for i in 1..=chain.truncation.max(1) {
        let (escape, bounds, verdict) = escape_probability(chain, i, depth)?;
        if i == 1 {
            classification = match verdict {
                SeriesVerdict::Diverges { .. } => Classification::PositiveHarris,
                _ if bounds.0 > 0.0 => Classification::PositiveNotHarris,
                SeriesVerdict::Converges { .. } if bounds.1 == 0.0 => Classification::PositiveHarris,
                _ => Classification::NotClassified,
            };
        }
        let terms = chain.survival_terms(i, depth)?;
        let expected = match classify_series(&terms) {
            SeriesVerdict::Converges { partial, tail_bound, .. } => ExpectedTime::Finite {
                value: partial,
                tail_bound,
            },
            SeriesVerdict::Diverges { partial, depth, .. } => ExpectedTime::Infinite { partial, depth },
            SeriesVerdict::Undecided { partial, depth } => ExpectedTime::Unresolved { partial, depth },
        };
        states.push(StateHitting {
            state: i,
            hitting_probability: 1.0 - escape,
            escape_probability: escape,
            escape_bounds: bounds,
            expected_hitting_time: expected,
            monte_carlo: None,
        });
    }
    Ok(RecurrenceReport {
        target: vec![0],
        states,
        classification,
        f_regular: Ternary::NotClassified,
        method: format!("exact series, depth {depth}"),
    })
}

/// Π_{j≥i} (1 − β_j): point value, enclosing interval, and the verdict on
/// Σ −ln(1 − β_j) it was derived from.
pub fn escape_probability(chain: &BirthResetChain, i: usize, depth: usize) -> Result<(f64, (f64, f64), SeriesVerdict)> {
    let mut logs = Vec::with_capacity(depth.min(1 << 20) + 1);
    for j in i..=i + depth {
        chain.check_beta(j)?;
        let stay = chain.beta.stay(j);
        if stay == 0.0 {
            let v = SeriesVerdict::Diverges {
                partial: f64::INFINITY,
                depth: j - i,
                harmonic_constant: 0.0,
                tail_start: j - i,
            };
            return Ok((0.0, (0.0, 0.0), v));
        }
        logs.push(chain.beta.neg_log_stay(j));
    }
    let verdict = classify_series(&logs);
    let partial = verdict.partial();
    let upper = (-partial).exp();
    Ok(match verdict {
        SeriesVerdict::Converges { tail_bound, .. } => {
            let lower = (-(partial + tail_bound)).exp();
            ((-(partial + 0.5 * tail_bound)).exp(), (lower, upper), verdict)
        }
        SeriesVerdict::Diverges { .. } => (0.0, (0.0, upper), verdict),
        SeriesVerdict::Undecided { .. } => (upper, (0.0, upper), verdict),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityProbe {
    pub verdict: Ternary,
    /// Σ_k f(i+k)·P_i(τ₀ > k) per start state i.
    pub per_state: Vec<(usize, SeriesVerdict)>,
}

/// Expected f-weighted sum before reset, per start state 1..=truncation.
pub fn f_regularity_probe(
    chain: &BirthResetChain,
    f: &dyn Fn(usize) -> f64,
    depth: usize,
) -> Result<RegularityProbe> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let mut per_state = Vec::new();
    for i in 1..=chain.truncation.max(1) {
        let surv = chain.survival_terms(i, depth)?;
        let mut terms = Vec::with_capacity(surv.len());
        for (k, s) in surv.iter().enumerate() {
            let fv = f(i + k);
            if !(fv >= 1.0) {
                return Err(Error::InvalidArgument(format!("f({}) = {fv} < 1", i + k)));
            }
            terms.push(fv * s);
        }
        per_state.push((i, classify_series(&terms)));
    }
    let verdict = if per_state.iter().any(|(_, v)| matches!(v, SeriesVerdict::Diverges { .. })) {
        Ternary::No
    } else if per_state.iter().all(|(_, v)| matches!(v, SeriesVerdict::Converges { .. })) {
        Ternary::Yes
    } else {
        Ternary::NotClassified
    };
    Ok(RegularityProbe { verdict, per_state })
}

/// Simulated hitting of `target` (τ_B = min{n ≥ 1 : xₙ ∈ B}) from each start.
///
/// Path `p` from the `s`-th start uses seed `seed + s·n_paths + p`. Mean
/// hitting times are reported only when fewer than 1% of paths are censored
/// at `horizon`. The classification is evidence-level: positive Harris when
/// every start's censored fraction is below 1% with 3-σ confidence,
/// not Harris when some start's censored fraction exceeds 1% with 3-σ
/// confidence, otherwise not classified.
pub fn hitting_analysis_mc<P: Policy + ?Sized>(
    model: &FiniteMdp,
    policy: &P,
    target: &[usize],
    starts: &[usize],
    n_paths: usize,
    horizon: usize,
    seed: u64,
) -> Result<RecurrenceReport> {
    if target.is_empty() {
        return Err(Error::InvalidArgument("target set is empty".into()));
    }
    if n_paths == 0 || horizon == 0 {
        return Err(Error::InvalidArgument("n_paths and horizon must be at least 1".into()));
    }
    let ns = model.n_states();
    if let Some(&x) = target.iter().chain(starts).find(|&&x| x >= ns) {
        return Err(Error::InvalidArgument(format!("state {x} out of range")));
    }
    let initial = vec![1.0 / ns as f64; ns];
    check_inputs(model, policy, &initial)?;
    let mut in_target = vec![false; ns];
    target.iter().for_each(|&x| in_target[x] = true);

    let mut states = Vec::with_capacity(starts.len());
    let mut all_recurrent = true;
    let mut some_escape = false;
    for (si, &x0) in starts.iter().enumerate() {
        let start = model.point_mass(x0);
        let times: Vec<Option<usize>> = (0..n_paths as u64)
            .into_par_iter()
            .map(|p| {
                let s = derive_seed(seed, si as u64 * n_paths as u64 + p);
                let mut w = Walker::new(model, policy, &start, s);
                for n in 1..=horizon {
                    w.step();
                    if in_target[w.state()] {
                        return Some(n);
                    }
                }
                None
            })
            .collect();
        let hits: Vec<f64> = times.iter().flatten().map(|&t| t as f64).collect();
        let nf = n_paths as f64;
        let frac = hits.len() as f64 / nf;
        let se = (frac * (1.0 - frac) / nf).sqrt();
        let censored = 1.0 - frac;
        let expected = if censored < MAX_CENSORING && !hits.is_empty() {
            let m = hits.iter().sum::<f64>() / hits.len() as f64;
            let var = if hits.len() > 1 {
                hits.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (hits.len() - 1) as f64
            } else {
                0.0
            };
            ExpectedTime::Estimated {
                mean: m,
                std_error: (var / hits.len() as f64).sqrt(),
            }
        } else {
            ExpectedTime::Unresolved {
                partial: f64::NAN,
                depth: horizon,
            }
        };
        let upper = if hits.len() == n_paths { 3.0 / nf } else { censored + 3.0 * se };
        let lower = censored - 3.0 * se;
        all_recurrent &= upper < MAX_CENSORING;
        some_escape |= lower > MAX_CENSORING;
        states.push(StateHitting {
            state: x0,
            hitting_probability: frac,
            escape_probability: censored,
            escape_bounds: ((censored - 3.0 * se).max(0.0), (censored + 3.0 * se).min(1.0)),
            expected_hitting_time: expected,
            monte_carlo: Some(McEvidence {
                paths: n_paths,
                hits: hits.len(),
                std_error: se,
                censored_fraction: censored,
            }),
        });
    }
    let classification = if some_escape {
        Classification::PositiveNotHarris
    } else if all_recurrent && !starts.is_empty() {
        Classification::PositiveHarris
    } else {
        Classification::NotClassified
    };
    Ok(RecurrenceReport {
        target: target.to_vec(),
        states,
        classification,
        f_regular: Ternary::NotClassified,
        method: format!("monte carlo, {n_paths} paths, horizon {horizon}"),
    })
}
