//! Model generators: birth-reset chains, a discretized scalar LQ-type model
//! with additive noise, and random MDPs for cross-checks.

use std::sync::Arc;

use rand::Rng;
use statrs::function::erf::erfc;

use crate::chain::{BetaFamily, BirthResetChain, CostFamily};
use crate::error::{Error, Result};
use crate::mdp::{ActionSpec, FiniteMdp, StationaryPolicy};
use crate::rng;

/// Birth-reset chain truncated at state `truncation`.
///
/// The forward mass 1 − β_N of the last state becomes a self-loop, so paths
/// that never reset inside the truncation still never reset. Single action 0.
pub fn gen_example1(beta: BetaFamily, cost: CostFamily, truncation: usize) -> Result<(FiniteMdp, BirthResetChain)> {
    if truncation < 2 {
        return Err(Error::InvalidArgument("truncation must be at least 2".into()));
    }
    let chain = BirthResetChain::new(beta, cost, truncation)?;
    let mut per_state = Vec::with_capacity(truncation + 1);
    per_state.push(vec![ActionSpec::new(0, vec![(0, 1.0)], chain.cost.cost(0))]);
    for i in 1..=truncation {
        let b = chain.beta.beta(i);
        let stay = chain.beta.stay(i);
        let forward = if i == truncation { i } else { i + 1 };
        let row = if stay > 0.0 { vec![(0, b), (forward, stay)] } else { vec![(0, 1.0)] };
        per_state.push(vec![ActionSpec::new(0, row, chain.cost.cost(i))]);
    }
    let note = format!(
        "birth-reset chain, beta {}, cost {}, truncated at {} with self-loop",
        chain.beta.label(),
        chain.cost.label(),
        truncation
    );
    Ok((FiniteMdp::new(truncation + 1, per_state).with_note(note), chain))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Example1Preset {
    /// harmonic β, c(0) = 0, c(i) = 1
    Harris,
    /// telescoping β (escape 1/3), c(i) = i
    NonHarris,
    /// harmonic β, c(i) = i + 1
    LinearCost,
    /// harmonic β, c(i) = i
    HarrisLinear,
}

impl Example1Preset {
    pub fn families(self) -> (BetaFamily, CostFamily) {
        match self {
            Example1Preset::Harris => (BetaFamily::Harmonic, CostFamily::Indicator),
            Example1Preset::NonHarris => (BetaFamily::Telescoping, CostFamily::Linear { offset: 0.0 }),
            Example1Preset::LinearCost => (BetaFamily::Harmonic, CostFamily::Linear { offset: 1.0 }),
            Example1Preset::HarrisLinear => (BetaFamily::Harmonic, CostFamily::Linear { offset: 0.0 }),
        }
    }

    pub fn build(self, truncation: usize) -> Result<(FiniteMdp, BirthResetChain)> {
        let (b, c) = self.families();
        gen_example1(b, c, truncation)
    }
}

/// State-dependent cost weight β(x) of the quadratic cost β(x)(x² + a²).
#[derive(Clone, Debug, PartialEq)]
pub enum CostWeight {
    Constant(f64),
    /// `inner` on |x| ≤ radius, `outer` elsewhere.
    Step { inner: f64, outer: f64, radius: f64 },
}

impl CostWeight {
    pub fn at(&self, x: f64) -> f64 {
        match *self {
            CostWeight::Constant(b) => b,
            CostWeight::Step { inner, outer, radius } => {
                if x.abs() <= radius {
                    inner
                } else {
                    outer
                }
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            CostWeight::Constant(b) => b,
            CostWeight::Step { inner, outer, .. } => inner.max(outer),
        }
    }

    pub fn liminf_at_infinity(&self) -> f64 {
        match *self {
            CostWeight::Constant(b) => b,
            CostWeight::Step { outer, .. } => outer,
        }
    }
}

type DensityFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Law of the additive disturbance ω given (x, a).
#[derive(Clone)]
pub enum Noise {
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
    /// Density of ω at `w` given `(x, a)`, supported on `support`.
    Custom {
        label: String,
        density: DensityFn,
        sup_density: f64,
        variance_bound: f64,
        support: (f64, f64),
    },
}

impl std::fmt::Debug for Noise {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Noise::Gaussian { sigma } => write!(f, "Gaussian(sigma={sigma})"),
            Noise::Uniform { half_width } => write!(f, "Uniform(half_width={half_width})"),
            Noise::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

const CUSTOM_PANELS: usize = 64;

fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let n = panels + panels % 2;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl Noise {
    /// Sup of the density (ℓ).
    pub fn sup_density(&self) -> f64 {
        match self {
            Noise::Gaussian { sigma } => 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt()),
            Noise::Uniform { half_width } => 0.5 / half_width,
            Noise::Custom { sup_density, .. } => *sup_density,
        }
    }

    /// Bound σ² on the variance.
    pub fn variance_bound(&self) -> f64 {
        match self {
            Noise::Gaussian { sigma } => sigma * sigma,
            Noise::Uniform { half_width } => half_width * half_width / 3.0,
            Noise::Custom { variance_bound, .. } => *variance_bound,
        }
    }

    pub fn density(&self, x: f64, a: f64, w: f64) -> f64 {
        match self {
            Noise::Gaussian { sigma } => {
                let z = w / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Noise::Uniform { half_width } => {
                if w.abs() <= *half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            Noise::Custom { density, support, .. } => {
                if w < support.0 || w > support.1 {
                    0.0
                } else {
                    density(x, a, w)
                }
            }
        }
    }

    /// P(ω ≤ w | x, a). Custom densities are integrated numerically.
    pub fn cdf(&self, x: f64, a: f64, w: f64) -> f64 {
        match self {
            Noise::Gaussian { sigma } => std_normal_cdf(w / sigma),
            Noise::Uniform { half_width } => ((w + half_width) / (2.0 * half_width)).clamp(0.0, 1.0),
            Noise::Custom { support, .. } => {
                let hi = w.min(support.1);
                simpson(|t| self.density(x, a, t), support.0, hi, CUSTOM_PANELS * 16)
            }
        }
    }

    /// Total mass of the density given (x, a).
    pub fn total_mass(&self, x: f64, a: f64) -> f64 {
        match self {
            Noise::Custom { support, .. } => simpson(|t| self.density(x, a, t), support.0, support.1, CUSTOM_PANELS * 16),
            _ => 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Example2Config {
    /// Action grid spacing δ.
    pub delta: f64,
    /// Actions kδ for |k| ≤ action_radius.
    pub action_radius: usize,
    /// The state grid covers [−x_max, x_max]; choose it several σ beyond
    /// the region the policy of interest visits, since end cells absorb the tails.
    pub x_max: f64,
    /// State cell width.
    pub h: f64,
    pub beta: CostWeight,
    pub noise: Noise,
}

impl Example2Config {
    pub fn gaussian() -> Self {
        Self {
            delta: 0.5,
            action_radius: 16,
            x_max: 8.0,
            h: 0.25,
            beta: CostWeight::Constant(1.0),
            noise: Noise::Gaussian { sigma: 1.0 },
        }
    }

    pub fn step_weight() -> Self {
        Self {
            beta: CostWeight::Step {
                inner: 0.5,
                outer: 1.5,
                radius: 1.0,
            },
            ..Self::gaussian()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("example-2 config: {m}")));
        if !(self.delta > 0.0 && self.h > 0.0 && self.x_max > 0.0) {
            return bad("delta, h and x_max must be positive");
        }
        if !(self.beta.sup().is_finite() && self.beta.liminf_at_infinity() > 0.0) {
            return bad("cost weight must be bounded with positive liminf at infinity");
        }
        if !(self.noise.sup_density().is_finite() && self.noise.variance_bound().is_finite()) {
            return bad("noise density bound and variance bound must be finite");
        }
        if self.x_max / self.h > 1e5 {
            return bad("state grid too fine");
        }
        Ok(())
    }

    /// Half-count M of state cells; centers are kh for |k| ≤ M.
    pub fn half_cells(&self) -> usize {
        (self.x_max / self.h).round() as usize
    }

    pub fn n_states(&self) -> usize {
        2 * self.half_cells() + 1
    }

    pub fn state_center(&self, x: usize) -> f64 {
        (x as f64 - self.half_cells() as f64) * self.h
    }

    pub fn state_of(&self, x: f64) -> usize {
        let m = self.half_cells() as f64;
        ((x / self.h).round() + m).clamp(0.0, 2.0 * m) as usize
    }

    pub fn action_value(&self, label: usize) -> f64 {
        (label as f64 - self.action_radius as f64) * self.delta
    }

    pub fn cost(&self, x: f64, a: f64) -> f64 {
        self.beta.at(x) * (x * x + a * a)
    }

    /// 2(δ² + σ²)·sup β
    pub fn g_bound(&self) -> f64 {
        2.0 * (self.delta * self.delta + self.noise.variance_bound()) * self.beta.sup()
    }
}

/// Discretized x' = x + a + ω: destination masses are integrals of the noise
/// law over the state cells, with both unbounded tails folded into the end cells.
pub fn gen_example2(config: &Example2Config) -> Result<FiniteMdp> {
    config.validate()?;
    let n = config.n_states();
    let n_actions = 2 * config.action_radius + 1;
    let h = config.h;
    let mut per_state = Vec::with_capacity(n);
    for xi in 0..n {
        let x = config.state_center(xi);
        let mut specs = Vec::with_capacity(n_actions);
        for label in 0..n_actions {
            let a = config.action_value(label);
            let mass = config.noise.total_mass(x, a);
            if !((mass - 1.0).abs() <= 1e-6) {
                return Err(Error::MassDeficit {
                    x,
                    a,
                    mass,
                    deficit: 1.0 - mass,
                });
            }
            // G(t) = P(x + a + ω ≤ t), with G(−∞) = 0 and G(+∞) = 1
            let g = |j: usize| -> f64 {
                if j == 0 {
                    0.0
                } else if j == n {
                    1.0
                } else {
                    let upper_edge = config.state_center(j - 1) + 0.5 * h;
                    config.noise.cdf(x, a, upper_edge - x - a)
                }
            };
            let mut row = Vec::new();
            let mut prev = g(0);
            for j in 0..n {
                let next = g(j + 1);
                let p = next - prev;
                if p > 0.0 {
                    row.push((j, p));
                }
                prev = next;
            }
            specs.push(ActionSpec::new(label, row, config.cost(x, a)));
        }
        per_state.push(specs);
    }
    let note = format!(
        "scalar model x' = x + a + w discretized: {} cells of width {} over [-{}, {}], tails folded into end cells; actions k*{} for |k| <= {}; noise {:?}; weight {:?}",
        n, h, config.x_max, config.x_max, config.delta, config.action_radius, config.noise, config.beta
    );
    Ok(FiniteMdp::new(n, per_state).with_note(note))
}

/// aₙ = argmin over grid actions with |a| ≤ |xₙ| of |xₙ + a|; ties go to
/// the smaller |a|, then to the negative action.
pub fn example2_argmin_policy(config: &Example2Config) -> StationaryPolicy {
    let n_actions = 2 * config.action_radius + 1;
    let choice: Vec<usize> = (0..config.n_states())
        .map(|xi| {
            let x = config.state_center(xi);
            let mut best: Option<(f64, f64, f64, usize)> = None;
            for label in 0..n_actions {
                let a = config.action_value(label);
                if a.abs() > x.abs() + 1e-12 {
                    continue;
                }
                let key = ((x + a).abs(), a.abs(), a);
                let better = match best {
                    None => true,
                    Some((d, m, s, _)) => {
                        let eps = 1e-12;
                        if key.0 < d - eps {
                            true
                        } else if key.0 <= d + eps {
                            key.1 < m - eps || (key.1 <= m + eps && key.2 < s)
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = Some((key.0, key.1, key.2, label));
                }
            }
            best.map(|b| b.3).unwrap_or(config.action_radius)
        })
        .collect();
    StationaryPolicy::deterministic(&gen_example2_shape(config), &choice)
}

// Same action layout as gen_example2 without computing any rows.
fn gen_example2_shape(config: &Example2Config) -> FiniteMdp {
    let n_actions = 2 * config.action_radius + 1;
    let per_state = (0..config.n_states())
        .map(|_| (0..n_actions).map(|l| ActionSpec::new(l, vec![], 0.0)).collect())
        .collect();
    FiniteMdp::new(config.n_states(), per_state)
}

#[derive(Clone, Debug)]
pub struct RandomMdpConfig {
    pub n_states: usize,
    pub max_actions: usize,
    /// Probability that a transition entry is dropped (at least one is kept).
    pub sparsity: f64,
    pub cost_range: (f64, f64),
    pub seed: u64,
}

impl RandomMdpConfig {
    pub fn new(n_states: usize, max_actions: usize, seed: u64) -> Self {
        Self {
            n_states,
            max_actions,
            sparsity: 0.0,
            cost_range: (0.0, 1.0),
            seed,
        }
    }

    pub fn sparsity(mut self, s: f64) -> Self {
        self.sparsity = s;
        self
    }
}

/// Random valid model, deterministic in the seed. Each state gets between 1
/// and `max_actions` actions; rows are uniform weights normalized to sum 1.
pub fn gen_random_mdp(config: &RandomMdpConfig) -> Result<FiniteMdp> {
    if config.n_states == 0 || config.max_actions == 0 {
        return Err(Error::InvalidArgument("n_states and max_actions must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&config.sparsity) {
        return Err(Error::InvalidArgument("sparsity must be in [0, 1)".into()));
    }
    let (lo, hi) = config.cost_range;
    if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::InvalidArgument("cost range must satisfy 0 <= lo <= hi < inf".into()));
    }
    let mut r = rng::stream(config.seed);
    let n = config.n_states;
    let per_state = (0..n)
        .map(|_| {
            let k = r.random_range(1..=config.max_actions);
            (0..k)
                .map(|label| {
                    let mut w: Vec<f64> = (0..n)
                        .map(|_| {
                            let keep = r.random::<f64>() >= config.sparsity;
                            let v = 1.0 - r.random::<f64>();
                            if keep {
                                v
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    if w.iter().all(|&v| v == 0.0) {
                        w[r.random_range(0..n)] = 1.0;
                    }
                    let s: f64 = w.iter().sum();
                    w.iter_mut().for_each(|v| *v /= s);
                    let cost = lo + (hi - lo) * r.random::<f64>();
                    ActionSpec::dense(label, &w, cost)
                })
                .collect()
        })
        .collect();
    Ok(FiniteMdp::new(n, per_state).with_note(format!("random model, seed {}", config.seed)))
}

/// Random stationary policy with uniform weights normalized per state.
pub fn random_policy(model: &FiniteMdp, seed: u64) -> StationaryPolicy {
    let mut r = rng::stream(seed);
    let rows = (0..model.n_states())
        .map(|x| {
            let mut w: Vec<f64> = (0..model.n_actions(x)).map(|_| 1.0 - r.random::<f64>()).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            w
        })
        .collect();
    StationaryPolicy::new(rows)
}
