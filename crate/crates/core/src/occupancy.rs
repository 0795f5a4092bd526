//! Occupation measures on Γ and their decomposition into stationary pairs.
//!
//! Cesàro averages run over stages `0..n`, the same stages that make up Jₙ,
//! so `∫ c dγ̄ₙ = Jₙ/n` holds exactly up to rounding.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluator::forward_pass;
use crate::mdp::{check_inputs, check_probability_vector, FiniteMdp, Policy, StationaryPolicy, Trajectory};

/// Probability weights over the model's pair numbering.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupationMeasure {
    weights: Vec<f64>,
}

impl OccupationMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_probability_vector(&weights, weights.len())
            .map_err(|m| Error::InvalidDistribution(format!("occupation measure: {m}")))?;
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// ∫ c dγ
    pub fn integrate(&self, model: &FiniteMdp) -> f64 {
        self.weights.iter().zip(model.costs()).map(|(w, c)| w * c).sum()
    }

    /// State marginal p(x) = Σₐ γ(x, a).
    pub fn state_marginal(&self, model: &FiniteMdp) -> Vec<f64> {
        (0..model.n_states())
            .map(|x| model.pair_range(x).map(|i| self.weights[i]).sum())
            .collect()
    }

    fn check_dims(&self, model: &FiniteMdp) -> Result<()> {
        if self.weights.len() != model.n_pairs() {
            return Err(Error::InvalidArgument(format!(
                "occupation measure has {} entries, model has {} pairs",
                self.weights.len(),
                model.n_pairs()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationaryPairReport {
    #[serde(serialize_with = "ser_policy")]
    pub policy: StationaryPolicy,
    pub state_marginal: Vec<f64>,
    /// ∫ c dγ
    pub average_cost: f64,
    /// max_y |p(y) − Σ q(y|x,a) μ(a|x) p(x)|
    pub invariance_residual: f64,
}

fn ser_policy<S: serde::Serializer>(p: &StationaryPolicy, s: S) -> std::result::Result<S::Ok, S::Error> {
    p.rows().serialize(s)
}

/// γ̄ₙ = n⁻¹ Σ_{k<n} γₖ with γₖ the exact law of (xₖ, aₖ).
pub fn exact_cesaro_occupancy<P: Policy + ?Sized>(
    model: &FiniteMdp,
    policy: &P,
    initial: &[f64],
    n: usize,
) -> Result<OccupationMeasure> {
    check_inputs(model, policy, initial)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut acc = vec![0.0; model.n_pairs()];
    forward_pass(model, policy, initial, n, |_, pair, w| acc[pair] += w);
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|w| *w *= inv);
    OccupationMeasure::new(acc)
}

/// Normalized visit counts of the pairs along a trajectory.
pub fn empirical_occupancy(model: &FiniteMdp, trajectory: &Trajectory) -> Result<OccupationMeasure> {
    if trajectory.steps.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let mut counts = vec![0u64; model.n_pairs()];
    for s in &trajectory.steps {
        if model.find_pair(s.state, s.action) != Some(s.pair) {
            return Err(Error::InvalidArgument(format!(
                "trajectory step ({},{}) does not belong to this model",
                s.state, s.action
            )));
        }
        counts[s.pair] += 1;
    }
    let n = trajectory.steps.len() as f64;
    OccupationMeasure::new(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Splits γ into (μ̄, p̄). States with p̄(x) = 0 get the uniform row on A(x).
pub fn decompose(model: &FiniteMdp, gamma: &OccupationMeasure) -> Result<StationaryPairReport> {
    gamma.check_dims(model)?;
    let marginal = gamma.state_marginal(model);
    let rows = (0..model.n_states())
        .map(|x| {
            let k = model.n_actions(x);
            if marginal[x] > 0.0 {
                let mut row: Vec<f64> = model.pair_range(x).map(|i| gamma.weights[i] / marginal[x]).collect();
                // renormalize so the row sums to 1 to working precision
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                row
            } else {
                vec![1.0 / k as f64; k]
            }
        })
        .collect();
    let policy = StationaryPolicy::new(rows);
    let invariance_residual = balance_residual(model, &policy, &marginal);
    Ok(StationaryPairReport {
        average_cost: gamma.integrate(model),
        policy,
        state_marginal: marginal,
        invariance_residual,
    })
}

/// Max-norm violation of p = p·P_μ for the pair held in `report`.
pub fn invariance_residual(model: &FiniteMdp, report: &StationaryPairReport) -> Result<f64> {
    report.policy.check(model)?;
    if report.state_marginal.len() != model.n_states() {
        return Err(Error::InvalidArgument("state marginal length does not match model".into()));
    }
    Ok(balance_residual(model, &report.policy, &report.state_marginal))
}

pub(crate) fn balance_residual(model: &FiniteMdp, policy: &StationaryPolicy, p: &[f64]) -> f64 {
    let mut inflow = vec![0.0; model.n_states()];
    for x in 0..model.n_states() {
        if p[x] == 0.0 {
            continue;
        }
        for (local, &mu) in policy.row(x).iter().enumerate() {
            let w = p[x] * mu;
            if w == 0.0 {
                continue;
            }
            for &(y, q) in model.row(model.pair_index(x, local)) {
                inflow[y] += w * q;
            }
        }
    }
    p.iter().zip(&inflow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{simulate, ActionSpec, Step};

    fn cycle() -> FiniteMdp {
        FiniteMdp::new(
            2,
            vec![
                vec![ActionSpec::dense(0, &[0.0, 1.0], 1.0), ActionSpec::dense(1, &[1.0, 0.0], 2.0)],
                vec![ActionSpec::dense(0, &[1.0, 0.0], 3.0)],
            ],
        )
    }

    #[test]
    fn single_pair_point_mass() {
        let m = FiniteMdp::new(1, vec![vec![ActionSpec::dense(0, &[1.0], 2.0)]]);
        let pol = StationaryPolicy::uniform(&m);
        for n in [1, 7, 100] {
            let g = exact_cesaro_occupancy(&m, &pol, &[1.0], n).unwrap();
            assert_eq!(g.weights(), &[1.0]);
        }
        let t = simulate(&m, &pol, &[1.0], 5, 0).unwrap();
        assert_eq!(empirical_occupancy(&m, &t).unwrap().weights(), &[1.0]);
    }

    #[test]
    fn deterministic_cycle_even_horizon() {
        let m = cycle();
        let pol = StationaryPolicy::deterministic(&m, &[0, 0]);
        let g = exact_cesaro_occupancy(&m, &pol, &[1.0, 0.0], 10).unwrap();
        assert_eq!(g.weights(), &[0.5, 0.0, 0.5]);
        let rep = decompose(&m, &g).unwrap();
        assert_eq!(rep.state_marginal, vec![0.5, 0.5]);
        assert_eq!(rep.invariance_residual, 0.0);
        assert_eq!(rep.average_cost, 2.0);
    }

    #[test]
    fn counting_visits() {
        let m = cycle();
        let step = |state, action, pair| Step { state, action, pair, cost: 0.0 };
        let t = Trajectory {
            seed: 0,
            initial_distribution: vec![1.0, 0.0],
            steps: vec![step(0, 0, 0), step(1, 0, 2), step(0, 0, 0), step(1, 0, 2), step(0, 0, 0)],
        };
        let g = empirical_occupancy(&m, &t).unwrap();
        assert!((g.weights()[0] - 0.6).abs() < 1e-15);
        assert!((g.weights()[2] - 0.4).abs() < 1e-15);
        let bad = Trajectory { steps: vec![step(0, 1, 0)], ..t };
        assert!(empirical_occupancy(&m, &bad).is_err());
    }

    #[test]
    fn point_mass_decomposition() {
        let m = cycle();
        let rep = decompose(&m, &OccupationMeasure::new(vec![0.0, 1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(rep.policy.row(0), &[0.0, 1.0]);
        assert_eq!(rep.state_marginal, vec![1.0, 0.0]);
        // (0, action 1) returns to 0: invariant
        assert_eq!(rep.invariance_residual, 0.0);
        // state 1 has no mass: uniform completion
        assert_eq!(rep.policy.row(1), &[1.0]);

        // (0, action 0) moves everything to state 1: residual is the escaping mass
        let rep = decompose(&m, &OccupationMeasure::new(vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(rep.invariance_residual, 1.0);
        assert_eq!(invariance_residual(&m, &rep).unwrap(), 1.0);
    }

    #[test]
    fn invariant_measure_from_balance_equations() {
        // two-state chain P = [[0.7, 0.3], [0.6, 0.4]]: balance gives p = (2/3, 1/3)
        let m = FiniteMdp::new(
            2,
            vec![
                vec![ActionSpec::dense(0, &[0.7, 0.3], 1.0)],
                vec![ActionSpec::dense(0, &[0.6, 0.4], 0.0)],
            ],
        );
        let g = OccupationMeasure::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let rep = decompose(&m, &g).unwrap();
        assert!(rep.invariance_residual <= 1e-12);
    }

    #[test]
    fn rejects_bad_measures() {
        assert!(OccupationMeasure::new(vec![0.5, 0.4]).is_err());
        assert!(OccupationMeasure::new(vec![1.5, -0.5]).is_err());
        let m = cycle();
        let g = OccupationMeasure::new(vec![1.0]).unwrap();
        assert!(decompose(&m, &g).is_err());
    }
}
