//! Finite MDP realizations, policies, and trajectory simulation.
//!
//! States are `0..n_states`. Each state carries a nonempty list of admissible
//! actions; every admissible pair `(x, a)` has a sparse transition row and a
//! finite nonnegative cost. Pairs are numbered consecutively state by state,
//! and that numbering is the coordinate system for occupation measures.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, sample_index, sample_sparse, Stream};

/// Sparse probability row: `(destination, probability)` sorted by destination.
pub type SparseRow = Vec<(usize, f64)>;

pub const ROW_SUM_TOL: f64 = 1e-12;

/// One admissible action at a state, as supplied to [`FiniteMdp::new`].
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpec {
    pub action: usize,
    pub row: SparseRow,
    pub cost: f64,
}

impl ActionSpec {
    pub fn new(action: usize, row: SparseRow, cost: f64) -> Self {
        Self { action, row, cost }
    }

    pub fn dense(action: usize, row: &[f64], cost: f64) -> Self {
        let row = row
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(y, &p)| (y, p))
            .collect();
        Self { action, row, cost }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    actions: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    rows: Vec<SparseRow>,
    costs: Vec<f64>,
    truncation_note: Option<String>,
}

/// A borrowed view of one admissible pair.
#[derive(Clone, Copy, Debug)]
pub struct PairRef<'a> {
    pub index: usize,
    pub state: usize,
    pub local: usize,
    pub action: usize,
    pub row: &'a [(usize, f64)],
    pub cost: f64,
}

impl FiniteMdp {
    /// Assembles a model. Rows are sorted and duplicate destinations merged;
    /// nothing else is checked here, see [`FiniteMdp::validate`].
    pub fn new(n_states: usize, per_state: Vec<Vec<ActionSpec>>) -> Self {
        let mut actions = Vec::with_capacity(per_state.len());
        let mut offsets = Vec::with_capacity(per_state.len() + 1);
        let mut rows = Vec::new();
        let mut costs = Vec::new();
        offsets.push(0);
        for specs in per_state {
            let mut labels = Vec::with_capacity(specs.len());
            for spec in specs {
                labels.push(spec.action);
                rows.push(normalize_row(spec.row));
                costs.push(spec.cost);
            }
            actions.push(labels);
            offsets.push(rows.len());
        }
        Self {
            n_states,
            actions,
            offsets,
            rows,
            costs,
            truncation_note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.truncation_note = Some(note.into());
        self
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_pairs(&self) -> usize {
        self.rows.len()
    }

    pub fn truncation_note(&self) -> Option<&str> {
        self.truncation_note.as_deref()
    }

    /// Admissible action labels at `x`.
    pub fn actions(&self, x: usize) -> &[usize] {
        &self.actions[x]
    }

    pub fn n_actions(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    pub fn pair_index(&self, x: usize, local: usize) -> usize {
        self.offsets[x] + local
    }

    pub fn pair_range(&self, x: usize) -> std::ops::Range<usize> {
        self.offsets[x]..self.offsets[x + 1]
    }

    /// Pair index of the action labelled `action` at `x`, if admissible.
    pub fn find_pair(&self, x: usize, action: usize) -> Option<usize> {
        self.actions
            .get(x)?
            .iter()
            .position(|&a| a == action)
            .map(|l| self.offsets[x] + l)
    }

    pub fn row(&self, pair: usize) -> &[(usize, f64)] {
        &self.rows[pair]
    }

    pub fn cost(&self, pair: usize) -> f64 {
        self.costs[pair]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn max_cost(&self) -> f64 {
        self.costs.iter().cloned().fold(0.0, f64::max)
    }

    /// State that owns `pair`.
    pub fn pair_state(&self, pair: usize) -> usize {
        self.offsets.partition_point(|&o| o <= pair) - 1
    }

    pub fn pair(&self, index: usize) -> PairRef<'_> {
        let state = self.pair_state(index);
        let local = index - self.offsets[state];
        PairRef {
            index,
            state,
            local,
            action: self.actions[state][local],
            row: &self.rows[index],
            cost: self.costs[index],
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = PairRef<'_>> + '_ {
        (0..self.n_states).flat_map(move |x| {
            self.pair_range(x).enumerate().map(move |(local, index)| PairRef {
                index,
                state: x,
                local,
                action: self.actions[x][local],
                row: &self.rows[index],
                cost: self.costs[index],
            })
        })
    }

    /// Every invariant violation, with coordinates. Empty iff well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n_states == 0 {
            out.push(Violation::NoStates);
        }
        if self.actions.len() != self.n_states {
            out.push(Violation::StateCount {
                declared: self.n_states,
                found: self.actions.len(),
            });
        }
        for (x, labels) in self.actions.iter().enumerate() {
            if labels.is_empty() {
                out.push(Violation::EmptyActions { x });
            }
            for (i, a) in labels.iter().enumerate() {
                if labels[..i].contains(a) {
                    out.push(Violation::DuplicateAction { x, a: *a });
                }
            }
        }
        for p in self.pairs() {
            let (x, a) = (p.state, p.action);
            let mut sum = 0.0;
            for &(y, prob) in p.row {
                if y >= self.n_states {
                    out.push(Violation::DestinationOutOfRange { x, a, y });
                }
                if !prob.is_finite() {
                    out.push(Violation::NonFiniteProbability { x, a, y });
                } else if prob < 0.0 {
                    out.push(Violation::NegativeProbability { x, a, y, p: prob });
                }
                sum += prob;
            }
            if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
                out.push(Violation::RowSum { x, a, sum });
            }
            if !p.cost.is_finite() {
                out.push(Violation::NonFiniteCost { x, a });
            } else if p.cost < 0.0 {
                out.push(Violation::NegativeCost { x, a, cost: p.cost });
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(v))
        }
    }

    /// Point mass on state `x`.
    pub fn point_mass(&self, x: usize) -> Vec<f64> {
        let mut d = vec![0.0; self.n_states];
        d[x] = 1.0;
        d
    }

    pub fn check_distribution(&self, dist: &[f64]) -> Result<()> {
        check_probability_vector(dist, self.n_states)
            .map_err(Error::InvalidDistribution)
    }
}

fn normalize_row(mut row: SparseRow) -> SparseRow {
    row.sort_by_key(|e| e.0);
    let mut out: SparseRow = Vec::with_capacity(row.len());
    for (y, p) in row {
        match out.last_mut() {
            Some(last) if last.0 == y => last.1 += p,
            _ => out.push((y, p)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

pub(crate) fn check_probability_vector(v: &[f64], len: usize) -> std::result::Result<(), String> {
    if v.len() != len {
        return Err(format!("length {} does not match {}", v.len(), len));
    }
    let mut sum = 0.0;
    for (i, &p) in v.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(format!("entry {i} is {p}"));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(format!("entries sum to {sum}"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoStates,
    StateCount { declared: usize, found: usize },
    EmptyActions { x: usize },
    DuplicateAction { x: usize, a: usize },
    DestinationOutOfRange { x: usize, a: usize, y: usize },
    NonFiniteProbability { x: usize, a: usize, y: usize },
    NegativeProbability { x: usize, a: usize, y: usize, p: f64 },
    RowSum { x: usize, a: usize, sum: f64 },
    NonFiniteCost { x: usize, a: usize },
    NegativeCost { x: usize, a: usize, cost: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoStates => write!(f, "model has no states"),
            Violation::StateCount { declared, found } => {
                write!(f, "n_states is {declared} but {found} action lists given")
            }
            Violation::EmptyActions { x } => write!(f, "empty action set at state {x}"),
            Violation::DuplicateAction { x, a } => write!(f, "duplicate action {a} at state {x}"),
            Violation::DestinationOutOfRange { x, a, y } => {
                write!(f, "destination {y} out of range at ({x},{a})")
            }
            Violation::NonFiniteProbability { x, a, y } => {
                write!(f, "non-finite probability to {y} at ({x},{a})")
            }
            Violation::NegativeProbability { x, a, y, p } => {
                write!(f, "negative probability {p} to {y} at ({x},{a})")
            }
            Violation::RowSum { x, a, sum } => write!(f, "row sum {sum} at ({x},{a})"),
            Violation::NonFiniteCost { x, a } => write!(f, "non-finite cost at ({x},{a})"),
            Violation::NegativeCost { x, a, cost } => write!(f, "negative cost {cost} at ({x},{a})"),
        }
    }
}

/// A stochastic kernel μ(a | x); row `x` is aligned with `model.actions(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryPolicy {
    rows: Vec<Vec<f64>>,
}

impl StationaryPolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn uniform(model: &FiniteMdp) -> Self {
        let rows = (0..model.n_states())
            .map(|x| {
                let k = model.n_actions(x);
                vec![1.0 / k as f64; k]
            })
            .collect();
        Self { rows }
    }

    /// Deterministic policy choosing local action `choice[x]` at each state.
    pub fn deterministic(model: &FiniteMdp, choice: &[usize]) -> Self {
        let rows = (0..model.n_states())
            .map(|x| {
                let mut r = vec![0.0; model.n_actions(x)];
                r[choice[x]] = 1.0;
                r
            })
            .collect();
        Self { rows }
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn check(&self, model: &FiniteMdp) -> Result<()> {
        if self.rows.len() != model.n_states() {
            return Err(Error::InvalidPolicy(format!(
                "{} rows for {} states",
                self.rows.len(),
                model.n_states()
            )));
        }
        for (x, row) in self.rows.iter().enumerate() {
            check_probability_vector(row, model.n_actions(x))
                .map_err(|m| Error::InvalidPolicy(format!("state {x}: {m}")))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonMode {
    /// Stage `k` uses element `k mod len`.
    Cyclic,
    /// Stages past the prefix reuse the last element.
    HoldLast,
}

/// A Markov policy (μ₀, μ₁, ...) given by a finite prefix and an extension rule.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovPolicySequence {
    stages: Vec<StationaryPolicy>,
    mode: HorizonMode,
}

impl MarkovPolicySequence {
    pub fn new(stages: Vec<StationaryPolicy>, mode: HorizonMode) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidPolicy("empty policy sequence".into()));
        }
        Ok(Self { stages, mode })
    }

    pub fn stage(&self, k: usize) -> &StationaryPolicy {
        match self.mode {
            HorizonMode::Cyclic => &self.stages[k % self.stages.len()],
            HorizonMode::HoldLast => &self.stages[k.min(self.stages.len() - 1)],
        }
    }
}

/// Anything that prescribes an action distribution for each stage and state.
pub trait Policy: Sync {
    fn stage_row(&self, stage: usize, x: usize) -> &[f64];
    fn check(&self, model: &FiniteMdp) -> Result<()>;
}

impl Policy for StationaryPolicy {
    fn stage_row(&self, _stage: usize, x: usize) -> &[f64] {
        &self.rows[x]
    }

    fn check(&self, model: &FiniteMdp) -> Result<()> {
        StationaryPolicy::check(self, model)
    }
}

impl Policy for MarkovPolicySequence {
    fn stage_row(&self, stage: usize, x: usize) -> &[f64] {
        self.stage(stage).row(x)
    }

    fn check(&self, model: &FiniteMdp) -> Result<()> {
        for (k, s) in self.stages.iter().enumerate() {
            s.check(model)
                .map_err(|e| Error::InvalidPolicy(format!("stage {k}: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    /// Action label (an element of `model.actions(state)`).
    pub action: usize,
    /// Pair index in the model's Γ numbering.
    pub pair: usize,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub initial_distribution: Vec<f64>,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.cost).sum()
    }
}

/// Step-by-step sampler over a validated model. Holds only per-path state.
pub(crate) struct Walker<'a, P: Policy + ?Sized> {
    model: &'a FiniteMdp,
    policy: &'a P,
    rng: Stream,
    state: usize,
    stage: usize,
}

impl<'a, P: Policy + ?Sized> Walker<'a, P> {
    pub(crate) fn new(model: &'a FiniteMdp, policy: &'a P, initial: &[f64], seed: u64) -> Self {
        let mut rng = rng::stream(seed);
        let state = sample_index(&mut rng, initial);
        Self {
            model,
            policy,
            rng,
            state,
            stage: 0,
        }
    }

    pub(crate) fn state(&self) -> usize {
        self.state
    }

    pub(crate) fn step(&mut self) -> Step {
        let x = self.state;
        let local = sample_index(&mut self.rng, self.policy.stage_row(self.stage, x));
        let pair = self.model.pair_index(x, local);
        let step = Step {
            state: x,
            action: self.model.actions(x)[local],
            pair,
            cost: self.model.cost(pair),
        };
        self.state = sample_sparse(&mut self.rng, self.model.row(pair));
        self.stage += 1;
        step
    }
}

pub(crate) fn check_inputs<P: Policy + ?Sized>(
    model: &FiniteMdp,
    policy: &P,
    initial: &[f64],
) -> Result<()> {
    model.ensure_valid()?;
    policy.check(model)?;
    model.check_distribution(initial)
}

/// Samples `horizon` steps of the process induced by `policy` from `initial`.
pub fn simulate<P: Policy + ?Sized>(
    model: &FiniteMdp,
    policy: &P,
    initial: &[f64],
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    check_inputs(model, policy, initial)?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut walker = Walker::new(model, policy, initial, seed);
    let steps = (0..horizon).map(|_| walker.step()).collect();
    Ok(Trajectory {
        seed,
        initial_distribution: initial.to_vec(),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn self_loop(cost: f64) -> FiniteMdp {
        FiniteMdp::new(1, vec![vec![ActionSpec::dense(0, &[1.0], cost)]])
    }

    #[test]
    fn degenerate_model_is_valid() {
        assert!(self_loop(0.0).validate().is_empty());
    }

    #[test]
    fn short_row_is_reported() {
        let m = FiniteMdp::new(
            2,
            vec![
                vec![ActionSpec::dense(0, &[0.5, 0.45], 1.0)],
                vec![ActionSpec::dense(0, &[0.0, 1.0], 1.0)],
            ],
        );
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::RowSum { x: 0, a: 0, .. }));
        assert!(v[0].to_string().starts_with("row sum 0.95"));
    }

    #[test]
    fn negative_cost_is_reported() {
        let m = FiniteMdp::new(1, vec![vec![ActionSpec::dense(3, &[1.0], -1.0)]]);
        let v = m.validate();
        assert_eq!(v, vec![Violation::NegativeCost { x: 0, a: 3, cost: -1.0 }]);
        assert!(v[0].to_string().contains("negative cost"));
    }

    #[test]
    fn structural_violations() {
        let m = FiniteMdp::new(
            2,
            vec![
                vec![],
                vec![
                    ActionSpec::new(1, vec![(5, 1.0)], 0.0),
                    ActionSpec::new(1, vec![(0, -0.5), (1, 1.5)], f64::INFINITY),
                ],
            ],
        );
        let v = m.validate();
        assert!(v.contains(&Violation::EmptyActions { x: 0 }));
        assert!(v.contains(&Violation::DuplicateAction { x: 1, a: 1 }));
        assert!(v.contains(&Violation::DestinationOutOfRange { x: 1, a: 1, y: 5 }));
        assert!(v.contains(&Violation::NonFiniteCost { x: 1, a: 1 }));
        assert!(v
            .iter()
            .any(|e| matches!(e, Violation::NegativeProbability { y: 0, .. })));
    }

    #[test]
    fn rows_merge_duplicate_destinations() {
        let m = FiniteMdp::new(
            2,
            vec![
                vec![ActionSpec::new(0, vec![(1, 0.25), (0, 0.5), (1, 0.25)], 0.0)],
                vec![ActionSpec::dense(0, &[1.0, 0.0], 0.0)],
            ],
        );
        assert_eq!(m.row(0), &[(0, 0.5), (1, 0.5)]);
        assert_eq!(m.row(1), &[(0, 1.0)]);
    }

    #[test]
    fn pair_lookup_roundtrip() {
        let m = FiniteMdp::new(
            3,
            vec![
                vec![ActionSpec::dense(0, &[1.0, 0.0, 0.0], 1.0), ActionSpec::dense(4, &[0.0, 1.0, 0.0], 2.0)],
                vec![ActionSpec::dense(2, &[0.0, 0.0, 1.0], 3.0)],
                vec![ActionSpec::dense(0, &[1.0, 0.0, 0.0], 4.0), ActionSpec::dense(1, &[1.0, 0.0, 0.0], 5.0)],
            ],
        );
        for p in m.pairs() {
            let q = m.pair(p.index);
            assert_eq!((q.state, q.local, q.action), (p.state, p.local, p.action));
            assert_eq!(m.find_pair(p.state, p.action), Some(p.index));
        }
        assert_eq!(m.find_pair(1, 0), None);
        assert_eq!(m.n_pairs(), 5);
    }

    #[test]
    fn self_loop_trajectory() {
        let m = self_loop(3.0);
        let pol = StationaryPolicy::uniform(&m);
        let t = simulate(&m, &pol, &[1.0], 5, 9).unwrap();
        assert_eq!(t.steps.len(), 5);
        assert!(t.steps.iter().all(|s| s.cost == 3.0 && s.state == 0));
    }

    #[test]
    fn simulate_rejects_invalid_model_and_zero_horizon() {
        let bad = FiniteMdp::new(1, vec![vec![ActionSpec::dense(0, &[0.9], 0.0)]]);
        let pol = StationaryPolicy::uniform(&bad);
        assert!(matches!(
            simulate(&bad, &pol, &[1.0], 3, 0),
            Err(Error::InvalidModel(_))
        ));
        let m = self_loop(1.0);
        assert!(simulate(&m, &pol, &[1.0], 0, 0).is_err());
    }

    #[test]
    fn policy_sequence_modes() {
        let m = FiniteMdp::new(
            1,
            vec![vec![ActionSpec::dense(0, &[1.0], 1.0), ActionSpec::dense(1, &[1.0], 5.0)]],
        );
        let p0 = StationaryPolicy::deterministic(&m, &[0]);
        let p1 = StationaryPolicy::deterministic(&m, &[1]);
        let cyc = MarkovPolicySequence::new(vec![p0.clone(), p1.clone()], HorizonMode::Cyclic).unwrap();
        let t = simulate(&m, &cyc, &[1.0], 4, 0).unwrap();
        let costs: Vec<f64> = t.steps.iter().map(|s| s.cost).collect();
        assert_eq!(costs, vec![1.0, 5.0, 1.0, 5.0]);
        let hold = MarkovPolicySequence::new(vec![p0, p1], HorizonMode::HoldLast).unwrap();
        let t = simulate(&m, &hold, &[1.0], 4, 0).unwrap();
        let costs: Vec<f64> = t.steps.iter().map(|s| s.cost).collect();
        assert_eq!(costs, vec![1.0, 5.0, 5.0, 5.0]);
        assert!(MarkovPolicySequence::new(vec![], HorizonMode::Cyclic).is_err());
    }

    #[test]
    fn policy_rows_must_match_action_sets() {
        let m = self_loop(1.0);
        assert!(StationaryPolicy::new(vec![vec![0.5, 0.5]]).check(&m).is_err());
        assert!(StationaryPolicy::new(vec![vec![0.9]]).check(&m).is_err());
        assert!(StationaryPolicy::new(vec![vec![1.0]]).check(&m).is_ok());
    }
}
