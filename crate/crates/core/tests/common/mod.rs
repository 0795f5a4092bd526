#![allow(dead_code)]

use minpair::FiniteMdp;
use minpair_oracle::{Action, Model};

/// Dense copy of a model for the brute-force oracle.
pub fn to_oracle(model: &FiniteMdp) -> Model {
    (0..model.n_states())
        .map(|x| {
            model
                .pair_range(x)
                .map(|p| {
                    let mut row = vec![0.0; model.n_states()];
                    for &(y, q) in model.row(p) {
                        row[y] += q;
                    }
                    Action { row, cost: model.cost(p) }
                })
                .collect()
        })
        .collect()
}

/// Deterministic stationary policies of the model as StationaryPolicy values.
pub fn all_deterministic(model: &FiniteMdp) -> Vec<minpair::StationaryPolicy> {
    minpair_oracle::deterministic_policies(&to_oracle(model))
        .iter()
        .map(|c| minpair::StationaryPolicy::deterministic(model, c))
        .collect()
}
