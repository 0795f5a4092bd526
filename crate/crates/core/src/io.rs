//! JSON model and occupation-measure files.
//!
//! Model schema (unknown fields rejected):
//!
//! ```json
//! {
//!   "n_states": 2,
//!   "actions": [[0, 1], [0]],
//!   "transitions": [
//!     {"x": 0, "a": 0, "row": [0.5, 0.5]},
//!     {"x": 0, "a": 1, "row": [[1, 1.0]]},
//!     {"x": 1, "a": 0, "row": [[0, 1.0]]}
//!   ],
//!   "costs": [
//!     {"x": 0, "a": 0, "value": 1.0},
//!     {"x": 0, "a": 1, "value": 2.0},
//!     {"x": 1, "a": 0, "value": 0.0}
//!   ],
//!   "truncation_note": "optional free text"
//! }
//! ```
//!
//! `a` is an action label from `actions[x]`. A row is either a dense array of
//! `n_states` probabilities or a sparse list of `[y, p]` pairs; files written
//! here always use the sparse form. Each admissible pair needs exactly one
//! transition entry and one cost entry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionSpec, FiniteMdp};
use crate::occupancy::OccupationMeasure;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n_states: usize,
    actions: Vec<Vec<usize>>,
    transitions: Vec<TransitionEntry>,
    costs: Vec<CostEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation_note: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    x: usize,
    a: usize,
    row: RowRepr,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RowRepr {
    Dense(Vec<f64>),
    Sparse(Vec<(usize, f64)>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostEntry {
    x: usize,
    a: usize,
    value: f64,
}

pub fn model_to_json(model: &FiniteMdp) -> String {
    let mut transitions = Vec::with_capacity(model.n_pairs());
    let mut costs = Vec::with_capacity(model.n_pairs());
    for p in model.pairs() {
        transitions.push(TransitionEntry {
            x: p.state,
            a: p.action,
            row: RowRepr::Sparse(p.row.to_vec()),
        });
        costs.push(CostEntry {
            x: p.state,
            a: p.action,
            value: p.cost,
        });
    }
    let file = ModelFile {
        n_states: model.n_states(),
        actions: (0..model.n_states()).map(|x| model.actions(x).to_vec()).collect(),
        transitions,
        costs,
        truncation_note: model.truncation_note().map(str::to_owned),
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn model_from_json(text: &str) -> Result<FiniteMdp> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.actions.len() != file.n_states {
        return Err(Error::Format(format!(
            "n_states is {} but {} action lists given",
            file.n_states,
            file.actions.len()
        )));
    }
    let slot = |x: usize, a: usize, what: &str| -> Result<(usize, usize)> {
        let local = file
            .actions
            .get(x)
            .and_then(|acts| acts.iter().position(|&b| b == a))
            .ok_or_else(|| Error::Format(format!("{what} entry for non-admissible pair ({x},{a})")))?;
        Ok((x, local))
    };
    let mut rows: Vec<Vec<Option<Vec<(usize, f64)>>>> =
        file.actions.iter().map(|a| vec![None; a.len()]).collect();
    let mut costs: Vec<Vec<Option<f64>>> = file.actions.iter().map(|a| vec![None; a.len()]).collect();
    for t in file.transitions {
        let (x, l) = slot(t.x, t.a, "transition")?;
        if rows[x][l].is_some() {
            return Err(Error::Format(format!("duplicate transition entry for ({},{})", t.x, t.a)));
        }
        let row = match t.row {
            RowRepr::Dense(v) => {
                if v.len() != file.n_states {
                    return Err(Error::Format(format!(
                        "dense row at ({},{}) has length {} (expected {})",
                        t.x,
                        t.a,
                        v.len(),
                        file.n_states
                    )));
                }
                v.into_iter().enumerate().filter(|e| e.1 != 0.0).collect()
            }
            RowRepr::Sparse(v) => v,
        };
        rows[x][l] = Some(row);
    }
    for c in file.costs {
        let (x, l) = slot(c.x, c.a, "cost")?;
        if costs[x][l].is_some() {
            return Err(Error::Format(format!("duplicate cost entry for ({},{})", c.x, c.a)));
        }
        costs[x][l] = Some(c.value);
    }
    let mut per_state = Vec::with_capacity(file.n_states);
    for (x, labels) in file.actions.iter().enumerate() {
        let mut specs = Vec::with_capacity(labels.len());
        for (l, &a) in labels.iter().enumerate() {
            let row = rows[x][l]
                .take()
                .ok_or_else(|| Error::Format(format!("missing transition for ({x},{a})")))?;
            let cost = costs[x][l].ok_or_else(|| Error::Format(format!("missing cost for ({x},{a})")))?;
            specs.push(ActionSpec::new(a, row, cost));
        }
        per_state.push(specs);
    }
    let mut model = FiniteMdp::new(file.n_states, per_state);
    if let Some(note) = file.truncation_note {
        model = model.with_note(note);
    }
    Ok(model)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OccupancyFile {
    n_states: usize,
    entries: Vec<WeightEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub x: usize,
    pub a: usize,
    pub weight: f64,
}

/// Nonzero weights as `{x, a, weight}` entries in pair order.
pub fn weight_entries(model: &FiniteMdp, gamma: &OccupationMeasure) -> Vec<WeightEntry> {
    model
        .pairs()
        .filter(|p| gamma.weights()[p.index] != 0.0)
        .map(|p| WeightEntry {
            x: p.state,
            a: p.action,
            weight: gamma.weights()[p.index],
        })
        .collect()
}

pub fn occupancy_to_json(model: &FiniteMdp, gamma: &OccupationMeasure) -> String {
    let file = OccupancyFile {
        n_states: model.n_states(),
        entries: weight_entries(model, gamma),
    };
    serde_json::to_string_pretty(&file).expect("occupancy serialization cannot fail")
}

pub fn occupancy_from_json(model: &FiniteMdp, text: &str) -> Result<OccupationMeasure> {
    let file: OccupancyFile = serde_json::from_str(text)?;
    if file.n_states != model.n_states() {
        return Err(Error::Format(format!(
            "occupancy file has {} states, model has {}",
            file.n_states,
            model.n_states()
        )));
    }
    let mut w = vec![0.0; model.n_pairs()];
    for e in file.entries {
        let idx = model
            .find_pair(e.x, e.a)
            .ok_or_else(|| Error::Format(format!("weight on non-admissible pair ({},{})", e.x, e.a)))?;
        w[idx] += e.weight;
    }
    OccupationMeasure::new(w)
}
