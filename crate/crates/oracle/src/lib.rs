//! Brute-force reference computations for small models, written against raw
//! dense arrays so they share no code with the library under test.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

/// One admissible action: dense transition row and one-stage cost.
#[derive(Clone, Debug)]
pub struct Action {
    pub row: Vec<f64>,
    pub cost: f64,
}

/// Per-state action lists.
pub type Model = Vec<Vec<Action>>;

/// Transition matrix and cost vector of a deterministic policy.
pub fn policy_chain(model: &Model, choice: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let n = model.len();
    let p = DMatrix::from_fn(n, n, |x, y| model[x][choice[x]].row[y]);
    let c = DVector::from_fn(n, |x, _| model[x][choice[x]].cost);
    (p, c)
}

/// Closed communicating classes of the chain with transition matrix `p`.
pub fn closed_classes(p: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = p.nrows();
    let mut g = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..n).map(|x| g.add_node(x)).collect();
    for x in 0..n {
        for y in 0..n {
            if p[(x, y)] > 0.0 {
                g.add_edge(nodes[x], nodes[y], ());
            }
        }
    }
    let mut out = Vec::new();
    for scc in tarjan_scc(&g) {
        let members: Vec<usize> = scc.iter().map(|v| g[*v]).collect();
        let closed = members
            .iter()
            .all(|&x| (0..n).all(|y| p[(x, y)] == 0.0 || members.contains(&y)));
        if closed {
            let mut m = members;
            m.sort_unstable();
            out.push(m);
        }
    }
    out.sort();
    out
}

/// Stationary distribution of `p` restricted to the closed class `class`,
/// by solving π(P − I) = 0 with one balance equation replaced by Σπ = 1.
pub fn class_stationary(p: &DMatrix<f64>, class: &[usize]) -> Vec<f64> {
    let k = class.len();
    let mut a = DMatrix::zeros(k, k);
    for (r, &y) in class.iter().enumerate() {
        for (c, &x) in class.iter().enumerate() {
            a[(r, c)] = p[(x, y)] - if x == y { 1.0 } else { 0.0 };
        }
    }
    for c in 0..k {
        a[(k - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(k);
    b[k - 1] = 1.0;
    let pi = a.lu().solve(&b).expect("closed class balance system is nonsingular");
    pi.iter().copied().collect()
}

/// Every deterministic stationary policy, in lexicographic order.
pub fn deterministic_policies(model: &Model) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for actions in model {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..actions.len()).map(move |a| {
                    let mut v = prefix.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    out
}

/// Minimum over deterministic policies and their closed classes of the
/// stationary average cost, with the minimizing policy.
pub fn enumerate_rho(model: &Model) -> (f64, Vec<usize>) {
    let mut best = (f64::INFINITY, vec![]);
    for choice in deterministic_policies(model) {
        let (p, c) = policy_chain(model, &choice);
        for class in closed_classes(&p) {
            let pi = class_stationary(&p, &class);
            let g: f64 = class.iter().zip(&pi).map(|(&x, w)| w * c[x]).sum();
            if g < best.0 {
                best = (g, choice.clone());
            }
        }
    }
    best
}

/// v = (I − αP)⁻¹ c for a deterministic policy.
pub fn discounted_values(model: &Model, choice: &[usize], alpha: f64) -> Vec<f64> {
    let (p, c) = policy_chain(model, choice);
    let n = p.nrows();
    let a = DMatrix::identity(n, n) - p * alpha;
    a.lu().solve(&c).expect("I - alpha P is nonsingular").iter().copied().collect()
}

/// m_α = min over states and deterministic policies of the discounted value.
pub fn enumerate_m_alpha(model: &Model, alpha: f64) -> f64 {
    deterministic_policies(model)
        .iter()
        .flat_map(|choice| discounted_values(model, choice, alpha))
        .fold(f64::INFINITY, f64::min)
}

/// E Σ_{k<n} c(x_k) for a birth-reset chain started at `start`, by pushing
/// the full state distribution forward over states 0..start+n.
pub fn birth_reset_total_cost(beta: &dyn Fn(usize) -> f64, cost: &dyn Fn(usize) -> f64, start: usize, n: usize) -> f64 {
    let width = start + n + 1;
    let mut dist = vec![0.0; width];
    dist[start] = 1.0;
    let mut total = 0.0;
    for _ in 0..n {
        let mut next = vec![0.0; width];
        for (x, &w) in dist.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            total += w * cost(x);
            if x == 0 {
                next[0] += w;
            } else {
                let b = beta(x);
                next[0] += w * b;
                next[x + 1] += w * (1.0 - b);
            }
        }
        dist = next;
    }
    total
}
