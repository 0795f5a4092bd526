//! Dense two-phase primal simplex for small equality-form programs
//!
//! ```text
//! minimize cᵀx  subject to  Ax = b,  x ≥ 0.
//! ```
//!
//! Pricing is Dantzig's most-negative reduced cost. After a run of degenerate
//! pivots the solver switches to Bland's smallest-index rule until the
//! objective strictly improves, which rules out cycling.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    /// Constraint rows, each of length `cost.len()`.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint row; cᵀ − yᵀA ≥ 0 at optimality.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub pivots: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    /// Phase-one objective above this means infeasible.
    pub feasibility_tol: f64,
    /// Entering candidates need reduced cost below −optimality_tol.
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots tolerated before switching to Bland.
    pub degenerate_streak: usize,
    pub max_pivots: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-12,
            pivot_tol: 1e-11,
            degenerate_streak: 25,
            max_pivots: 1_000_000,
        }
    }
}

struct Tableau {
    m: usize,
    /// structural columns; artificials occupy n..n+m
    n: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    PivotLimit,
}

impl Tableau {
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let width = self.n + self.m;
        let mut d = cost.to_vec();
        for (i, row) in self.a.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            for j in 0..width {
                d[j] -= cb * row[j];
            }
        }
        d
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis.iter().zip(&self.b).map(|(&j, v)| cost[j] * v).sum()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.a[r][c];
        let width = self.n + self.m;
        {
            let row = &mut self.a[r];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[c] = 1.0;
        }
        self.b[r] /= piv;
        let prow = self.a[r].clone();
        let pb = self.b[r];
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i][c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i];
            for j in 0..width {
                row[j] -= f * prow[j];
            }
            row[c] = 0.0;
            self.b[i] -= f * pb;
            if self.b[i] < 0.0 && self.b[i] > -1e-13 {
                self.b[i] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn run(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool, opts: &SimplexOptions) -> Outcome {
        let mut streak = 0;
        let mut bland = false;
        loop {
            if self.pivots >= opts.max_pivots {
                return Outcome::PivotLimit;
            }
            let d = self.reduced_costs(cost);
            let candidates = (0..self.n + self.m).filter(|&j| allowed(j) && d[j] < -opts.optimality_tol);
            let entering = if bland {
                candidates.min()
            } else {
                candidates.min_by(|&p, &q| d[p].total_cmp(&d[q]).then(p.cmp(&q)))
            };
            let Some(c) = entering else {
                return Outcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let aic = self.a[i][c];
                if aic <= opts.pivot_tol {
                    continue;
                }
                let ratio = self.b[i] / aic;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - 1e-15 || (ratio <= best + 1e-15 && self.basis[i] < self.basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((r, step)) = leave else {
                return Outcome::Unbounded;
            };
            let degenerate = step * -d[c] <= 1e-15;
            self.pivot(r, c);
            if degenerate {
                streak += 1;
                if streak >= opts.degenerate_streak {
                    bland = true;
                }
            } else {
                streak = 0;
                bland = false;
            }
        }
    }
}

pub fn solve(lp: &LinearProgram, opts: &SimplexOptions) -> LpSolution {
    let n = lp.cost.len();
    let m = lp.rows.len();
    assert_eq!(lp.rhs.len(), m, "rhs length must match row count");
    let mut sign = vec![1.0; m];
    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for i in 0..m {
        assert_eq!(lp.rows[i].len(), n, "constraint row {i} has wrong length");
        let s = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        sign[i] = s;
        let mut row: Vec<f64> = lp.rows[i].iter().map(|v| s * v).collect();
        row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        a.push(row);
        b.push(s * lp.rhs[i]);
    }
    let mut t = Tableau {
        m,
        n,
        a,
        b,
        basis: (n..n + m).collect(),
        pivots: 0,
    };

    let phase1_cost: Vec<f64> = (0..n + m).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    let infeasible = |t: &Tableau| LpSolution {
        status: LpStatus::Infeasible,
        x: vec![0.0; n],
        objective: f64::NAN,
        duals: vec![0.0; m],
        reduced_costs: vec![0.0; n],
        pivots: t.pivots,
    };
    match t.run(&phase1_cost, |_| true, opts) {
        Outcome::Optimal => {}
        // phase one is bounded below by zero; a pivot limit is reported as infeasible
        _ => return infeasible(&t),
    }
    if t.objective(&phase1_cost) > opts.feasibility_tol {
        return infeasible(&t);
    }
    // drive zero-level artificials out of the basis where possible
    for i in 0..m {
        if t.basis[i] < n {
            continue;
        }
        if let Some(j) = (0..n).find(|&j| t.a[i][j].abs() > 1e-9) {
            t.pivot(i, j);
        }
    }

    let mut cost2 = lp.cost.clone();
    cost2.extend(std::iter::repeat_n(0.0, m));
    let outcome = t.run(&cost2, |j| j < n, opts);
    let d = t.reduced_costs(&cost2);
    let mut x = vec![0.0; n];
    for (i, &j) in t.basis.iter().enumerate() {
        if j < n {
            x[j] = t.b[i].max(0.0);
        }
    }
    // yᵢ = c_Bᵀ B⁻¹ eᵢ; B⁻¹ sits in the artificial columns
    let duals: Vec<f64> = (0..m)
        .map(|i| {
            let yi: f64 = t.basis.iter().enumerate().map(|(k, &j)| cost2[j] * t.a[k][n + i]).sum();
            sign[i] * yi
        })
        .collect();
    let status = match outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Unbounded => LpStatus::Unbounded,
        Outcome::PivotLimit => LpStatus::Infeasible,
    };
    LpSolution {
        status,
        objective: lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum(),
        x,
        duals,
        reduced_costs: d[..n].to_vec(),
        pivots: t.pivots,
    }
}
