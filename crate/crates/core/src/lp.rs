//! LP relaxations at desk scale: a dense two-phase tableau simplex with
//! Bland's rule, the CIP/MIP formulations built on it, and validation of
//! externally computed fractional solutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{json_error, CipInstance, FractionalSolution, Instance, MipInstance};

/// Pivot eligibility threshold.
pub const PIVOT_TOL: f64 = 1e-9;
/// Slack above which an ingested vector is rejected.
pub const INGEST_TOL: f64 = 1e-6;
const CLEAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

/// minimise c·x subject to rows and x ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Row duals y with c − yᵀA ≥ 0 on optimal exit.
    pub dual: Option<Vec<f64>>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
        }
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) {
        assert_eq!(coeffs.len(), self.vars(), "constraint width");
        self.rows.push(Constraint { coeffs, sense, rhs });
    }

    /// Default iteration limit 50·(m + n).
    pub fn default_iteration_limit(&self) -> usize {
        50 * (self.rows.len() + self.vars()).max(1)
    }

    pub fn solve(&self) -> SimplexResult {
        simplex(self, self.default_iteration_limit())
    }

    /// Largest violation of any row or bound by `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match row.sense {
                Sense::Ge => row.rhs - lhs,
                Sense::Le => lhs - row.rhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

struct Tableau {
    m: usize,
    width: usize,
    /// m rows of `width` coefficients followed by the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    first_art: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, p) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut r = cost.to_vec();
        for (row, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (rj, tj) in r.iter_mut().zip(&self.t[row][..self.width]) {
                    *rj -= cb * tj;
                }
            }
        }
        r
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(row, &b)| cost[b] * self.t[row][self.width])
            .sum()
    }

    /// Bland's rule: smallest eligible entering index, ties in the ratio test
    /// broken by smallest basic index.
    fn run(&mut self, cost: &[f64], allowed: usize, iters: &mut usize, limit: usize) -> LpStatus {
        loop {
            let r = self.reduced_costs(cost);
            let Some(enter) = (0..allowed).find(|&j| r[j] < -PIVOT_TOL) else {
                return LpStatus::Optimal;
            };
            if *iters >= limit {
                return LpStatus::IterationLimit;
            }
            let mut leave: Option<(usize, f64)> = None;
            for row in 0..self.m {
                let a = self.t[row][enter];
                if a > PIVOT_TOL {
                    let ratio = self.t[row][self.width] / a;
                    leave = match leave {
                        None => Some((row, ratio)),
                        Some((best, br)) => {
                            if ratio < br - 1e-12
                                || (ratio <= br + 1e-12 && self.basis[row] < self.basis[best])
                            {
                                Some((row, ratio))
                            } else {
                                Some((best, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return LpStatus::Unbounded;
            };
            self.pivot(row, enter);
            *iters += 1;
        }
    }
}

/// Two-phase simplex. Every row gets an artificial; rows are flipped so the
/// right-hand side is nonnegative.
pub fn simplex(lp: &LinearProgram, iteration_limit: usize) -> SimplexResult {
    let n = lp.vars();
    let m = lp.rows.len();
    let n_slack = lp.rows.iter().filter(|r| r.sense != Sense::Eq).count();
    let first_art = n + n_slack;
    let width = first_art + m;
    let mut t = vec![vec![0.0; width + 1]; m];
    let mut flipped = vec![false; m];
    let mut slack = n;
    for (i, row) in lp.rows.iter().enumerate() {
        let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        flipped[i] = sign < 0.0;
        for (j, &a) in row.coeffs.iter().enumerate() {
            t[i][j] = sign * a;
        }
        match row.sense {
            Sense::Ge => {
                t[i][slack] = -sign;
                slack += 1;
            }
            Sense::Le => {
                t[i][slack] = sign;
                slack += 1;
            }
            Sense::Eq => {}
        }
        t[i][first_art + i] = 1.0;
        t[i][width] = sign * row.rhs;
    }
    let mut tab = Tableau {
        m,
        width,
        t,
        basis: (first_art..width).collect(),
        first_art,
    };
    let mut iters = 0;

    let mut phase1 = vec![0.0; width];
    for c in phase1.iter_mut().skip(first_art) {
        *c = 1.0;
    }
    let status = tab.run(&phase1, width, &mut iters, iteration_limit);
    let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
    let fail = |status, tab: &Tableau, iters| SimplexResult {
        status,
        x: extract(tab, n),
        objective: f64::NAN,
        iterations: iters,
        dual: None,
    };
    if status == LpStatus::IterationLimit {
        return fail(status, &tab, iters);
    }
    if tab.objective(&phase1) > 1e-9 * scale {
        return fail(LpStatus::Infeasible, &tab, iters);
    }
    // Drive zero-level artificials out of the basis where possible.
    for row in 0..m {
        if tab.basis[row] >= tab.first_art {
            if let Some(col) = (0..first_art).find(|&j| tab.t[row][j].abs() > PIVOT_TOL) {
                tab.pivot(row, col);
            }
        }
    }

    let mut phase2 = vec![0.0; width];
    phase2[..n].copy_from_slice(&lp.objective);
    let status = tab.run(&phase2, first_art, &mut iters, iteration_limit);
    if status != LpStatus::Optimal {
        return fail(status, &tab, iters);
    }
    let x = extract(&tab, n);
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    // y = c_B B⁻¹, read off the artificial columns (B⁻¹ starts as identity).
    let dual = (0..m)
        .map(|i| {
            let y: f64 = tab
                .basis
                .iter()
                .enumerate()
                .map(|(row, &b)| phase2[b] * tab.t[row][first_art + i])
                .sum();
            if flipped[i] {
                -y
            } else {
                y
            }
        })
        .collect();
    SimplexResult {
        status: LpStatus::Optimal,
        x,
        objective,
        iterations: iters,
        dual: Some(dual),
    }
}

fn extract(tab: &Tableau, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for (row, &b) in tab.basis.iter().enumerate() {
        if b < n {
            let v = tab.t[row][tab.width];
            x[b] = if v.abs() < CLEAN_TOL { 0.0 } else { v.max(0.0) };
        }
    }
    x
}

/// Result of solving an LP relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct LpReport {
    pub x: FractionalSolution,
    pub objective: f64,
    pub iterations: usize,
    pub status: LpStatus,
    pub dual: Option<Vec<f64>>,
}

/// Dense CIP relaxation min c_i·x, Ax ≥ b, x ≥ 0, in normalised cost units.
pub fn cip_lp(instance: &CipInstance, objective_index: usize) -> LinearProgram {
    let mut lp = LinearProgram::new(instance.cost(objective_index).to_vec());
    for (r, dense) in instance.matrix().to_dense().into_iter().enumerate() {
        lp.push(dense, Sense::Ge, instance.demands()[r]);
    }
    lp
}

pub fn solve_cip_lp(instance: &CipInstance, objective_index: usize) -> Result<LpReport> {
    if objective_index >= instance.criteria() {
        return Err(Error::Domain(format!(
            "objective index {objective_index} with {} cost vectors",
            instance.criteria()
        )));
    }
    let res = cip_lp(instance, objective_index).solve();
    let slack = instance.worst_violation(&res.x).1;
    Ok(LpReport {
        objective: res.objective,
        iterations: res.iterations,
        status: res.status,
        dual: res.dual,
        x: FractionalSolution {
            objective_values: instance.objectives(&res.x),
            feasibility_slack: slack,
            x: res.x,
        },
    })
}

/// min max_i c_i·x over Ax ≥ b, x ≥ 0 (an extra column T bounds every
/// objective). The reported objective is T.
pub fn solve_multi_cip_lp(instance: &CipInstance) -> Result<LpReport> {
    let n = instance.cols();
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut lp = LinearProgram::new(obj);
    for (r, mut dense) in instance.matrix().to_dense().into_iter().enumerate() {
        dense.push(0.0);
        lp.push(dense, Sense::Ge, instance.demands()[r]);
    }
    for c in instance.costs() {
        let mut row = c.clone();
        row.push(-1.0);
        lp.push(row, Sense::Le, 0.0);
    }
    let mut res = lp.solve();
    res.x.truncate(n);
    let slack = instance.worst_violation(&res.x).1;
    Ok(LpReport {
        objective: res.objective,
        iterations: res.iterations,
        status: res.status,
        dual: res.dual,
        x: FractionalSolution {
            objective_values: instance.objectives(&res.x),
            feasibility_slack: slack,
            x: res.x,
        },
    })
}

/// min W subject to per-group sums 1 and Ax ≤ W·1. The last variable is W.
pub fn mip_lp(instance: &MipInstance) -> LinearProgram {
    let n = instance.cols();
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut lp = LinearProgram::new(obj);
    for g in 0..instance.groups() {
        let mut row = vec![0.0; n + 1];
        for c in instance.group_range(g) {
            row[c] = 1.0;
        }
        lp.push(row, Sense::Eq, 1.0);
    }
    for mut dense in instance.matrix().to_dense() {
        dense.push(-1.0);
        lp.push(dense, Sense::Le, 0.0);
    }
    lp
}

/// Basic optimal solution of the MIP relaxation; y* is reported as the
/// maximum row load of the returned x.
pub fn solve_mip_lp(instance: &MipInstance) -> Result<LpReport> {
    let n = instance.cols();
    let mut res = mip_lp(instance).solve();
    res.x.truncate(n);
    let load = instance.max_load(&res.x);
    let objective = if res.status == LpStatus::Optimal {
        load.max(res.objective)
    } else {
        res.objective
    };
    Ok(LpReport {
        objective,
        iterations: res.iterations,
        status: res.status,
        dual: res.dual,
        x: FractionalSolution {
            objective_values: vec![objective],
            feasibility_slack: instance.worst_group_deviation(&res.x).1,
            x: res.x,
        },
    })
}

fn check_len_and_sign(x: &[f64], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Dimension {
            expected,
            actual: x.len(),
        });
    }
    if let Some((j, v)) = x
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < -INGEST_TOL)
    {
        return Err(Error::Validation {
            field: "x".into(),
            message: format!("x[{j}] = {v} is not a nonnegative real"),
        });
    }
    Ok(())
}

/// Validates an externally supplied x* for a CIP (Ax ≥ b within 1e-6).
pub fn ingest_cip(instance: &CipInstance, x: &[f64]) -> Result<FractionalSolution> {
    check_len_and_sign(x, instance.cols())?;
    let x: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let (row, violation) = instance.worst_violation(&x);
    if violation > INGEST_TOL {
        return Err(Error::Infeasible { row, violation });
    }
    Ok(FractionalSolution {
        objective_values: instance.objectives(&x),
        feasibility_slack: violation,
        x,
    })
}

/// Validates an externally supplied x* for a MIP (group sums 1 within
/// 1e-6). An offending group is reported through `Infeasible::row`.
pub fn ingest_mip(instance: &MipInstance, x: &[f64]) -> Result<FractionalSolution> {
    check_len_and_sign(x, instance.cols())?;
    let x: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let (group, violation) = instance.worst_group_deviation(&x);
    if violation > INGEST_TOL {
        return Err(Error::Infeasible {
            row: group,
            violation,
        });
    }
    Ok(FractionalSolution {
        objective_values: vec![instance.max_load(&x)],
        feasibility_slack: violation,
        x,
    })
}

pub fn ingest_solution(instance: &Instance, x: &[f64]) -> Result<FractionalSolution> {
    match instance {
        Instance::Cip(c) => ingest_cip(c, x),
        Instance::Mip(m) => ingest_mip(m, x),
    }
}

/// Solution file contents: `{"x": [...], "objective": v}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl SolutionFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(json_error)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("solution serialises")
    }
}
