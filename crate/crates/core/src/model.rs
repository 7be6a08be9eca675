//! Instances, fractional solutions, sparsity statistics, generators and the
//! JSON instance format.
//!
//! Matrices are stored row-major together with a column adjacency list
//! (column → rows), because the row cover R(·) and every Chernoff-bound
//! evaluation downstream are driven by columns.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Tolerance used when checking feasibility of fractional vectors.
pub const FEASIBILITY_TOL: f64 = 1e-9;
const INTEGRAL_DEMAND_TOL: f64 = 1e-9;

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Sparse matrix with entries in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_entries: Vec<Vec<(usize, f64)>>,
    col_entries: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets in any order.
    ///
    /// Zero values, duplicates, out-of-range indices and values outside
    /// [0, 1] are rejected.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|x| (x.0, x.1));
        let mut row_entries = vec![Vec::new(); rows];
        let mut col_entries = vec![Vec::new(); cols];
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            if r >= rows || c >= cols {
                return Err(invalid(
                    "A",
                    format!("entry ({r},{c}) outside a {rows}x{cols} matrix"),
                ));
            }
            if last == Some((r, c)) {
                return Err(invalid("A", format!("duplicate entry ({r},{c})")));
            }
            if v == 0.0 {
                return Err(invalid("A", format!("explicit zero at ({r},{c})")));
            }
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid("A", format!("entry ({r},{c}) = {v} outside [0,1]")));
            }
            row_entries[r].push((c, v));
            col_entries[c].push((r, v));
            last = Some((r, c));
        }
        Ok(Self {
            rows,
            cols,
            row_entries,
            col_entries,
        })
    }

    /// Builds a matrix from dense rows, skipping zeros.
    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        let rows = dense.len();
        let cols = dense.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (r, row) in dense.iter().enumerate() {
            if row.len() != cols {
                return Err(invalid("A", format!("row {r} has {} entries, expected {cols}", row.len())));
            }
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(rows, cols, &triplets)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Nonzeros of row `r` as `(col, value)`, ascending by column.
    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.row_entries[r]
    }

    /// Nonzeros of column `c` as `(row, value)`, ascending by row.
    pub fn col(&self, c: usize) -> &[(usize, f64)] {
        &self.col_entries[c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row_entries[r]
            .binary_search_by_key(&c, |e| e.0)
            .map_or(0.0, |i| self.row_entries[r][i].1)
    }

    pub fn nnz(&self) -> usize {
        self.row_entries.iter().map(Vec::len).sum()
    }

    /// Triplets sorted by row, then column.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.row_entries
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)))
            .collect()
    }

    pub fn is_binary(&self) -> bool {
        self.row_entries.iter().flatten().all(|&(_, v)| v == 1.0)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.row_entries
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        self.row_entries[r].iter().map(|&(c, v)| v * x[c]).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.cols]; self.rows];
        for (r, c, v) in self.triplets() {
            dense[r][c] = v;
        }
        dense
    }
}

/// Covering integer program: minimise c_i·z subject to Az ≥ b, z ∈ Z₊ⁿ,
/// with one or more cost vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CipInstance {
    matrix: SparseMatrix,
    demands: Vec<f64>,
    costs: Vec<Vec<f64>>,
    raw_costs: Vec<Vec<f64>>,
    cost_scales: Vec<f64>,
}

impl CipInstance {
    /// Validates and normalises. Each cost vector is divided by its maximum
    /// (recorded in [`cost_scales`](Self::cost_scales)). For 0/1 matrices,
    /// demands within 1e-9 of an integer are snapped to it; others are
    /// rejected.
    pub fn new(matrix: SparseMatrix, demands: Vec<f64>, costs: Vec<Vec<f64>>) -> Result<Self> {
        if demands.len() != matrix.rows() {
            return Err(invalid(
                "b",
                format!("has {} entries for {} rows", demands.len(), matrix.rows()),
            ));
        }
        let binary = matrix.is_binary();
        let mut snapped = Vec::with_capacity(demands.len());
        for (i, &b) in demands.iter().enumerate() {
            if !(b >= 1.0) || !b.is_finite() {
                return Err(invalid("b", format!("b[{i}] = {b} is below 1")));
            }
            if binary {
                let r = b.round();
                if (b - r).abs() > INTEGRAL_DEMAND_TOL {
                    return Err(invalid(
                        "b",
                        format!("b[{i}] = {b} must be integral for a 0/1 matrix"),
                    ));
                }
                snapped.push(r);
            } else {
                snapped.push(b);
            }
        }
        if costs.is_empty() {
            return Err(invalid("costs", "at least one cost vector is required"));
        }
        let mut normalised = Vec::with_capacity(costs.len());
        let mut scales = Vec::with_capacity(costs.len());
        for (i, c) in costs.iter().enumerate() {
            if c.len() != matrix.cols() {
                return Err(invalid(
                    "costs",
                    format!("cost vector {i} has {} entries for {} columns", c.len(), matrix.cols()),
                ));
            }
            if let Some(v) = c.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(invalid("costs", format!("cost vector {i} has invalid entry {v}")));
            }
            let max = c.iter().cloned().fold(0.0, f64::max);
            if max <= 0.0 {
                return Err(invalid("costs", format!("cost vector {i} is identically zero")));
            }
            normalised.push(c.iter().map(|v| v / max).collect());
            scales.push(max);
        }
        Ok(Self {
            matrix,
            demands: snapped,
            costs: normalised,
            raw_costs: costs,
            cost_scales: scales,
        })
    }

    /// Single-criterion unweighted instance.
    pub fn unit_cost(matrix: SparseMatrix, demands: Vec<f64>) -> Result<Self> {
        let n = matrix.cols();
        Self::new(matrix, demands, vec![vec![1.0; n]])
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn demands(&self) -> &[f64] {
        &self.demands
    }

    /// Normalised cost vectors (each with maximum exactly 1).
    pub fn costs(&self) -> &[Vec<f64>] {
        &self.costs
    }

    pub fn cost(&self, criterion: usize) -> &[f64] {
        &self.costs[criterion]
    }

    /// Cost vectors as supplied, before normalisation.
    pub fn raw_costs(&self) -> &[Vec<f64>] {
        &self.raw_costs
    }

    pub fn cost_scales(&self) -> &[f64] {
        &self.cost_scales
    }

    pub fn criteria(&self) -> usize {
        self.costs.len()
    }

    /// B = min_i b_i (1 for an instance without rows).
    pub fn min_demand(&self) -> f64 {
        if self.demands.is_empty() {
            return 1.0;
        }
        self.demands.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// c_i·x in normalised units.
    pub fn objective(&self, criterion: usize, x: &[f64]) -> f64 {
        self.costs[criterion].iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn objectives(&self, x: &[f64]) -> Vec<f64> {
        (0..self.criteria()).map(|i| self.objective(i, x)).collect()
    }

    /// Largest shortfall max_i (b_i − A_i·x)₊ and the row attaining it.
    pub fn worst_violation(&self, x: &[f64]) -> (usize, f64) {
        let ax = self.matrix.mul_vec(x);
        ax.iter()
            .zip(&self.demands)
            .enumerate()
            .map(|(i, (lhs, b))| (i, (b - lhs).max(0.0)))
            .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.cols() && self.worst_violation(x).1 <= tol
    }

    /// Re-checks every type invariant.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = CipInstance::new(
            SparseMatrix::from_triplets(self.rows(), self.cols(), &self.matrix.triplets())?,
            self.demands.clone(),
            self.raw_costs.clone(),
        )?;
        for c in &rebuilt.costs {
            if c.iter().cloned().fold(0.0, f64::max) != 1.0 {
                return Err(invalid("costs", "normalised cost vector does not have maximum 1"));
            }
        }
        if rebuilt != *self {
            return Err(invalid("instance", "stored instance differs from its validated form"));
        }
        Ok(())
    }
}

/// Minimax integer program over groups of 0/1 variables: pick one slot per
/// group to minimise the largest row load of Ax.
#[derive(Debug, Clone, PartialEq)]
pub struct MipInstance {
    matrix: SparseMatrix,
    group_sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl MipInstance {
    pub fn new(matrix: SparseMatrix, group_sizes: Vec<usize>) -> Result<Self> {
        if group_sizes.contains(&0) {
            return Err(invalid("groups", "every group needs at least one slot"));
        }
        let total: usize = group_sizes.iter().sum();
        if total != matrix.cols() {
            return Err(invalid(
                "groups",
                format!("group sizes sum to {total} but A has {} columns", matrix.cols()),
            ));
        }
        let mut offsets = Vec::with_capacity(group_sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in &group_sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Self {
            matrix,
            group_sizes,
            offsets,
        })
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    /// N = Σ ℓ_i.
    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Column index of slot `slot` in group `group`.
    pub fn column(&self, group: usize, slot: usize) -> usize {
        assert!(slot < self.group_sizes[group], "slot out of range");
        self.offsets[group] + slot
    }

    /// Inverse of [`column`](Self::column).
    pub fn group_of(&self, col: usize) -> (usize, usize) {
        let g = self.offsets.partition_point(|&o| o <= col) - 1;
        (g, col - self.offsets[g])
    }

    pub fn group_range(&self, group: usize) -> std::ops::Range<usize> {
        self.offsets[group]..self.offsets[group + 1]
    }

    /// max_i (Ax)_i (0 without rows).
    pub fn max_load(&self, x: &[f64]) -> f64 {
        self.matrix.mul_vec(x).into_iter().fold(0.0, f64::max)
    }

    /// Largest deviation of a group sum from 1 and the group attaining it.
    pub fn worst_group_deviation(&self, x: &[f64]) -> (usize, f64) {
        (0..self.groups())
            .map(|g| (g, (x[self.group_range(g)].iter().sum::<f64>() - 1.0).abs()))
            .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
    }

    pub fn validate(&self) -> Result<()> {
        let rebuilt = MipInstance::new(
            SparseMatrix::from_triplets(self.rows(), self.cols(), &self.matrix.triplets())?,
            self.group_sizes.clone(),
        )?;
        if rebuilt != *self {
            return Err(invalid("instance", "stored instance differs from its validated form"));
        }
        Ok(())
    }
}

/// Either kind of instance, as read from an instance file.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Cip(CipInstance),
    Mip(MipInstance),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Cip(_) => "cip",
            Instance::Mip(_) => "mip",
        }
    }

    pub fn sparsity_stats(&self) -> SparsityStats {
        match self {
            Instance::Cip(c) => sparsity_stats_cip(c),
            Instance::Mip(m) => sparsity_stats_mip(m),
        }
    }
}

/// A fractional vector together with its objective value(s) and the largest
/// constraint violation it exhibits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalSolution {
    pub x: Vec<f64>,
    /// c_i·x for CIPs (normalised costs), or the single load W for MIPs.
    pub objective_values: Vec<f64>,
    pub feasibility_slack: f64,
}

/// Column sparsity a, maximum column sum g and group-row incidence t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityStats {
    pub a: usize,
    /// Stored as the exact column sum when A is 0/1; otherwise rounded up.
    pub g: usize,
    pub t: usize,
}

/// Max nonzeros per column and max column sum, the latter unrounded.
pub fn column_stats(matrix: &SparseMatrix) -> (usize, f64) {
    (0..matrix.cols())
        .map(|c| {
            let col = matrix.col(c);
            (col.len(), col.iter().map(|e| e.1).sum::<f64>())
        })
        .fold((0, 0.0), |acc, cur| (acc.0.max(cur.0), acc.1.max(cur.1)))
}

fn ceil_sum(sum: f64) -> usize {
    // Sums of entries in (0,1] are rounded up, guarding against 2.0000000001.
    let r = sum.round();
    if (sum - r).abs() < 1e-12 {
        r as usize
    } else {
        sum.ceil() as usize
    }
}

pub fn sparsity_stats_cip(instance: &CipInstance) -> SparsityStats {
    let (a, g) = column_stats(instance.matrix());
    SparsityStats {
        a,
        g: ceil_sum(g),
        t: a,
    }
}

/// t = max over groups of the number of rows touching any column of the group.
pub fn sparsity_stats_mip(instance: &MipInstance) -> SparsityStats {
    let (a, g) = column_stats(instance.matrix());
    SparsityStats {
        a,
        g: ceil_sum(g),
        t: group_incidence(instance, |_| true),
    }
}

/// Max over groups of the rows touched by the group's columns passing `keep`.
pub fn group_incidence(instance: &MipInstance, keep: impl Fn(usize) -> bool) -> usize {
    let mut marks = vec![usize::MAX; instance.rows()];
    let mut best = 0;
    for g in 0..instance.groups() {
        let mut count = 0;
        for col in instance.group_range(g).filter(|&c| keep(c)) {
            for &(r, _) in instance.matrix().col(col) {
                if marks[r] != g {
                    marks[r] = g;
                    count += 1;
                }
            }
        }
        best = best.max(count);
    }
    best
}

/// R(cols): rows with a nonzero coefficient on any listed column.
pub fn row_cover(instance: &CipInstance, cols: &[usize]) -> Result<Vec<usize>> {
    let mut seen = BTreeSet::new();
    for &c in cols {
        if c >= instance.cols() {
            return Err(domain(format!("column {c} out of range")));
        }
        if !seen.insert(c) {
            return Err(domain(format!("duplicate column {c}")));
        }
    }
    let rows: BTreeSet<usize> = cols
        .iter()
        .flat_map(|&c| instance.matrix().col(c).iter().map(|e| e.0))
        .collect();
    Ok(rows.into_iter().collect())
}

/// Random set-cover instance: rows are elements, columns are sets, unit
/// costs and b_i = `demand`. Every element is placed in at least
/// `demand + 1` distinct sets so the LP relaxation and the integer program
/// are feasible by construction.
pub fn gen_set_cover(
    n_elems: usize,
    n_sets: usize,
    max_set_size: usize,
    demand: u32,
    seed: u64,
) -> Result<CipInstance> {
    if max_set_size == 0 || demand == 0 {
        return Err(Error::Generation("max_set_size and B must be >= 1".into()));
    }
    let per_elem = demand as usize + 1;
    if n_sets < per_elem {
        return Err(Error::Generation(format!(
            "need at least B+1 = {per_elem} sets, got {n_sets}"
        )));
    }
    if n_sets * max_set_size < n_elems * per_elem {
        return Err(Error::Generation(format!(
            "{n_sets} sets of size <= {max_set_size} cannot place {n_elems} elements {per_elem} times"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_sets];
    let mut order: Vec<usize> = (0..n_elems).collect();
    order.shuffle(&mut rng);
    for &e in &order {
        // Prefer the emptiest sets; random keys break ties.
        let mut cands: Vec<(usize, u64, usize)> = (0..n_sets)
            .filter(|&s| members[s].len() < max_set_size)
            .map(|s| (members[s].len(), rng.gen::<u64>(), s))
            .collect();
        if cands.len() < per_elem {
            return Err(Error::Generation("ran out of set capacity".into()));
        }
        cands.sort_unstable();
        for &(_, _, s) in cands.iter().take(per_elem) {
            members[s].insert(e);
        }
    }
    for set in members.iter_mut() {
        let target = rng.gen_range(set.len()..=max_set_size.min(n_elems));
        let mut pool: Vec<usize> = (0..n_elems).filter(|e| !set.contains(e)).collect();
        pool.shuffle(&mut rng);
        for e in pool.into_iter().take(target.saturating_sub(set.len())) {
            set.insert(e);
        }
    }
    let triplets: Vec<(usize, usize, f64)> = members
        .iter()
        .enumerate()
        .flat_map(|(s, set)| set.iter().map(move |&e| (e, s, 1.0)))
        .collect();
    let matrix = SparseMatrix::from_triplets(n_elems, n_sets, &triplets)?;
    CipInstance::unit_cost(matrix, vec![f64::from(demand); n_elems])
}

/// Facility location on a digraph: A_{v,u} = 1 iff u = v or v → u is an arc.
pub fn facility_location_from_arcs(
    n_nodes: usize,
    arcs: &[(usize, usize)],
    costs: Vec<f64>,
    demand: u32,
) -> Result<CipInstance> {
    let mut cells: BTreeSet<(usize, usize)> = (0..n_nodes).map(|v| (v, v)).collect();
    for &(v, u) in arcs {
        if v >= n_nodes || u >= n_nodes {
            return Err(Error::Generation(format!("arc ({v},{u}) out of range")));
        }
        cells.insert((v, u));
    }
    let triplets: Vec<(usize, usize, f64)> = cells.into_iter().map(|(v, u)| (v, u, 1.0)).collect();
    let matrix = SparseMatrix::from_triplets(n_nodes, n_nodes, &triplets)?;
    CipInstance::new(matrix, vec![f64::from(demand); n_nodes], vec![costs])
}

/// Random facility-location instance where every node sees at least
/// `demand` candidate sites (itself included) and every node has in-degree
/// at most `max_in_degree`, so column sparsity is at most Δ_in + 1.
pub fn gen_facility_location(
    n_nodes: usize,
    max_in_degree: usize,
    demand: u32,
    seed: u64,
) -> Result<CipInstance> {
    let need = demand as usize;
    if demand == 0 || n_nodes == 0 {
        return Err(Error::Generation("n_nodes and B must be >= 1".into()));
    }
    if max_in_degree < need || n_nodes < need {
        return Err(Error::Generation(format!(
            "B = {need} needs max_in_degree >= B and at least B nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_deg = vec![0usize; n_nodes];
    let mut out: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_nodes];
    let mut order: Vec<usize> = (0..n_nodes).collect();
    order.shuffle(&mut rng);
    for &v in &order {
        let mut cands: Vec<(usize, u64, usize)> = (0..n_nodes)
            .filter(|&u| u != v && in_deg[u] < max_in_degree)
            .map(|u| (in_deg[u], rng.gen::<u64>(), u))
            .collect();
        if cands.len() < need - 1 {
            return Err(Error::Generation("ran out of in-degree capacity".into()));
        }
        cands.sort_unstable();
        for &(_, _, u) in cands.iter().take(need - 1) {
            out[v].insert(u);
            in_deg[u] += 1;
        }
    }
    for &v in &order {
        let extra = rng.gen_range(0..=2usize);
        let mut pool: Vec<usize> = (0..n_nodes)
            .filter(|&u| u != v && !out[v].contains(&u))
            .collect();
        pool.shuffle(&mut rng);
        let mut added = 0;
        for u in pool {
            if added == extra {
                break;
            }
            if in_deg[u] < max_in_degree {
                out[v].insert(u);
                in_deg[u] += 1;
                added += 1;
            }
        }
    }
    let arcs: Vec<(usize, usize)> = out
        .iter()
        .enumerate()
        .flat_map(|(v, set)| set.iter().map(move |&u| (v, u)))
        .collect();
    let costs: Vec<f64> = (0..n_nodes).map(|_| rng.gen_range(0.05..=1.0)).collect();
    facility_location_from_arcs(n_nodes, &arcs, costs, demand)
}

/// Partition MIP of a set system: one group per vertex with one slot per
/// part; row (edge j, part k) has a 1 on (vertex i, part k) iff i ∈ D_j.
pub fn hypergraph_partition_from_edges(
    n_verts: usize,
    edges: &[Vec<usize>],
    n_parts: usize,
) -> Result<MipInstance> {
    if n_parts < 2 {
        return Err(Error::Generation("n_parts must be >= 2".into()));
    }
    let mut triplets = Vec::new();
    for (j, edge) in edges.iter().enumerate() {
        let verts: BTreeSet<usize> = edge.iter().cloned().collect();
        if verts.len() != edge.len() {
            return Err(Error::Generation(format!("edge {j} repeats a vertex")));
        }
        for &i in &verts {
            if i >= n_verts {
                return Err(Error::Generation(format!("edge {j} names vertex {i} out of range")));
            }
            for k in 0..n_parts {
                triplets.push((j * n_parts + k, i * n_parts + k, 1.0));
            }
        }
    }
    let matrix = SparseMatrix::from_triplets(edges.len() * n_parts, n_verts * n_parts, &triplets)?;
    MipInstance::new(matrix, vec![n_parts; n_verts])
}

/// Random set system with every edge nonempty and vertex degree at most
/// `degree_cap`, encoded as a partition MIP.
pub fn gen_hypergraph_partition(
    n_verts: usize,
    n_edges: usize,
    degree_cap: usize,
    n_parts: usize,
    seed: u64,
) -> Result<MipInstance> {
    Ok(gen_hypergraph_edges(n_verts, n_edges, degree_cap, n_parts, seed)?.1)
}

/// As [`gen_hypergraph_partition`], also returning the edge lists.
pub fn gen_hypergraph_edges(
    n_verts: usize,
    n_edges: usize,
    degree_cap: usize,
    n_parts: usize,
    seed: u64,
) -> Result<(Vec<Vec<usize>>, MipInstance)> {
    if n_parts < 2 || degree_cap == 0 || n_verts == 0 {
        return Err(Error::Generation(
            "need n_parts >= 2, degree_cap >= 1 and at least one vertex".into(),
        ));
    }
    if n_verts * degree_cap.min(n_edges) < n_edges {
        return Err(Error::Generation(format!(
            "{n_verts} vertices of degree <= {degree_cap} cannot make {n_edges} edges nonempty"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_edges];
    let mut degree = vec![0usize; n_verts];
    for edge in edges.iter_mut() {
        let mut cands: Vec<(usize, u64, usize)> = (0..n_verts)
            .filter(|&v| degree[v] < degree_cap)
            .map(|v| (degree[v], rng.gen::<u64>(), v))
            .collect();
        cands.sort_unstable();
        let v = cands
            .first()
            .ok_or_else(|| Error::Generation("ran out of vertex degree".into()))?
            .2;
        edge.insert(v);
        degree[v] += 1;
    }
    for v in 0..n_verts {
        let target = rng.gen_range(degree[v]..=degree_cap.min(n_edges).max(degree[v]));
        let mut pool: Vec<usize> = (0..n_edges).filter(|&j| !edges[j].contains(&v)).collect();
        pool.shuffle(&mut rng);
        for j in pool.into_iter().take(target - degree[v]) {
            edges[j].insert(v);
            degree[v] += 1;
        }
    }
    let edges: Vec<Vec<usize>> = edges.into_iter().map(|e| e.into_iter().collect()).collect();
    let mip = hypergraph_partition_from_edges(n_verts, &edges, n_parts)?;
    Ok((edges, mip))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum RawInstance {
    Cip {
        m: usize,
        n: usize,
        #[serde(rename = "A")]
        a: Vec<(usize, usize, f64)>,
        b: Vec<f64>,
        costs: Vec<Vec<f64>>,
    },
    Mip {
        m: usize,
        groups: Vec<usize>,
        #[serde(rename = "A")]
        a: Vec<(usize, usize, f64)>,
    },
}

pub(crate) fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

impl RawInstance {
    fn from_instance(instance: &Instance) -> Self {
        match instance {
            Instance::Cip(c) => RawInstance::Cip {
                m: c.rows(),
                n: c.cols(),
                a: c.matrix().triplets(),
                b: c.demands().to_vec(),
                costs: c.raw_costs().to_vec(),
            },
            Instance::Mip(m) => RawInstance::Mip {
                m: m.rows(),
                groups: m.group_sizes().to_vec(),
                a: m.matrix().triplets(),
            },
        }
    }

    fn into_instance(self) -> Result<Instance> {
        match self {
            RawInstance::Cip { m, n, a, b, costs } => {
                let matrix = SparseMatrix::from_triplets(m, n, &a)?;
                Ok(Instance::Cip(CipInstance::new(matrix, b, costs)?))
            }
            RawInstance::Mip { m, groups, a } => {
                let n: usize = groups.iter().sum();
                let matrix = SparseMatrix::from_triplets(m, n, &a)?;
                Ok(Instance::Mip(MipInstance::new(matrix, groups)?))
            }
        }
    }
}

/// Parses the JSON instance format.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let raw: RawInstance = serde_json::from_str(text).map_err(json_error)?;
    raw.into_instance()
}

pub(crate) fn instance_from_value(value: serde_json::Value) -> Result<Instance> {
    let raw: RawInstance = serde_json::from_value(value).map_err(json_error)?;
    raw.into_instance()
}

pub(crate) fn instance_to_value(instance: &Instance) -> serde_json::Value {
    serde_json::to_value(RawInstance::from_instance(instance)).expect("instance serialises")
}

/// Serialises to the JSON instance format, triplets sorted by row then col.
pub fn serialize_instance(instance: &Instance) -> String {
    serde_json::to_string(&RawInstance::from_instance(instance)).expect("instance serialises")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity(n: usize) -> SparseMatrix {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    /// Dense recomputation of a, g and t.
    fn dense_stats(dense: &[Vec<f64>], groups: Option<&[usize]>) -> (usize, f64, usize) {
        let m = dense.len();
        let n = dense.first().map_or(0, Vec::len);
        let mut a = 0;
        let mut g: f64 = 0.0;
        for c in 0..n {
            a = a.max((0..m).filter(|&r| dense[r][c] != 0.0).count());
            g = g.max((0..m).map(|r| dense[r][c]).sum());
        }
        let t = match groups {
            None => a,
            Some(sizes) => {
                let mut start = 0;
                let mut t = 0;
                for &s in sizes {
                    let touched = (0..m)
                        .filter(|&r| (start..start + s).any(|c| dense[r][c] != 0.0))
                        .count();
                    t = t.max(touched);
                    start += s;
                }
                t
            }
        };
        (a, g, t)
    }

    #[test]
    fn identity_stats() {
        let inst = CipInstance::unit_cost(identity(3), vec![1.0; 3]).unwrap();
        let s = sparsity_stats_cip(&inst);
        assert_eq!((s.a, s.g, s.t), (1, 1, 1));
    }

    #[test]
    fn all_ones_single_group_stats() {
        let m = SparseMatrix::from_dense(&[vec![1.0; 3], vec![1.0; 3]]).unwrap();
        let mip = MipInstance::new(m, vec![3]).unwrap();
        let s = sparsity_stats_mip(&mip);
        assert_eq!((s.a, s.g, s.t), (2, 2, 2));
    }

    #[test]
    fn rejects_bad_matrices_and_demands() {
        assert!(SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.5)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, &[(0, 0, 0.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, &[(0, 0, 0.5), (0, 0, 0.5)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 0.5)]).is_err());
        let err = CipInstance::unit_cost(identity(2), vec![1.5, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "b"));
        assert!(CipInstance::unit_cost(identity(2), vec![0.5, 1.0]).is_err());
        let snapped = CipInstance::unit_cost(identity(1), vec![2.0 + 1e-12]).unwrap();
        assert_eq!(snapped.demands(), &[2.0]);
        let frac = SparseMatrix::from_triplets(1, 1, &[(0, 0, 0.5)]).unwrap();
        assert!(CipInstance::unit_cost(frac, vec![1.5]).is_ok());
    }

    #[test]
    fn costs_are_normalised() {
        let inst = CipInstance::new(identity(2), vec![1.0, 1.0], vec![vec![2.0, 1.0]]).unwrap();
        assert_eq!(inst.cost(0), &[1.0, 0.5]);
        assert_eq!(inst.cost_scales(), &[2.0]);
        assert!(CipInstance::new(identity(2), vec![1.0; 2], vec![vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn row_cover_examples() {
        let inst = CipInstance::unit_cost(identity(3), vec![1.0; 3]).unwrap();
        assert!(row_cover(&inst, &[]).unwrap().is_empty());
        assert_eq!(row_cover(&inst, &[2]).unwrap(), vec![2]);
        assert!(row_cover(&inst, &[1, 1]).is_err());
        assert!(row_cover(&inst, &[3]).is_err());
    }

    #[test]
    fn hand_built_set_cover() {
        // Four singletons plus the full set over four elements.
        let mut t: Vec<_> = (0..4).map(|e| (e, e, 1.0)).collect();
        t.extend((0..4).map(|e| (e, 4, 1.0)));
        let inst = CipInstance::unit_cost(SparseMatrix::from_triplets(4, 5, &t).unwrap(), vec![1.0; 4]).unwrap();
        inst.validate().unwrap();
        assert!(inst.is_feasible(&[0.0, 0.0, 0.0, 0.0, 1.0], FEASIBILITY_TOL));
        // Column sparsity is carried by the full set; each element sits in two sets.
        assert_eq!(sparsity_stats_cip(&inst).a, 4);
        assert!((0..4).all(|r| inst.matrix().row(r).len() == 2));
    }

    #[test]
    fn set_cover_generator() {
        let a = gen_set_cover(12, 8, 5, 2, 9).unwrap();
        let b = gen_set_cover(12, 8, 5, 2, 9).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert!(sparsity_stats_cip(&a).a <= 5);
        for r in 0..12 {
            assert!(a.matrix().row(r).len() >= 3);
        }
        assert!(gen_set_cover(10, 2, 5, 2, 0).is_err());
        assert!(gen_set_cover(10, 4, 2, 2, 0).is_err());
    }

    #[test]
    fn complete_digraph_facility() {
        let arcs: Vec<_> = (0..3)
            .flat_map(|v| (0..3).filter(move |&u| u != v).map(move |u| (v, u)))
            .collect();
        let inst = facility_location_from_arcs(3, &arcs, vec![0.2, 0.4, 0.8], 1).unwrap();
        assert!((0..3).all(|r| inst.matrix().row(r).len() == 3));
        assert_eq!(inst.cost(0), &[0.25, 0.5, 1.0]);
    }

    #[test]
    fn facility_generator() {
        for seed in 0..20 {
            let inst = gen_facility_location(15, 3, 2, seed).unwrap();
            inst.validate().unwrap();
            let (a, _, _) = dense_stats(&inst.matrix().to_dense(), None);
            assert!(a <= 3 + 1);
            assert!((0..15).all(|r| inst.matrix().row(r).len() >= 2));
        }
        assert_eq!(gen_facility_location(10, 3, 2, 4).unwrap(), gen_facility_location(10, 3, 2, 4).unwrap());
        assert!(gen_facility_location(10, 1, 2, 0).is_err());
    }

    #[test]
    fn single_edge_partition() {
        let mip = hypergraph_partition_from_edges(3, &[vec![0, 1, 2]], 2).unwrap();
        assert_eq!(mip.rows(), 2);
        let x = vec![0.5; 6];
        assert!((mip.max_load(&x) - 1.5).abs() < 1e-12);
        assert_eq!(mip.group_of(mip.column(2, 1)), (2, 1));
    }

    #[test]
    fn hypergraph_generator() {
        for seed in 0..20 {
            let (edges, mip) = gen_hypergraph_edges(10, 6, 3, 2, seed).unwrap();
            mip.validate().unwrap();
            let max_deg = (0..10)
                .map(|v| edges.iter().filter(|e| e.contains(&v)).count())
                .max()
                .unwrap();
            let s = sparsity_stats_mip(&mip);
            assert_eq!(s.a, max_deg);
            assert_eq!(s.g, max_deg);
            assert!(max_deg <= 3);
            assert!(edges.iter().all(|e| !e.is_empty()));
        }
        assert_eq!(
            gen_hypergraph_partition(8, 4, 2, 3, 5).unwrap(),
            gen_hypergraph_partition(8, 4, 2, 3, 5).unwrap()
        );
    }

    #[test]
    fn missing_field_names_it() {
        let text = r#"{"kind":"cip","m":1,"n":1,"A":[[0,0,1.0]],"costs":[[1.0]]}"#;
        match parse_instance(text) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("`b`"), "{message}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_entry_rejected() {
        let text = r#"{"kind":"cip","m":1,"n":1,"A":[[0,0,1.5]],"b":[1.0],"costs":[[1.0]]}"#;
        assert!(matches!(parse_instance(text), Err(Error::Validation { .. })));
        let bad_json = "{\"kind\":\"cip\",\n\"m\":}";
        match parse_instance(bad_json) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_generated() {
        let cases = vec![
            Instance::Cip(gen_set_cover(9, 6, 4, 1, 3).unwrap()),
            Instance::Cip(gen_facility_location(7, 3, 2, 3).unwrap()),
            Instance::Mip(gen_hypergraph_partition(6, 4, 2, 2, 3).unwrap()),
        ];
        for inst in cases {
            let text = serialize_instance(&inst);
            assert_eq!(parse_instance(&text).unwrap(), inst);
            assert_eq!(serialize_instance(&parse_instance(&text).unwrap()), text);
        }
    }

    proptest! {
        #[test]
        fn random_matrix_invariants(
            cells in proptest::collection::btree_map((0usize..6, 0usize..9), 0.01f64..=1.0, 0..30),
            split in 1usize..4,
        ) {
            let triplets: Vec<_> = cells.iter().map(|(&(r, c), &v)| (r, c, v)).collect();
            let matrix = SparseMatrix::from_triplets(6, 9, &triplets).unwrap();
            let dense = matrix.to_dense();
            // Groups of size `split`, with a remainder group.
            let mut sizes = vec![split; 9 / split];
            if 9 % split != 0 { sizes.push(9 % split); }
            let mip = MipInstance::new(matrix.clone(), sizes.clone()).unwrap();
            let s = sparsity_stats_mip(&mip);
            let (a, g, t) = dense_stats(&dense, Some(&sizes));
            prop_assert_eq!(s.a, a);
            prop_assert_eq!(s.t, t);
            prop_assert!(g <= s.a as f64 + 1e-12);
            prop_assert!(s.g as f64 >= g - 1e-12);
            // g ≤ a ≤ t ≤ min{m, a·max ℓ_i}
            let max_l = *sizes.iter().max().unwrap();
            prop_assert!(s.g <= s.a && s.a <= s.t && s.t <= 6usize.min(s.a * max_l));

            let inst = CipInstance::unit_cost(matrix, vec![1.0; 6]).unwrap();
            let cols: Vec<usize> = (0..9).step_by(split).collect();
            let cover = row_cover(&inst, &cols).unwrap();
            let dense_cover: Vec<usize> = (0..6).filter(|&r| cols.iter().any(|&c| dense[r][c] != 0.0)).collect();
            prop_assert_eq!(&cover, &dense_cover);
            prop_assert!(cover.len() <= s.a * cols.len());
        }

        #[test]
        fn generated_set_cover_valid(seed in any::<u64>(), b in 1u32..4) {
            let inst = gen_set_cover(10, 10, 6, b, seed).unwrap();
            inst.validate().unwrap();
            prop_assert!(inst.is_feasible(&[f64::from(b); 10], FEASIBILITY_TOL));
        }
    }
}
