//! Exhaustive ground truth on tiny instances.
//!
//! Rounding distributions are enumerated outcome by outcome with
//! compensated sums; only coordinates with 0 < p_j < 1 cost a bit. Every
//! enumeration checks that outcome weights sum to 1 within 1e-10.
//! Verifiers return a [`Verification`]; a failed inequality carries a
//! replayable [`Fixture`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::cip::{EstimatorState, RoundingScheme};
use crate::error::{domain, Error, Result};
use crate::lp::{LinearProgram, Sense};
use crate::model::{
    instance_from_value, instance_to_value, json_error, row_cover, CipInstance, FractionalSolution, Instance,
    MipInstance,
};
use crate::numeric::CompensatedSum;
use crate::tail::{binom_real, chernoff_g, sym_poly};

/// Inequality tolerance for every verifier.
pub const VERIFY_TOL: f64 = 1e-9;
/// Allowed drift of the total outcome weight from 1.
pub const UNITY_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_BITS: u32 = 22;
pub const HARD_MAX_BITS: u32 = 26;
pub const BUDGET_ENV: &str = "LLLROUND_BUDGET_BITS";
/// Row shortfalls larger than this count as failures.
const FAIL_TOL: f64 = 1e-9;
const CHUNK_BITS: u32 = 10;

/// Caps on exhaustive work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationBudget {
    /// At most 2^max_bits outcomes per enumeration.
    pub max_bits: u32,
    /// Per-variable upper bound in the ILP search.
    pub max_box: u64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self {
            max_bits: DEFAULT_MAX_BITS,
            max_box: 8,
        }
    }
}

impl EnumerationBudget {
    pub fn new(max_bits: u32, max_box: u64) -> Result<Self> {
        if max_bits > HARD_MAX_BITS {
            return Err(Error::Budget(format!(
                "max_bits = {max_bits} exceeds the hard cap {HARD_MAX_BITS}"
            )));
        }
        Ok(Self { max_bits, max_box })
    }

    /// Default budget with `LLLROUND_BUDGET_BITS` applied when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(BUDGET_ENV) {
            Ok(v) => {
                let bits = v.trim().parse::<u32>().map_err(|_| Error::Validation {
                    field: BUDGET_ENV.into(),
                    message: format!("`{v}` is not a bit count"),
                })?;
                Self::new(bits, Self::default().max_box)
            }
            Err(_) => Ok(Self::default()),
        }
    }

    fn check_bits(&self, bits: u32, what: &str) -> Result<()> {
        if bits > self.max_bits {
            return Err(Error::Budget(format!(
                "{what} needs 2^{bits} outcomes, budget is 2^{}",
                self.max_bits
            )));
        }
        Ok(())
    }
}

/// Σ over X ∈ {0,1}^n of Pr(X)·f(X) for independent bits, with `width`
/// accumulators. `f` writes its values into the zeroed output slice.
fn enumerate_bits<F>(p: &[f64], budget: &EnumerationBudget, width: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[bool], &mut [f64]) + Sync,
{
    let free: Vec<usize> = (0..p.len()).filter(|&j| p[j] > 0.0 && p[j] < 1.0).collect();
    let bits = free.len() as u32;
    budget.check_bits(bits, "bit enumeration")?;
    let base: Vec<bool> = p.iter().map(|&v| v >= 1.0).collect();
    let total = 1u64 << bits;
    let chunk = 1u64 << CHUNK_BITS.min(bits);
    let chunks = total / chunk;
    let partials: Vec<(CompensatedSum, Vec<CompensatedSum>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut bitsv = base.clone();
            let mut out = vec![0.0; width];
            let mut mass = CompensatedSum::new();
            let mut acc = vec![CompensatedSum::new(); width];
            for mask in c * chunk..(c + 1) * chunk {
                let mut w = 1.0;
                for (t, &j) in free.iter().enumerate() {
                    let on = (mask >> t) & 1 == 1;
                    bitsv[j] = on;
                    w *= if on { p[j] } else { 1.0 - p[j] };
                }
                out.iter_mut().for_each(|v| *v = 0.0);
                f(&bitsv, &mut out);
                mass.add(w);
                for (a, &v) in acc.iter_mut().zip(&out) {
                    if v != 0.0 {
                        a.add(w * v);
                    }
                }
            }
            (mass, acc)
        })
        .collect();
    finish(partials, width)
}

fn finish(partials: Vec<(CompensatedSum, Vec<CompensatedSum>)>, width: usize) -> Result<Vec<f64>> {
    let mut mass = CompensatedSum::new();
    let mut acc = vec![CompensatedSum::new(); width];
    for (m, a) in &partials {
        mass.merge(m);
        for (x, y) in acc.iter_mut().zip(a) {
            x.merge(y);
        }
    }
    if (mass.value() - 1.0).abs() > UNITY_TOL {
        return Err(Error::Internal(format!(
            "outcome weights sum to {} instead of 1",
            mass.value()
        )));
    }
    Ok(acc.iter().map(CompensatedSum::value).collect())
}

/// As [`enumerate_bits`] for one categorical draw per group (weights x,
/// normalised per group); `f` receives the chosen slot of every group.
fn enumerate_groups<F>(instance: &MipInstance, x: &[f64], budget: &EnumerationBudget, width: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[usize], &mut [f64]) + Sync,
{
    let mut options: Vec<Vec<(usize, f64)>> = Vec::with_capacity(instance.groups());
    for g in 0..instance.groups() {
        let range = instance.group_range(g);
        let sum: f64 = x[range.clone()].iter().sum();
        if !(sum > 0.0) {
            return Err(domain(format!("group {g} has no mass")));
        }
        options.push(
            range
                .enumerate()
                .filter(|&(_, c)| x[c] > 0.0)
                .map(|(s, c)| (s, x[c] / sum))
                .collect(),
        );
    }
    let outcomes: f64 = options.iter().map(|o| o.len() as f64).product();
    let bits = outcomes.log2().ceil() as u32;
    budget.check_bits(bits, "group enumeration")?;
    let total = outcomes as u64;
    let chunk = 1024u64.min(total);
    let chunks = total.div_ceil(chunk);
    let partials: Vec<(CompensatedSum, Vec<CompensatedSum>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut slots = vec![0usize; options.len()];
            let mut out = vec![0.0; width];
            let mut mass = CompensatedSum::new();
            let mut acc = vec![CompensatedSum::new(); width];
            for idx in c * chunk..((c + 1) * chunk).min(total) {
                let mut rest = idx;
                let mut w = 1.0;
                for (g, opts) in options.iter().enumerate() {
                    let len = opts.len() as u64;
                    let (s, pw) = opts[(rest % len) as usize];
                    rest /= len;
                    slots[g] = s;
                    w *= pw;
                }
                out.iter_mut().for_each(|v| *v = 0.0);
                f(&slots, &mut out);
                mass.add(w);
                for (a, &v) in acc.iter_mut().zip(&out) {
                    if v != 0.0 {
                        a.add(w * v);
                    }
                }
            }
            (mass, acc)
        })
        .collect();
    finish(partials, width)
}

fn z_from_bits(scheme: &RoundingScheme, bits: &[bool]) -> Vec<f64> {
    scheme.s.iter().zip(bits).map(|(&s, &b)| s as f64 + f64::from(u8::from(b))).collect()
}

fn row_fails(instance: &CipInstance, z: &[f64], r: usize) -> bool {
    instance.matrix().row_dot(r, z) < instance.demands()[r] - FAIL_TOL
}

/// Exact probabilities under general randomized rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventProbs {
    /// Pr(E_i) = Pr((Az)_i < b_i) per row.
    pub row_fail: Vec<f64>,
    /// Pr(c_i·z > λ_i) per objective.
    pub objective_fail: Vec<f64>,
    /// Pr(Az ≥ b).
    pub all_rows_ok: f64,
    /// Pr(Az ≥ b and c_i·z ≤ λ_i for all i).
    pub pr_a: f64,
}

pub fn exact_event_probs(
    instance: &CipInstance,
    scheme: &RoundingScheme,
    p: &[f64],
    lambdas: &[f64],
    budget: &EnumerationBudget,
) -> Result<EventProbs> {
    if p.len() != instance.cols() {
        return Err(Error::Dimension {
            expected: instance.cols(),
            actual: p.len(),
        });
    }
    let m = instance.rows();
    let l = lambdas.len();
    let sums = enumerate_bits(p, budget, m + l + 2, |bits, out| {
        let z = z_from_bits(scheme, bits);
        let mut ok = true;
        for r in 0..m {
            if row_fails(instance, &z, r) {
                out[r] = 1.0;
                ok = false;
            }
        }
        let mut within = true;
        for (i, &lam) in lambdas.iter().enumerate() {
            if instance.objective(i, &z) > lam + FAIL_TOL {
                out[m + i] = 1.0;
                within = false;
            }
        }
        if ok {
            out[m + l] = 1.0;
            if within {
                out[m + l + 1] = 1.0;
            }
        }
    })?;
    Ok(EventProbs {
        row_fail: sums[..m].to_vec(),
        objective_fail: sums[m..m + l].to_vec(),
        all_rows_ok: sums[m + l],
        pr_a: sums[m + l + 1],
    })
}

/// Optimal integer solution found by exhaustive search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlpOptimum {
    pub z: Vec<u64>,
    pub opt: f64,
}

/// Lexicographically smallest optimum of min c_i·z, Az ≥ b over the box
/// z_j ≤ max_r ⌈b_r / A_rj⌉ (capped by `max_box`); n ≤ 14.
pub fn exact_ilp(instance: &CipInstance, objective_index: usize, budget: &EnumerationBudget) -> Result<IlpOptimum> {
    let n = instance.cols();
    if n > 14 {
        return Err(Error::Budget(format!("exact ILP supports n <= 14, got {n}")));
    }
    if objective_index >= instance.criteria() {
        return Err(domain(format!("objective index {objective_index} out of range")));
    }
    let caps: Vec<u64> = (0..n)
        .map(|j| {
            instance
                .matrix()
                .col(j)
                .iter()
                .map(|&(r, a)| (instance.demands()[r] / a - 1e-12).ceil() as u64)
                .max()
                .unwrap_or(0)
                .min(budget.max_box)
        })
        .collect();
    let states: f64 = caps.iter().map(|&c| (c + 1) as f64).product();
    if states.log2() > f64::from(budget.max_bits) + 8.0 {
        return Err(Error::Budget(format!("ILP box has {states:.3e} points")));
    }
    let mut search = IlpSearch {
        instance,
        costs: instance.cost(objective_index),
        caps: &caps,
        // reach[r][j]: the most row r can still gain from columns j..n.
        reach: (0..instance.rows())
            .map(|r| {
                let mut tail = vec![0.0; n + 1];
                for j in (0..n).rev() {
                    tail[j] = tail[j + 1] + instance.matrix().get(r, j) * caps[j] as f64;
                }
                tail
            })
            .collect(),
        z: vec![0; n],
        lhs: vec![0.0; instance.rows()],
        best: None,
    };
    search.dfs(0, 0.0);
    search
        .best
        .map(|(opt, z)| IlpOptimum { z, opt })
        .ok_or_else(|| Error::Budget(format!("no feasible point with z_j <= {}", budget.max_box)))
}

struct IlpSearch<'a> {
    instance: &'a CipInstance,
    costs: &'a [f64],
    caps: &'a [u64],
    reach: Vec<Vec<f64>>,
    z: Vec<u64>,
    lhs: Vec<f64>,
    best: Option<(f64, Vec<u64>)>,
}

impl IlpSearch<'_> {
    fn dfs(&mut self, j: usize, cost: f64) {
        if let Some((b, _)) = &self.best {
            if cost >= *b - 1e-12 {
                return;
            }
        }
        let demands = self.instance.demands();
        for r in 0..self.lhs.len() {
            if self.lhs[r] + self.reach[r][j] < demands[r] - FAIL_TOL {
                return;
            }
        }
        if j == self.z.len() {
            self.best = Some((cost, self.z.clone()));
            return;
        }
        let col: Vec<(usize, f64)> = self.instance.matrix().col(j).to_vec();
        for v in 0..=self.caps[j] {
            self.z[j] = v;
            for &(r, a) in &col {
                self.lhs[r] += a * v as f64;
            }
            self.dfs(j + 1, cost + self.costs[j] * v as f64);
            for &(r, a) in &col {
                self.lhs[r] -= a * v as f64;
            }
        }
        self.z[j] = 0;
    }
}

/// Minimum of a tiny LP by enumerating every vertex: all equality rows
/// plus every choice of the remaining active constraints among rows and
/// bounds x_j ≥ 0. `None` when no vertex is feasible.
pub fn lp_vertex_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.vars();
    let mut eq = Vec::new();
    let mut ineq = Vec::new();
    for row in &lp.rows {
        match row.sense {
            Sense::Eq => eq.push((row.coeffs.clone(), row.rhs)),
            _ => ineq.push((row.coeffs.clone(), row.rhs)),
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        ineq.push((e, 0.0));
    }
    if eq.len() > n {
        return None;
    }
    let need = n - eq.len();
    let mut best: Option<f64> = None;
    let mut choice: Vec<usize> = (0..need).collect();
    if need > ineq.len() {
        return None;
    }
    loop {
        let mut system: Vec<(Vec<f64>, f64)> = eq.clone();
        system.extend(choice.iter().map(|&i| ineq[i].clone()));
        if let Some(x) = solve_square(system) {
            if lp.violation(&x) <= 1e-9 {
                let obj: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // Next combination in lexicographic order.
        let mut i = need;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if choice[i] < ineq.len() - need + i {
                choice[i] += 1;
                for k in i + 1..need {
                    choice[k] = choice[k - 1] + 1;
                }
                break;
            }
        }
        if need == 0 {
            return best;
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_square(mut system: Vec<(Vec<f64>, f64)>) -> Option<Vec<f64>> {
    let n = system.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| system[a].0[col].abs().total_cmp(&system[b].0[col].abs()))?;
        if system[piv].0[col].abs() < 1e-10 {
            return None;
        }
        system.swap(col, piv);
        let (head, tail) = system.split_at_mut(col + 1);
        let (prow, prhs) = &head[col];
        for (row, rhs) in tail.iter_mut() {
            let f = row[col] / prow[col];
            if f != 0.0 {
                for k in col..n {
                    row[k] -= f * prow[k];
                }
                *rhs -= f * prhs;
            }
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let (row, rhs) = &system[col];
        let s: f64 = (col + 1..n).map(|k| row[k] * x[k]).sum();
        x[col] = (rhs - s) / row[col];
    }
    Some(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyStatus {
    Holds,
    Fails,
    /// The statement's hypothesis does not hold; nothing was asserted.
    HypothesisUnmet,
    /// The conditioning event has probability 0.
    Vacuous,
}

/// Outcome of checking `lhs >= rhs` (up to [`VERIFY_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub claim: String,
    pub lhs: f64,
    pub rhs: f64,
    pub status: VerifyStatus,
    pub fixture: Option<Fixture>,
}

impl Verification {
    pub fn holds(&self) -> bool {
        self.status != VerifyStatus::Fails
    }

    fn compare(claim: &str, lhs: f64, rhs: f64, fixture: impl FnOnce(f64, f64) -> Fixture) -> Self {
        let ok = lhs >= rhs - VERIFY_TOL;
        Self {
            claim: claim.to_string(),
            lhs,
            rhs,
            status: if ok { VerifyStatus::Holds } else { VerifyStatus::Fails },
            fixture: if ok { None } else { Some(fixture(lhs, rhs)) },
        }
    }

    fn unmet(claim: &str, lhs: f64, rhs: f64, status: VerifyStatus) -> Self {
        Self {
            claim: claim.to_string(),
            lhs,
            rhs,
            status,
            fixture: None,
        }
    }
}

pub const CLAIM_PHI: &str = "phi-domination";
pub const CLAIM_BRANCH: &str = "branch-inequality";
pub const CLAIM_DELTA: &str = "delta-monotonicity";
pub const CLAIM_FKG: &str = "fkg";
pub const CLAIM_ANTI_FKG: &str = "anti-fkg";
pub const CLAIM_LLL: &str = "extended-lll";
pub const CLAIM_TAIL: &str = "tail-domination";

/// Counterexample: the instance document plus `p`, `claim`, `lhs`, `rhs`
/// and whatever the claim needs to be re-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub instance: Instance,
    pub p: Vec<f64>,
    pub claim: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Claim-specific fields (scheme, lambda, ks, subsets, …).
    pub extra: Map<String, Value>,
}

impl Fixture {
    pub fn to_json(&self) -> String {
        let mut doc = match instance_to_value(&self.instance) {
            Value::Object(m) => m,
            _ => unreachable!("instances serialise to objects"),
        };
        doc.insert("p".into(), json!(self.p));
        doc.insert("claim".into(), json!(self.claim));
        doc.insert("lhs".into(), json!(self.lhs));
        doc.insert("rhs".into(), json!(self.rhs));
        for (k, v) in &self.extra {
            doc.insert(k.clone(), v.clone());
        }
        serde_json::to_string_pretty(&Value::Object(doc)).expect("fixture serialises")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(json_error)?;
        let Value::Object(mut doc) = value.clone() else {
            return Err(Error::Validation {
                field: "fixture".into(),
                message: "expected a JSON object".into(),
            });
        };
        let take = |doc: &mut Map<String, Value>, key: &str| {
            doc.remove(key).ok_or_else(|| Error::Validation {
                field: key.into(),
                message: "missing fixture field".into(),
            })
        };
        let p: Vec<f64> = serde_json::from_value(take(&mut doc, "p")?).map_err(json_error)?;
        let claim: String = serde_json::from_value(take(&mut doc, "claim")?).map_err(json_error)?;
        let lhs: f64 = serde_json::from_value(take(&mut doc, "lhs")?).map_err(json_error)?;
        let rhs: f64 = serde_json::from_value(take(&mut doc, "rhs")?).map_err(json_error)?;
        let instance = instance_from_value(value)?;
        for key in ["kind", "m", "n", "groups", "A", "b", "costs"] {
            doc.remove(key);
        }
        Ok(Self {
            instance,
            p,
            claim,
            lhs,
            rhs,
            extra: doc,
        })
    }

    fn extra<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<T> {
        let v = self.extra.get(key).cloned().ok_or_else(|| Error::Validation {
            field: key.into(),
            message: "missing fixture field".into(),
        })?;
        serde_json::from_value(v).map_err(json_error)
    }
}

fn state_fixture(state: &EstimatorState, claim: &str, lhs: f64, rhs: f64, more: &[(&str, Value)]) -> Fixture {
    let mut extra = Map::new();
    extra.insert("scheme".into(), serde_json::to_value(state.scheme()).expect("scheme serialises"));
    extra.insert("lambda".into(), json!(state.lambdas()));
    extra.insert("ks".into(), json!(state.ks()));
    extra.insert("kmax".into(), json!(state.kmax()));
    extra.insert("alpha".into(), json!(state.scheme().alpha));
    if state.is_fault_injected() {
        extra.insert("fault_injection".into(), json!(true));
    }
    for (k, v) in more {
        extra.insert((*k).into(), v.clone());
    }
    Fixture {
        instance: Instance::Cip(state.instance().clone()),
        p: state.p().to_vec(),
        claim: claim.into(),
        lhs,
        rhs,
        extra,
    }
}

/// Pr(A) ≥ Φ(p) by exact enumeration.
pub fn verify_phi_domination(state: &EstimatorState, budget: &EnumerationBudget) -> Result<Verification> {
    let probs = exact_event_probs(state.instance(), state.scheme(), state.p(), state.lambdas(), budget)?;
    let phi = state.phi_value();
    Ok(Verification::compare(CLAIM_PHI, probs.pr_a, phi, |l, r| state_fixture(state, CLAIM_PHI, l, r, &[])))
}

/// p_j Φ(p″) + (1 − p_j) Φ(p′) ≥ Φ(p).
pub fn verify_branch_inequality(state: &EstimatorState, j: usize) -> Result<Verification> {
    if j >= state.p().len() {
        return Err(domain(format!("column {j} out of range")));
    }
    let pj = state.p()[j];
    let mut work = state.clone();
    let phi = work.phi_value();
    work.set_p(j, 0.0);
    let phi0 = work.phi_value();
    work.set_p(j, 1.0);
    let phi1 = work.phi_value();
    let combo = pj * phi1 + (1.0 - pj) * phi0;
    Ok(Verification::compare(CLAIM_BRANCH, combo, phi, |l, r| {
        state_fixture(state, CLAIM_BRANCH, l, r, &[("column", json!(j))])
    }))
}

/// For U ⊆ V: Δ(U) ≥ 0 and Δ(U)/f(U,q) ≤ Δ(V)/f(V,q), where
/// Δ(U) = (1−p_j) f(U,q′) + p_j f(U,q″) − f(U,q) and f(U,r) = ∏_U (1 − r).
pub fn verify_delta_monotonicity(state: &EstimatorState, j: usize, u: &[usize], v: &[usize]) -> Result<Verification> {
    if u.iter().any(|r| !v.contains(r)) {
        return Err(domain("U must be a subset of V"));
    }
    let pj = state.p()[j];
    let q = state.chp().to_vec();
    let mut work = state.clone();
    work.set_p(j, 0.0);
    let q0 = work.chp().to_vec();
    work.set_p(j, 1.0);
    let q1 = work.chp().to_vec();
    let f = |set: &[usize], r: &[f64]| set.iter().map(|&i| 1.0 - r[i]).product::<f64>();
    let delta = |set: &[usize]| (1.0 - pj) * f(set, &q0) + pj * f(set, &q1) - f(set, &q);
    let (du, dv) = (delta(u), delta(v));
    if du < -VERIFY_TOL {
        return Ok(Verification::compare(CLAIM_DELTA, du, 0.0, |l, r| {
            state_fixture(state, CLAIM_DELTA, l, r, &[("column", json!(j)), ("U", json!(u)), ("V", json!(v))])
        }));
    }
    let (fu, fv) = (f(u, &q), f(v, &q));
    if fu <= 0.0 || fv <= 0.0 {
        return Ok(Verification::unmet(CLAIM_DELTA, du, 0.0, VerifyStatus::HypothesisUnmet));
    }
    Ok(Verification::compare(CLAIM_DELTA, dv / fv, du / fu, |l, r| {
        state_fixture(state, CLAIM_DELTA, l, r, &[("column", json!(j)), ("U", json!(u)), ("V", json!(v))])
    }))
}

fn cip_fixture(
    instance: &CipInstance,
    scheme: &RoundingScheme,
    p: &[f64],
    claim: &str,
    lhs: f64,
    rhs: f64,
    more: &[(&str, Value)],
) -> Fixture {
    let mut extra = Map::new();
    extra.insert("scheme".into(), serde_json::to_value(scheme).expect("scheme serialises"));
    extra.insert("alpha".into(), json!(scheme.alpha));
    for (k, v) in more {
        extra.insert((*k).into(), v.clone());
    }
    Fixture {
        instance: Instance::Cip(instance.clone()),
        p: p.to_vec(),
        claim: claim.into(),
        lhs,
        rhs,
        extra,
    }
}

/// Pr(∧_{B1} ¬E | ∧_{B2} ¬E ∧ X_k = 1 for k ∈ B3) ≥ ∏_{B1} Pr(¬E_i),
/// for disjoint row sets B1, B2 and a column set B3.
pub fn verify_fkg(
    instance: &CipInstance,
    scheme: &RoundingScheme,
    p: &[f64],
    b1: &[usize],
    b2: &[usize],
    b3: &[usize],
    budget: &EnumerationBudget,
) -> Result<Verification> {
    if b1.iter().any(|r| b2.contains(r)) {
        return Err(domain("B1 and B2 must be disjoint"));
    }
    let m = instance.rows();
    // [0..m): fail indicators; m: cond; m+1: cond ∧ B1 ok.
    let sums = enumerate_bits(p, budget, m + 2, |bits, out| {
        let z = z_from_bits(scheme, bits);
        let fails: Vec<bool> = (0..m).map(|r| row_fails(instance, &z, r)).collect();
        for r in 0..m {
            if fails[r] {
                out[r] = 1.0;
            }
        }
        let cond = b2.iter().all(|&r| !fails[r]) && b3.iter().all(|&k| bits[k]);
        if cond {
            out[m] = 1.0;
            if b1.iter().all(|&r| !fails[r]) {
                out[m + 1] = 1.0;
            }
        }
    })?;
    let rhs: f64 = b1.iter().map(|&r| 1.0 - sums[r]).product();
    if sums[m] <= 0.0 {
        return Ok(Verification::unmet(CLAIM_FKG, 0.0, rhs, VerifyStatus::Vacuous));
    }
    let lhs = sums[m + 1] / sums[m];
    Ok(Verification::compare(CLAIM_FKG, lhs, rhs, |l, r| {
        cip_fixture(instance, scheme, p, CLAIM_FKG, l, r, &[("B1", json!(b1)), ("B2", json!(b2)), ("B3", json!(b3))])
    }))
}

/// Pr(X_j = 1 ∀ j ∈ cols | Az ≥ b) ≤ ∏_{cols} p_j / ∏_{R(cols)} (1 − Pr(E_i)).
/// Reported as lhs = the bound, rhs = the conditional probability.
pub fn verify_anti_fkg(
    instance: &CipInstance,
    scheme: &RoundingScheme,
    p: &[f64],
    cols: &[usize],
    budget: &EnumerationBudget,
) -> Result<Verification> {
    let cover = row_cover(instance, cols)?;
    let m = instance.rows();
    let sums = enumerate_bits(p, budget, m + 2, |bits, out| {
        let z = z_from_bits(scheme, bits);
        let mut ok = true;
        for r in 0..m {
            if row_fails(instance, &z, r) {
                out[r] = 1.0;
                ok = false;
            }
        }
        if ok {
            out[m] = 1.0;
            if cols.iter().all(|&j| bits[j]) {
                out[m + 1] = 1.0;
            }
        }
    })?;
    let numer: f64 = cols.iter().map(|&j| p[j]).product();
    let denom: f64 = cover.iter().map(|&r| 1.0 - sums[r]).product();
    if sums[m] <= 0.0 {
        return Ok(Verification::unmet(CLAIM_ANTI_FKG, numer, 0.0, VerifyStatus::Vacuous));
    }
    let cond = sums[m + 1] / sums[m];
    let bound = if denom > 0.0 { numer / denom } else { f64::INFINITY };
    Ok(Verification::compare(CLAIM_ANTI_FKG, bound, cond, |l, r| {
        cip_fixture(instance, scheme, p, CLAIM_ANTI_FKG, l, r, &[("cols", json!(cols))])
    }))
}

/// Extended-LLL check for the MIP decomposition: events
/// E_i = ((Az)_i ≥ b_i + k) with b_i = (Ax*)_i, d = k(t − 1) and
/// p_i = S_k(E[Z_{i,r}] over groups r) / C(b_i + k, k). When every
/// e·p_i·(d+1) ≤ 1, asserts Pr(∧¬E_i) ≥ (d/(d+1))^m.
pub fn verify_extended_lll(
    instance: &MipInstance,
    x_star: &FractionalSolution,
    k: usize,
    budget: &EnumerationBudget,
) -> Result<Verification> {
    if k == 0 {
        return Err(domain("k must be at least 1"));
    }
    let x = &x_star.x;
    let m = instance.rows();
    let loads = instance.matrix().mul_vec(x);
    let t = crate::mip::effective_t(instance, x);
    let d = (k * (t - 1)) as f64;
    let mut worst = 0.0f64;
    for r in 0..m {
        // E[Z_{r,g}] for every group g.
        let mut means = vec![0.0; instance.groups()];
        for &(c, a) in instance.matrix().row(r) {
            means[instance.group_of(c).0] += a * x[c];
        }
        let pi = if k > means.len() {
            0.0
        } else {
            sym_poly(&means, k)? / binom_real(loads[r] + k as f64, k)
        };
        worst = worst.max(std::f64::consts::E * pi * (d + 1.0));
    }
    let rhs = if m == 0 { 1.0 } else { (d / (d + 1.0)).powi(m as i32) };
    let thresholds: Vec<f64> = loads.iter().map(|b| b + k as f64).collect();
    let sums = enumerate_groups(instance, x, budget, 1, |slots, out| {
        let mut z = vec![0.0; instance.cols()];
        for (g, &s) in slots.iter().enumerate() {
            z[instance.column(g, s)] = 1.0;
        }
        let ok = (0..m).all(|r| instance.matrix().row_dot(r, &z) < thresholds[r] - FAIL_TOL);
        if ok {
            out[0] = 1.0;
        }
    })?;
    if worst > 1.0 {
        return Ok(Verification::unmet(CLAIM_LLL, sums[0], rhs, VerifyStatus::HypothesisUnmet));
    }
    Ok(Verification::compare(CLAIM_LLL, sums[0], rhs, |l, r| {
        let mut extra = Map::new();
        extra.insert("x_star".into(), json!(x));
        extra.insert("k".into(), json!(k));
        Fixture {
            instance: Instance::Mip(instance.clone()),
            p: x.clone(),
            claim: CLAIM_LLL.into(),
            lhs: l,
            rhs: r,
            extra,
        }
    }))
}

/// For X = Σ v_j B_j with B_j ~ Bernoulli(q_j), v_j ∈ [0,1], μ = E[X] and
/// k = ⌈μδ⌉: Pr(X ≥ μ(1+δ)) ≤ E[S_k]/C(μ(1+δ), k) ≤ G(μ, δ).
/// Returns the two links as separate verifications.
pub fn verify_tail_domination(
    values: &[f64],
    probs: &[f64],
    delta: f64,
    budget: &EnumerationBudget,
) -> Result<(Verification, Verification)> {
    if values.len() != probs.len() {
        return Err(Error::Dimension {
            expected: values.len(),
            actual: probs.len(),
        });
    }
    if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(domain("values must lie in [0,1]"));
    }
    let mu: f64 = values.iter().zip(probs).map(|(v, q)| v * q).sum();
    let q = mu * (1.0 + delta);
    let k = (mu * delta).ceil() as usize;
    let tail = enumerate_bits(probs, budget, 1, |bits, out| {
        let x: f64 = values.iter().zip(bits).filter(|(_, &b)| b).map(|(v, _)| v).sum();
        if x >= q - 1e-12 {
            out[0] = 1.0;
        }
    })?[0];
    let means: Vec<f64> = values.iter().zip(probs).map(|(v, q)| v * q).collect();
    let esym = if k == 0 {
        1.0
    } else if k > means.len() {
        0.0
    } else {
        sym_poly(&means, k)? / binom_real(q, k)
    };
    let g = chernoff_g(mu, delta)?;
    let fixture = |claim: &str, l: f64, r: f64| {
        let m = crate::model::SparseMatrix::from_triplets(0, values.len(), &[]).expect("empty matrix");
        let instance = CipInstance::unit_cost(m, vec![]).expect("empty instance");
        let mut extra = Map::new();
        extra.insert("values".into(), json!(values));
        extra.insert("delta".into(), json!(delta));
        Fixture {
            instance: Instance::Cip(instance),
            p: probs.to_vec(),
            claim: claim.into(),
            lhs: l,
            rhs: r,
            extra,
        }
    };
    Ok((
        Verification::compare(CLAIM_TAIL, esym, tail, |l, r| fixture(CLAIM_TAIL, l, r)),
        Verification::compare(CLAIM_TAIL, g, esym, |l, r| fixture(CLAIM_TAIL, l, r)),
    ))
}

fn state_from_fixture(f: &Fixture) -> Result<EstimatorState> {
    let Instance::Cip(inst) = &f.instance else {
        return Err(domain("claim needs a CIP instance"));
    };
    let scheme: RoundingScheme = f.extra("scheme")?;
    let lambdas: Vec<f64> = f.extra("lambda")?;
    let ks: Vec<usize> = f.extra("ks")?;
    let kmax: usize = f.extra("kmax")?;
    let state = EstimatorState::new(inst, &scheme, f.p.clone(), lambdas, ks, kmax)?;
    let faulty = f.extra.get("fault_injection").and_then(Value::as_bool).unwrap_or(false);
    Ok(if faulty { state.with_fault_injection() } else { state })
}

/// Re-checks the claim stored in a fixture.
pub fn replay_fixture(f: &Fixture, budget: &EnumerationBudget) -> Result<Verification> {
    match f.claim.as_str() {
        CLAIM_PHI => verify_phi_domination(&state_from_fixture(f)?, budget),
        CLAIM_BRANCH => verify_branch_inequality(&state_from_fixture(f)?, f.extra("column")?),
        CLAIM_DELTA => {
            let u: Vec<usize> = f.extra("U")?;
            let v: Vec<usize> = f.extra("V")?;
            verify_delta_monotonicity(&state_from_fixture(f)?, f.extra("column")?, &u, &v)
        }
        CLAIM_FKG | CLAIM_ANTI_FKG => {
            let Instance::Cip(inst) = &f.instance else {
                return Err(domain("claim needs a CIP instance"));
            };
            let scheme: RoundingScheme = f.extra("scheme")?;
            if f.claim == CLAIM_FKG {
                let (b1, b2, b3): (Vec<usize>, Vec<usize>, Vec<usize>) = (f.extra("B1")?, f.extra("B2")?, f.extra("B3")?);
                verify_fkg(inst, &scheme, &f.p, &b1, &b2, &b3, budget)
            } else {
                let cols: Vec<usize> = f.extra("cols")?;
                verify_anti_fkg(inst, &scheme, &f.p, &cols, budget)
            }
        }
        CLAIM_LLL => {
            let Instance::Mip(inst) = &f.instance else {
                return Err(domain("claim needs a MIP instance"));
            };
            let x: Vec<f64> = f.extra("x_star")?;
            let sol = crate::lp::ingest_mip(inst, &x)?;
            verify_extended_lll(inst, &sol, f.extra("k")?, budget)
        }
        CLAIM_TAIL => {
            let values: Vec<f64> = f.extra("values")?;
            let (a, b) = verify_tail_domination(&values, &f.p, f.extra("delta")?, budget)?;
            Ok(if a.holds() { b } else { a })
        }
        other => Err(domain(format!("unknown claim `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cip::{choose_alpha_beta, make_scheme, sample_bits};
    use crate::lp::{cip_lp, ingest_cip, ingest_mip, solve_cip_lp, solve_mip_lp};
    use crate::model::{gen_hypergraph_partition, gen_set_cover, SparseMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> EnumerationBudget {
        EnumerationBudget::default()
    }

    fn one_row() -> CipInstance {
        let m = SparseMatrix::from_dense(&[vec![1.0, 1.0]]).unwrap();
        CipInstance::unit_cost(m, vec![1.0]).unwrap()
    }

    fn hand_scheme(inst: &CipInstance, alpha: f64, x: &[f64]) -> RoundingScheme {
        make_scheme(inst, &ingest_cip(inst, x).unwrap(), alpha).unwrap()
    }

    #[test]
    fn single_row_failure_probability() {
        let inst = one_row();
        let s = hand_scheme(&inst, 1.5, &[0.5, 0.5]);
        let probs = exact_event_probs(&inst, &s, &[0.5, 0.5], &[], &tiny()).unwrap();
        assert!((probs.row_fail[0] - 0.25).abs() < 1e-15);
        let zero = exact_event_probs(&inst, &s, &[0.0, 0.0], &[], &tiny()).unwrap();
        assert_eq!(zero.row_fail[0], 1.0);
    }

    #[test]
    fn matches_monte_carlo() {
        let inst = gen_set_cover(8, 8, 4, 2, 2).unwrap();
        let x = solve_cip_lp(&inst, 0).unwrap().x;
        let s = make_scheme(&inst, &x, 1.4).unwrap();
        let exact = exact_event_probs(&inst, &s, &s.frac, &[], &tiny()).unwrap();
        let trials = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ok = 0usize;
        for _ in 0..trials {
            let bits = sample_bits(&s.frac, &mut rng);
            let z = z_from_bits(&s, &bits);
            if (0..inst.rows()).all(|r| !row_fails(&inst, &z, r)) {
                ok += 1;
            }
        }
        let p = exact.all_rows_ok;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt().max(1e-12);
        assert!((ok as f64 / trials as f64 - p).abs() <= 4.0 * sigma);
    }

    #[test]
    fn budget_limits() {
        let inst = gen_set_cover(30, 30, 6, 1, 0).unwrap();
        let s = make_scheme(&inst, &solve_cip_lp(&inst, 0).unwrap().x, 1.3).unwrap();
        let p = vec![0.5; inst.cols()];
        let small = EnumerationBudget::new(10, 4).unwrap();
        assert!(matches!(exact_event_probs(&inst, &s, &p, &[], &small), Err(Error::Budget(_))));
        assert!(EnumerationBudget::new(27, 4).is_err());
    }

    #[test]
    fn ilp_examples() {
        let t: Vec<_> = (0..4).map(|i| (i, i, 1.0)).collect();
        let id = CipInstance::new(
            SparseMatrix::from_triplets(4, 4, &t).unwrap(),
            vec![1.0; 4],
            vec![vec![0.5, 1.0, 0.25, 1.0]],
        )
        .unwrap();
        let opt = exact_ilp(&id, 0, &tiny()).unwrap();
        assert_eq!(opt.z, vec![1; 4]);
        assert!((opt.opt - 2.75).abs() < 1e-12);

        let mut t: Vec<_> = (0..4).map(|e| (e, e, 1.0)).collect();
        t.extend((0..4).map(|e| (e, 4, 1.0)));
        let cover = CipInstance::unit_cost(SparseMatrix::from_triplets(4, 5, &t).unwrap(), vec![1.0; 4]).unwrap();
        let opt = exact_ilp(&cover, 0, &tiny()).unwrap();
        assert_eq!(opt.opt, 1.0);
        assert_eq!(opt.z, vec![0, 0, 0, 0, 1]);
    }

    #[test]
    fn ilp_at_least_lp() {
        for seed in 0..10 {
            let inst = gen_set_cover(8, 9, 4, 2, seed).unwrap();
            let y = solve_cip_lp(&inst, 0).unwrap().objective;
            let opt = exact_ilp(&inst, 0, &tiny()).unwrap();
            assert!(opt.opt >= y - 1e-9);
            let zf: Vec<f64> = opt.z.iter().map(|&v| v as f64).collect();
            assert!(inst.is_feasible(&zf, 1e-9));
        }
    }

    #[test]
    fn vertex_oracle_agrees_with_simplex() {
        for seed in 0..10 {
            let inst = gen_set_cover(5, 6, 3, 1, seed).unwrap();
            let lp = cip_lp(&inst, 0);
            let oracle = lp_vertex_optimum(&lp).unwrap();
            assert!((lp.solve().objective - oracle).abs() < 1e-6);
        }
        let mip = gen_hypergraph_partition(3, 2, 2, 2, 1).unwrap();
        let lp = crate::lp::mip_lp(&mip);
        let oracle = lp_vertex_optimum(&lp).unwrap();
        assert!((solve_mip_lp(&mip).unwrap().objective - oracle).abs() < 1e-6);
    }

    fn standard_state(seed: u64) -> EstimatorState {
        let inst = gen_set_cover(8, 9, 4, 1, seed).unwrap();
        let x = solve_cip_lp(&inst, 0).unwrap().x;
        let (alpha, beta) = choose_alpha_beta(4, 1.0);
        let s = make_scheme(&inst, &x, alpha).unwrap();
        let lambda = alpha * beta * inst.objective(0, &x.x);
        EstimatorState::standard(&inst, &s, vec![lambda], vec![1], 6).unwrap()
    }

    #[test]
    fn phi_domination_and_branch() {
        for seed in 0..8 {
            let st = standard_state(seed);
            let v = verify_phi_domination(&st, &tiny()).unwrap();
            assert!(v.holds(), "{v:?}");
            for j in 0..st.p().len() {
                assert!(verify_branch_inequality(&st, j).unwrap().holds());
            }
        }
    }

    #[test]
    fn integral_feasible_p_has_probability_one() {
        let inst = one_row();
        let s = hand_scheme(&inst, 1.5, &[0.5, 0.5]);
        let st = EstimatorState::new(&inst, &s, vec![1.0, 1.0], vec![3.0], vec![1], 6).unwrap();
        let v = verify_phi_domination(&st, &tiny()).unwrap();
        assert_eq!(v.lhs, 1.0);
        assert!(v.holds());
    }

    #[test]
    fn corrupted_phi_yields_replayable_fixture() {
        let st = standard_state(3).with_fault_injection();
        let v = verify_phi_domination(&st, &tiny()).unwrap();
        assert_eq!(v.status, VerifyStatus::Fails);
        let text = v.fixture.unwrap().to_json();
        let back = Fixture::parse(&text).unwrap();
        assert_eq!(back.claim, CLAIM_PHI);
        let again = replay_fixture(&back, &tiny()).unwrap();
        assert_eq!(again.status, VerifyStatus::Fails);
        assert_eq!(again.lhs, v.lhs);
    }

    #[test]
    fn fkg_examples() {
        let st = standard_state(1);
        let (inst, s) = (st.instance(), st.scheme());
        let vac = verify_fkg(inst, s, st.p(), &[], &[0], &[], &tiny()).unwrap();
        assert!(vac.holds());
        assert_eq!(vac.rhs, 1.0);
        let v = verify_fkg(inst, s, st.p(), &[0, 1], &[2, 3], &[0], &tiny()).unwrap();
        assert!(v.holds(), "{v:?}");
        let a = verify_anti_fkg(inst, s, st.p(), &[], &tiny()).unwrap();
        assert_eq!(a.lhs, 1.0);
        assert!(a.holds());
        let a = verify_anti_fkg(inst, s, st.p(), &[0, 2], &tiny()).unwrap();
        assert!(a.holds(), "{a:?}");
    }

    #[test]
    fn delta_monotonicity_examples() {
        let st = standard_state(2);
        let j = (0..st.p().len()).find(|&j| st.p()[j] > 0.0 && st.p()[j] < 1.0).unwrap();
        let all: Vec<usize> = (0..st.instance().rows()).collect();
        assert!(verify_delta_monotonicity(&st, j, &[], &all).unwrap().holds());
        assert!(verify_delta_monotonicity(&st, j, &all[..2], &all).unwrap().holds());
    }

    #[test]
    fn extended_lll_statuses() {
        // Each group touches two rows: t = 2 and d = 1.
        let t: Vec<_> = (0..4).map(|c| (c, c, 1.0)).collect();
        let m = SparseMatrix::from_triplets(4, 4, &t).unwrap();
        let inst = MipInstance::new(m, vec![2, 2]).unwrap();
        let x = ingest_mip(&inst, &[0.5; 4]).unwrap();
        let v = verify_extended_lll(&inst, &x, 1, &tiny()).unwrap();
        assert!(v.holds());
        assert!((v.rhs - 0.0625).abs() < 1e-15);
        assert!(v.lhs >= v.rhs);
        // One heavy row with many groups and small k misses the hypothesis.
        let m = SparseMatrix::from_dense(&[vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]]).unwrap();
        let inst = MipInstance::new(m, vec![2; 4]).unwrap();
        let x = ingest_mip(&inst, &[0.5; 8]).unwrap();
        let v = verify_extended_lll(&inst, &x, 1, &tiny()).unwrap();
        assert_eq!(v.status, VerifyStatus::HypothesisUnmet);
    }

    #[test]
    fn tail_links_hold() {
        let (a, b) = verify_tail_domination(&[1.0; 10], &[0.3; 10], 0.8, &tiny()).unwrap();
        assert!(a.holds() && b.holds(), "{a:?} {b:?}");
    }
}
