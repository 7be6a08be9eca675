//! Randomized rounding for covering integer programs and its
//! derandomization through the pessimistic estimator Φ.
//!
//! Rounding starts from an LP-feasible x*, scales by α, keeps the integer
//! floors s and rounds the fractional parts with independent bits
//! X_j ~ Bernoulli(p_j). The per-row quantities μ_i, δ_i are fixed at the
//! standard choice p = frac and never recomputed afterwards.
//!
//! Φ subtracts, for each objective, the k-subset terms of a symmetric
//! polynomial tail bound. The bits only pay the residual budget
//! λ_i − c_i·s, so Φ uses that residual (with k clipped to it) rather than
//! λ_i itself; the floors are deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{sparsity_stats_cip, CipInstance, FractionalSolution};
use crate::numeric::{pairwise_sum, CompensatedSum};
use crate::tail::{binom_real, esym_mean_bound_unchecked, g_of};

/// Default cap on max_i k_i for Φ enumeration.
pub const DEFAULT_KMAX: usize = 6;
/// Rows with b_i − A_i·s at or below this are satisfied by s alone.
pub const SATISFIED_TOL: f64 = 1e-12;
/// Tolerance of the final feasibility and budget checks.
pub const FINAL_TOL: f64 = 1e-9;
/// 1 − ch′ below this is treated as numerically zero in Φ denominators.
pub const TINY_COMPLEMENT: f64 = 1e-12;
/// Subset counts above this are evaluated on the rayon pool.
const PARALLEL_LEAVES: f64 = 4096.0;

const K_GRID_MIN: f64 = 1.0;
const K_GRID_MAX: f64 = 64.0;
const K_GRID_RATIO: f64 = 1.001;

/// Scaled-up solution split into integral floors and fractional parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingScheme {
    pub alpha: f64,
    pub s: Vec<u64>,
    pub frac: Vec<f64>,
    pub mu: Vec<f64>,
    /// 0 on satisfied rows.
    pub delta: Vec<f64>,
    /// b_i − A_i·s.
    pub residual: Vec<f64>,
    pub satisfied: Vec<bool>,
}

impl RoundingScheme {
    pub fn satisfied_rows(&self) -> Vec<usize> {
        (0..self.satisfied.len()).filter(|&r| self.satisfied[r]).collect()
    }

    /// z = s + X for a 0/1 (or {0,1}-valued p) vector.
    pub fn assemble(&self, bits: &[bool]) -> Vec<u64> {
        self.s.iter().zip(bits).map(|(s, &b)| s + u64::from(b)).collect()
    }

    pub fn floors_as_f64(&self) -> Vec<f64> {
        self.s.iter().map(|&v| v as f64).collect()
    }
}

pub fn make_scheme(instance: &CipInstance, x_star: &FractionalSolution, alpha: f64) -> Result<RoundingScheme> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(domain(format!("alpha = {alpha} must exceed 1")));
    }
    if x_star.x.len() != instance.cols() {
        return Err(Error::Dimension {
            expected: instance.cols(),
            actual: x_star.x.len(),
        });
    }
    let (row, violation) = instance.worst_violation(&x_star.x);
    if violation > FINAL_TOL {
        return Err(Error::Infeasible { row, violation });
    }
    let mut s = Vec::with_capacity(instance.cols());
    let mut frac = Vec::with_capacity(instance.cols());
    for &x in &x_star.x {
        let scaled = alpha * x.max(0.0);
        let f = scaled.floor();
        s.push(f as u64);
        frac.push(scaled - f);
    }
    let m = instance.matrix();
    let sf: Vec<f64> = s.iter().map(|&v| v as f64).collect();
    let mut mu = Vec::with_capacity(instance.rows());
    let mut delta = Vec::with_capacity(instance.rows());
    let mut residual = Vec::with_capacity(instance.rows());
    let mut satisfied = Vec::with_capacity(instance.rows());
    for r in 0..instance.rows() {
        let mu_r = m.row_dot(r, &frac);
        let res = instance.demands()[r] - m.row_dot(r, &sf);
        mu.push(mu_r);
        residual.push(res);
        if res <= SATISFIED_TOL {
            satisfied.push(true);
            delta.push(0.0);
        } else {
            if mu_r <= res {
                return Err(Error::Infeasible {
                    row: r,
                    violation: res - mu_r,
                });
            }
            satisfied.push(false);
            delta.push(1.0 - res / mu_r);
        }
    }
    Ok(RoundingScheme {
        alpha,
        s,
        frac,
        mu,
        delta,
        residual,
        satisfied,
    })
}

/// Returns `(alpha, beta)` minimising α·β subject to β(1 − g(B,α))^a > 1
/// across the two families α = K ln(a+1)/B, β = 2 and
/// α = β = 1 + K√(ln(a+1)/B), for K on a geometric grid.
pub fn choose_alpha_beta(a: usize, min_demand: f64) -> (f64, f64) {
    let a = a.max(1);
    let b = min_demand.max(1.0);
    let l = ((a + 1) as f64).ln();
    let valid = |alpha: f64, beta: f64| {
        alpha > 1.0
            && beta > 1.0
            && g_of(b, alpha).is_ok_and(|g| beta * (1.0 - g).powi(a as i32) > 1.0)
    };
    let mut hi = K_GRID_MAX;
    let mut lo = K_GRID_MIN;
    loop {
        let mut best: Option<(f64, f64)> = None;
        let mut k = lo;
        while k <= hi * (1.0 + 1e-12) {
            for (alpha, beta) in [(k * l / b, 2.0), (1.0 + k * (l / b).sqrt(), 1.0 + k * (l / b).sqrt())] {
                if valid(alpha, beta) && best.is_none_or(|(ba, bb)| alpha * beta < ba * bb) {
                    best = Some((alpha, beta));
                }
            }
            k *= K_GRID_RATIO;
        }
        if let Some(pair) = best {
            return pair;
        }
        lo = hi;
        hi *= 2.0;
    }
}

/// z with feasibility and objectives evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundedSolution {
    pub z: Vec<u64>,
    pub feasible: bool,
    pub objective_values: Vec<f64>,
    /// Final Φ (derandomizer only).
    pub certificate: Option<f64>,
    pub phi_trace: Vec<f64>,
    pub phi_evaluations: usize,
}

impl RoundedSolution {
    pub fn evaluate(instance: &CipInstance, z: Vec<u64>) -> Self {
        let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
        Self {
            feasible: instance.worst_violation(&zf).1 <= FINAL_TOL,
            objective_values: instance.objectives(&zf),
            z,
            certificate: None,
            phi_trace: Vec::new(),
            phi_evaluations: 0,
        }
    }

    pub fn z_f64(&self) -> Vec<f64> {
        self.z.iter().map(|&v| v as f64).collect()
    }
}

/// Draws X_j ~ Bernoulli(p_j) independently, one uniform per column.
pub fn sample_bits<R: Rng>(p: &[f64], rng: &mut R) -> Vec<bool> {
    p.iter().map(|&pj| rng.gen::<f64>() < pj).collect()
}

/// Standard randomized rounding with p = frac.
pub fn standard_round(instance: &CipInstance, scheme: &RoundingScheme, rng_seed: u64) -> RoundedSolution {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let bits = sample_bits(&scheme.frac, &mut rng);
    RoundedSolution::evaluate(instance, scheme.assemble(&bits))
}

/// ln(1 − p(1 − e^{x})) for x = A·ln(1 − δ) ≤ 0.
fn ln_factor(p: f64, x: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else if p == 1.0 {
        x
    } else {
        (p * x.exp_m1()).ln_1p()
    }
}

/// One branch step of the derandomizer.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchStep {
    pub column: usize,
    pub p_before: f64,
    pub phi_before: f64,
    pub phi_zero: f64,
    pub phi_one: f64,
    pub chosen: f64,
    /// ch′ at p, at p with p_j = 0, and at p with p_j = 1.
    pub q: Vec<f64>,
    pub q_zero: Vec<f64>,
    pub q_one: Vec<f64>,
}

impl BranchStep {
    /// Checks 0 ≤ q″ ≤ q′ ≤ 1, q ≥ p q″ + (1−p) q′, and q = q′ = q″ off
    /// the rows in `touched`. Returns the first failure.
    pub fn check_q_relations(&self, touched: &[usize], tol: f64) -> Option<String> {
        let p = self.p_before;
        for r in 0..self.q.len() {
            let (q, q0, q1) = (self.q[r], self.q_zero[r], self.q_one[r]);
            if !(q1 >= -tol && q1 <= q0 + tol && q0 <= 1.0 + tol) {
                return Some(format!("row {r}: order 0 <= {q1} <= {q0} <= 1 fails"));
            }
            if q < p * q1 + (1.0 - p) * q0 - tol {
                return Some(format!("row {r}: {q} below convex combination"));
            }
            if !touched.contains(&r) && (q0 != q || q1 != q) {
                return Some(format!("row {r} changed though column {} is absent", self.column));
            }
        }
        None
    }

    /// max(Φ(p′), Φ(p″)) ≥ Φ(p) − tol together with the convex-combination
    /// form p Φ(p″) + (1 − p) Φ(p′) ≥ Φ(p) − tol.
    pub fn branch_inequality_holds(&self, tol: f64) -> bool {
        let p = self.p_before;
        self.phi_zero.max(self.phi_one) >= self.phi_before - tol
            && p * self.phi_one + (1.0 - p) * self.phi_zero >= self.phi_before - tol
    }
}

/// Decomposition Φ = first − Σ_i subtracted[i].
#[derive(Debug, Clone, PartialEq)]
pub struct PhiTerms {
    pub first: f64,
    pub subtracted: Vec<f64>,
}

impl PhiTerms {
    pub fn value(&self) -> f64 {
        self.first - pairwise_sum(&self.subtracted)
    }
}

/// Everything Φ depends on: the frozen scheme, the current p, the
/// objective budgets λ_i and subset orders k_i, and cached ch′ values.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    instance: CipInstance,
    scheme: RoundingScheme,
    p: Vec<f64>,
    lambdas: Vec<f64>,
    ks: Vec<usize>,
    /// k actually used per objective, clipped to the residual budget.
    k_eff: Vec<usize>,
    lambda_eff: Vec<f64>,
    ln_one_minus_delta: Vec<f64>,
    row_log: Vec<f64>,
    chp: Vec<f64>,
    kmax: usize,
    evaluations: usize,
    corrupt: bool,
}

impl EstimatorState {
    /// The k_i must satisfy 1 ≤ k_i ≤ λ_i, k_i ≤ n and max k_i ≤ `kmax`.
    pub fn new(
        instance: &CipInstance,
        scheme: &RoundingScheme,
        p: Vec<f64>,
        lambdas: Vec<f64>,
        ks: Vec<usize>,
        kmax: usize,
    ) -> Result<Self> {
        let n = instance.cols();
        if scheme.s.len() != n || scheme.residual.len() != instance.rows() {
            return Err(Error::Dimension {
                expected: n,
                actual: scheme.s.len(),
            });
        }
        if p.len() != n {
            return Err(Error::Dimension { expected: n, actual: p.len() });
        }
        if let Some(v) = p.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(domain(format!("probability {v} outside [0,1]")));
        }
        if lambdas.len() != instance.criteria() || ks.len() != instance.criteria() {
            return Err(Error::Dimension {
                expected: instance.criteria(),
                actual: lambdas.len().min(ks.len()),
            });
        }
        for (i, (&l, &k)) in lambdas.iter().zip(&ks).enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return Err(domain(format!("lambda[{i}] = {l} must be positive")));
            }
            if k == 0 || (k as f64) > l {
                return Err(domain(format!("k[{i}] = {k} must satisfy 1 <= k <= lambda = {l}")));
            }
            if k > n {
                return Err(domain(format!("k[{i}] = {k} exceeds n = {n}")));
            }
        }
        let kprime = ks.iter().copied().max().unwrap_or(0);
        if kprime > kmax {
            return Err(Error::Precondition(format!(
                "max k = {kprime} exceeds the enumeration cap {kmax}; raise the cap explicitly"
            )));
        }
        let sf = scheme.floors_as_f64();
        let mut k_eff = Vec::with_capacity(ks.len());
        let mut lambda_eff = Vec::with_capacity(ks.len());
        for (i, (&l, &k)) in lambdas.iter().zip(&ks).enumerate() {
            let spent: f64 = instance.cost(i).iter().zip(&sf).map(|(c, s)| c * s).sum();
            let rest = l - spent;
            lambda_eff.push(rest);
            k_eff.push(if rest > 0.0 { k.min((rest.floor() as usize).max(1)) } else { 0 });
        }
        let ln_one_minus_delta = scheme
            .delta
            .iter()
            .zip(&scheme.satisfied)
            .map(|(&d, &sat)| if sat { 0.0 } else { (-d).ln_1p() })
            .collect();
        let mut state = Self {
            instance: instance.clone(),
            scheme: scheme.clone(),
            p,
            lambdas,
            ks,
            k_eff,
            lambda_eff,
            ln_one_minus_delta,
            row_log: vec![0.0; instance.rows()],
            chp: vec![0.0; instance.rows()],
            kmax,
            evaluations: 0,
            corrupt: false,
        };
        for r in 0..instance.rows() {
            state.refresh_row(r);
        }
        Ok(state)
    }

    /// State at the standard-rounding point p = frac.
    pub fn standard(
        instance: &CipInstance,
        scheme: &RoundingScheme,
        lambdas: Vec<f64>,
        ks: Vec<usize>,
        kmax: usize,
    ) -> Result<Self> {
        Self::new(instance, scheme, scheme.frac.clone(), lambdas, ks, kmax)
    }

    /// Makes Φ report max(Φ, 0) + 1.01; used to exercise failure paths.
    #[doc(hidden)]
    pub fn with_fault_injection(mut self) -> Self {
        self.corrupt = true;
        self
    }

    pub fn instance(&self) -> &CipInstance {
        &self.instance
    }

    pub fn scheme(&self) -> &RoundingScheme {
        &self.scheme
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn ks(&self) -> &[usize] {
        &self.ks
    }

    /// λ_i − c_i·s and the subset order Φ uses for objective i.
    pub fn residual_budget(&self, i: usize) -> (f64, usize) {
        (self.lambda_eff[i], self.k_eff[i])
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn is_fault_injected(&self) -> bool {
        self.corrupt
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    fn refresh_row(&mut self, r: usize) {
        if self.scheme.satisfied[r] {
            self.row_log[r] = 0.0;
            self.chp[r] = 0.0;
            return;
        }
        let ld = self.ln_one_minus_delta[r];
        let sum: f64 = self
            .instance
            .matrix()
            .row(r)
            .iter()
            .map(|&(c, a)| ln_factor(self.p[c], a * ld))
            .sum();
        self.row_log[r] = sum;
        self.chp[r] = (sum - self.scheme.residual[r] * ld).exp().min(1.0);
    }

    /// ch′_r(p).
    pub fn ch_prime(&self, row: usize) -> f64 {
        self.chp[row]
    }

    pub fn chp(&self) -> &[f64] {
        &self.chp
    }

    /// Sets p_j and refreshes the rows of column j.
    pub fn set_p(&mut self, j: usize, value: f64) {
        assert!((0.0..=1.0).contains(&value), "probability outside [0,1]");
        self.p[j] = value;
        let rows: Vec<usize> = self.instance.matrix().col(j).iter().map(|e| e.0).collect();
        for r in rows {
            self.refresh_row(r);
        }
    }

    pub fn phi(&mut self) -> f64 {
        self.evaluations += 1;
        self.phi_value()
    }

    /// Φ at the current p without counting an evaluation.
    pub fn phi_value(&self) -> f64 {
        let v = self.terms().value();
        if self.corrupt {
            v.max(0.0) + 1.01
        } else {
            v
        }
    }

    /// Φ with p_j temporarily set to `value`; the state is restored exactly.
    pub fn phi_at(&mut self, j: usize, value: f64) -> f64 {
        let old = self.p[j];
        self.set_p(j, value);
        let v = self.phi();
        self.set_p(j, old);
        v
    }

    /// The two parts of Φ at the current p (not counted as an evaluation).
    pub fn terms(&self) -> PhiTerms {
        let m = self.instance.rows();
        let one_minus: Vec<f64> = self.chp.iter().map(|q| 1.0 - q).collect();
        let big: Vec<bool> = one_minus.iter().map(|&v| v >= TINY_COMPLEMENT).collect();
        let ln_om: Vec<f64> = one_minus
            .iter()
            .zip(&big)
            .map(|(&v, &b)| if b { v.ln() } else { 0.0 })
            .collect();
        let tiny: Vec<usize> = (0..m).filter(|&r| !big[r]).collect();
        let l_big: f64 = ln_om.iter().sum();
        let first = l_big.exp() * tiny.iter().map(|&r| one_minus[r]).product::<f64>();
        let mut subtracted = Vec::with_capacity(self.ks.len());
        for i in 0..self.ks.len() {
            let k = self.k_eff[i];
            if k == 0 {
                subtracted.push(first);
                continue;
            }
            let costs = self.instance.cost(i);
            let mut cols = Vec::new();
            let mut weights = Vec::new();
            for j in 0..self.instance.cols() {
                let w = costs[j] * self.p[j];
                if w > 0.0 {
                    cols.push(j);
                    weights.push(w);
                }
            }
            if cols.len() < k {
                subtracted.push(0.0);
                continue;
            }
            let ctx = SubsetSum {
                instance: &self.instance,
                cols: &cols,
                weights: &weights,
                big: &big,
                ln_om: &ln_om,
                one_minus: &one_minus,
                tiny: &tiny,
                l_big,
                k,
            };
            let sum = ctx.total();
            subtracted.push(sum / binom_real(self.lambda_eff[i], k));
        }
        PhiTerms { first, subtracted }
    }

    /// z = s + p once p is 0/1.
    pub fn induced_z(&self) -> Option<Vec<u64>> {
        if self.p.iter().all(|&v| v == 0.0 || v == 1.0) {
            Some(self.scheme.s.iter().zip(&self.p).map(|(s, &p)| s + p as u64).collect())
        } else {
            None
        }
    }
}

/// Σ over k-subsets S of active columns of (∏_{j∈S} c_j p_j)·∏_{r∉R(S)}(1 − ch′_r).
struct SubsetSum<'a> {
    instance: &'a CipInstance,
    cols: &'a [usize],
    weights: &'a [f64],
    big: &'a [bool],
    ln_om: &'a [f64],
    one_minus: &'a [f64],
    tiny: &'a [usize],
    l_big: f64,
    k: usize,
}

impl SubsetSum<'_> {
    fn total(&self) -> f64 {
        let firsts = 0..=self.cols.len() - self.k;
        let leaves = crate::numeric::binom_int(self.cols.len(), self.k);
        // Partials are per first index in both paths, so the result does
        // not depend on whether (or how wide) the pool runs.
        let partials: Vec<f64> = if leaves > PARALLEL_LEAVES {
            firsts.into_par_iter().map(|f| self.partition(f)).collect()
        } else {
            firsts.map(|f| self.partition(f)).collect()
        };
        pairwise_sum(&partials)
    }

    fn partition(&self, first: usize) -> f64 {
        let mut cnt = vec![0u32; self.instance.rows()];
        let mut acc = CompensatedSum::new();
        self.visit(first, self.k - 1, 1.0, 0.0, &mut cnt, &mut acc);
        acc.value()
    }

    fn visit(&self, idx: usize, remaining: usize, w: f64, covered: f64, cnt: &mut [u32], acc: &mut CompensatedSum) {
        let col = self.instance.matrix().col(self.cols[idx]);
        let w = w * self.weights[idx];
        let mut covered = covered;
        for &(r, _) in col {
            cnt[r] += 1;
            if cnt[r] == 1 && self.big[r] {
                covered += self.ln_om[r];
            }
        }
        if remaining == 0 {
            let tiny: f64 = self
                .tiny
                .iter()
                .filter(|&&r| cnt[r] == 0)
                .map(|&r| self.one_minus[r])
                .product();
            acc.add(w * (self.l_big - covered).exp() * tiny);
        } else {
            for next in idx + 1..=self.cols.len() - remaining {
                self.visit(next, remaining - 1, w, covered, cnt, acc);
            }
        }
        for &(r, _) in col {
            cnt[r] -= 1;
        }
    }
}

/// Outcome of checking whether Φ is provably positive at p = frac.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardCheck {
    /// Whether the closed-form bound is positive.
    pub positive: bool,
    /// (1−g)^m (1 − Σ_i C(n,k_i)(ν_i/n)^{k_i} / C(λ_i,k_i) · (1−g)^{−a k_i}).
    pub bound: f64,
    pub exact_phi: f64,
}

/// ν_i = α·c_i·x*.
pub fn expected_costs(instance: &CipInstance, scheme: &RoundingScheme, x_star: &FractionalSolution) -> Vec<f64> {
    (0..instance.criteria())
        .map(|i| scheme.alpha * instance.objective(i, &x_star.x))
        .collect()
}

pub fn standard_bound(
    instance: &CipInstance,
    scheme: &RoundingScheme,
    nus: &[f64],
    lambdas: &[f64],
    ks: &[usize],
) -> Result<f64> {
    let g = g_of(instance.min_demand(), scheme.alpha)?;
    let a = sparsity_stats_cip(instance).a;
    let n = instance.cols();
    let mut sum = 0.0;
    for ((&nu, &l), &k) in nus.iter().zip(lambdas).zip(ks) {
        if k == 0 || k > n || !(nu >= 0.0) {
            return Err(domain(format!("bound needs 1 <= k <= n and nu >= 0, got k={k}, nu={nu}")));
        }
        // Maclaurin: S_k(y) <= C(n,k)(Σy/n)^k for any nonnegative y, so
        // ν above n is fine here.
        let num = esym_mean_bound_unchecked(n, nu, k);
        sum += num / binom_real(l, k) * (1.0 - g).powf(-((a * k) as f64));
    }
    Ok((1.0 - g).powi(instance.rows() as i32) * (1.0 - sum))
}

pub fn phi_positive_at_standard(
    instance: &CipInstance,
    scheme: &RoundingScheme,
    x_star: &FractionalSolution,
    lambdas: &[f64],
    ks: &[usize],
    kmax: usize,
) -> Result<StandardCheck> {
    let nus = expected_costs(instance, scheme, x_star);
    let bound = standard_bound(instance, scheme, &nus, lambdas, ks)?;
    let mut state = EstimatorState::standard(instance, scheme, lambdas.to_vec(), ks.to_vec(), kmax)?;
    Ok(StandardCheck {
        positive: bound > 0.0,
        bound,
        exact_phi: state.phi(),
    })
}

/// Parameters for rounding with several objectives at once.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiParams {
    pub alpha: f64,
    /// The scan constant with α = K′·max{(ln a + ln ln 2ℓ)/B, 1}.
    pub k_prime_const: f64,
    pub ks: Vec<usize>,
    pub gammas: Vec<f64>,
    pub nus: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub bound: f64,
    pub warnings: Vec<String>,
}

/// k_i = ⌈ln 2ℓ⌉, γ_i = 2, λ_i = 3ν_i, α scanned until the closed-form
/// bound at standard rounding is positive.
pub fn multicriteria_params(instance: &CipInstance, x_star: &FractionalSolution) -> Result<MultiParams> {
    let ell = instance.criteria();
    let two_ell = (2 * ell) as f64;
    let k = two_ell.ln().ceil() as usize;
    let a = sparsity_stats_cip(instance).a.max(1) as f64;
    let base = ((a.ln() + two_ell.ln().ln()) / instance.min_demand()).max(1.0);
    let floor_nu = two_ell.log2().powi(2);
    let mut kc = 1.01;
    while kc <= K_GRID_MAX {
        let alpha = kc * base;
        let scheme = make_scheme(instance, x_star, alpha)?;
        let nus = expected_costs(instance, &scheme, x_star);
        let lambdas: Vec<f64> = nus.iter().map(|nu| 3.0 * nu).collect();
        let ks = vec![k; ell];
        if lambdas.iter().all(|&l| l >= k as f64) {
            let bound = standard_bound(instance, &scheme, &nus, &lambdas, &ks)?;
            if bound > 0.0 {
                let warnings = nus
                    .iter()
                    .enumerate()
                    .filter(|(_, &nu)| nu < floor_nu)
                    .map(|(i, nu)| format!("nu[{i}] = {nu:.3} is below log2(2l)^2 = {floor_nu:.3}"))
                    .collect();
                return Ok(MultiParams {
                    alpha,
                    k_prime_const: kc,
                    ks,
                    gammas: vec![2.0; ell],
                    nus,
                    lambdas,
                    bound,
                    warnings,
                });
            }
        }
        kc *= 1.01;
    }
    Err(Error::ParameterSearch(format!(
        "no K' <= {K_GRID_MAX} makes the standard-rounding bound positive; try larger B or smaller a"
    )))
}

/// Fixes the fractional coordinates in ascending order, keeping whichever
/// branch has the larger Φ (ties go to 0). `observer` sees every step.
pub fn derandomize(
    state: &mut EstimatorState,
    mut observer: Option<&mut dyn FnMut(&BranchStep)>,
) -> Result<RoundedSolution> {
    let start = state.evaluations;
    let phi0 = state.phi();
    if !(phi0 > 0.0) {
        return Err(Error::Precondition(format!("initial estimator value {phi0:.6e} is not positive")));
    }
    let mut trace = vec![phi0];
    let mut current = phi0;
    for j in 0..state.p.len() {
        let pj = state.p[j];
        if pj == 0.0 || pj == 1.0 {
            continue;
        }
        let want_q = observer.is_some();
        let q = if want_q { state.chp.clone() } else { Vec::new() };
        let phi_zero = state.phi_at(j, 0.0);
        let q_zero = if want_q { branch_q(state, j, 0.0) } else { Vec::new() };
        let phi_one = state.phi_at(j, 1.0);
        let q_one = if want_q { branch_q(state, j, 1.0) } else { Vec::new() };
        let chosen = if phi_one > phi_zero { 1.0 } else { 0.0 };
        state.set_p(j, chosen);
        let next = phi_zero.max(phi_one);
        if let Some(obs) = observer.as_mut() {
            obs(&BranchStep {
                column: j,
                p_before: pj,
                phi_before: current,
                phi_zero,
                phi_one,
                chosen,
                q,
                q_zero,
                q_one,
            });
        }
        current = next;
        trace.push(next);
    }
    let z = state.induced_z().expect("every coordinate fixed");
    let sol = RoundedSolution::evaluate(&state.instance, z);
    let zf = sol.z_f64();
    let (row, violation) = state.instance.worst_violation(&zf);
    if violation > FINAL_TOL {
        return Err(Error::Internal(format!(
            "derandomized z misses row {row} by {violation:.3e} although the estimator stayed at {current:.3e}"
        )));
    }
    for (i, &l) in state.lambdas.iter().enumerate() {
        let cost = state.instance.objective(i, &zf);
        if cost > l + FINAL_TOL {
            return Err(Error::Internal(format!(
                "derandomized z has cost {cost} above budget {l} for objective {i}"
            )));
        }
    }
    Ok(RoundedSolution {
        certificate: Some(current),
        phi_trace: trace,
        phi_evaluations: state.evaluations - start,
        ..sol
    })
}

fn branch_q(state: &mut EstimatorState, j: usize, value: f64) -> Vec<f64> {
    let old = state.p[j];
    state.set_p(j, value);
    let q = state.chp.clone();
    state.set_p(j, old);
    q
}

/// Parameters chosen for a single-objective rounding run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleParams {
    pub alpha: f64,
    pub beta: f64,
    pub y_star: f64,
    /// λ = α·β·y*.
    pub lambda: f64,
}

/// Single objective: α, β from [`choose_alpha_beta`] unless overridden,
/// k = 1 and λ = α·β·y*; then the derandomizer.
pub fn derandomize_single(
    instance: &CipInstance,
    x_star: &FractionalSolution,
    alpha_beta: Option<(f64, f64)>,
    lambda_override: Option<f64>,
) -> Result<(RoundedSolution, SingleParams)> {
    let stats = sparsity_stats_cip(instance);
    let (alpha, beta) = alpha_beta.unwrap_or_else(|| choose_alpha_beta(stats.a, instance.min_demand()));
    let y_star = instance.objective(0, &x_star.x);
    let lambda = lambda_override.unwrap_or(alpha * beta * y_star);
    let scheme = make_scheme(instance, x_star, alpha)?;
    let mut lambdas = vec![lambda];
    let mut ks = vec![1];
    // Extra objectives are carried along with the loosest admissible budget.
    for i in 1..instance.criteria() {
        lambdas.push(alpha * beta * instance.objective(i, &x_star.x).max(1.0));
        ks.push(1);
    }
    let mut state = EstimatorState::standard(instance, &scheme, lambdas, ks, DEFAULT_KMAX)?;
    let sol = derandomize(&mut state, None)?;
    Ok((
        sol,
        SingleParams {
            alpha,
            beta,
            y_star,
            lambda,
        },
    ))
}

/// Result file: `{"z", "objectives", "lambda", "phi_trace", "feasible"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CipResultFile {
    pub z: Vec<u64>,
    pub objectives: Vec<f64>,
    pub lambda: Vec<f64>,
    pub phi_trace: Vec<f64>,
    pub feasible: bool,
}

impl CipResultFile {
    pub fn new(sol: &RoundedSolution, lambda: Vec<f64>) -> Self {
        Self {
            z: sol.z.clone(),
            objectives: sol.objective_values.clone(),
            lambda,
            phi_trace: sol.phi_trace.clone(),
            feasible: sol.feasible,
        }
    }
}
