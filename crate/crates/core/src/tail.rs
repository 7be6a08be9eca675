//! Chernoff–Hoeffding tail quantities and symmetric-polynomial estimators.
//!
//! Everything here is a pure function. Products of probabilities are formed
//! in log-space and exponentiated only at the boundary, since long products
//! underflow long before the quantities they feed become negligible.

use crate::error::{domain, Error, Result};
use crate::numeric::ln_binom_int;

/// First grid point of the deviation search in [`solve_h`].
pub const H_GRID_START: f64 = 1e-6;
/// Ratio between consecutive grid points of [`solve_h`].
pub const H_GRID_RATIO: f64 = 1.001;
const H_GRID_MAX_INDEX: u32 = 1 << 17;

/// Parameters of a tail query: a mean, a relative deviation, a failure
/// budget, a minimum demand and a scale-up factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailQuery {
    pub mu: f64,
    pub delta: f64,
    pub p: f64,
    pub min_demand: f64,
    pub alpha: f64,
}

impl TailQuery {
    pub fn new(mu: f64, delta: f64, p: f64, min_demand: f64, alpha: f64) -> Result<Self> {
        if !(mu >= 0.0) {
            return Err(domain(format!("mu must be >= 0, got {mu}")));
        }
        if !(delta >= 0.0) {
            return Err(domain(format!("delta must be >= 0, got {delta}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(domain(format!("p must lie in (0,1), got {p}")));
        }
        if !(min_demand >= 1.0) {
            return Err(domain(format!("B must be >= 1, got {min_demand}")));
        }
        if !(alpha > 1.0) {
            return Err(domain(format!("alpha must be > 1, got {alpha}")));
        }
        Ok(Self {
            mu,
            delta,
            p,
            min_demand,
            alpha,
        })
    }

    pub fn chernoff_g(&self) -> f64 {
        chernoff_g_unchecked(self.mu, self.delta)
    }

    pub fn solve_h(&self) -> Result<f64> {
        solve_h(self.mu, self.p)
    }

    pub fn g_of(&self) -> f64 {
        g_of_unchecked(self.min_demand, self.alpha)
    }
}

/// log G(μ, δ) = μ·(δ − (1+δ)·ln(1+δ)).
pub fn ln_chernoff_g(mu: f64, delta: f64) -> Result<f64> {
    if !(mu >= 0.0) || !(delta >= 0.0) {
        return Err(domain(format!(
            "chernoff_g needs mu >= 0 and delta >= 0, got ({mu}, {delta})"
        )));
    }
    Ok(ln_chernoff_g_unchecked(mu, delta))
}

fn ln_chernoff_g_unchecked(mu: f64, delta: f64) -> f64 {
    if mu == 0.0 || delta == 0.0 {
        return 0.0;
    }
    mu * (delta - (1.0 + delta) * delta.ln_1p())
}

/// Upper-tail bound G(μ, δ) = (e^δ / (1+δ)^(1+δ))^μ, clamped to [0, 1].
pub fn chernoff_g(mu: f64, delta: f64) -> Result<f64> {
    ln_chernoff_g(mu, delta).map(|l| l.exp().clamp(0.0, 1.0))
}

fn chernoff_g_unchecked(mu: f64, delta: f64) -> f64 {
    ln_chernoff_g_unchecked(mu, delta).exp().clamp(0.0, 1.0)
}

/// The defining inequality of H: ⌈μδ⌉·G(μ, δ) ≤ p.
pub fn h_inequality_holds(mu: f64, delta: f64, p: f64) -> bool {
    (mu * delta).ceil() * chernoff_g_unchecked(mu, delta) <= p
}

fn h_grid_point(index: u32) -> f64 {
    H_GRID_START * H_GRID_RATIO.powi(index as i32)
}

/// Smallest deviation δ on the grid `1e-6 · 1.001^k` with ⌈μδ⌉·G(μ, δ) ≤ p.
///
/// The predicate is not monotone in δ (the ceiling jumps), so exponential
/// bracketing only supplies an upper index; the grid below it is then
/// scanned in order.
pub fn solve_h(mu: f64, p: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(domain(format!("solve_h needs mu > 0, got {mu}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("solve_h needs p in (0,1), got {p}")));
    }
    let mut hi = 0u32;
    while !h_inequality_holds(mu, h_grid_point(hi), p) {
        hi = if hi == 0 { 1 } else { hi * 2 };
        if hi > H_GRID_MAX_INDEX {
            return Err(domain(format!(
                "no deviation on the search grid satisfies the H inequality for mu={mu}, p={p}"
            )));
        }
    }
    let index = (0..=hi)
        .find(|&k| h_inequality_holds(mu, h_grid_point(k), p))
        .unwrap_or(hi);
    let delta = h_grid_point(index);
    if !h_inequality_holds(mu, delta, p) {
        return Err(Error::Internal("solve_h result failed re-verification".into()));
    }
    Ok(delta)
}

/// g(B, α) = (α·e^{−(α−1)})^B.
pub fn g_of(min_demand: f64, alpha: f64) -> Result<f64> {
    if !(min_demand >= 1.0) {
        return Err(domain(format!("g needs B >= 1, got {min_demand}")));
    }
    if !(alpha >= 1.0) {
        return Err(domain(format!("g needs alpha >= 1, got {alpha}")));
    }
    Ok(g_of_unchecked(min_demand, alpha))
}

fn g_of_unchecked(min_demand: f64, alpha: f64) -> f64 {
    (min_demand * (alpha.ln() - (alpha - 1.0))).exp().clamp(0.0, 1.0)
}

/// Falling-factorial binomial x(x−1)…(x−r+1)/r!.
///
/// For x < r − 1 the result may be negative; it is returned signed.
pub fn binom_real(x: f64, r: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..r {
        acc *= (x - i as f64) / (i + 1) as f64;
    }
    acc
}

/// Elementary symmetric polynomial S_k of `values`, by the prefix recurrence
/// e_j ← e_j + v·e_{j−1}.
pub fn sym_poly(values: &[f64], k: usize) -> Result<f64> {
    if k > values.len() {
        return Err(domain(format!(
            "sym_poly order {k} exceeds {} values",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(domain(format!("sym_poly needs nonnegative values, got {v}")));
    }
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (idx, &v) in values.iter().enumerate() {
        for j in (1..=k.min(idx + 1)).rev() {
            e[j] += v * e[j - 1];
        }
    }
    Ok(e[k])
}

/// C(n, k)·(μ/n)^k, the bound on E[S_k] for independent [0,1] variables
/// with total mean μ.
pub fn esym_mean_bound(n: usize, mu: f64, k: usize) -> Result<f64> {
    if n == 0 || k == 0 {
        return Err(domain("esym_mean_bound needs n >= 1 and k >= 1"));
    }
    if k > n {
        return Err(domain(format!("esym_mean_bound needs k <= n, got k={k}, n={n}")));
    }
    if !(mu >= 0.0) || mu > n as f64 {
        return Err(domain(format!("esym_mean_bound needs 0 <= mu <= n, got {mu}")));
    }
    Ok(esym_mean_bound_unchecked(n, mu, k))
}

/// Same closed form without the `mu <= n` restriction; it stays a valid
/// upper bound for any mean dominating the true one.
pub(crate) fn esym_mean_bound_unchecked(n: usize, mu: f64, k: usize) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    (ln_binom_int(n, k) + k as f64 * (mu / n as f64).ln()).exp()
}
