//! Rounding for minimax integer programs: one categorical draw per group
//! inside a Las Vegas loop, and the scale-up/round/scale-down support
//! reduction that shrinks t before the final rounding.
//!
//! Every trial draws from its own ChaCha8 stream `(seed, stream)`, so trial
//! outcomes do not depend on how trials are spread over threads. Winners
//! are picked by (value, trial index).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{group_incidence, sparsity_stats_mip, FractionalSolution, MipInstance};
use crate::tail::solve_h;

/// Group sums further than this from 1 are rejected.
pub const GROUP_SUM_TOL: f64 = 1e-6;
const VALUE_TOL: f64 = 1e-9;
const BATCH: usize = 256;

/// Additive target of the single-shot rounding bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MipTarget {
    pub y_star: f64,
    pub t: usize,
    /// ⌈min{y*,m}·H(min{y*,m}, 1/(e t))⌉.
    pub k: u64,
    pub target: f64,
}

pub fn mip_target(y_star: f64, m: usize, t: usize) -> Result<MipTarget> {
    additive_target(y_star, m, t.max(1) as f64).map(|k| MipTarget {
        y_star,
        t: t.max(1),
        k,
        target: y_star + k as f64,
    })
}

/// ⌈μ·H(μ, 1/(e·d))⌉ with μ = min{y*, m}, at least 1.
fn additive_target(y_star: f64, m: usize, d: f64) -> Result<u64> {
    if !(y_star > 0.0) || !y_star.is_finite() {
        return Err(domain(format!("y* = {y_star} must be positive")));
    }
    if m == 0 {
        return Err(domain("instance has no rows"));
    }
    let mu = y_star.min(m as f64);
    let delta = solve_h(mu, 1.0 / (std::f64::consts::E * d))?;
    Ok(((mu * delta).ceil() as u64).max(1))
}

/// Target in terms of the column sparsity a, with the unquantified
/// additive constant omitted: y* + ⌈μ·H(μ, 1/(e a))⌉.
pub fn reduced_target(y_star: f64, m: usize, a: usize) -> Result<f64> {
    Ok(y_star + additive_target(y_star, m, a.max(1) as f64)? as f64)
}

/// t restricted to columns with 0 < x_c < 1 (at least 1).
pub fn effective_t(instance: &MipInstance, x: &[f64]) -> usize {
    group_incidence(instance, |c| x[c] > 0.0 && x[c] < 1.0).max(1)
}

/// Per-group cumulative weights, normalised to sum 1.
fn group_tables(instance: &MipInstance, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    if x.len() != instance.cols() {
        return Err(Error::Dimension {
            expected: instance.cols(),
            actual: x.len(),
        });
    }
    (0..instance.groups())
        .map(|g| {
            let slice = &x[instance.group_range(g)];
            if slice.iter().any(|v| !(*v >= 0.0)) {
                return Err(domain(format!("group {g} has a negative entry")));
            }
            let sum: f64 = slice.iter().sum();
            if (sum - 1.0).abs() > GROUP_SUM_TOL {
                return Err(Error::Infeasible {
                    row: g,
                    violation: (sum - 1.0).abs(),
                });
            }
            let mut acc = 0.0;
            Ok(slice
                .iter()
                .map(|v| {
                    acc += v / sum;
                    acc
                })
                .collect())
        })
        .collect()
}

fn draw<R: Rng>(tables: &[Vec<f64>], rng: &mut R) -> Vec<usize> {
    tables
        .iter()
        .map(|cum| {
            let u: f64 = rng.gen();
            cum.iter().position(|&c| u < c).unwrap_or_else(|| {
                // u landed in the rounding gap above the last cumulative value.
                let last = cum.iter().cloned().fold(0.0, f64::max);
                cum.iter().position(|&c| c == last).expect("nonempty group")
            })
        })
        .collect()
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One slot per group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub slots: Vec<usize>,
}

impl Selection {
    /// Indicator vector z ∈ {0,1}^N.
    pub fn to_z(&self, instance: &MipInstance) -> Vec<f64> {
        let mut z = vec![0.0; instance.cols()];
        for (g, &s) in self.slots.iter().enumerate() {
            z[instance.column(g, s)] = 1.0;
        }
        z
    }

    pub fn value(&self, instance: &MipInstance) -> f64 {
        instance.max_load(&self.to_z(instance))
    }
}

/// Independent categorical draw per group guided by x*.
pub fn group_round(instance: &MipInstance, x_star: &[f64], rng_seed: u64) -> Result<Selection> {
    let tables = group_tables(instance, x_star)?;
    Ok(Selection {
        slots: draw(&tables, &mut trial_rng(rng_seed, 0)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LasVegasReport {
    pub best: Selection,
    pub best_value: f64,
    /// Zero-based trial index of the best selection.
    pub best_trial: usize,
    pub trials_used: usize,
    pub success: bool,
    pub target: MipTarget,
}

/// Repeats [`group_round`] on streams 0, 1, … until some trial reaches
/// ⌈y* + k⌉ or `max_tries` is spent. y* is the max load of x*.
pub fn las_vegas_mip(
    instance: &MipInstance,
    x_star: &FractionalSolution,
    max_tries: usize,
    rng_seed: u64,
) -> Result<LasVegasReport> {
    let tables = group_tables(instance, &x_star.x)?;
    let y_star = instance.max_load(&x_star.x);
    let target = mip_target(y_star.max(f64::MIN_POSITIVE), instance.rows().max(1), effective_t(instance, &x_star.x))?;
    let goal = target.target.ceil() + VALUE_TOL;
    let mut best: Option<(f64, usize, Selection)> = None;
    let mut done = 0;
    while done < max_tries.max(1) {
        let end = (done + BATCH).min(max_tries.max(1));
        let batch: Vec<(f64, Selection)> = (done..end)
            .into_par_iter()
            .map(|trial| {
                let sel = Selection {
                    slots: draw(&tables, &mut trial_rng(rng_seed, trial as u64)),
                };
                (sel.value(instance), sel)
            })
            .collect();
        for (offset, (value, sel)) in batch.into_iter().enumerate() {
            let trial = done + offset;
            if best.as_ref().is_none_or(|b| value < b.0) {
                best = Some((value, trial, sel));
            }
            if value <= goal {
                let (best_value, best_trial, best) = best.expect("set above");
                return Ok(LasVegasReport {
                    best,
                    best_value,
                    best_trial,
                    trials_used: trial + 1,
                    success: true,
                    target,
                });
            }
        }
        done = end;
    }
    let (best_value, best_trial, best) = best.expect("at least one trial");
    Ok(LasVegasReport {
        best,
        best_value,
        best_trial,
        trials_used: done,
        success: false,
        target,
    })
}

/// Constants of the support reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Stop once t ≤ max{K0, 2}.
    pub k0: f64,
    /// Width of the acceptance envelopes.
    pub k1: f64,
    /// Scale of the recorded next-t prediction K2·t^{1/4+2/7}·log⁵t.
    pub k2: f64,
    /// `None` means ⌈log log max(t,4)⌉ + 2.
    pub max_outer_iters: Option<usize>,
    pub trials_per_iter: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            k0: 2.0,
            k1: 4.0,
            k2: 1.0,
            max_outer_iters: None,
            trials_per_iter: 200,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.k0, self.k1, self.k2].iter().all(|v| *v > 0.0 && v.is_finite());
        if !positive || self.trials_per_iter == 0 || self.max_outer_iters == Some(0) {
            return Err(Error::Validation {
                field: "bootstrap".into(),
                message: "constants must be positive and iteration counts at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn outer_iters(&self, t: usize) -> usize {
        self.max_outer_iters
            .unwrap_or_else(|| ((t.max(4) as f64).log2().log2().ceil() as usize) + 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootstrapCase {
    /// y* ≥ 1: scale by y*²·log⁵t.
    Large,
    /// t^{−1/7} < y* < 1: scale by log⁵t / y*.
    Small,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapIteration {
    pub t: usize,
    pub case: BootstrapCase,
    pub scale: f64,
    pub predicted_t: f64,
    pub trials: usize,
    pub accepted: bool,
    /// t after renormalisation (when accepted).
    pub t_after: Option<usize>,
    pub max_group_support: Option<usize>,
    pub y_after: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootstrapStop {
    /// y* ≥ t^{1/7}, t ≤ max{K0,2} or t ≤ a⁴.
    EasyRegime,
    /// y* ≤ t^{−1/7}: plain rounding already gives O(1).
    TinyLoad,
    NoDecrease,
    IterationCap,
    TrialsExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapReport {
    pub solution: FractionalSolution,
    pub t_trace: Vec<usize>,
    pub iterations: Vec<BootstrapIteration>,
    pub stop: BootstrapStop,
    /// y*_final / y*_initial.
    pub inflation: f64,
    /// Set when some iteration ran out of trials.
    pub partial: bool,
}

fn log2_5(t: usize) -> f64 {
    (t as f64).log2().powi(5)
}

/// Whether x* can be rounded directly without shrinking its support first.
pub fn bootstrap_easy(y_star: f64, t: usize, a: usize, k0: f64) -> bool {
    let tf = t as f64;
    y_star >= tf.powf(1.0 / 7.0) || tf <= k0.max(2.0) || tf <= (a as f64).powi(4)
}

struct Envelope {
    row_cap: f64,
    group_center: f64,
    group_width: f64,
}

fn envelope(case: BootstrapCase, y: f64, t: usize, k1: f64) -> Envelope {
    let l = (t as f64).log2();
    match case {
        BootstrapCase::Large => Envelope {
            row_cap: y.powi(3) * l.powi(5) * (1.0 + k1 / (y.powf(1.5) * l * l)),
            group_center: y * y * l.powi(5),
            group_width: k1 * y * l.powi(3),
        },
        BootstrapCase::Small => Envelope {
            row_cap: l.powi(5) * (1.0 + k1 / (l * l)),
            group_center: l.powi(5) / y,
            group_width: k1 * l.powi(3) / y.sqrt(),
        },
    }
}

/// Scales x, rounds every coordinate to floor or ceil independently, and
/// renormalises per group after the envelope checks pass.
pub fn bootstrap_reduce(
    instance: &MipInstance,
    x_star: &FractionalSolution,
    config: &BootstrapConfig,
    rng_seed: u64,
) -> Result<BootstrapReport> {
    config.validate()?;
    group_tables(instance, &x_star.x)?;
    let a = sparsity_stats_mip(instance).a;
    let y0 = instance.max_load(&x_star.x);
    if !(y0 > 0.0) {
        return Err(domain("y* must be positive"));
    }
    let mut x = x_star.x.clone();
    let mut y = y0;
    let mut t = effective_t(instance, &x);
    let mut t_trace = vec![t];
    let mut iterations = Vec::new();
    let mut partial = false;
    let cap = config.outer_iters(t);
    let mut stop = BootstrapStop::IterationCap;
    for iter in 0..cap {
        if bootstrap_easy(y, t, a, config.k0) {
            stop = BootstrapStop::EasyRegime;
            break;
        }
        if y <= (t as f64).powf(-1.0 / 7.0) {
            stop = BootstrapStop::TinyLoad;
            break;
        }
        let case = if y >= 1.0 { BootstrapCase::Large } else { BootstrapCase::Small };
        let scale = match case {
            BootstrapCase::Large => y * y * log2_5(t),
            BootstrapCase::Small => log2_5(t) / y,
        };
        let env = envelope(case, y, t, config.k1);
        let predicted_t = config.k2 * (t as f64).powf(0.25 + 2.0 / 7.0) * log2_5(t);
        let stream_base = (iter as u64) << 32;
        let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let trial = |k: usize| -> Option<Vec<f64>> {
            let mut rng = trial_rng(rng_seed, stream_base + k as u64);
            let z: Vec<f64> = scaled
                .iter()
                .map(|&v| {
                    let f = v.floor();
                    f + f64::from(u8::from(rng.gen::<f64>() < v - f))
                })
                .collect();
            let rows_ok = instance.matrix().mul_vec(&z).iter().all(|&l| l <= env.row_cap + VALUE_TOL);
            let groups_ok = (0..instance.groups()).all(|g| {
                let s: f64 = z[instance.group_range(g)].iter().sum();
                s > 0.0 && (s - env.group_center).abs() <= env.group_width + VALUE_TOL
            });
            (rows_ok && groups_ok).then_some(z)
        };
        let mut accepted: Option<(usize, Vec<f64>)> = None;
        let mut tried = 0;
        while tried < config.trials_per_iter && accepted.is_none() {
            let end = (tried + BATCH).min(config.trials_per_iter);
            let results: Vec<Option<Vec<f64>>> = (tried..end).into_par_iter().map(trial).collect();
            if let Some((k, z)) = results.into_iter().enumerate().find_map(|(o, r)| r.map(|z| (tried + o, z))) {
                accepted = Some((k, z));
            }
            tried = end;
        }
        let mut record = BootstrapIteration {
            t,
            case,
            scale,
            predicted_t,
            trials: accepted.as_ref().map_or(tried, |(k, _)| k + 1),
            accepted: accepted.is_some(),
            t_after: None,
            max_group_support: None,
            y_after: None,
        };
        let Some((_, z)) = accepted else {
            partial = true;
            iterations.push(record);
            stop = BootstrapStop::TrialsExhausted;
            break;
        };
        let mut next = vec![0.0; x.len()];
        let mut support = 0;
        for g in 0..instance.groups() {
            let range = instance.group_range(g);
            let sum: f64 = z[range.clone()].iter().sum();
            support = support.max(z[range.clone()].iter().filter(|v| **v > 0.0).count());
            for c in range {
                next[c] = z[c] / sum;
            }
        }
        debug_assert!(instance.worst_group_deviation(&next).1 <= 1e-12);
        let t_next = effective_t(instance, &next);
        let y_next = instance.max_load(&next);
        record.t_after = Some(t_next);
        record.max_group_support = Some(support);
        record.y_after = Some(y_next);
        iterations.push(record);
        if t_next >= t {
            stop = BootstrapStop::NoDecrease;
            break;
        }
        x = next;
        y = y_next;
        t = t_next;
        t_trace.push(t);
    }
    let (_, slack) = instance.worst_group_deviation(&x);
    Ok(BootstrapReport {
        solution: FractionalSolution {
            objective_values: vec![y],
            feasibility_slack: slack,
            x,
        },
        t_trace,
        iterations,
        stop,
        inflation: y / y0,
        partial,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipReport {
    pub value: f64,
    pub target_t42: f64,
    pub target_t44: f64,
    pub trials_used: usize,
    pub t_trace: Vec<usize>,
    pub success: bool,
    pub selection: Selection,
    pub bootstrap: BootstrapReport,
}

/// Support reduction followed by the Las Vegas loop on the reduced x.
pub fn full_mip_pipeline(
    instance: &MipInstance,
    x_star: &FractionalSolution,
    config: &BootstrapConfig,
    max_tries: usize,
    rng_seed: u64,
) -> Result<MipReport> {
    let boot = bootstrap_reduce(instance, x_star, config, rng_seed)?;
    let lv = las_vegas_mip(instance, &boot.solution, max_tries, rng_seed.wrapping_add(1))?;
    let a = sparsity_stats_mip(instance).a;
    let y0 = instance.max_load(&x_star.x);
    Ok(MipReport {
        value: lv.best_value,
        target_t42: lv.target.target,
        target_t44: reduced_target(y0, instance.rows(), a)?,
        trials_used: lv.trials_used,
        t_trace: boot.t_trace.clone(),
        success: lv.success,
        selection: lv.best,
        bootstrap: boot,
    })
}

/// Report file: `{"value", "target_t42", "target_t44", "trials_used",
/// "t_trace", "success"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipReportFile {
    pub value: f64,
    pub target_t42: f64,
    pub target_t44: f64,
    pub trials_used: usize,
    pub t_trace: Vec<usize>,
    pub success: bool,
}

impl From<&MipReport> for MipReportFile {
    fn from(r: &MipReport) -> Self {
        Self {
            value: r.value,
            target_t42: r.target_t42,
            target_t44: r.target_t44,
            trials_used: r.trials_used,
            t_trace: r.t_trace.clone(),
            success: r.success,
        }
    }
}
