//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or overruns its time limit.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lllround::cip::{
    choose_alpha_beta, derandomize, make_scheme, multicriteria_params, phi_positive_at_standard, BranchStep,
    EstimatorState, RoundingScheme, DEFAULT_KMAX,
};
use lllround::cli::{self, gap_envelope, RunManifest, BENCH_HEADER};
use lllround::lp::{solve_cip_lp, solve_mip_lp, solve_multi_cip_lp, LinearProgram, LpStatus, Sense};
use lllround::mip::las_vegas_mip;
use lllround::model::{
    gen_facility_location, gen_hypergraph_partition, gen_set_cover, sparsity_stats_cip, CipInstance, MipInstance,
    SparseMatrix,
};
use lllround::oracle::{
    exact_event_probs, lp_vertex_optimum, verify_anti_fkg, verify_extended_lll, verify_fkg, verify_phi_domination,
    verify_tail_domination, EnumerationBudget, VerifyStatus,
};
use lllround::tail::{chernoff_g, h_inequality_holds, solve_h};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn budget() -> EnumerationBudget {
    EnumerationBudget::new(22, 8).unwrap()
}

/// Sparse random CIP: n columns, m rows, ℓ cost vectors.
fn random_cip(rng: &mut ChaCha8Rng, n: usize, m: usize, ell: usize) -> CipInstance {
    let mut triplets = Vec::new();
    for r in 0..m {
        let width = rng.gen_range(1..=n.min(4));
        let mut cols: Vec<usize> = (0..n).collect();
        for i in 0..width {
            let j = rng.gen_range(i..n);
            cols.swap(i, j);
        }
        for &c in &cols[..width] {
            let v: f64 = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.2..1.0) };
            triplets.push((r, c, v));
        }
    }
    let matrix = SparseMatrix::from_triplets(m, n, &triplets).unwrap();
    let binary = matrix.is_binary();
    let demands = (0..m)
        .map(|_| if binary { f64::from(rng.gen_range(1..=2u8)) } else { rng.gen_range(1.0..3.0) })
        .collect();
    let costs = (0..ell)
        .map(|_| (0..n).map(|_| rng.gen_range(0.1..1.0)).collect())
        .collect();
    CipInstance::new(matrix, demands, costs).unwrap()
}

fn random_subset(rng: &mut ChaCha8Rng, items: &[usize], max: usize) -> Vec<usize> {
    let mut pool = items.to_vec();
    let size = rng.gen_range(0..=max.min(pool.len()));
    for i in 0..size {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(size);
    pool.sort_unstable();
    pool
}

fn fractional_cols(s: &RoundingScheme) -> Vec<usize> {
    (0..s.frac.len()).filter(|&j| s.frac[j] > 0.0).collect()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let mu = rng.gen_range(0.01..50.0);
        let delta = rng.gen_range(0.0..5.0);
        let g = chernoff_g(mu, delta).map_err(|e| e.to_string())?;
        let direct = (delta.exp() / (1.0 + delta).powf(1.0 + delta)).powf(mu);
        ensure((g - direct).abs() <= 1e-12, || format!("G({mu}, {delta}) = {g}, closed form {direct}"))?;
        let p = rng.gen_range(1e-6..0.999);
        let h = solve_h(mu, p).map_err(|e| e.to_string())?;
        ensure(h_inequality_holds(mu, h, p), || format!("H({mu}, {p}) = {h} fails its inequality"))?;
    }
    let mus: Vec<f64> = (0..20).map(|i| 0.1 * 1.5f64.powi(i)).collect();
    let deltas: Vec<f64> = (0..10).map(|i| 0.05 * 1.8f64.powi(i)).collect();
    let mut pairs = 0;
    for &m1 in &mus {
        for &m2 in &mus {
            for &d in &deltas {
                if m1 > m2 {
                    continue;
                }
                let lhs = chernoff_g(m1, m2 * d / m1).unwrap();
                let rhs = chernoff_g(m2, d).unwrap();
                ensure(lhs <= rhs + 1e-12, || format!("G({m1}, {}) = {lhs} > G({m2}, {d}) = {rhs}", m2 * d / m1))?;
                pairs += 1;
            }
        }
    }
    Ok(format!("200 G values, 200 H solves, {pairs} mean-shift comparisons"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut tails = 0.0f64;
    for i in 0..50 {
        let n = rng.gen_range(4..=20);
        let values: Vec<f64> = (0..n)
            .map(|_| if i % 2 == 0 { 1.0 } else { rng.gen_range(0.05..=1.0) })
            .collect();
        let probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.02..0.9)).collect();
        let delta = rng.gen_range(0.05..3.0);
        let (esym, g) = verify_tail_domination(&values, &probs, delta, &budget()).map_err(|e| e.to_string())?;
        for v in [&esym, &g] {
            ensure(v.status == VerifyStatus::Holds, || format!("setup {i}: {v:?}"))?;
        }
        tails = tails.max(esym.rhs);
    }
    Ok(format!("50 setups, largest exact tail {tails:.4}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checks = 0;
    let mut positive = 0;
    for inst_no in 0..100 {
        let n = rng.gen_range(3..=12);
        let m = rng.gen_range(1..=10);
        let ell = rng.gen_range(1..=2);
        let inst = random_cip(&mut rng, n, m, ell);
        let x = solve_cip_lp(&inst, 0).map_err(|e| e.to_string())?.x;
        let alpha = rng.gen_range(1.2..3.0);
        let scheme = make_scheme(&inst, &x, alpha).map_err(|e| e.to_string())?;
        let ks: Vec<usize> = (0..ell).map(|_| rng.gen_range(1..=2)).collect();
        let lambdas: Vec<f64> = (0..ell)
            .map(|i| {
                let nu = alpha * inst.objective(i, &x.x);
                (rng.gen_range(1.2..3.0) * nu).max(ks[i] as f64)
            })
            .collect();
        let free = fractional_cols(&scheme);
        for trial in 0..6 {
            let mut p = scheme.frac.clone();
            if trial > 0 {
                for &j in &free {
                    p[j] = rng.gen::<f64>();
                }
            }
            let state = EstimatorState::new(&inst, &scheme, p, lambdas.clone(), ks.clone(), DEFAULT_KMAX)
                .map_err(|e| e.to_string())?;
            let v = verify_phi_domination(&state, &budget()).map_err(|e| e.to_string())?;
            ensure(v.status == VerifyStatus::Holds, || {
                format!("instance {inst_no}, p #{trial}: Pr(A) = {} < Phi = {}", v.lhs, v.rhs)
            })?;
            checks += 1;
            if v.rhs > 0.0 {
                positive += 1;
            }
        }
    }
    ensure(positive >= 100, || format!("only {positive} checks had a positive estimator"))?;
    Ok(format!("{checks} checks, {positive} with positive estimator"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut accepted = 0;
    let mut skipped = 0;
    let mut attempt = 0u64;
    while accepted < 100 {
        attempt += 1;
        if attempt > 400 {
            return Err(format!("only {accepted} of 400 instances had a positive initial estimator"));
        }
        let demand = rng.gen_range(1..=3);
        let inst = if attempt.is_multiple_of(2) {
            let elems = rng.gen_range(8..=30);
            let max_set = rng.gen_range(2..=6usize);
            let sets = ((elems * (demand as usize + 1)).div_ceil(max_set) + 4).min(40);
            match gen_set_cover(elems, sets, max_set, demand, attempt) {
                Ok(i) => i,
                Err(_) => continue,
            }
        } else {
            let nodes = rng.gen_range(6..=30);
            let deg = rng.gen_range(demand as usize..=5);
            gen_facility_location(nodes, deg, demand, attempt).map_err(|e| e.to_string())?
        };
        let stats = sparsity_stats_cip(&inst);
        ensure(stats.a <= 6 && inst.cols() <= 40 && inst.rows() <= 30, || "instance outside the size envelope".into())?;
        let x = solve_cip_lp(&inst, 0).map_err(|e| e.to_string())?.x;
        let y = inst.objective(0, &x.x);
        let (alpha, beta) = choose_alpha_beta(stats.a, inst.min_demand());
        let scheme = make_scheme(&inst, &x, alpha).map_err(|e| e.to_string())?;
        let lambda = alpha * beta * y;
        let mut state = EstimatorState::standard(&inst, &scheme, vec![lambda], vec![1], DEFAULT_KMAX)
            .map_err(|e| e.to_string())?;
        if state.phi_value().is_nan() || state.phi_value() <= 0.0 {
            skipped += 1;
            continue;
        }
        let fractional = fractional_cols(&scheme).len();
        let mut worst_drop = 0.0f64;
        let mut branch_ok = true;
        let mut observer = |step: &BranchStep| {
            worst_drop = worst_drop.max(step.phi_before - step.phi_zero.max(step.phi_one));
            branch_ok &= step.branch_inequality_holds(1e-9);
        };
        let sol = derandomize(&mut state, Some(&mut observer)).map_err(|e| e.to_string())?;
        ensure(sol.phi_evaluations == 1 + 2 * fractional, || {
            format!("{} evaluations, expected {}", sol.phi_evaluations, 1 + 2 * fractional)
        })?;
        ensure(worst_drop <= 1e-9 && branch_ok, || format!("estimator dropped by {worst_drop:e}"))?;
        ensure(sol.feasible, || "derandomized z infeasible".into())?;
        let cost = sol.objective_values[0];
        ensure(cost <= y * alpha * beta + 1e-9, || format!("cost {cost} > {}", y * alpha * beta))?;
        accepted += 1;
    }
    Ok(format!("100 instances rounded, {skipped} skipped for a non-positive initial estimator"))
}

fn criterion_5() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv_path = dir.path().join("bench.csv");
    let args = [
        "lllround",
        "bench",
        "--family",
        "set-cover",
        "--sizes",
        "20,30",
        "--seeds",
        "0..5",
        "--demands",
        "1,2,3,4,5,6,7,8",
        "--max-set-size",
        "6",
        "--out",
        csv_path.to_str().unwrap(),
    ];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(args, &mut out, &mut err);
    ensure(code == 0, || String::from_utf8_lossy(&err).into_owned())?;
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| e.to_string())?;
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    ensure(header == BENCH_HEADER, || format!("header {header:?}"))?;
    let mut by_b: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut rows = 0;
    for rec in reader.deserialize::<cli::BenchRow>() {
        let row = rec.map_err(|e| e.to_string())?;
        ensure(row.a <= 6, || format!("a = {}", row.a))?;
        ensure(row.ratio >= 1.0 - 1e-9, || format!("ratio {} below 1", row.ratio))?;
        let env = gap_envelope(row.a, f64::from(row.demand), 6.0);
        ensure((row.envelope - env).abs() < 1e-12, || "envelope column mismatch".into())?;
        ensure(row.ratio <= row.envelope, || {
            format!("B = {}, seed {}: ratio {} above envelope {}", row.demand, row.seed, row.ratio, row.envelope)
        })?;
        by_b.entry(row.demand).or_default().push(row.ratio);
        rows += 1;
    }
    let means: Vec<f64> = by_b.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    ensure(means.len() == 8, || "missing demand levels".into())?;
    ensure(means.windows(2).all(|w| w[1] <= w[0]), || format!("mean ratio not decreasing in B: {means:?}"))?;
    Ok(format!(
        "{rows} instances under 1 + 6 max(L, sqrt L); mean ratio {:.3} at B=1 down to {:.3} at B=8",
        means[0], means[7]
    ))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut done = 0;
    let mut attempts = 0;
    let mut worst = 0.0f64;
    while done < 30 {
        attempts += 1;
        if attempts > 120 {
            return Err(format!("only {done} qualifying instances in 120 attempts"));
        }
        let ell = [2usize, 4, 8][done % 3];
        let demand = rng.gen_range(2..=4);
        let base = gen_set_cover(30, 40, 5, demand, 600 + attempts).map_err(|e| e.to_string())?;
        let costs: Vec<Vec<f64>> = (0..ell)
            .map(|_| (0..base.cols()).map(|_| rng.gen_range(0.3..1.0)).collect())
            .collect();
        let inst = CipInstance::new(base.matrix().clone(), base.demands().to_vec(), costs).map_err(|e| e.to_string())?;
        let x = solve_multi_cip_lp(&inst).map_err(|e| e.to_string())?.x;
        let params = multicriteria_params(&inst, &x).map_err(|e| e.to_string())?;
        let floor = ((2 * ell) as f64).log2().powi(2);
        if params.nus.iter().any(|&nu| nu < floor) {
            continue;
        }
        ensure(params.bound > 0.0, || format!("bound {} not positive", params.bound))?;
        ensure(params.ks.iter().all(|&k| k <= 4), || format!("k = {:?}", params.ks))?;
        let scheme = make_scheme(&inst, &x, params.alpha).map_err(|e| e.to_string())?;
        let check = phi_positive_at_standard(&inst, &scheme, &x, &params.lambdas, &params.ks, DEFAULT_KMAX)
            .map_err(|e| e.to_string())?;
        ensure(check.positive, || "closed-form bound not positive".into())?;
        let mut state = EstimatorState::standard(&inst, &scheme, params.lambdas.clone(), params.ks.clone(), DEFAULT_KMAX)
            .map_err(|e| e.to_string())?;
        let sol = derandomize(&mut state, None).map_err(|e| e.to_string())?;
        ensure(sol.feasible, || "infeasible".into())?;
        for (i, &nu) in params.nus.iter().enumerate() {
            let c = sol.objective_values[i];
            ensure(c <= 3.0 * nu + 1e-9, || format!("objective {i}: {c} > 3 nu = {}", 3.0 * nu))?;
            worst = worst.max(c / nu);
        }
        done += 1;
    }
    Ok(format!("30 instances (l in 2/4/8), worst c.z/nu = {worst:.3}"))
}

fn random_mip(rng: &mut ChaCha8Rng) -> MipInstance {
    let groups = rng.gen_range(2..=8);
    let rows = rng.gen_range(1..=5);
    let n = groups * 2;
    let mut triplets = Vec::new();
    for r in 0..rows {
        for c in 0..n {
            if rng.gen_bool(0.35) {
                triplets.push((r, c, if rng.gen_bool(0.7) { 1.0 } else { rng.gen_range(0.2..1.0) }));
            }
        }
    }
    MipInstance::new(SparseMatrix::from_triplets(rows, n, &triplets).unwrap(), vec![2; groups]).unwrap()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut counts: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    let mut tally = |name: &'static str, status: VerifyStatus| -> Result<(), String> {
        let e = counts.entry(name).or_default();
        match status {
            VerifyStatus::Holds => e[0] += 1,
            VerifyStatus::Vacuous | VerifyStatus::HypothesisUnmet => e[1] += 1,
            VerifyStatus::Fails => {
                e[2] += 1;
                return Err(format!("{name} counterexample"));
            }
        }
        Ok(())
    };
    for _ in 0..100 {
        let n = rng.gen_range(3..=10);
        let m = rng.gen_range(2..=8);
        let inst = random_cip(&mut rng, n, m, 1);
        let x = solve_cip_lp(&inst, 0).map_err(|e| e.to_string())?.x;
        let scheme = make_scheme(&inst, &x, rng.gen_range(1.1..2.5)).map_err(|e| e.to_string())?;
        let free = fractional_cols(&scheme);
        let mut p = scheme.frac.clone();
        if rng.gen_bool(0.5) {
            for &j in &free {
                p[j] = rng.gen_range(0.05..0.95);
            }
        }
        let rows: Vec<usize> = (0..m).collect();
        let all = random_subset(&mut rng, &rows, m);
        let cut = rng.gen_range(0..=all.len());
        let b3 = random_subset(&mut rng, &free, 2);
        let v = verify_fkg(&inst, &scheme, &p, &all[..cut], &all[cut..], &b3, &budget()).map_err(|e| e.to_string())?;
        tally("fkg", v.status)?;
        let cols = random_subset(&mut rng, &free, 3);
        let v = verify_anti_fkg(&inst, &scheme, &p, &cols, &budget()).map_err(|e| e.to_string())?;
        tally("anti-fkg", v.status)?;
    }
    for _ in 0..100 {
        let inst = random_mip(&mut rng);
        let lp = solve_mip_lp(&inst).map_err(|e| e.to_string())?;
        ensure(lp.status == LpStatus::Optimal, || "MIP relaxation not solved".into())?;
        let k = rng.gen_range(1..=4);
        let v = verify_extended_lll(&inst, &lp.x, k, &budget()).map_err(|e| e.to_string())?;
        tally("extended-lll", v.status)?;
    }
    let lll_met = counts["extended-lll"][0];
    ensure(lll_met >= 10, || format!("hypothesis met on only {lll_met} MIPs"))?;
    let parts: Vec<String> = counts
        .iter()
        .map(|(k, v)| format!("{k}: {} checked, {} vacuous/unmet", v[0], v[1]))
        .collect();
    Ok(format!("0 counterexamples; {}", parts.join("; ")))
}

fn criterion_8() -> Outcome {
    let list = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/hypergraph_suite.txt"))
        .map_err(|e| e.to_string())?;
    let mut total = 0;
    let mut failures = Vec::new();
    for line in list.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<u64> = line.split_whitespace().map(|t| t.parse().unwrap()).collect();
        let (seed, verts, edges) = (f[0], f[1] as usize, f[2] as usize);
        ensure(verts <= 12, || "suite instance too large".into())?;
        let inst = gen_hypergraph_partition(verts, edges, 4, 2, seed).map_err(|e| e.to_string())?;
        let x = solve_mip_lp(&inst).map_err(|e| e.to_string())?.x;
        let lv = las_vegas_mip(&inst, &x, 10_000, seed).map_err(|e| e.to_string())?;
        total += 1;
        if !lv.success {
            failures.push(format!("seed {seed}: best {} vs target {}", lv.best_value, lv.target.target));
        }
    }
    let rate = 1.0 - failures.len() as f64 / total as f64;
    for f in &failures {
        println!("    miss: {f}");
    }
    ensure(rate >= 0.95, || format!("success rate {rate:.3}; misses: {failures:?}"))?;
    Ok(format!("{} of {total} suite instances met the target", total - failures.len()))
}

fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(1..=4);
    let mut lp = LinearProgram::new((0..n).map(|_| rng.gen_range(-1.0..2.0)).collect());
    for _ in 0..m {
        let coeffs: Vec<f64> = (0..n).map(|_| (rng.gen_range(-2.0f64..3.0) * 4.0).round() / 4.0).collect();
        let sense = match rng.gen_range(0..5) {
            0 => Sense::Eq,
            1 | 2 => Sense::Le,
            _ => Sense::Ge,
        };
        lp.push(coeffs, sense, rng.gen_range(-1.0..4.0));
    }
    // Keep the feasible region bounded.
    lp.push(vec![1.0; n], Sense::Le, 10.0);
    lp
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut optimal, mut infeasible) = (0, 0);
    for i in 0..50 {
        let lp = random_lp(&mut rng);
        let res = lp.solve();
        match (res.status, lp_vertex_optimum(&lp)) {
            (LpStatus::Optimal, Some(best)) => {
                ensure((res.objective - best).abs() <= 1e-6, || {
                    format!("LP {i}: simplex {} vs vertices {best}", res.objective)
                })?;
                ensure(lp.violation(&res.x) <= 1e-9, || format!("LP {i}: violation {}", lp.violation(&res.x)))?;
                optimal += 1;
            }
            (LpStatus::Infeasible, None) => infeasible += 1,
            (s, o) => return Err(format!("LP {i}: simplex {s:?}, vertex oracle {o:?}")),
        }
    }
    ensure(optimal >= 25, || format!("only {optimal} feasible LPs"))?;
    Ok(format!("50 LPs: {optimal} optimal, {infeasible} infeasible, all agree"))
}

fn lllround(dir: &Path, args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_lllround"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let runs: Vec<(Vec<&str>, &str)> = vec![
        (vec!["gen", "--kind", "set-cover", "--size", "12", "--demand", "2", "--seed", "5", "--out", "sc.json"], "sc.json"),
        (vec!["solve", "--instance", "sc.json", "--out", "sol.json"], "sol.json"),
        (vec!["round", "--instance", "sc.json", "--mode", "derandomize", "--solution", "sol.json", "--workers", "3", "--out", "der.json"], "der.json"),
        (vec!["round", "--instance", "sc.json", "--mode", "standard", "--seed", "9", "--out", "std.json"], "std.json"),
        (vec!["gen", "--kind", "hypergraph", "--size", "10", "--seed", "2", "--out", "hg.json"], "hg.json"),
        (vec!["round", "--instance", "hg.json", "--mode", "mip", "--seed", "4", "--workers", "2", "--out", "mip.json"], "mip.json"),
        (vec!["round", "--instance", "hg.json", "--mode", "bootstrap", "--seed", "4", "--out", "boot.json"], "boot.json"),
        (vec!["gen", "--kind", "set-cover", "--size", "6", "--sets", "8", "--max-set-size", "3", "--out", "tiny.json"], "tiny.json"),
        (vec!["verify", "--instance", "tiny.json", "--seed", "3", "--report", "verify.json"], "verify.json"),
        (vec!["bench", "--family", "facility", "--sizes", "10,14", "--seeds", "0..3", "--demands", "1,2", "--out", "bench.csv"], "bench.csv"),
    ];
    for (args, out) in &runs {
        let o = lllround(d, args)?;
        ensure(o.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))?;
        let original = std::fs::read(d.join(out)).map_err(|e| e.to_string())?;
        let manifest = cli::manifest_path_for(&d.join(out));
        ensure(manifest.exists(), || format!("no manifest for {out}"))?;
        std::fs::remove_file(d.join(out)).map_err(|e| e.to_string())?;
        let r = lllround(d, &["replay", manifest.to_str().unwrap()])?;
        ensure(r.status.success(), || format!("replay of {out}: {}", String::from_utf8_lossy(&r.stdout)))?;
        let again = std::fs::read(d.join(out)).map_err(|e| e.to_string())?;
        if *out != "bench.csv" {
            ensure(again == original, || format!("{out} differs after replay"))?;
        }
    }
    // A tampered digest must be detected.
    let path = cli::manifest_path_for(&d.join("der.json"));
    let mut m = RunManifest::parse(&std::fs::read_to_string(&path).unwrap()).map_err(|e| e.to_string())?;
    m.outputs[0].sha256 = "0".repeat(64);
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let r = lllround(d, &["replay", path.to_str().unwrap()])?;
    ensure(r.status.code() == Some(1), || "tampered manifest replayed cleanly".into())?;
    Ok(format!("{} manifests replayed byte-identically; tampering detected", runs.len()))
}

type Criterion = (u32, &'static str, fn() -> Outcome, u64);

fn main() {
    // Smoke-test the enumeration engine before timing anything.
    let probe = random_cip(&mut ChaCha8Rng::seed_from_u64(0), 3, 2, 1);
    let x = solve_cip_lp(&probe, 0).unwrap().x;
    let s = make_scheme(&probe, &x, 1.5).unwrap();
    exact_event_probs(&probe, &s, &s.frac, &[], &budget()).expect("enumeration engine");

    let criteria: [Criterion; 10] = [
        (1, "tail kernels", criterion_1, 1),
        (2, "exact tail domination", criterion_2, 30),
        (3, "estimator domination", criterion_3, 300),
        (4, "derandomizer soundness", criterion_4, 120),
        (5, "integrality gap envelope", criterion_5, 300),
        (6, "multi-criteria regime", criterion_6, 600),
        (7, "correlation and local-lemma oracles", criterion_7, 300),
        (8, "MIP Las Vegas suite", criterion_8, 180),
        (9, "LP solver correctness", criterion_9, 60),
        (10, "manifest determinism", criterion_10, 120),
    ];
    let mut failed = 0;
    for (id, name, f, limit) in criteria {
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let over = took > Duration::from_secs(limit);
        let (tag, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("over time limit; {d}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {tag}  {name}: {detail}  [{:.2}s / {limit}s]",
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
