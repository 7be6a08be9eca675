use lllround::cip::derandomize_single;
use lllround::lp::{solve_cip_lp, solve_mip_lp, LinearProgram, LpStatus, Sense};
use lllround::mip::las_vegas_mip;
use lllround::model::{gen_hypergraph_partition, gen_set_cover, parse_instance, serialize_instance, Instance};
use lllround::oracle::lp_vertex_optimum;
use proptest::prelude::*;

fn small_lp() -> impl Strategy<Value = LinearProgram> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(n, m)| {
        let row = (prop::collection::vec(-8i32..12, n), 0u8..4, -4i32..16);
        (prop::collection::vec(-4i32..8, n), prop::collection::vec(row, m)).prop_map(move |(c, rows)| {
            let mut lp = LinearProgram::new(c.iter().map(|&v| f64::from(v) / 4.0).collect());
            for (coeffs, sense, rhs) in rows {
                let sense = match sense {
                    0 => Sense::Eq,
                    1 => Sense::Le,
                    _ => Sense::Ge,
                };
                lp.push(coeffs.iter().map(|&v| f64::from(v) / 4.0).collect(), sense, f64::from(rhs) / 4.0);
            }
            lp.push(vec![1.0; n], Sense::Le, 10.0);
            lp
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simplex_matches_vertex_enumeration(lp in small_lp()) {
        let res = lp.solve();
        match lp_vertex_optimum(&lp) {
            Some(best) => {
                prop_assert_eq!(res.status, LpStatus::Optimal);
                prop_assert!((res.objective - best).abs() <= 1e-6);
                prop_assert!(lp.violation(&res.x) <= 1e-9);
            }
            None => prop_assert_eq!(res.status, LpStatus::Infeasible),
        }
    }

    #[test]
    fn derandomized_cover_is_feasible_and_within_budget(
        elems in 4usize..14,
        max_set in 2usize..5,
        demand in 1u32..3,
        seed in 0u64..1000,
    ) {
        let sets = (elems * (demand as usize + 1)).div_ceil(max_set).max(demand as usize + 1) + 2;
        let inst = gen_set_cover(elems, sets, max_set, demand, seed).unwrap();
        let lp = solve_cip_lp(&inst, 0).unwrap();
        let (r, params) = derandomize_single(&inst, &lp.x, None, None).unwrap();
        prop_assert!(r.feasible);
        prop_assert!(r.objective_values[0] <= params.lambda + 1e-9);
        let again = derandomize_single(&inst, &lp.x, None, None).unwrap().0;
        prop_assert_eq!(r.z, again.z);
    }

    #[test]
    fn las_vegas_is_seed_deterministic(verts in 4usize..12, seed in 0u64..500, rng_seed: u64) {
        let inst = gen_hypergraph_partition(verts, verts + 2, 3, 2, seed).unwrap();
        let lp = solve_mip_lp(&inst).unwrap();
        let a = las_vegas_mip(&inst, &lp.x, 200, rng_seed).unwrap();
        let b = las_vegas_mip(&inst, &lp.x, 200, rng_seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.best.slots.len(), inst.groups());
        prop_assert!((a.best.value(&inst) - a.best_value).abs() <= 1e-12);
        prop_assert!(a.trials_used >= 1 && a.trials_used <= 200);
    }

    #[test]
    fn instance_json_round_trips(elems in 3usize..10, seed in 0u64..1000) {
        let inst = Instance::Cip(gen_set_cover(elems, elems + 2, 3, 1, seed).unwrap());
        let text = serialize_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(serialize_instance(&back), text);
    }
}
