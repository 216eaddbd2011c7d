use cimmap::grid::macro_search;
use cimmap::grouping::{conv_counts, grouped_counts};
use cimmap::metrics::cycles_multi;
use cimmap::oracle::{brute_force_best_plan, verify_plan, HeadRule, SearchSpace};
use cimmap::tetris::tetris_pipeline;
use cimmap::{map_layer, ArrayConfig, LayerSpec, MapOptions, Mapper, MappingPlan};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
struct Case {
    layer: LayerSpec,
    array: ArrayConfig,
}

fn small_case() -> impl Strategy<Value = Case> {
    (
        prop_oneof![Just(3u32), Just(5u32)],
        0u32..=9,
        0u32..=9,
        1u32..=32,
        1u32..=32,
        16u32..=64,
        8u32..=64,
    )
        .prop_filter_map("array cannot hold one kernel", |(k, dh, dw, ic, oc, ar, ac)| {
            let (ih, iw) = ((k + dh).min(14), (k + dw).min(14));
            let layer = LayerSpec::new("p", ih, iw, k, ic, oc, 1).ok()?;
            let array = ArrayConfig::single(ar, ac).ok()?;
            array.check_layer(&layer).ok()?;
            Some(Case { layer, array })
        })
}

fn cycles(case: &Case, mapper: Mapper) -> u64 {
    map_layer(&case.layer, &case.array, mapper, &MapOptions::default())
        .unwrap()
        .total_cycles_single
}

fn assert_fits(plan: &MappingPlan, array: &ArrayConfig) {
    for t in &plan.tiles {
        let w = &t.window;
        let part = t.partitions.iter().map(|p| p.len).max().unwrap_or(0);
        assert!(part * w.area() <= array.rows(), "{}", w.tuple());
        assert!(w.kernels() * w.oc_t() * array.weight_bits() <= array.cols(), "{}", w.tuple());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn every_plan_replays_to_its_analytic_count(case in small_case()) {
        let grouped = if case.layer.in_channels() % 2 == 0 && case.layer.out_channels() % 2 == 0 {
            case.layer.with_groups(2).unwrap()
        } else {
            case.layer.clone()
        };
        for m in Mapper::ALL {
            let layer = if m == Mapper::TetrisG { &grouped } else { &case.layer };
            let plan = map_layer(layer, &case.array, m, &MapOptions::default()).unwrap();
            let cov = verify_plan(&plan, &case.array);
            prop_assert!(cov.agrees(&plan), "{m}: {cov:?}");
            if matches!(m, Mapper::Tetris | Mapper::TetrisG) {
                prop_assert!(cov.out_of_bounds.is_empty(), "{m}: {:?}", cov.out_of_bounds);
            }
            assert_fits(&plan, &case.array);
            prop_assert_eq!(cycles_multi(&plan, 1, 1), plan.total_cycles_single);
        }
    }

    #[test]
    fn mappers_are_ordered(case in small_case()) {
        let vw = cycles(&case, Mapper::VwSdk);
        prop_assert!(cycles(&case, Mapper::Tetris) <= vw);
        prop_assert!(vw <= cycles(&case, Mapper::Img2col).max(cycles(&case, Mapper::Sdk)));
        prop_assert!(cycles(&case, Mapper::VwcSdk) <= vw);
        prop_assert_eq!(cycles(&case, Mapper::TetrisG), cycles(&case, Mapper::Tetris));
    }

    #[test]
    fn vw_cycles_grow_with_channels(case in small_case()) {
        let base = cycles(&case, Mapper::VwSdk);
        let l = &case.layer;
        let more_ic = LayerSpec::new("p", l.ifm_h(), l.ifm_w(), l.kernel(), l.in_channels() + 1, l.out_channels(), 1).unwrap();
        let more_oc = LayerSpec::new("p", l.ifm_h(), l.ifm_w(), l.kernel(), l.in_channels(), l.out_channels() + 1, 1).unwrap();
        for layer in [more_ic, more_oc] {
            let c = Case { layer, array: case.array };
            prop_assert!(cycles(&c, Mapper::VwSdk) >= base);
        }
    }

    #[test]
    fn grouped_counts_divide_exactly(k in 1u32..=7, i in 0u32..=20, ic_g in 1u32..=16, oc_g in 1u32..=16, g in 1u32..=8) {
        let layer = LayerSpec::new("g", k + i, k + i, k, ic_g * g, oc_g * g, 1).unwrap();
        let (params, ops) = conv_counts(&layer);
        let (gp, gops) = grouped_counts(&layer, g).unwrap();
        prop_assert_eq!(gp * g as u128, params);
        prop_assert_eq!(gops * g as u128, ops);
    }

    #[test]
    fn layer_json_round_trips(case in small_case(), g in 1u32..=4) {
        let layer = case.layer.with_groups(g).unwrap_or(case.layer);
        let text = serde_json::to_string(&layer).unwrap();
        let back: LayerSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, layer);
        let text = serde_json::to_string(&case.array).unwrap();
        let back: ArrayConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, case.array);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn best_grid_never_gets_worse_with_more_macros(a in small_case(), b in small_case(), m in prop_oneof![Just(Mapper::VwSdk), Just(Mapper::Tetris)]) {
        let net = [a.layer, b.layer];
        let array = ArrayConfig::single(a.array.rows().max(b.array.rows()), a.array.cols().max(b.array.cols())).unwrap();
        let mut prev = u64::MAX;
        for p in 1..=6 {
            let best = macro_search(&net, &array, p, m, &MapOptions::default()).unwrap().best;
            prop_assert!(best.cycles_multi <= prev, "P={p}: {} > {prev}", best.cycles_multi);
            prev = best.cycles_multi;
        }
    }
}

#[test]
fn pipeline_matches_exhaustive_search_on_most_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut same, mut total) = (0, 0);
    while total < 100 {
        let k = if rng.gen_bool(0.5) { 3 } else { 5 };
        let ih = rng.gen_range(k..=12);
        let iw = rng.gen_range(k..=12);
        let layer = LayerSpec::new("r", ih, iw, k, rng.gen_range(1..=32), rng.gen_range(1..=32), 1).unwrap();
        let Ok(array) = ArrayConfig::single(rng.gen_range(k * k..=64), rng.gen_range(8..=64)) else {
            continue;
        };
        if array.check_layer(&layer).is_err() {
            continue;
        }
        total += 1;
        let fast = tetris_pipeline(&layer, &array).unwrap();
        let seed = cimmap::baseline::search_vw_sdk(&layer, &array).unwrap();
        assert!(fast.total_cycles_single <= seed.total_cycles_single);
        let slow = brute_force_best_plan(&layer, &array, SearchSpace::Tetris { heads: HeadRule::SeedFactors }).unwrap();
        assert!(slow.total_cycles_single <= fast.total_cycles_single, "{layer:?}");
        if slow.total_cycles_single == fast.total_cycles_single {
            same += 1;
        }
    }
    println!("pipeline optimal on {same}/{total}");
    assert!(same * 100 >= total * 95, "{same}/{total}");
}
