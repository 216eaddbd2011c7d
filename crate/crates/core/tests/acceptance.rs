//! One test per acceptance criterion. Each prints a single PASS/FAIL line before asserting.

use std::time::{Duration, Instant};

use cimmap::grid::macro_search;
use cimmap::grouping::{conv_counts, grouped_counts};
use cimmap::network::bundled_network;
use cimmap::oracle::verify_plan;
use cimmap::report::{map_network, run_comparison, Comparison, CostReport};
use cimmap::{map_layer, ArrayConfig, Exact, LayerSpec, MapOptions, Mapper, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIG5_BUDGET: Duration = Duration::from_secs(1);
const TABLE_BUDGET: Duration = Duration::from_secs(10);
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
/// Allowed distance from the headline speedups.
const SPEEDUP_TOLERANCE: f64 = 0.1;
const RANDOM_LAYERS: usize = 500;

fn verdict(id: u32, what: &str, ok: bool, detail: &str) {
    println!("{} criterion {id}: {what} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id}: {what}: {detail}");
}

fn network(name: &str) -> Vec<LayerSpec> {
    bundled_network(name).unwrap().unwrap()
}

fn table_array() -> ArrayConfig {
    ArrayConfig::single(512, 512).unwrap()
}

const TABLE_MAPPERS: [Mapper; 4] = [Mapper::VwSdk, Mapper::VwcSdk, Mapper::Tetris, Mapper::TetrisG];

fn table_report(name: &str) -> CostReport {
    run_comparison(&network(name), &table_array(), &Comparison::new(TABLE_MAPPERS.to_vec())).unwrap()
}

fn random_case(rng: &mut ChaCha8Rng) -> (LayerSpec, ArrayConfig) {
    loop {
        let k = if rng.gen_bool(0.5) { 3 } else { 5 };
        let layer = LayerSpec::new(
            "r",
            rng.gen_range(k..=14),
            rng.gen_range(k..=14),
            k,
            rng.gen_range(1..=32),
            rng.gen_range(1..=32),
            1,
        )
        .unwrap();
        let Ok(array) = ArrayConfig::single(rng.gen_range(k * k..=64), rng.gen_range(1..=64)) else {
            continue;
        };
        if array.check_layer(&layer).is_ok() {
            return (layer, array);
        }
    }
}

#[test]
fn criterion_1_tiny_layer() {
    let expected = [
        (Mapper::Img2col, 18),
        (Mapper::Sdk, 24),
        (Mapper::VwSdk, 24),
        (Mapper::VwcSdk, 12),
        (Mapper::Tetris, 14),
        (Mapper::TetrisG, 8),
    ];
    let start = Instant::now();
    let layer = &network("tiny")[0];
    let array = ArrayConfig::new(40, 15, 5, 1).unwrap();
    let mut got = Vec::new();
    for (m, want) in expected {
        let l = if m == Mapper::TetrisG {
            layer.with_groups(2).unwrap_or_else(|_| layer.clone())
        } else {
            layer.clone()
        };
        let plan = map_layer(&l, &array, m, &MapOptions::default()).unwrap();
        got.push((m, want, plan.total_cycles_single, l.groups()));
    }
    let elapsed = start.elapsed();
    let ok = got.iter().all(|&(_, w, c, _)| w == c) && elapsed < FIG5_BUDGET;
    let detail = got
        .iter()
        .map(|(m, w, c, g)| format!("{m} {c} want {w}{}", if *g == 1 && *m == Mapper::TetrisG { " at G=1" } else { "" }))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(1, "tiny 5x5 layer on a 40x15 array", ok, &format!("{detail}; {elapsed:?}"));
}

#[test]
fn criterion_2_table_totals() {
    let want = [
        ("cnn8", [128, 109, 116, 84]),
        ("inception", [627, 506, 557, 470]),
    ];
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, totals) in want {
        let r = table_report(name);
        for row in &r.layers {
            let cells: Vec<String> = row
                .cells
                .iter()
                .map(|c| format!("{} {} [{}]", c.mapper, c.cycles, c.windows.join(", ")))
                .collect();
            println!("  {name} {}: {}", row.name, cells.join(" | "));
        }
        for (m, w) in TABLE_MAPPERS.iter().zip(totals) {
            let got = r.total(*m).unwrap();
            ok &= got == w;
            detail.push(format!("{name} {m} {got} want {w}"));
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < TABLE_BUDGET;
    verdict(2, "reference network totals on 512x512", ok, &format!("{}; {elapsed:?}", detail.join(", ")));
}

#[test]
fn criterion_3_cnn8_layer3() {
    let layer = &network("cnn8")[1];
    let array = table_array();
    let vw = map_layer(layer, &array, Mapper::VwSdk, &MapOptions::default()).unwrap();
    let t = map_layer(layer, &array, Mapper::Tetris, &MapOptions::default()).unwrap();
    let marginal = t.tiles[0].n_marginal;
    let ok = vw.total_cycles_single == 48 && t.total_cycles_single == 38 && t.total_pruned_channels == 1 && marginal == 2;
    verdict(
        3,
        "CNN8 layer 3 drops 48 -> 38",
        ok,
        &format!(
            "{} -> {}, {marginal} marginal windows, {} pruned",
            vw.total_cycles_single, t.total_cycles_single, t.total_pruned_channels
        ),
    );
}

#[test]
fn criterion_4_headline_speedups() {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, headline) in [("cnn8", 1.2), ("inception", 1.3)] {
        let s: f64 = table_report(name)
            .speedup(Mapper::TetrisG, Mapper::VwcSdk)
            .unwrap()
            .to_f64();
        ok &= (s - headline).abs() <= SPEEDUP_TOLERANCE;
        detail.push(format!("{name} {s:.3} vs {headline}"));
    }
    verdict(4, "TetrisG over VWC-SDK speedups within 0.1", ok, &detail.join(", "));
}

#[test]
fn criterion_5_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = Instant::now();
    let mut bad = Vec::new();
    for _ in 0..RANDOM_LAYERS {
        let (layer, array) = random_case(&mut rng);
        for m in Mapper::ALL {
            let l = if m == Mapper::TetrisG {
                layer.with_groups(2).unwrap_or_else(|_| layer.clone())
            } else {
                layer.clone()
            };
            let plan = map_layer(&l, &array, m, &MapOptions::default()).unwrap();
            let cov = verify_plan(&plan, &array);
            let oob_ok = !matches!(m, Mapper::Tetris | Mapper::TetrisG) || cov.out_of_bounds.is_empty();
            if !cov.agrees(&plan) || !oob_ok {
                bad.push(format!("{m} {l:?}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = bad.is_empty() && elapsed < ORACLE_BUDGET;
    verdict(
        5,
        "oracle replay equals analytic cycles",
        ok,
        &format!("{} layers x {} mappers, {} disagreements; {elapsed:?}", RANDOM_LAYERS, Mapper::ALL.len(), bad.len()),
    );
}

#[test]
fn criterion_6_ordering_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = MapOptions::default();
    let mut bad = 0;
    let cyc = |l: &LayerSpec, a: &ArrayConfig, m| map_layer(l, a, m, &opts).unwrap().total_cycles_single;
    for _ in 0..RANDOM_LAYERS {
        let (l, a) = random_case(&mut rng);
        let vw = cyc(&l, &a, Mapper::VwSdk);
        let t = cyc(&l, &a, Mapper::Tetris);
        let holds = t <= vw
            && vw <= cyc(&l, &a, Mapper::Img2col).max(cyc(&l, &a, Mapper::Sdk))
            && cyc(&l, &a, Mapper::VwcSdk) <= vw
            && cyc(&l, &a, Mapper::TetrisG) == t;
        bad += usize::from(!holds);
    }
    let mut grid_bad = 0;
    for _ in 0..20 {
        let (l1, a) = random_case(&mut rng);
        let (l2, _) = random_case(&mut rng);
        let Ok(()) = a.check_layer(&l2) else { continue };
        let mut prev = u64::MAX;
        for p in 1..=8 {
            let c = macro_search(&[l1.clone(), l2.clone()], &a, p, Mapper::Tetris, &opts).unwrap().best.cycles_multi;
            grid_bad += usize::from(c > prev);
            prev = c;
        }
    }
    verdict(
        6,
        "mapper ordering and grid monotonicity",
        bad == 0 && grid_bad == 0,
        &format!("{bad}/{RANDOM_LAYERS} ordering violations, {grid_bad} grid violations"),
    );
}

#[test]
fn criterion_7_grouped_count_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = 0;
    let mut checked = 0;
    for _ in 0..RANDOM_LAYERS {
        let k = rng.gen_range(1..=7);
        let i = k + rng.gen_range(0..=20);
        let layer = LayerSpec::new("g", i, i, k, rng.gen_range(1..=256), rng.gen_range(1..=256), 1).unwrap();
        let (params, ops) = conv_counts(&layer);
        for g in (1..=layer.in_channels()).filter(|g| layer.in_channels() % g == 0 && layer.out_channels() % g == 0) {
            let (gp, gops) = grouped_counts(&layer, g).unwrap();
            checked += 1;
            bad += usize::from(gp * g as u128 != params || gops * g as u128 != ops);
        }
    }
    verdict(7, "NG_params = N_params/G and NG_op = N_op/G", bad == 0, &format!("{checked} divisor cases, {bad} mismatches"));
}

#[test]
fn criterion_8_edap_proxy_direction() {
    let net = network("cnn8");
    let array = table_array().with_macros(8).unwrap();
    let cmp = Comparison {
        grid_search: true,
        ..Comparison::new(vec![Mapper::Tetris, Mapper::TetrisG])
    };
    let r = run_comparison(&net, &array, &cmp).unwrap();
    let (t, g) = (r.grid(Mapper::Tetris).unwrap(), r.grid(Mapper::TetrisG).unwrap());
    let proxy: Exact = r.edap(Mapper::TetrisG, Mapper::Tetris).unwrap();
    // Premise of the scenario: TetrisG needs no more cycles than Tetris.
    let premise = g.cycles_multi <= t.cycles_multi;
    let ok = premise && proxy < Exact::from_integer(1);
    let grouped = map_network(&net, &array, Mapper::TetrisG, &cmp).unwrap();
    verdict(
        8,
        "EDAP proxy TetrisG/Tetris below 1 at P=8",
        ok,
        &format!(
            "tetris {}x{} {} cycles {} active, tetrisg {}x{} {} cycles {} active (G={}), proxy {proxy} = {:.4}",
            t.rows,
            t.cols,
            t.cycles_multi,
            t.active_macros,
            g.rows,
            g.cols,
            g.cycles_multi,
            g.active_macros,
            grouped[0].groups(),
            proxy.to_f64()
        ),
    );
}
