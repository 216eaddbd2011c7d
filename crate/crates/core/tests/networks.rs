use cimmap::network::{bundled_names, bundled_network};
use cimmap::oracle::verify_plan;
use cimmap::report::{emit_report, parse_csv_report, run_comparison, Comparison, Format};
use cimmap::{map_layer, ArrayConfig, GroupSchedule, MapOptions, Mapper};

#[test]
fn every_bundled_plan_passes_the_oracle() {
    for name in bundled_names() {
        let net = bundled_network(name).unwrap().unwrap();
        for array in [ArrayConfig::single(512, 512).unwrap(), ArrayConfig::new(256, 128, 2, 1).unwrap()] {
            for m in Mapper::ALL {
                for layer in &net {
                    if array.check_layer(layer).is_err() {
                        continue;
                    }
                    let plan = map_layer(layer, &array, m, &MapOptions::default()).unwrap();
                    let cov = verify_plan(&plan, &array);
                    assert!(cov.agrees(&plan), "{name} {} {m}: {cov:?}", layer.name());
                }
            }
        }
    }
}

#[test]
fn schedules_order_grouped_cycles() {
    let net = bundled_network("cnn8").unwrap().unwrap();
    let array = ArrayConfig::single(512, 512).unwrap();
    let total = |s| {
        net.iter()
            .map(|l| {
                let opts = MapOptions { schedule: s, ..Default::default() };
                map_layer(&l.with_groups(2).unwrap(), &array, Mapper::TetrisG, &opts)
                    .unwrap()
                    .total_cycles_single
            })
            .sum::<u64>()
    };
    let (serial, packed, concurrent) = (total(GroupSchedule::Serial), total(GroupSchedule::Packed), total(GroupSchedule::Concurrent));
    assert!(concurrent <= packed && packed <= serial, "{concurrent} {packed} {serial}");
}

#[test]
fn densenet_report_round_trips_through_csv() {
    let net = bundled_network("densenet40").unwrap().unwrap();
    let array = ArrayConfig::single(512, 512).unwrap();
    let cmp = Comparison {
        grid_search: true,
        ..Comparison::new(vec![Mapper::VwSdk, Mapper::Tetris, Mapper::TetrisG])
    };
    let r = run_comparison(&net, &array.with_macros(4).unwrap(), &cmp).unwrap();
    assert!(r.total(Mapper::Tetris).unwrap() <= r.total(Mapper::VwSdk).unwrap());
    let back = parse_csv_report(&emit_report(&r, Format::Csv)).unwrap();
    assert_eq!(back, r);
}
