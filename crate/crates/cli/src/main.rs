use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use log::info;

use cimmap::grouping::AccuracyTable;
use cimmap::network::{bundled_names, bundled_network, load_network};
use cimmap::oracle::verify_plan;
use cimmap::report::{emit_report, map_network, run_comparison, Comparison, Format, GroupChoice};
use cimmap::{ArrayConfig, GroupSchedule, LayerSpec, MapOptions, Mapper, PrunePolicy};

/// Search parallel-window mappings of convolution layers onto CIM macros.
#[derive(Debug, Parser)]
#[command(name = "cimmap", version)]
struct Args {
    /// Network file (name,I_h,I_w,K,IC,OC[,G]) or a bundled name: cnn8, inception, densenet40, tiny
    #[arg(long)]
    network: String,

    /// Array size as ROWSxCOLS
    #[arg(long, default_value = "512x512")]
    array: String,

    #[arg(long, default_value_t = 1)]
    weight_bits: u32,

    /// Macro budget for the grid search
    #[arg(long, default_value_t = 1)]
    macros: u32,

    /// Comma-separated mappers: img2col,sdk,vw-sdk,vwc-sdk,tetris,tetrisg
    #[arg(long, default_value = "vw-sdk,vwc-sdk,tetris,tetrisg")]
    mapper: String,

    /// Group count for tetrisg, or `sweep`
    #[arg(long, default_value = "2")]
    group: String,

    /// Accuracy deltas (layer,G,delta%) consulted by `--group sweep`
    #[arg(long)]
    accuracy_table: Option<String>,

    /// How groups share a macro: packed, serial or concurrent
    #[arg(long, default_value = "packed")]
    group_schedule: String,

    /// Largest share of a layer's input channels that may be pruned, in percent
    #[arg(long, default_value_t = 3.0)]
    prune_budget: f64,

    /// table, csv or json
    #[arg(long, default_value = "table")]
    format: String,

    /// Replay every plan through the coverage oracle; exit nonzero on disagreement
    #[arg(long)]
    oracle: bool,

    /// Search macro grids up to the budget and report the EDAP proxy
    #[arg(long)]
    grid_search: bool,
}

fn parse_array(s: &str, bits: u32, macros: u32) -> Result<ArrayConfig> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("--array expects ROWSxCOLS, got `{s}`"))?;
    Ok(ArrayConfig::new(r.trim().parse()?, c.trim().parse()?, bits, macros)?)
}

fn network(spec: &str) -> Result<Vec<LayerSpec>> {
    if Path::new(spec).exists() {
        return Ok(load_network(spec)?);
    }
    match bundled_network(spec) {
        Some(n) => Ok(n?),
        None => bail!(
            "`{spec}` is neither a file nor a bundled network ({})",
            bundled_names().join(", ")
        ),
    }
}

fn run(args: Args) -> Result<bool> {
    let array = parse_array(&args.array, args.weight_bits, args.macros)?;
    let net = network(&args.network)?;
    let mappers = args
        .mapper
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Mapper>, _>>()?;
    let groups = if args.group == "sweep" {
        let table = match &args.accuracy_table {
            Some(p) => AccuracyTable::parse(
                &std::fs::read_to_string(p).with_context(|| format!("reading {p}"))?,
            )?,
            None => AccuracyTable::default(),
        };
        GroupChoice::Sweep {
            candidates: None,
            table,
        }
    } else {
        GroupChoice::Fixed(args.group.parse().context("--group expects a number or `sweep`")?)
    };
    let schedule: GroupSchedule = args.group_schedule.parse()?;
    let format: Format = args.format.parse()?;
    let cmp = Comparison {
        mappers: mappers.clone(),
        groups,
        options: MapOptions {
            prune: PrunePolicy::from_percent(args.prune_budget, 1),
            schedule,
            ..Default::default()
        },
        grid_search: args.grid_search,
    };
    let report = run_comparison(&net, &array, &cmp)?;
    print!("{}", emit_report(&report, format));

    let mut ok = true;
    if args.oracle {
        for &m in &mappers {
            for plan in map_network(&net, &array, m, &cmp)? {
                let sim = verify_plan(&plan, &array);
                if !sim.agrees(&plan) {
                    ok = false;
                    eprintln!(
                        "oracle disagreement: {m} layer {}: analytic {} replay {} covered {} ",
                        plan.layer.name(),
                        plan.total_cycles_single,
                        sim.replay_cycles,
                        sim.covered
                    );
                }
            }
        }
        info!("oracle replay finished");
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
