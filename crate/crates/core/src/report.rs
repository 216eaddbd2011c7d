//! Runs several mappers over a network and renders the comparison as a table, CSV or JSON.

use std::fmt::Write as _;
use std::str::FromStr;

use log::warn;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{edap_proxy, macro_search};
use crate::grouping::{default_candidates, group_sweep, AccuracyTable};
use crate::model::{ArrayConfig, LayerSpec, Mapper, MappingPlan};
use crate::options::MapOptions;
use crate::scalar::Scalar;
use crate::Exact;

/// Group count used by the TetrisG mapper.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupChoice {
    Fixed(u32),
    /// Per-layer sweep over candidates (default: small divisors) behind an accuracy gate.
    Sweep {
        candidates: Option<Vec<u32>>,
        table: AccuracyTable,
    },
}

impl Default for GroupChoice {
    fn default() -> Self {
        GroupChoice::Fixed(2)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Comparison {
    pub mappers: Vec<Mapper>,
    pub groups: GroupChoice,
    pub options: MapOptions,
    pub grid_search: bool,
}

impl Comparison {
    pub fn new(mappers: Vec<Mapper>) -> Self {
        Comparison {
            mappers,
            ..Default::default()
        }
    }
}

fn fixed_groups(layer: &LayerSpec, g: u32) -> u32 {
    let common = layer.in_channels().gcd(&layer.out_channels());
    let fit = (1..=g).rev().find(|d| g % d == 0 && common % d == 0).unwrap_or(1);
    if fit != g {
        warn!("{}: G={g} does not divide the channels, using G={fit}", layer.name());
    }
    fit
}

/// Plans of one mapper for every layer. TetrisG resolves its group count per layer.
pub fn map_network(
    network: &[LayerSpec],
    array: &ArrayConfig,
    mapper: Mapper,
    cmp: &Comparison,
) -> Result<Vec<MappingPlan>> {
    network
        .iter()
        .map(|l| {
            if mapper != Mapper::TetrisG {
                return crate::map_layer(l, array, mapper, &cmp.options);
            }
            match &cmp.groups {
                GroupChoice::Fixed(g) => {
                    let grouped = l.with_groups(fixed_groups(l, *g))?;
                    crate::map_layer(&grouped, array, mapper, &cmp.options)
                }
                GroupChoice::Sweep { candidates, table } => {
                    let cands = candidates.clone().unwrap_or_else(|| default_candidates(l));
                    Ok(group_sweep(l, array, &cands, table, &cmp.options)?.plan)
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub mapper: Mapper,
    pub groups: u32,
    pub windows: Vec<String>,
    pub cycles: u64,
    pub utilization_pct: Exact,
    pub pruned: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerRow {
    pub name: String,
    pub ifm_h: u32,
    pub ifm_w: u32,
    pub kernel: u32,
    pub in_channels: u32,
    pub out_channels: u32,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Total {
    pub mapper: Mapper,
    pub cycles: u64,
}

/// `ratio = cycles(baseline) / cycles(mapper)` or, for the proxy, `edap(mapper) / edap(baseline)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub mapper: Mapper,
    pub baseline: Mapper,
    pub ratio: Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRow {
    pub mapper: Mapper,
    pub rows: u32,
    pub cols: u32,
    pub cycles_multi: u64,
    pub active_macros: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub array: ArrayConfig,
    pub layers: Vec<LayerRow>,
    pub totals: Vec<Total>,
    pub speedups: Vec<Ratio>,
    pub grids: Vec<GridRow>,
    /// Analytic EDAP proxy ratios; not calibrated to any circuit model.
    pub edap_proxy: Vec<Ratio>,
}

impl CostReport {
    pub fn total(&self, mapper: Mapper) -> Option<u64> {
        self.totals.iter().find(|t| t.mapper == mapper).map(|t| t.cycles)
    }

    pub fn speedup(&self, mapper: Mapper, baseline: Mapper) -> Option<Exact> {
        self.speedups
            .iter()
            .find(|s| s.mapper == mapper && s.baseline == baseline)
            .map(|s| s.ratio)
    }

    pub fn edap(&self, mapper: Mapper, baseline: Mapper) -> Option<Exact> {
        self.edap_proxy
            .iter()
            .find(|s| s.mapper == mapper && s.baseline == baseline)
            .map(|s| s.ratio)
    }

    pub fn grid(&self, mapper: Mapper) -> Option<&GridRow> {
        self.grids.iter().find(|g| g.mapper == mapper)
    }

    fn mappers(&self) -> Vec<Mapper> {
        self.totals.iter().map(|t| t.mapper).collect()
    }
}

fn ratio(num: u128, den: u128) -> Exact {
    if den == 0 {
        Exact::from_integer(0)
    } else {
        Exact::new(num, den)
    }
}

/// Maps the network with every selected mapper and collects totals and ratios.
pub fn run_comparison(network: &[LayerSpec], array: &ArrayConfig, cmp: &Comparison) -> Result<CostReport> {
    if cmp.mappers.is_empty() {
        return Err(Error::NoMapper);
    }
    let plans: Vec<Vec<MappingPlan>> = cmp
        .mappers
        .iter()
        .map(|&m| map_network(network, array, m, cmp))
        .collect::<Result<_>>()?;
    let layers = network
        .iter()
        .enumerate()
        .map(|(i, l)| LayerRow {
            name: l.name().to_string(),
            ifm_h: l.ifm_h(),
            ifm_w: l.ifm_w(),
            kernel: l.kernel(),
            in_channels: l.in_channels(),
            out_channels: l.out_channels(),
            cells: plans
                .iter()
                .map(|ps| {
                    let p = &ps[i];
                    Cell {
                        mapper: p.mapper,
                        groups: p.groups(),
                        windows: p.tuples(),
                        cycles: p.total_cycles_single,
                        utilization_pct: p.utilization_pct,
                        pruned: p.total_pruned_channels,
                    }
                })
                .collect(),
        })
        .collect();
    let totals: Vec<Total> = cmp
        .mappers
        .iter()
        .zip(&plans)
        .map(|(&mapper, ps)| Total {
            mapper,
            cycles: ps.iter().map(|p| p.total_cycles_single).sum(),
        })
        .collect();
    let mut speedups = Vec::new();
    for (i, b) in totals.iter().enumerate() {
        for a in &totals[i + 1..] {
            speedups.push(Ratio {
                mapper: a.mapper,
                baseline: b.mapper,
                ratio: ratio(b.cycles as u128, a.cycles as u128),
            });
        }
    }
    let mut grids = Vec::new();
    let mut edap = Vec::new();
    if cmp.grid_search {
        for (&m, ps) in cmp.mappers.iter().zip(&plans) {
            let net: Vec<LayerSpec> = ps.iter().map(|p| p.layer.clone()).collect();
            let s = macro_search(&net, array, array.max_macros(), m, &cmp.options)?;
            grids.push(GridRow {
                mapper: m,
                rows: s.best.rows,
                cols: s.best.cols,
                cycles_multi: s.best.cycles_multi,
                active_macros: s.best.active_macros,
            });
        }
        let proxy = |g: &GridRow| {
            edap_proxy(
                &crate::model::MacroGrid {
                    rows: g.rows,
                    cols: g.cols,
                    cycles_multi: g.cycles_multi,
                    active_macros: g.active_macros,
                },
                array,
            )
        };
        for (i, b) in grids.iter().enumerate() {
            for a in &grids[i + 1..] {
                edap.push(Ratio {
                    mapper: a.mapper,
                    baseline: b.mapper,
                    ratio: ratio(proxy(a), proxy(b)),
                });
            }
        }
    }
    Ok(CostReport {
        array: *array,
        layers,
        totals,
        speedups,
        grids,
        edap_proxy: edap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

pub fn emit_report(report: &CostReport, format: Format) -> String {
    match format {
        Format::Table => render_table(report),
        Format::Csv => render_csv(report),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

/// Renders `report` in the format named by `format`.
pub fn emit_report_named(report: &CostReport, format: &str) -> Result<String> {
    Ok(emit_report(report, format.parse()?))
}

fn decimal(r: Exact, places: usize) -> String {
    format!("{:.*}", places, r.to_f64())
}

fn pad_rows(rows: &[Vec<String>]) -> String {
    let n = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..n)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        out.push_str(line.join(" | ").trim_end());
        out.push('\n');
    }
    out
}

fn render_table(report: &CostReport) -> String {
    let mappers = report.mappers();
    let mut header = vec!["Layer".to_string(), "IFMs".to_string(), "Kernel".to_string()];
    for m in &mappers {
        header.push(format!("{m} (PW_w x PW_h x IC_t x OC_t)"));
        header.push(format!("{m} cycles"));
    }
    let mut rows = vec![header];
    if report.layers.is_empty() {
        return pad_rows(&rows);
    }
    for l in &report.layers {
        let mut r = vec![
            l.name.clone(),
            format!("{}x{}", l.ifm_h, l.ifm_w),
            format!("{}x{}x{}", l.kernel, l.in_channels, l.out_channels),
        ];
        for c in &l.cells {
            let mut w = c.windows.join(", ");
            if c.groups > 1 {
                write!(w, " (G={})", c.groups).unwrap();
            }
            if c.pruned > 0 {
                write!(w, " (-{} ch)", c.pruned).unwrap();
            }
            r.push(w);
            r.push(c.cycles.to_string());
        }
        rows.push(r);
    }
    let mut total = vec!["total cycles".to_string(), String::new(), String::new()];
    for t in &report.totals {
        total.push(String::new());
        total.push(t.cycles.to_string());
    }
    rows.push(total);
    let mut out = pad_rows(&rows);

    out.push_str("\nutilization (%)\n");
    let mut urows = vec![std::iter::once("Layer".to_string())
        .chain(mappers.iter().map(|m| m.to_string()))
        .collect::<Vec<_>>()];
    for l in &report.layers {
        urows.push(
            std::iter::once(l.name.clone())
                .chain(l.cells.iter().map(|c| decimal(c.utilization_pct, 2)))
                .collect(),
        );
    }
    out.push_str(&pad_rows(&urows));

    if !report.speedups.is_empty() {
        out.push_str("\nspeedup (baseline cycles / mapper cycles)\n");
        for s in &report.speedups {
            writeln!(
                out,
                "{} over {}: {} = {}",
                s.mapper,
                s.baseline,
                s.ratio,
                decimal(s.ratio, 3)
            )
            .unwrap();
        }
    }
    if !report.grids.is_empty() {
        writeln!(out, "\nmacro grid (budget {} macros)", report.array.max_macros()).unwrap();
        for g in &report.grids {
            writeln!(
                out,
                "{}: {}x{} grid, {} cycles, {} active macros",
                g.mapper, g.rows, g.cols, g.cycles_multi, g.active_macros
            )
            .unwrap();
        }
    }
    if !report.edap_proxy.is_empty() {
        out.push_str("\nEDAP proxy ratio (analytic, not circuit-calibrated)\n");
        for s in &report.edap_proxy {
            writeln!(
                out,
                "{} / {}: {} = {}",
                s.mapper,
                s.baseline,
                s.ratio,
                decimal(s.ratio, 4)
            )
            .unwrap();
        }
    }
    out
}

const CSV_HEADER: &str =
    "record,layer,ifm,kernel,mapper,groups,windows,cycles,utilization,pruned,rows,cols,active,bits,macros,baseline,ratio";

#[derive(Default)]
struct CsvRow {
    record: &'static str,
    layer: String,
    ifm: String,
    kernel: String,
    mapper: String,
    groups: String,
    windows: String,
    cycles: String,
    utilization: String,
    pruned: String,
    rows: String,
    cols: String,
    active: String,
    bits: String,
    macros: String,
    baseline: String,
    ratio: String,
}

impl CsvRow {
    fn line(&self) -> String {
        [
            self.record,
            &self.layer,
            &self.ifm,
            &self.kernel,
            &self.mapper,
            &self.groups,
            &self.windows,
            &self.cycles,
            &self.utilization,
            &self.pruned,
            &self.rows,
            &self.cols,
            &self.active,
            &self.bits,
            &self.macros,
            &self.baseline,
            &self.ratio,
        ]
        .join(",")
    }
}

fn render_csv(report: &CostReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    if report.layers.is_empty() {
        return out;
    }
    let mut lines = vec![CsvRow {
        record: "array",
        rows: report.array.rows().to_string(),
        cols: report.array.cols().to_string(),
        bits: report.array.weight_bits().to_string(),
        macros: report.array.max_macros().to_string(),
        ..Default::default()
    }];
    for l in &report.layers {
        for c in &l.cells {
            lines.push(CsvRow {
                record: "layer",
                layer: l.name.clone(),
                ifm: format!("{}x{}", l.ifm_h, l.ifm_w),
                kernel: format!("{}x{}x{}", l.kernel, l.in_channels, l.out_channels),
                mapper: c.mapper.to_string(),
                groups: c.groups.to_string(),
                windows: c.windows.join(";"),
                cycles: c.cycles.to_string(),
                utilization: c.utilization_pct.to_string(),
                pruned: c.pruned.to_string(),
                ..Default::default()
            });
        }
    }
    for t in &report.totals {
        lines.push(CsvRow {
            record: "total",
            mapper: t.mapper.to_string(),
            cycles: t.cycles.to_string(),
            ..Default::default()
        });
    }
    for (record, list) in [("speedup", &report.speedups), ("edap", &report.edap_proxy)] {
        for s in list {
            lines.push(CsvRow {
                record,
                mapper: s.mapper.to_string(),
                baseline: s.baseline.to_string(),
                ratio: s.ratio.to_string(),
                ..Default::default()
            });
        }
    }
    for g in &report.grids {
        lines.push(CsvRow {
            record: "grid",
            mapper: g.mapper.to_string(),
            cycles: g.cycles_multi.to_string(),
            rows: g.rows.to_string(),
            cols: g.cols.to_string(),
            active: g.active_macros.to_string(),
            ..Default::default()
        });
    }
    for l in lines {
        out.push_str(&l.line());
        out.push('\n');
    }
    out
}

fn pair(s: &str, line: usize) -> Result<(u32, u32)> {
    let bad = || Error::Parse {
        line,
        message: format!("expected AxB, got `{s}`"),
    };
    let (a, b) = s.split_once('x').ok_or_else(bad)?;
    Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
}

fn num<T: FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad number `{s}`"),
    })
}

/// Reads back the CSV written by [`emit_report`]. Header-only input gives an empty report
/// on a default array.
pub fn parse_csv_report(text: &str) -> Result<CostReport> {
    let mut report = CostReport {
        array: ArrayConfig::single(1, 1).expect("valid"),
        layers: Vec::new(),
        totals: Vec::new(),
        speedups: Vec::new(),
        grids: Vec::new(),
        edap_proxy: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate().skip(1) {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split(',').collect();
        if f.len() != 17 {
            return Err(Error::Parse {
                line,
                message: format!("expected 17 fields, got {}", f.len()),
            });
        }
        match f[0] {
            "array" => {
                report.array = ArrayConfig::new(num(f[10], line)?, num(f[11], line)?, num(f[13], line)?, num(f[14], line)?)?;
            }
            "layer" => {
                let (ifm_h, ifm_w) = pair(f[2], line)?;
                let ks: Vec<&str> = f[3].split('x').collect();
                if ks.len() != 3 {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected KxICxOC, got `{}`", f[3]),
                    });
                }
                let cell = Cell {
                    mapper: f[4].parse()?,
                    groups: num(f[5], line)?,
                    windows: f[6].split(';').filter(|s| !s.is_empty()).map(str::to_string).collect(),
                    cycles: num(f[7], line)?,
                    utilization_pct: num(f[8], line)?,
                    pruned: num(f[9], line)?,
                };
                match report.layers.last_mut() {
                    Some(l) if l.name == f[1] => l.cells.push(cell),
                    _ => report.layers.push(LayerRow {
                        name: f[1].to_string(),
                        ifm_h,
                        ifm_w,
                        kernel: num(ks[0], line)?,
                        in_channels: num(ks[1], line)?,
                        out_channels: num(ks[2], line)?,
                        cells: vec![cell],
                    }),
                }
            }
            "total" => report.totals.push(Total {
                mapper: f[4].parse()?,
                cycles: num(f[7], line)?,
            }),
            "speedup" | "edap" => {
                let r = Ratio {
                    mapper: f[4].parse()?,
                    baseline: f[15].parse()?,
                    ratio: num(f[16], line)?,
                };
                if f[0] == "speedup" {
                    report.speedups.push(r);
                } else {
                    report.edap_proxy.push(r);
                }
            }
            "grid" => report.grids.push(GridRow {
                mapper: f[4].parse()?,
                rows: num(f[10], line)?,
                cols: num(f[11], line)?,
                cycles_multi: num(f[7], line)?,
                active_macros: num(f[12], line)?,
            }),
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown record `{other}`"),
                })
            }
        }
    }
    Ok(report)
}
