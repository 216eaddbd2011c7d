//! Grouped convolutions: parameter and operation counts, the grouped window search, and
//! the sweep that picks a group count under an accuracy gate.

use std::collections::BTreeMap;

use log::{debug, warn};
use num_integer::Integer;

use crate::error::{Error, Result};
use crate::model::{ArrayConfig, LayerSpec, Mapper, MappingPlan};
use crate::options::MapOptions;
use crate::tetris::tetris_plan;

/// Per-group channel counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupedDims {
    pub ic_g: u32,
    pub oc_g: u32,
    pub groups: u32,
}

impl GroupedDims {
    pub fn new(in_channels: u32, out_channels: u32, groups: u32) -> Result<Self> {
        if groups == 0 || in_channels % groups != 0 || out_channels % groups != 0 {
            return Err(Error::GroupDoesNotDivide {
                groups,
                in_channels,
                out_channels,
            });
        }
        Ok(GroupedDims {
            ic_g: in_channels / groups,
            oc_g: out_channels / groups,
            groups,
        })
    }
}

/// Weights and multiply-accumulates of the layer as a plain convolution.
pub fn conv_counts(layer: &LayerSpec) -> (u128, u128) {
    let k = layer.kernel() as u128;
    let params = k * k * layer.in_channels() as u128 * layer.out_channels() as u128;
    let outputs = layer.out_h() as u128 * layer.out_w() as u128;
    (params, params * outputs)
}

/// Weights and multiply-accumulates with `groups` groups.
pub fn grouped_counts(layer: &LayerSpec, groups: u32) -> Result<(u128, u128)> {
    let g = GroupedDims::new(layer.in_channels(), layer.out_channels(), groups)?;
    let k = layer.kernel() as u128;
    let params = k * k * g.ic_g as u128 * g.oc_g as u128 * g.groups as u128;
    let outputs = layer.out_h() as u128 * layer.out_w() as u128;
    Ok((params, params * outputs))
}

/// The Tetris pipeline on per-group channel counts.
pub fn tetrisg_search(layer: &LayerSpec, array: &ArrayConfig, groups: u32) -> Result<MappingPlan> {
    tetrisg_search_with(layer, array, groups, &MapOptions::default())
}

pub fn tetrisg_search_with(
    layer: &LayerSpec,
    array: &ArrayConfig,
    groups: u32,
    opts: &MapOptions,
) -> Result<MappingPlan> {
    let grouped = layer.with_groups(groups)?;
    tetris_plan(&grouped, array, opts, Mapper::TetrisG)
}

/// Divisors of `gcd(IC, OC)` up to 8.
pub fn default_candidates(layer: &LayerSpec) -> Vec<u32> {
    let g = layer.in_channels().gcd(&layer.out_channels());
    (1..=8.min(g)).filter(|d| g % d == 0).collect()
}

/// Externally measured accuracy change per layer and group count, in percent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccuracyTable {
    entries: BTreeMap<(String, u32), f64>,
}

/// Largest accuracy drop still accepted, in percent.
pub const ACCURACY_GATE: f64 = -0.5;

impl AccuracyTable {
    pub fn insert(&mut self, layer: impl Into<String>, groups: u32, delta: f64) {
        self.entries.insert((layer.into(), groups), delta);
    }

    pub fn get(&self, layer: &str, groups: u32) -> Option<f64> {
        self.entries.get(&(layer.to_string(), groups)).copied()
    }

    /// A group count passes when its measured delta is at least the gate. `G = 1` is
    /// the unmodified layer and passes without an entry; any other missing entry fails.
    pub fn admits(&self, layer: &str, groups: u32) -> bool {
        match self.get(layer, groups) {
            Some(d) => d >= ACCURACY_GATE,
            None => groups == 1,
        }
    }

    /// Parses `layer,G,delta` rows. Blank lines, `#` comments and a header are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = AccuracyTable::default();
        let mut first = true;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let err = |message: String| Error::Parse { line: i + 1, message };
            if cols.len() != 3 {
                return Err(err(format!("expected layer,G,delta, got `{line}`")));
            }
            let header = std::mem::replace(&mut first, false);
            let Ok(g) = cols[1].parse::<u32>() else {
                if header {
                    continue;
                }
                return Err(err(format!("bad group count `{}`", cols[1])));
            };
            let delta = cols[2]
                .trim_end_matches('%')
                .parse::<f64>()
                .map_err(|_| err(format!("bad accuracy delta `{}`", cols[2])))?;
            table.insert(cols[0], g, delta);
        }
        Ok(table)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub groups: u32,
    pub plan: MappingPlan,
    /// No candidate passed the gate and the ungrouped layer was used.
    pub fallback: bool,
}

/// Group count with the fewest cycles among candidates that pass the accuracy gate.
/// Ties go to the larger group count.
pub fn group_sweep(
    layer: &LayerSpec,
    array: &ArrayConfig,
    candidates: &[u32],
    table: &AccuracyTable,
    opts: &MapOptions,
) -> Result<SweepResult> {
    if candidates.is_empty() {
        return Err(Error::NoAdmissibleGroup);
    }
    let mut best: Option<(u32, MappingPlan)> = None;
    for &g in candidates {
        if !table.admits(layer.name(), g) {
            debug!("sweep {}: G={g} fails the accuracy gate", layer.name());
            continue;
        }
        let Ok(plan) = tetrisg_search_with(layer, array, g, opts) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((bg, bp)) => {
                plan.total_cycles_single < bp.total_cycles_single
                    || (plan.total_cycles_single == bp.total_cycles_single && g > *bg)
            }
        };
        if better {
            best = Some((g, plan));
        }
    }
    match best {
        Some((groups, plan)) => Ok(SweepResult {
            groups,
            plan,
            fallback: false,
        }),
        None => {
            warn!("{}: {}; using G=1", layer.name(), Error::NoAdmissibleGroup);
            Ok(SweepResult {
                groups: 1,
                plan: tetrisg_search_with(layer, array, 1, opts)?,
                fallback: true,
            })
        }
    }
}
