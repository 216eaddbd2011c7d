//! Macro-grid search and the EDAP proxy.
//!
//! The proxy is `cycles^2 * active * (AR * AC * active)`: delay squared times an energy
//! stand-in times an area stand-in. It is only meaningful as a ratio between mappers.

use crate::error::Result;
use crate::metrics::{active_macros, cycles_multi};
use crate::model::{ArrayConfig, LayerSpec, MacroGrid, Mapper, MappingPlan};
use crate::options::{GridShape, MapOptions};
use crate::scalar::Scalar;

/// Every `(r, c)` with `r * c <= p_max`.
pub fn enumerate_grids(p_max: u32) -> Vec<(u32, u32)> {
    (1..=p_max)
        .flat_map(|r| (1..=p_max / r).map(move |c| (r, c)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    pub best: MacroGrid,
    /// Plans re-searched for the winning grid, one per layer.
    pub plans: Vec<MappingPlan>,
    /// Every evaluated grid in enumeration order.
    pub candidates: Vec<MacroGrid>,
}

/// Maps the whole network once per grid and keeps the grid with the fewest cycles.
/// Ties prefer fewer active macros, then fewer rows.
pub fn macro_search(
    network: &[LayerSpec],
    array: &ArrayConfig,
    p_max: u32,
    mapper: Mapper,
    opts: &MapOptions,
) -> Result<GridSearch> {
    let mut best: Option<(MacroGrid, Vec<MappingPlan>)> = None;
    let mut candidates = Vec::new();
    for (r, c) in enumerate_grids(p_max.max(1)) {
        let o = MapOptions {
            grid: GridShape { rows: r, cols: c },
            ..*opts
        };
        let plans = network
            .iter()
            .map(|l| crate::map_layer(l, array, mapper, &o))
            .collect::<Result<Vec<_>>>()?;
        let cycles = plans.iter().map(|p| cycles_multi(p, r, c)).sum();
        let active = plans
            .iter()
            .map(|p| active_macros(p, r, c))
            .max()
            .unwrap_or(1);
        let grid = MacroGrid {
            rows: r,
            cols: c,
            cycles_multi: cycles,
            active_macros: active,
        };
        candidates.push(grid);
        let key = |g: &MacroGrid| (g.cycles_multi, g.active_macros, g.rows, g.cols);
        if best.as_ref().is_none_or(|(b, _)| key(&grid) < key(b)) {
            best = Some((grid, plans));
        }
    }
    let (best, plans) = best.expect("at least the 1x1 grid");
    Ok(GridSearch {
        best,
        plans,
        candidates,
    })
}

/// `cycles^2 * active * (AR * AC * active)`.
pub fn edap_proxy(grid: &MacroGrid, array: &ArrayConfig) -> u128 {
    let cycles = grid.cycles_multi as u128;
    let active = grid.active_macros as u128;
    cycles * cycles * active * (array.rows() as u128 * array.cols() as u128 * active)
}

/// Proxy of `a` relative to `b`.
pub fn edap_ratio<T: Scalar>(a: &MacroGrid, b: &MacroGrid, array: &ArrayConfig) -> T {
    T::from_ratio(edap_proxy(a, array), edap_proxy(b, array))
}
