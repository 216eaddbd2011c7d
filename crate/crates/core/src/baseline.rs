//! Reference mappers: img2col, SDK, VW-SDK and VWC-SDK.
//!
//! All of them use one window shape for every channel partition and let border windows
//! hang past the IFM edge, feeding padding into the array.

use log::debug;

use crate::error::Result;
use crate::model::{ArrayConfig, LayerSpec, Mapper, MappingPlan, WindowKind};
use crate::options::MapOptions;
use crate::tiling::{
    channel_tiles, chunk_partitions, floor_axis, grid_placements, make_tile, padded_axis,
    tile_cost, Dims,
};

fn uniform_plan(
    layer: &LayerSpec,
    array: &ArrayConfig,
    opts: &MapOptions,
    mapper: Mapper,
    w: u32,
    h: u32,
    ic_t: u32,
    oc_t: u32,
    channels: u32,
    pruned: u32,
) -> Result<MappingPlan> {
    let d = Dims::of(layer);
    let xs = padded_axis(d.i_w, w, d.k);
    let ys = padded_axis(d.i_h, h, d.k);
    let placements = grid_placements(&xs, &ys, w, h);
    let tile = make_tile(
        &d,
        array,
        opts.schedule,
        w,
        h,
        oc_t,
        WindowKind::Regular,
        chunk_partitions(0, channels, ic_t),
        placements,
        Vec::new(),
        0,
        pruned,
        Some(ic_t),
    )?;
    Ok(MappingPlan::new(
        layer.clone(),
        mapper,
        opts.schedule,
        vec![tile],
        array,
    ))
}

/// One kernel-sized window per output position.
pub fn map_img2col(layer: &LayerSpec, array: &ArrayConfig) -> Result<MappingPlan> {
    map_img2col_with(layer, array, &MapOptions::default())
}

pub fn map_img2col_with(
    layer: &LayerSpec,
    array: &ArrayConfig,
    opts: &MapOptions,
) -> Result<MappingPlan> {
    array.check_layer(layer)?;
    let d = Dims::of(layer);
    let (ic_t, oc_t) = channel_tiles(&d, array, d.k, d.k).expect("kernel fits after check");
    let xs = floor_axis(d.i_w, d.k, d.k);
    let ys = floor_axis(d.i_h, d.k, d.k);
    let tile = make_tile(
        &d,
        array,
        opts.schedule,
        d.k,
        d.k,
        oc_t,
        WindowKind::Regular,
        chunk_partitions(0, d.ic, ic_t),
        grid_placements(&xs, &ys, d.k, d.k),
        Vec::new(),
        0,
        0,
        Some(ic_t),
    )?;
    Ok(MappingPlan::new(
        layer.clone(),
        Mapper::Img2col,
        opts.schedule,
        vec![tile],
        array,
    ))
}

/// Square window sized for all channels of a row pass at once.
///
/// Channels are first split into the fewest equal row passes that hold a K×K kernel,
/// then the window grows while those channels still fit the rows and the columns do
/// not need more passes than the K×K window.
pub fn map_sdk(layer: &LayerSpec, array: &ArrayConfig) -> Result<MappingPlan> {
    map_sdk_with(layer, array, &MapOptions::default())
}

pub fn map_sdk_with(layer: &LayerSpec, array: &ArrayConfig, opts: &MapOptions) -> Result<MappingPlan> {
    array.check_layer(layer)?;
    let d = Dims::of(layer);
    let per_kernel_pass = array.rows() / (d.k * d.k);
    let passes = d.ic.div_ceil(per_kernel_pass);
    let per_pass = d.ic.div_ceil(passes);
    let col_budget = (d.oc as u64 * array.weight_bits() as u64)
        .div_ceil(array.cols() as u64)
        * array.cols() as u64;
    let mut pw = d.k;
    for cand in d.k..=d.i_h.min(d.i_w) {
        let kpw = ((cand - d.k + 1) as u64).pow(2);
        let rows_ok = per_pass as u64 * (cand as u64).pow(2) <= array.rows() as u64;
        let cols_ok = kpw * d.oc as u64 * array.weight_bits() as u64 <= col_budget;
        if rows_ok && cols_ok {
            pw = cand;
        }
    }
    let kpw = (pw - d.k + 1) * (pw - d.k + 1);
    let oc_t = (array.weight_columns() / kpw).min(d.oc).max(1);
    debug!("sdk {}: {pw}x{pw}, {passes} row passes", layer.name());
    uniform_plan(
        layer,
        array,
        opts,
        Mapper::Sdk,
        pw,
        pw,
        per_pass,
        oc_t,
        d.ic,
        0,
    )
}

/// Best uniform window shape, `(width, height, IC_t, OC_t, cost)`.
pub(crate) fn best_uniform_window(
    d: &Dims,
    array: &ArrayConfig,
    opts: &MapOptions,
) -> Option<(u32, u32, u32, u32, u64)> {
    let mut best: Option<(u32, u32, u32, u32, u64)> = None;
    // Height-major scan with strict improvement: ties keep the smaller height, then width.
    for h in d.k..=d.i_h {
        for w in d.k..=d.i_w {
            let Some((ic_t, oc_t)) = channel_tiles(d, array, w, h) else {
                continue;
            };
            let n = (padded_axis(d.i_w, w, d.k).len() * padded_axis(d.i_h, h, d.k).len()) as u64;
            let parts = d.ic.div_ceil(ic_t) as u64;
            let cost = tile_cost(d, array, opts, w, h, ic_t, parts, oc_t, n);
            if best.is_none_or(|b| cost < b.4) {
                best = Some((w, h, ic_t, oc_t, cost));
            }
        }
    }
    best
}

/// Exhaustive search over rectangular windows from K×K up to the IFM.
pub fn search_vw_sdk(layer: &LayerSpec, array: &ArrayConfig) -> Result<MappingPlan> {
    search_vw_sdk_with(layer, array, &MapOptions::default())
}

pub fn search_vw_sdk_with(
    layer: &LayerSpec,
    array: &ArrayConfig,
    opts: &MapOptions,
) -> Result<MappingPlan> {
    array.check_layer(layer)?;
    let d = Dims::of(layer);
    let (w, h, ic_t, oc_t, _) =
        best_uniform_window(&d, array, opts).expect("kernel-sized window always fits");
    uniform_plan(layer, array, opts, Mapper::VwSdk, w, h, ic_t, oc_t, d.ic, 0)
}

/// VW-SDK with the residual channel partition dropped when it is within the prune budget.
pub fn map_vwc_sdk(layer: &LayerSpec, array: &ArrayConfig, opts: &MapOptions) -> Result<MappingPlan> {
    array.check_layer(layer)?;
    let d = Dims::of(layer);
    let (w, h, ic_t, oc_t, _) =
        best_uniform_window(&d, array, opts).expect("kernel-sized window always fits");
    let residual = d.ic % ic_t;
    let budget = opts
        .prune
        .layer_cap(layer.in_channels())
        .checked_div(d.g)
        .unwrap_or(0);
    if residual == 0 || residual >= d.ic {
        return uniform_plan(layer, array, opts, Mapper::VwcSdk, w, h, ic_t, oc_t, d.ic, 0);
    }
    if residual <= budget {
        debug!("vwc {}: pruning {residual} channels per group", layer.name());
        return uniform_plan(
            layer,
            array,
            opts,
            Mapper::VwcSdk,
            w,
            h,
            ic_t,
            oc_t,
            d.ic - residual,
            residual,
        );
    }
    let mut plan = uniform_plan(layer, array, opts, Mapper::VwcSdk, w, h, ic_t, oc_t, d.ic, 0)?;
    plan.prune_budget_exceeded = true;
    Ok(plan)
}
