//! Square-inclined, marginal and depth-optimal windows, and the pipeline that combines
//! them on top of the VW-SDK seed.
//!
//! Every plan produced here keeps all windows inside the IFM: border strips that a
//! regular grid cannot reach get reshaped marginal windows instead of padding.

use log::debug;

use crate::baseline::best_uniform_window;
use crate::error::{Error, Result};
use crate::model::{
    ArrayConfig, ChannelRange, LayerSpec, Mapper, MappingPlan, ParallelWindow, Placement,
    WindowKind,
};
use crate::options::MapOptions;
use crate::tiling::{
    balanced_partitions, channel_tiles, chunk_partitions, floor_axis, grid_placements, make_tile,
    tile_cost, Dims,
};

/// Factor pairs `(a, b)` with `a * b = n`, both orientations, most balanced first.
pub fn factor_pairs(n: u32) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = (1..=n).filter(|a| n % a == 0).map(|a| (a, n / a)).collect();
    out.sort_by_key(|&(a, b)| (a.abs_diff(b), a));
    out
}

fn is_prime(n: u32) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

/// Border strips left by the in-bounds regular grid, covered by reshaped windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginalSet {
    pub n_marginal: u64,
    /// Distinct marginal window shapes.
    pub windows: Vec<ParallelWindow>,
    pub placements: Vec<Placement>,
}

/// One border strip: its fixed thickness in pixels and the output span it must cover.
struct Strip {
    thick: u32,
    span_max: u32,
    outputs: u32,
}

/// Output positions of a strip split into near-equal chunks no longer than `span_max`.
fn strip_chunks(outputs: u32, span_max: u32) -> Vec<(u32, u32)> {
    let n = outputs.div_ceil(span_max);
    let base = outputs / n;
    let extra = outputs % n;
    let mut s = 0;
    (0..n)
        .map(|i| {
            let len = base + u32::from(i < extra);
            let c = (s, len);
            s += len;
            c
        })
        .collect()
}

/// Strip sizing: the free side grows to keep the window's cell area and kernel count
/// within the regular window's, and never past what the strip needs.
fn size_strip(thick: u32, outputs: u32, area: u32, kpw: u32, k: u32) -> Result<Strip> {
    let free_k = thick - k + 1;
    let mut free = (area / thick).min(outputs + k - 1);
    while free >= k && free_k * (free - k + 1) > kpw {
        free -= 1;
    }
    if free < k {
        return Err(Error::DegenerateMarginal {
            strip: thick,
            area,
            kernel: k,
        });
    }
    Ok(Strip {
        thick,
        span_max: free - k + 1,
        outputs,
    })
}

struct Layout {
    regular: u64,
    right: Option<Strip>,
    bottom: Option<Strip>,
}

impl Layout {
    fn marginal(&self) -> u64 {
        [&self.right, &self.bottom]
            .into_iter()
            .flatten()
            .map(|s| s.outputs.div_ceil(s.span_max) as u64)
            .sum()
    }

    fn total(&self) -> u64 {
        self.regular + self.marginal()
    }
}

/// Regular grid plus strips. The corner goes to the bottom strip.
fn layout(d: &Dims, w: u32, h: u32) -> Result<Layout> {
    let k = d.k;
    let (sw, sh) = (w - k + 1, h - k + 1);
    let nw = (d.i_w - w) / sw + 1;
    let nh = (d.i_h - h) / sh + 1;
    let rw = d.out_w() - nw * sw;
    let rh = d.out_h() - nh * sh;
    let area = w * h;
    let kpw = sw * sh;
    let right = if rw > 0 {
        let rows = if rh > 0 { nh * sh } else { d.out_h() };
        Some(size_strip(rw + k - 1, rows, area, kpw, k)?)
    } else {
        None
    };
    let bottom = if rh > 0 {
        Some(size_strip(rh + k - 1, d.out_w(), area, kpw, k)?)
    } else {
        None
    };
    Ok(Layout {
        regular: nw as u64 * nh as u64,
        right,
        bottom,
    })
}

fn marginal_set(d: &Dims, array: &ArrayConfig, window: &ParallelWindow) -> Result<MarginalSet> {
    let (w, h) = (window.width(), window.height());
    let lay = layout(d, w, h)?;
    let k = d.k;
    let mut placements = Vec::new();
    let mut windows: Vec<ParallelWindow> = Vec::new();
    let mut push = |p: Placement, windows: &mut Vec<ParallelWindow>| -> Result<()> {
        placements.push(p);
        if !windows.iter().any(|m| m.width() == p.width && m.height() == p.height) {
            windows.push(ParallelWindow::new(
                p.width,
                p.height,
                window.ic_t(),
                window.oc_t(),
                WindowKind::Marginal,
                k,
                array,
            )?);
        }
        Ok(())
    };
    if let Some(s) = &lay.right {
        let x = d.i_w - s.thick;
        for (y, len) in strip_chunks(s.outputs, s.span_max) {
            push(Placement::new(x, y, s.thick, len + k - 1), &mut windows)?;
        }
    }
    if let Some(s) = &lay.bottom {
        let y = d.i_h - s.thick;
        for (x, len) in strip_chunks(s.outputs, s.span_max) {
            push(Placement::new(x, y, len + k - 1, s.thick), &mut windows)?;
        }
    }
    Ok(MarginalSet {
        n_marginal: lay.marginal(),
        windows,
        placements,
    })
}

/// Marginal windows for the border strips a regular grid of `window` leaves uncovered.
pub fn find_marginal_windows(
    layer: &LayerSpec,
    array: &ArrayConfig,
    window: &ParallelWindow,
) -> Result<MarginalSet> {
    let d = Dims::of(layer);
    crate::metrics::count_parallel_windows(d.i_h, d.i_w, window.height(), window.width(), d.k, 0)?;
    marginal_set(&d, array, window)
}

fn window_for(d: &Dims, array: &ArrayConfig, w: u32, h: u32, kind: WindowKind) -> Option<ParallelWindow> {
    let (ic_t, oc_t) = channel_tiles(d, array, w, h)?;
    ParallelWindow::new(w, h, ic_t, oc_t, kind, d.k, array).ok()
}

/// Most balanced factorization of the seed's kernel count with a smaller footprint.
///
/// Returns the seed itself when no factor pair shrinks the footprint.
pub fn find_square_window(
    layer: &LayerSpec,
    array: &ArrayConfig,
    seed: &ParallelWindow,
) -> ParallelWindow {
    let d = Dims::of(layer);
    let k = d.k;
    let mut best: Option<(u32, u32, u32, ParallelWindow)> = None;
    for (a, b) in factor_pairs(seed.kernels()) {
        let (w, h) = (a + k - 1, b + k - 1);
        if w * h >= seed.area() {
            continue;
        }
        let Some(win) = window_for(&d, array, w, h, WindowKind::Square) else {
            continue;
        };
        let key = (w * h, a.abs_diff(b), w);
        if best.as_ref().is_none_or(|b| key < (b.0, b.1, b.2)) {
            best = Some((key.0, key.1, key.2, win));
        }
    }
    best.map(|b| b.3).unwrap_or(*seed)
}

/// Depth window for `rr` channels: the largest kernel count up to `max_conv` whose
/// balanced factor pair fits. Of the two orientations the cheaper wins, the wider on a tie.
fn depth_for(d: &Dims, array: &ArrayConfig, opts: &MapOptions, rr: u32) -> Option<(u32, u32, u32, u64)> {
    let max_conv = (array.weight_columns() / d.oc).max(1);
    for n in (1..=max_conv).rev() {
        let (a, b) = factor_pairs(n)[0];
        let mut found: Option<(u32, u32, u32, u64)> = None;
        for (w, h) in [(b + d.k - 1, a + d.k - 1), (a + d.k - 1, b + d.k - 1)] {
            if w > d.i_w || h > d.i_h || rr as u64 * (w * h) as u64 > array.rows() as u64 {
                continue;
            }
            let Some((_, oc_t)) = channel_tiles(d, array, w, h) else {
                continue;
            };
            let Ok(lay) = layout(d, w, h) else {
                continue;
            };
            let cost = tile_cost(d, array, opts, w, h, rr, 1, oc_t, lay.total());
            if found.is_none_or(|f| cost < f.3) {
                found = Some((w, h, oc_t, cost));
            }
        }
        if found.is_some() {
            return found;
        }
    }
    None
}

fn depth_search(
    d: &Dims,
    array: &ArrayConfig,
    opts: &MapOptions,
    remaining: u32,
    budget: u32,
) -> Option<(Option<(u32, u32, u32)>, u32, u64)> {
    let mut best: Option<(Option<(u32, u32, u32)>, u32, u64)> = None;
    for p in 0..=budget.min(remaining) {
        let rr = remaining - p;
        let cand = if rr == 0 {
            Some((None, p, 0))
        } else {
            depth_for(d, array, opts, rr).map(|(w, h, oc_t, c)| (Some((w, h, oc_t)), p, c))
        };
        if let Some(c) = cand {
            if best.as_ref().is_none_or(|b| c.2 < b.2) {
                best = Some(c);
            }
        }
    }
    best
}

/// Window for the last `remaining` channels, pruning up to `budget` of them.
pub fn find_depth_window(
    layer: &LayerSpec,
    array: &ArrayConfig,
    remaining: u32,
    budget: u32,
) -> Result<(ParallelWindow, u32)> {
    let d = Dims::of(layer);
    let opts = MapOptions::default();
    let exhausted = Error::ExhaustedWithoutFit { remaining, budget };
    let mut best: Option<(u32, u32, u32, u32, u64)> = None;
    for p in 0..=budget.min(remaining.saturating_sub(1)) {
        let rr = remaining - p;
        if let Some((w, h, oc_t, cost)) = depth_for(&d, array, &opts, rr) {
            if best.is_none_or(|b| cost < b.4) {
                best = Some((w, h, oc_t, p, cost));
            }
        }
    }
    let (w, h, oc_t, p, _) = best.ok_or(exhausted)?;
    let win = ParallelWindow::new(w, h, remaining - p, oc_t, WindowKind::Depth, d.k, array)?;
    Ok((win, p))
}

/// Head candidates, most square first. Among equally square shapes the seed comes
/// first, so a tie only moves away from the seed toward a squarer window.
fn head_shapes(d: &Dims, seed_w: u32, seed_h: u32) -> Vec<(u32, u32)> {
    let k = d.k;
    let n_conv = (seed_w - k + 1) * (seed_h - k + 1);
    let shapes = |n: u32| {
        factor_pairs(n)
            .into_iter()
            .map(|(a, b)| (a + k - 1, b + k - 1))
            .filter(|&(w, h)| w <= d.i_w && h <= d.i_h && w * h <= seed_w * seed_h)
            .filter(|&s| s != (seed_w, seed_h))
    };
    let mut out = vec![(seed_w, seed_h)];
    out.extend(shapes(n_conv));
    out.sort_by_key(|&(w, h)| w.abs_diff(h));
    // Fewer kernels per window only when no balanced factorization exists; these
    // come last and so only win on a strict improvement.
    if is_prime(n_conv) {
        for n in (1..n_conv).rev() {
            for s in shapes(n) {
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
    }
    out
}

struct Choice {
    w: u32,
    h: u32,
    ic_t: u32,
    oc_t: u32,
    /// Head partitions reuse the head window for every channel.
    balanced: bool,
    head_parts: u32,
    tail: Option<(u32, u32, u32)>,
    pruned: u32,
    cost: u64,
}

fn choose(d: &Dims, array: &ArrayConfig, opts: &MapOptions, budget: u32) -> Choice {
    let (sw, sh, _, _, seed_cost) =
        best_uniform_window(d, array, opts).expect("kernel-sized window always fits");
    let mut best: Option<Choice> = None;
    for (w, h) in head_shapes(d, sw, sh) {
        let Some((ic_t, oc_t)) = channel_tiles(d, array, w, h) else {
            continue;
        };
        let Ok(lay) = layout(d, w, h) else {
            continue;
        };
        let n = lay.total();
        let parts = d.ic.div_ceil(ic_t);
        let max_part = d.ic.div_ceil(parts);
        let mut cands = vec![Choice {
            w,
            h,
            ic_t,
            oc_t,
            balanced: true,
            head_parts: parts,
            tail: None,
            pruned: 0,
            cost: tile_cost(d, array, opts, w, h, max_part, parts as u64, oc_t, n),
        }];
        let full = d.ic / ic_t;
        let r = d.ic % ic_t;
        if r > 0 && full > 0 {
            if let Some((tail, p, tail_cost)) = depth_search(d, array, opts, r, budget) {
                let head_cost = tile_cost(d, array, opts, w, h, ic_t, full as u64, oc_t, n);
                cands.push(Choice {
                    w,
                    h,
                    ic_t,
                    oc_t,
                    balanced: false,
                    head_parts: full,
                    tail,
                    pruned: p,
                    cost: head_cost + tail_cost,
                });
            }
        }
        for c in cands {
            let better = match &best {
                None => true,
                Some(b) => c.cost < b.cost || (c.cost == b.cost && c.pruned < b.pruned),
            };
            if better {
                best = Some(c);
            }
        }
    }
    let best = best.expect("seed shape is always a head candidate");
    debug_assert!(best.cost <= seed_cost);
    best
}

fn build(d: &Dims, array: &ArrayConfig, opts: &MapOptions, layer: &LayerSpec, mapper: Mapper, c: Choice) -> Result<MappingPlan> {
    let (sw, sh, ..) = best_uniform_window(d, array, opts).expect("kernel-sized window always fits");
    let kind = if (c.w, c.h) == (sw, sh) {
        WindowKind::Regular
    } else {
        WindowKind::Square
    };
    let mut tiles = Vec::new();
    let head_channels = if c.balanced { d.ic } else { c.head_parts * c.ic_t };
    let partitions = if c.balanced {
        balanced_partitions(0, d.ic, c.ic_t)
    } else {
        chunk_partitions(0, head_channels, c.ic_t)
    };
    let head_pruned = if c.tail.is_none() { c.pruned } else { 0 };
    tiles.push(spatial_tile(d, array, opts, c.w, c.h, c.oc_t, kind, partitions, head_pruned, Some(c.ic_t))?);
    if let Some((w, h, oc_t)) = c.tail {
        let rr = d.ic - head_channels - c.pruned;
        let part = vec![ChannelRange {
            start: head_channels,
            len: rr,
        }];
        tiles.push(spatial_tile(d, array, opts, w, h, oc_t, WindowKind::Depth, part, c.pruned, None)?);
    }
    Ok(MappingPlan::new(layer.clone(), mapper, opts.schedule, tiles, array))
}

#[allow(clippy::too_many_arguments)]
fn spatial_tile(
    d: &Dims,
    array: &ArrayConfig,
    opts: &MapOptions,
    w: u32,
    h: u32,
    oc_t: u32,
    kind: WindowKind,
    partitions: Vec<ChannelRange>,
    pruned: u32,
    reserved_ic_t: Option<u32>,
) -> Result<crate::model::TilePlan> {
    let max_part = partitions.iter().map(|p| p.len).max().unwrap_or(0);
    let probe = ParallelWindow::new(w, h, reserved_ic_t.unwrap_or(max_part), oc_t, kind, d.k, array)?;
    let marg = marginal_set(d, array, &probe)?;
    let xs = floor_axis(d.i_w, w, d.k);
    let ys = floor_axis(d.i_h, h, d.k);
    let mut placements = grid_placements(&xs, &ys, w, h);
    placements.extend(marg.placements);
    make_tile(
        d,
        array,
        opts.schedule,
        w,
        h,
        oc_t,
        kind,
        partitions,
        placements,
        marg.windows,
        marg.n_marginal,
        pruned,
        reserved_ic_t,
    )
}

pub(crate) fn tetris_plan(
    layer: &LayerSpec,
    array: &ArrayConfig,
    opts: &MapOptions,
    mapper: Mapper,
) -> Result<MappingPlan> {
    array.check_layer(layer)?;
    let d = Dims::of(layer);
    let cap = opts.prune.layer_cap(layer.in_channels()) / d.g;
    let budget = opts.prune.per_partition.min(cap);
    let c = choose(&d, array, opts, budget);
    debug!(
        "{mapper} {}: head {}x{} tail {:?} pruned {} cost {}",
        layer.name(),
        c.w,
        c.h,
        c.tail,
        c.pruned,
        c.cost
    );
    build(&d, array, opts, layer, mapper, c)
}

/// VW-SDK seed refined with square, marginal and depth windows.
pub fn tetris_pipeline(layer: &LayerSpec, array: &ArrayConfig) -> Result<MappingPlan> {
    tetris_pipeline_with(layer, array, &MapOptions::default())
}

pub fn tetris_pipeline_with(
    layer: &LayerSpec,
    array: &ArrayConfig,
    opts: &MapOptions,
) -> Result<MappingPlan> {
    tetris_plan(layer, array, opts, Mapper::Tetris)
}
