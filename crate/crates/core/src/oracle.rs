//! Brute-force checks that share no counting code with the mappers.
//!
//! [`simulate_coverage`] replays a plan activation by activation and marks every output
//! pixel each placement computes. [`brute_force_best_plan`] enumerates a declared search
//! space directly and returns the cheapest plan in it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    ArrayConfig, ChannelRange, GroupSchedule, LayerSpec, Mapper, MappingPlan, ParallelWindow,
    Placement, TilePlan, WindowKind,
};
use crate::options::MapOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Position {
    pub tile: usize,
    pub x: u32,
    pub y: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OutOfBounds {
    pub tile: usize,
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coverage {
    /// Every tile reaches every output pixel and the partitions cover the kept channels.
    pub covered: bool,
    pub replay_cycles: u64,
    /// Output pixels a tile computes more than once.
    pub duplicate_positions: Vec<Position>,
    /// Placements reaching past the IFM; their extra cells are fed padding.
    pub out_of_bounds: Vec<OutOfBounds>,
    /// Padded input cells summed over all activations.
    pub null_cells: u64,
    /// Every activation fits the array rows and columns. Only [`verify_plan`] checks
    /// this; [`simulate_coverage`] has no array and leaves it `true`.
    pub capacity_ok: bool,
    /// Tiles' placement lists match their window counts.
    pub counts_ok: bool,
}

impl Coverage {
    pub fn agrees(&self, plan: &MappingPlan) -> bool {
        self.covered && self.capacity_ok && self.counts_ok && self.replay_cycles == plan.total_cycles_single
    }
}

pub fn simulate_coverage(layer: &LayerSpec, plan: &MappingPlan) -> Coverage {
    let k = layer.kernel();
    let (ih, iw) = (layer.ifm_h(), layer.ifm_w());
    let oh = (ih + 1 - k) as usize;
    let ow = (iw + 1 - k) as usize;
    let g_total = layer.groups() as u64;
    let oc_g = layer.out_channels() / layer.groups();
    let ic_g = layer.in_channels() / layer.groups();

    let mut covered = true;
    let mut duplicates = Vec::new();
    let mut oob = Vec::new();
    let mut replay = 0u64;
    let mut null_cells = 0u64;
    let mut counts_ok = true;

    for (ti, tile) in plan.tiles.iter().enumerate() {
        if tile.placements.len() as u64 != tile.n_windows {
            counts_ok = false;
        }
        let mut hits = vec![0u32; oh * ow];
        for p in &tile.placements {
            let outside = p.x + p.width > iw || p.y + p.height > ih;
            if outside {
                oob.push(OutOfBounds {
                    tile: ti,
                    placement: *p,
                });
            }
            for dy in 0..p.height {
                for dx in 0..p.width {
                    let (x, y) = (p.x + dx, p.y + dy);
                    let in_window = dx + k <= p.width && dy + k <= p.height;
                    let in_map = x + k <= iw && y + k <= ih;
                    if in_window && in_map {
                        hits[y as usize * ow + x as usize] += 1;
                    }
                }
            }
            let mut inside = 0u64;
            for dy in 0..p.height {
                for dx in 0..p.width {
                    if p.x + dx < iw && p.y + dy < ih {
                        inside += 1;
                    }
                }
            }
            let padded = p.width as u64 * p.height as u64 - inside;
            for part in &tile.partitions {
                let mut oc = 0;
                while oc < oc_g {
                    oc += tile.window.oc_t().max(1);
                    let mut g = 0u64;
                    while g < g_total {
                        let here = (tile.group_slots as u64).min(g_total - g);
                        g += here;
                        replay += 1;
                        null_cells += padded * part.len as u64 * here;
                    }
                }
            }
        }
        for (i, &h) in hits.iter().enumerate() {
            let (x, y) = ((i % ow) as u32, (i / ow) as u32);
            if h == 0 {
                covered = false;
            }
            if h > 1 {
                duplicates.push(Position { tile: ti, x, y });
            }
        }
    }

    let mut parts: Vec<ChannelRange> = plan.tiles.iter().flat_map(|t| t.partitions.iter().copied()).collect();
    parts.sort_by_key(|p| p.start);
    let mut next = 0;
    for p in &parts {
        if p.start != next {
            covered = false;
        }
        next = p.start + p.len;
    }
    let pruned: u32 = plan.tiles.iter().map(|t| t.channels_pruned).sum();
    if next + pruned != ic_g {
        covered = false;
    }

    Coverage {
        covered,
        replay_cycles: replay,
        duplicate_positions: duplicates,
        out_of_bounds: oob,
        null_cells,
        capacity_ok: true,
        counts_ok,
    }
}

/// Checks every activation of `plan` against the array rows and columns.
pub fn check_capacity(plan: &MappingPlan, array: &ArrayConfig) -> bool {
    let k = plan.layer.kernel();
    plan.tiles.iter().all(|t| {
        let slots = match plan.schedule {
            GroupSchedule::Concurrent => 1,
            _ => t.group_slots as u64,
        };
        t.placements.iter().all(|p| {
            let kernels = (p.width + 1 - k) as u64 * (p.height + 1 - k) as u64;
            let cols = t.window.oc_t() as u64 * kernels * array.weight_bits() as u64 * slots;
            let rows_ok = t
                .partitions
                .iter()
                .all(|c| c.len as u64 * p.width as u64 * p.height as u64 * slots <= array.rows() as u64);
            rows_ok && cols <= array.cols() as u64
        })
    })
}

/// Replay plus capacity check against `array`.
pub fn verify_plan(plan: &MappingPlan, array: &ArrayConfig) -> Coverage {
    let mut c = simulate_coverage(&plan.layer, plan);
    c.capacity_ok = check_capacity(plan, array);
    c
}

/// Which head windows the Tetris space admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadRule {
    /// Same kernel count as the uniform optimum (fewer only when that count is prime),
    /// footprint no larger.
    SeedFactors,
    /// Any window shape.
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchSpace {
    /// One window shape for all channels, border windows padded.
    UniformPadded,
    /// A head window for full channel partitions, border strips covered by reshaped
    /// windows, and a tail window for the residual after optional pruning.
    Tetris { heads: HeadRule },
}

pub const DEFAULT_BOUND: u128 = 10_000_000;

struct Ctx {
    ih: u32,
    iw: u32,
    k: u32,
    ic: u32,
    oc: u32,
    g: u64,
    rows: u64,
    wcols: u64,
    cols: u64,
    bits: u64,
    schedule: GroupSchedule,
}

impl Ctx {
    fn tiles(&self, w: u32, h: u32) -> Option<(u32, u32)> {
        if w < self.k || h < self.k || w > self.iw || h > self.ih {
            return None;
        }
        let ic_t = (self.rows / (w as u64 * h as u64)).min(self.ic as u64) as u32;
        let kern = self.kernels(w, h);
        let oc_t = (self.wcols / kern).min(self.oc as u64) as u32;
        (ic_t > 0 && oc_t > 0).then_some((ic_t, oc_t))
    }

    fn kernels(&self, w: u32, h: u32) -> u64 {
        (w + 1 - self.k) as u64 * (h + 1 - self.k) as u64
    }

    fn rounds(&self, rows: u64, cols: u64) -> (u64, u64) {
        match self.schedule {
            GroupSchedule::Serial => (1, self.g),
            GroupSchedule::Concurrent => (self.g, 1),
            GroupSchedule::Packed => {
                let mut m = 1;
                while m < self.g && (m + 1) * rows <= self.rows && (m + 1) * cols <= self.cols {
                    m += 1;
                }
                let mut r = 0;
                let mut left = self.g;
                while left > 0 {
                    left = left.saturating_sub(m);
                    r += 1;
                }
                (m, r)
            }
        }
    }

    fn col_passes(&self, oc_t: u32) -> u64 {
        let mut n = 0;
        let mut c = 0;
        while c < self.oc {
            c += oc_t;
            n += 1;
        }
        n
    }

    /// Cost of `parts` passes of `max_part` channels on `n` placements.
    fn cost(&self, w: u32, h: u32, oc_t: u32, max_part: u32, parts: u64, n: u64) -> u64 {
        let rows = max_part as u64 * w as u64 * h as u64;
        let cols = oc_t as u64 * self.kernels(w, h) * self.bits;
        let (_, r) = self.rounds(rows, cols);
        n * parts * self.col_passes(oc_t) * r
    }
}

/// Origins along one axis: padded keeps stepping until the last output is reached.
fn origins(i: u32, pw: u32, k: u32, padded: bool) -> Vec<u32> {
    let step = pw + 1 - k;
    let mut out = Vec::new();
    let mut pos = 0;
    loop {
        if !padded && pos + pw > i {
            break;
        }
        out.push(pos);
        if pos + pw >= i {
            break;
        }
        pos += step;
    }
    out
}

/// Largest span a strip window may cover, or 0 when even one output does not fit.
fn strip_span(thick: u32, len: u32, area: u64, kpw: u64, k: u32) -> u32 {
    let mut s = len;
    while s > 0 {
        let cells = thick as u64 * (s + k - 1) as u64;
        let kern = (thick + 1 - k) as u64 * s as u64;
        if cells <= area && kern <= kpw {
            return s;
        }
        s -= 1;
    }
    0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Corner {
    Bottom,
    Right,
}

/// Placements of the in-bounds grid plus border strips, or `None` if a strip cannot be
/// covered within the head window's area and kernel count.
fn spatial(c: &Ctx, w: u32, h: u32, corner: Corner) -> Option<(Vec<Placement>, u64)> {
    let k = c.k;
    let xs = origins(c.iw, w, k, false);
    let ys = origins(c.ih, h, k, false);
    let (ow, oh) = (c.iw + 1 - k, c.ih + 1 - k);
    let reach_x = xs.last().unwrap() + w + 1 - k;
    let reach_y = ys.last().unwrap() + h + 1 - k;
    let (rw, rh) = (ow - reach_x, oh - reach_y);
    let area = w as u64 * h as u64;
    let kpw = c.kernels(w, h);
    let mut out = Vec::new();
    for &y in &ys {
        for &x in &xs {
            out.push(Placement::new(x, y, w, h));
        }
    }
    let mut marginal = 0;
    let mut strip = |thick_out: u32, len: u32, vertical: bool, out: &mut Vec<Placement>| -> Option<()> {
        let thick = thick_out + k - 1;
        let s = strip_span(thick, len, area, kpw, k);
        if s == 0 {
            return None;
        }
        let mut n = 0;
        while n * s < len {
            n += 1;
        }
        let (base, extra) = (len / n, len % n);
        let mut at = 0;
        for i in 0..n {
            let span = base + u32::from(i < extra);
            let p = if vertical {
                Placement::new(c.iw - thick, at, thick, span + k - 1)
            } else {
                Placement::new(at, c.ih - thick, span + k - 1, thick)
            };
            out.push(p);
            at += span;
        }
        marginal += n as u64;
        Some(())
    };
    let right_len = if rh > 0 && corner == Corner::Bottom { reach_y } else { oh };
    let bottom_len = if rw > 0 && corner == Corner::Right { reach_x } else { ow };
    if rw > 0 {
        strip(rw, right_len, true, &mut out)?;
    }
    if rh > 0 {
        strip(rh, bottom_len, false, &mut out)?;
    }
    Some((out, marginal))
}

fn best_spatial(c: &Ctx, w: u32, h: u32) -> Option<(Vec<Placement>, u64)> {
    let a = spatial(c, w, h, Corner::Bottom);
    let b = spatial(c, w, h, Corner::Right);
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.0.len() < a.0.len() { b } else { a }),
        (a, b) => a.or(b),
    }
}

fn uniform_best(c: &Ctx) -> (u32, u32, u32, u32, u64) {
    let mut best: Option<(u32, u32, u32, u32, u64)> = None;
    for h in c.k..=c.ih {
        for w in c.k..=c.iw {
            let Some((ic_t, oc_t)) = c.tiles(w, h) else {
                continue;
            };
            let n = (origins(c.iw, w, c.k, true).len() * origins(c.ih, h, c.k, true).len()) as u64;
            let mut parts = 0;
            let mut done = 0;
            while done < c.ic {
                done += ic_t;
                parts += 1;
            }
            let cost = c.cost(w, h, oc_t, ic_t, parts, n);
            if best.is_none_or(|b| cost < b.4) {
                best = Some((w, h, ic_t, oc_t, cost));
            }
        }
    }
    best.expect("kernel window fits")
}

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..n).all(|d| n % d != 0)
}

#[allow(clippy::too_many_arguments)]
fn tile(
    c: &Ctx,
    array: &ArrayConfig,
    w: u32,
    h: u32,
    oc_t: u32,
    kind: WindowKind,
    partitions: Vec<ChannelRange>,
    reserved: u32,
    placements: Vec<Placement>,
    n_marginal: u64,
    pruned: u32,
) -> Result<TilePlan> {
    let window = ParallelWindow::new(w, h, reserved, oc_t, kind, c.k, array)?;
    let mut marginal_windows: Vec<ParallelWindow> = Vec::new();
    for p in placements.iter().skip(placements.len() - n_marginal as usize) {
        if !marginal_windows.iter().any(|m| m.width() == p.width && m.height() == p.height) {
            marginal_windows.push(ParallelWindow::new(p.width, p.height, reserved, oc_t, WindowKind::Marginal, c.k, array)?);
        }
    }
    let cols = oc_t as u64 * c.kernels(w, h) * array.weight_bits() as u64;
    let (slots, rounds) = c.rounds(reserved as u64 * w as u64 * h as u64, cols);
    Ok(TilePlan {
        window,
        marginal_windows,
        n_windows: placements.len() as u64,
        placements,
        n_marginal,
        ar_c: partitions.len() as u64,
        ac_c: c.col_passes(oc_t),
        channels_covered: partitions.iter().map(|p| p.len).sum(),
        partitions,
        channels_pruned: pruned,
        group_slots: slots as u32,
        group_rounds: rounds,
    })
}

fn split(start: u32, total: u32, size: u32, balanced: bool) -> Vec<ChannelRange> {
    let mut n = 0;
    while n * size < total {
        n += 1;
    }
    let mut out = Vec::new();
    let mut s = start;
    for i in 0..n {
        let len = if balanced {
            total / n + u32::from(i < total % n)
        } else {
            size.min(start + total - s)
        };
        out.push(ChannelRange { start: s, len });
        s += len;
    }
    out
}

/// Cheapest plan in `space` with the default options and enumeration bound.
pub fn brute_force_best_plan(layer: &LayerSpec, array: &ArrayConfig, space: SearchSpace) -> Result<MappingPlan> {
    brute_force_best_plan_with(layer, array, space, &MapOptions::default(), DEFAULT_BOUND)
}

/// Exhaustive search on a single macro. The grid in `opts` is ignored.
pub fn brute_force_best_plan_with(
    layer: &LayerSpec,
    array: &ArrayConfig,
    space: SearchSpace,
    opts: &MapOptions,
    bound: u128,
) -> Result<MappingPlan> {
    array.check_layer(layer)?;
    let g = layer.groups();
    let c = Ctx {
        ih: layer.ifm_h(),
        iw: layer.ifm_w(),
        k: layer.kernel(),
        ic: layer.in_channels() / g,
        oc: layer.out_channels() / g,
        g: g as u64,
        rows: array.rows() as u64,
        wcols: array.weight_columns() as u64,
        cols: array.cols() as u64,
        bits: array.weight_bits() as u64,
        schedule: opts.schedule,
    };
    let shapes = (c.ih + 1 - c.k) as u128 * (c.iw + 1 - c.k) as u128;
    let (sw, sh, s_ic, s_oc, _) = uniform_best(&c);
    let plan = |tiles| MappingPlan::new(layer.clone(), Mapper::Tetris, opts.schedule, tiles, array);
    match space {
        SearchSpace::UniformPadded => {
            if shapes > bound {
                return Err(Error::InstanceTooLarge { candidates: shapes, bound });
            }
            let xs = origins(c.iw, sw, c.k, true);
            let ys = origins(c.ih, sh, c.k, true);
            let mut placements = Vec::new();
            for &y in &ys {
                for &x in &xs {
                    placements.push(Placement::new(x, y, sw, sh));
                }
            }
            let t = tile(&c, array, sw, sh, s_oc, WindowKind::Regular, split(0, c.ic, s_ic, false), s_ic, placements, 0, 0)?;
            let mut p = plan(vec![t]);
            p.mapper = Mapper::VwSdk;
            Ok(p)
        }
        SearchSpace::Tetris { heads } => {
            let cap = opts.prune.layer_cap(layer.in_channels()) / g;
            let budget = opts.prune.per_partition.min(cap);
            let candidates = shapes * (1 + (budget as u128 + 1) * shapes);
            if candidates > bound {
                return Err(Error::InstanceTooLarge { candidates, bound });
            }
            let n_conv = c.kernels(sw, sh);
            let max_conv = (c.wcols / c.oc as u64).max(1);
            // (cost, pruned, head w, h, balanced, tail)
            type Best = (u64, u32, u32, u32, bool, Option<(u32, u32)>);
            let mut best: Option<Best> = None;
            let consider = |cand: Best, best: &mut Option<Best>| {
                if best.is_none_or(|b| (cand.0, cand.1) < (b.0, b.1)) {
                    *best = Some(cand);
                }
            };
            let mut tails: Vec<Option<(u32, u32, u64)>> = vec![None; c.ic as usize + 1];
            let mut tail_for = |rr: u32| -> Option<(u32, u32, u64)> {
                if let Some(t) = tails[rr as usize] {
                    return Some(t);
                }
                let mut best: Option<(u32, u32, u64)> = None;
                for h in c.k..=c.ih {
                    for w in c.k..=c.iw {
                        if c.kernels(w, h) > max_conv || rr as u64 * w as u64 * h as u64 > c.rows {
                            continue;
                        }
                        let Some((_, oc_t)) = c.tiles(w, h) else { continue };
                        let Some((pl, _)) = best_spatial(&c, w, h) else { continue };
                        let cost = c.cost(w, h, oc_t, rr, 1, pl.len() as u64);
                        if best.is_none_or(|b| cost < b.2) {
                            best = Some((w, h, cost));
                        }
                    }
                }
                tails[rr as usize] = best;
                best
            };
            for h in c.k..=c.ih {
                for w in c.k..=c.iw {
                    let kern = c.kernels(w, h);
                    if heads == HeadRule::SeedFactors {
                        let same = kern == n_conv || (is_prime(n_conv) && kern < n_conv);
                        if !same || w * h > sw * sh {
                            continue;
                        }
                    }
                    let Some((ict, oc_t)) = c.tiles(w, h) else { continue };
                    let Some((pl, _)) = best_spatial(&c, w, h) else { continue };
                    let n = pl.len() as u64;
                    let mut parts = 0u32;
                    while parts * ict < c.ic {
                        parts += 1;
                    }
                    let max_part = c.ic.div_ceil(parts);
                    consider((c.cost(w, h, oc_t, max_part, parts as u64, n), 0, w, h, true, None), &mut best);
                    let full = c.ic / ict;
                    let r = c.ic - full * ict;
                    if r == 0 || full == 0 {
                        continue;
                    }
                    let head = c.cost(w, h, oc_t, ict, full as u64, n);
                    for p in 0..=budget.min(r) {
                        let rr = r - p;
                        if rr == 0 {
                            consider((head, p, w, h, false, None), &mut best);
                        } else if let Some((tw, th, tc)) = tail_for(rr) {
                            consider((head + tc, p, w, h, false, Some((tw, th))), &mut best);
                        }
                    }
                }
            }
            let (_, pruned, w, h, balanced, tail) = best.expect("uniform shape is a head");
            let (ict, oc_t) = c.tiles(w, h).expect("fits");
            let (pl, nm) = best_spatial(&c, w, h).expect("fits");
            let mut tiles = Vec::new();
            if balanced {
                let parts = split(0, c.ic, ict, true);
                let reserved = parts.iter().map(|p| p.len).max().unwrap_or(0);
                tiles.push(tile(&c, array, w, h, oc_t, WindowKind::Regular, parts, reserved, pl, nm, 0)?);
            } else {
                let full = c.ic / ict;
                let head_pruned = if tail.is_none() { pruned } else { 0 };
                tiles.push(tile(&c, array, w, h, oc_t, WindowKind::Regular, split(0, full * ict, ict, false), ict, pl, nm, head_pruned)?);
                if let Some((tw, th)) = tail {
                    let rr = c.ic - full * ict - pruned;
                    let (_, toc) = c.tiles(tw, th).expect("fits");
                    let (tpl, tnm) = best_spatial(&c, tw, th).expect("fits");
                    let part = vec![ChannelRange { start: full * ict, len: rr }];
                    tiles.push(tile(&c, array, tw, th, toc, WindowKind::Depth, part, rr, tpl, tnm, pruned)?);
                }
            }
            Ok(plan(tiles))
        }
    }
}
