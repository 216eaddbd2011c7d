//! Shared plumbing for building tiles: per-group dimensions, channel partitions,
//! placement grids and the cost used to rank candidates.

use crate::error::Result;
use crate::model::{
    ArrayConfig, ChannelRange, GroupSchedule, LayerSpec, ParallelWindow, Placement, TilePlan,
    WindowKind,
};
use crate::options::{GridShape, MapOptions};

/// Geometry of one group of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Dims {
    pub i_h: u32,
    pub i_w: u32,
    pub k: u32,
    pub ic: u32,
    pub oc: u32,
    pub g: u32,
}

impl Dims {
    pub fn of(layer: &LayerSpec) -> Self {
        Dims {
            i_h: layer.ifm_h(),
            i_w: layer.ifm_w(),
            k: layer.kernel(),
            ic: layer.group_in(),
            oc: layer.group_out(),
            g: layer.groups(),
        }
    }

    pub fn out_h(&self) -> u32 {
        self.i_h - self.k + 1
    }

    pub fn out_w(&self) -> u32 {
        self.i_w - self.k + 1
    }
}

/// Clamped `(IC_t, OC_t)` for a window shape, `None` when it does not fit.
pub(crate) fn channel_tiles(d: &Dims, array: &ArrayConfig, w: u32, h: u32) -> Option<(u32, u32)> {
    if w < d.k || h < d.k || w > d.i_w || h > d.i_h {
        return None;
    }
    let area = w as u64 * h as u64;
    let ic_t = (array.rows() as u64 / area).min(d.ic as u64) as u32;
    let kpw = (w - d.k + 1) as u64 * (h - d.k + 1) as u64;
    let oc_t = (array.weight_columns() as u64 / kpw).min(d.oc as u64) as u32;
    if ic_t == 0 || oc_t == 0 {
        None
    } else {
        Some((ic_t, oc_t))
    }
}

/// Groups that share one activation and the rounds needed to visit all groups.
pub(crate) fn group_slots(
    d: &Dims,
    array: &ArrayConfig,
    schedule: GroupSchedule,
    rows_per_group: u64,
    cols_per_group: u64,
) -> (u32, u64) {
    match schedule {
        GroupSchedule::Serial => (1, d.g as u64),
        GroupSchedule::Concurrent => (d.g, 1),
        GroupSchedule::Packed => {
            let by_rows = array.rows() as u64 / rows_per_group.max(1);
            let by_cols = array.cols() as u64 / cols_per_group.max(1);
            let m = by_rows.min(by_cols).min(d.g as u64).max(1);
            (m as u32, (d.g as u64).div_ceil(m))
        }
    }
}

/// Cycles of a tile on the grid the search targets.
pub(crate) fn grid_cost(n: u64, ar_c: u64, ac_c: u64, rounds: u64, grid: GridShape) -> u64 {
    n * (ar_c * rounds).div_ceil(grid.rows.max(1) as u64) * ac_c.div_ceil(grid.cols.max(1) as u64)
}

/// Cost of a tile that maps `max_part` channels per pass over `parts` passes.
#[allow(clippy::too_many_arguments)]
pub(crate) fn tile_cost(
    d: &Dims,
    array: &ArrayConfig,
    opts: &MapOptions,
    w: u32,
    h: u32,
    max_part: u32,
    parts: u64,
    oc_t: u32,
    n_windows: u64,
) -> u64 {
    let kpw = (w - d.k + 1) as u64 * (h - d.k + 1) as u64;
    let rows = max_part as u64 * w as u64 * h as u64;
    let cols = oc_t as u64 * kpw * array.weight_bits() as u64;
    let (_, rounds) = group_slots(d, array, opts.schedule, rows, cols);
    let ac_c = (d.oc as u64).div_ceil(oc_t as u64);
    grid_cost(n_windows, parts, ac_c, rounds, opts.grid)
}

/// Consecutive slices of `size` channels; the last one holds the residual.
pub(crate) fn chunk_partitions(start: u32, total: u32, size: u32) -> Vec<ChannelRange> {
    let mut out = Vec::new();
    let mut s = 0;
    while s < total {
        let len = size.min(total - s);
        out.push(ChannelRange {
            start: start + s,
            len,
        });
        s += len;
    }
    out
}

/// `ceil(total / size)` slices whose sizes differ by at most one, larger first.
pub(crate) fn balanced_partitions(start: u32, total: u32, size: u32) -> Vec<ChannelRange> {
    if total == 0 {
        return Vec::new();
    }
    let n = total.div_ceil(size);
    let base = total / n;
    let extra = total % n;
    let mut out = Vec::with_capacity(n as usize);
    let mut s = start;
    for i in 0..n {
        let len = base + u32::from(i < extra);
        out.push(ChannelRange { start: s, len });
        s += len;
    }
    out
}

/// Window origins along one axis at stride `pw-k+1`, overhanging the edge when needed.
pub(crate) fn padded_axis(i: u32, pw: u32, k: u32) -> Vec<u32> {
    let s = pw - k + 1;
    let n = (i - pw).div_ceil(s) + 1;
    (0..n).map(|j| j * s).collect()
}

/// Window origins along one axis at stride `pw-k+1`, staying inside the map.
pub(crate) fn floor_axis(i: u32, pw: u32, k: u32) -> Vec<u32> {
    let s = pw - k + 1;
    let n = (i - pw) / s + 1;
    (0..n).map(|j| j * s).collect()
}

pub(crate) fn grid_placements(xs: &[u32], ys: &[u32], w: u32, h: u32) -> Vec<Placement> {
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &y in ys {
        for &x in xs {
            out.push(Placement::new(x, y, w, h));
        }
    }
    out
}

/// Assembles a tile and derives its row/column passes and group rounds.
#[allow(clippy::too_many_arguments)]
pub(crate) fn make_tile(
    d: &Dims,
    array: &ArrayConfig,
    schedule: GroupSchedule,
    w: u32,
    h: u32,
    oc_t: u32,
    kind: WindowKind,
    partitions: Vec<ChannelRange>,
    placements: Vec<Placement>,
    marginal_windows: Vec<ParallelWindow>,
    n_marginal: u64,
    channels_pruned: u32,
    reserved_ic_t: Option<u32>,
) -> Result<TilePlan> {
    let max_part = partitions.iter().map(|p| p.len).max().unwrap_or(0);
    let ic_t = reserved_ic_t.unwrap_or(max_part);
    let window = ParallelWindow::new(w, h, ic_t, oc_t, kind, d.k, array)?;
    let rows = max_part as u64 * window.area() as u64;
    let cols = oc_t as u64 * window.kernels() as u64 * array.weight_bits() as u64;
    let (slots, rounds) = group_slots(d, array, schedule, rows, cols);
    let covered = partitions.iter().map(|p| p.len).sum();
    Ok(TilePlan {
        window,
        marginal_windows,
        n_windows: placements.len() as u64,
        placements,
        n_marginal,
        ar_c: partitions.len() as u64,
        ac_c: (d.oc as u64).div_ceil(oc_t as u64),
        partitions,
        channels_covered: covered,
        channels_pruned,
        group_slots: slots,
        group_rounds: rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_split() {
        let p = balanced_partitions(0, 32, 17);
        assert_eq!(p.iter().map(|c| c.len).collect::<Vec<_>>(), vec![16, 16]);
        let p = balanced_partitions(0, 5, 4);
        assert_eq!(p.iter().map(|c| c.len).collect::<Vec<_>>(), vec![3, 2]);
        assert_eq!(p[1].start, 3);
    }

    #[test]
    fn chunk_split() {
        let p = chunk_partitions(0, 5, 4);
        assert_eq!(p.iter().map(|c| c.len).collect::<Vec<_>>(), vec![4, 1]);
    }

    #[test]
    fn axis_origins() {
        assert_eq!(padded_axis(18, 8, 3), vec![0, 6, 12]);
        assert_eq!(floor_axis(18, 8, 3), vec![0, 6]);
        assert_eq!(floor_axis(5, 5, 5), vec![0]);
        assert_eq!(padded_axis(5, 3, 3), vec![0, 1, 2]);
    }
}
