//! Window counting, channel tiling, cycle counts and array utilization.

use crate::error::{Error, Result};
use crate::model::{ArrayConfig, GroupSchedule, MappingPlan, Placement, TilePlan};
use crate::scalar::Scalar;

/// Kernel positions inside a `pw_h x pw_w` window.
pub fn kernels_per_window(pw_h: u32, pw_w: u32, k: u32) -> Result<u32> {
    if k == 0 || pw_h < k || pw_w < k {
        return Err(Error::WindowSmallerThanKernel {
            pw_h,
            pw_w,
            kernel: k,
        });
    }
    Ok((pw_h - k + 1) * (pw_w - k + 1))
}

/// Input channels per row pass. Zero means the window does not fit.
pub fn input_channel_tile(rows: u32, pw_h: u32, pw_w: u32) -> u32 {
    let area = pw_h as u64 * pw_w as u64;
    if area == 0 {
        return 0;
    }
    (rows as u64 / area) as u32
}

/// Output channels per column pass. Zero means not even one kernel column set fits.
pub fn output_channel_tile(cols: u32, pw_h: u32, pw_w: u32, k: u32, weight_bits: u32) -> Result<u32> {
    let kpw = kernels_per_window(pw_h, pw_w, k)?;
    Ok(cols / weight_bits.max(1) / kpw)
}

fn check_fits(i_h: u32, i_w: u32, pw_h: u32, pw_w: u32, k: u32) -> Result<()> {
    kernels_per_window(pw_h, pw_w, k)?;
    if pw_h > i_h || pw_w > i_w {
        return Err(Error::WindowExceedsIfm {
            pw_h,
            pw_w,
            ifm_h: i_h,
            ifm_w: i_w,
        });
    }
    Ok(())
}

fn floor_count(i: u32, pw: u32, k: u32) -> u64 {
    ((i - pw) / (pw - k + 1) + 1) as u64
}

fn ceil_count(i: u32, pw: u32, k: u32) -> u64 {
    (i - pw).div_ceil(pw - k + 1) as u64 + 1
}

/// Regular in-bounds windows at stride `PW-K+1` per axis, plus `n_marginal`.
pub fn count_parallel_windows(
    i_h: u32,
    i_w: u32,
    pw_h: u32,
    pw_w: u32,
    k: u32,
    n_marginal: u64,
) -> Result<u64> {
    check_fits(i_h, i_w, pw_h, pw_w, k)?;
    Ok(floor_count(i_w, pw_w, k) * floor_count(i_h, pw_h, k) + n_marginal)
}

/// Windows needed when the last window per axis may hang past the IFM edge.
pub fn count_padded_windows(i_h: u32, i_w: u32, pw_h: u32, pw_w: u32, k: u32) -> Result<u64> {
    check_fits(i_h, i_w, pw_h, pw_w, k)?;
    Ok(ceil_count(i_w, pw_w, k) * ceil_count(i_h, pw_h, k))
}

/// Output columns and rows left uncovered by the in-bounds regular grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BorderRemainder {
    pub right: u32,
    pub bottom: u32,
}

pub fn border_remainder(i_h: u32, i_w: u32, pw_h: u32, pw_w: u32, k: u32) -> Result<BorderRemainder> {
    check_fits(i_h, i_w, pw_h, pw_w, k)?;
    let rem = |i: u32, pw: u32| {
        let s = pw - k + 1;
        (i - k + 1) - floor_count(i, pw, k) as u32 * s
    };
    Ok(BorderRemainder {
        right: rem(i_w, pw_w),
        bottom: rem(i_h, pw_h),
    })
}

/// Sum of `N_windows * AR_c * AC_c` (times group rounds) over tiles.
pub fn cycles_single(plan: &MappingPlan) -> u64 {
    plan.tiles.iter().map(TilePlan::cycles).sum()
}

/// Cycles of one tile on an `r x c` grid. Row passes and group rounds spread over `r`
/// macros, column passes over `c`; whatever does not fit multiplies the window count.
pub fn tile_cycles_multi(tile: &TilePlan, r: u32, c: u32) -> u64 {
    let rows = tile.ar_c * tile.group_rounds;
    tile.n_windows * rows.div_ceil(r.max(1) as u64) * tile.ac_c.div_ceil(c.max(1) as u64)
}

/// Macros a tile keeps busy on an `r x c` grid.
pub fn tile_active_macros(tile: &TilePlan, r: u32, c: u32) -> u32 {
    let rows = (tile.ar_c * tile.group_rounds).min(r as u64);
    let cols = tile.ac_c.min(c as u64);
    (rows * cols) as u32
}

pub fn cycles_multi(plan: &MappingPlan, r: u32, c: u32) -> u64 {
    plan.tiles.iter().map(|t| tile_cycles_multi(t, r, c)).sum()
}

pub fn active_macros(plan: &MappingPlan, r: u32, c: u32) -> u32 {
    plan.tiles
        .iter()
        .map(|t| tile_active_macros(t, r, c))
        .max()
        .unwrap_or(1)
        .max(1)
}

/// Pixels of a placement inside the IFM.
pub fn in_bounds_cells(p: &Placement, i_h: u32, i_w: u32) -> u64 {
    let w = p.width.min(i_w.saturating_sub(p.x)) as u64;
    let h = p.height.min(i_h.saturating_sub(p.y)) as u64;
    w * h
}

/// Kernel positions of a placement that produce a real output.
pub fn valid_kernels(p: &Placement, i_h: u32, i_w: u32, k: u32) -> u64 {
    let axis = |start: u32, len: u32, i: u32| -> u64 {
        if start + k > i || len < k {
            0
        } else {
            ((len - k + 1).min(i - k + 1 - start)) as u64
        }
    };
    axis(p.x, p.width, i_w) * axis(p.y, p.height, i_h)
}

/// Groups in each activation round of a tile, as seen by one macro.
fn groups_per_round(tile: &TilePlan, groups: u32, schedule: GroupSchedule) -> Vec<u64> {
    match schedule {
        GroupSchedule::Concurrent => vec![1],
        _ => {
            let m = tile.group_slots.max(1) as u64;
            let g = groups as u64;
            (0..tile.group_rounds)
                .map(|i| m.min(g - i * m))
                .collect()
        }
    }
}

/// Cycle-weighted mean share of array cells that hold weights, in percent.
///
/// Per activation the weighted cells are in-bounds input rows times columns of
/// kernels that produce a real output.
pub fn array_utilization<T: Scalar>(plan: &MappingPlan, array: &ArrayConfig) -> T {
    let l = &plan.layer;
    let mut num: u128 = 0;
    let mut activations: u128 = 0;
    for tile in &plan.tiles {
        let spatial: u128 = tile
            .placements
            .iter()
            .map(|p| {
                in_bounds_cells(p, l.ifm_h(), l.ifm_w()) as u128
                    * valid_kernels(p, l.ifm_h(), l.ifm_w(), l.kernel()) as u128
            })
            .sum();
        let rounds = groups_per_round(tile, l.groups(), plan.schedule);
        let g2: u128 = rounds.iter().map(|&g| (g * g) as u128).sum();
        let channels: u128 = tile.partitions.iter().map(|p| p.len as u128).sum();
        num += spatial * channels * l.group_out() as u128 * array.weight_bits() as u128 * g2;
        let per_round = tile.n_windows as u128 * tile.ar_c as u128 * tile.ac_c as u128;
        activations += per_round * rounds.len() as u128;
    }
    let den = activations * array.rows() as u128 * array.cols() as u128;
    if den == 0 {
        return T::zero();
    }
    T::from_ratio(num * 100, den)
}

/// Input cells fed with padding instead of real pixels, summed over all activations.
pub fn null_input_cells(plan: &MappingPlan) -> u64 {
    let l = &plan.layer;
    plan.tiles
        .iter()
        .map(|tile| {
            let oob: u64 = tile
                .placements
                .iter()
                .map(|p| p.width as u64 * p.height as u64 - in_bounds_cells(p, l.ifm_h(), l.ifm_w()))
                .sum();
            oob * tile.channels_covered as u64 * tile.ac_c * l.groups() as u64
        })
        .sum()
}
