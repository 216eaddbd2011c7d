//! Knobs shared by the mappers.

use serde::{Deserialize, Serialize};

use crate::model::GroupSchedule;
use crate::Exact;

/// How many input channels a mapper may drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunePolicy {
    /// Largest fraction of a layer's input channels that may be removed.
    pub fraction: Exact,
    /// Channels a single depth-window step may remove.
    pub per_partition: u32,
}

impl Default for PrunePolicy {
    fn default() -> Self {
        PrunePolicy {
            fraction: Exact::new(3, 100),
            per_partition: 1,
        }
    }
}

impl PrunePolicy {
    pub fn none() -> Self {
        PrunePolicy {
            fraction: Exact::from_integer(0),
            per_partition: 0,
        }
    }

    /// Budget given as a percentage, e.g. `3` or `2.5`.
    pub fn from_percent(pct: f64, per_partition: u32) -> Self {
        let scaled = (pct.max(0.0) * 1000.0).round() as u128;
        PrunePolicy {
            fraction: Exact::new(scaled, 100_000),
            per_partition,
        }
    }

    /// Channels removable from a layer with `channels` inputs: `ceil(fraction * channels)`.
    pub fn layer_cap(&self, channels: u32) -> u32 {
        let v = self.fraction * Exact::from_integer(channels as u128);
        (*v.numer()).div_ceil(*v.denom()) as u32
    }
}

/// Macro grid the search optimizes for. `1 x 1` is the single-macro case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub rows: u32,
    pub cols: u32,
}

impl Default for GridShape {
    fn default() -> Self {
        GridShape { rows: 1, cols: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MapOptions {
    pub prune: PrunePolicy,
    pub schedule: GroupSchedule,
    pub grid: GridShape,
}
