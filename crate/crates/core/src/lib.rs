//! Window mapping search for convolution layers on compute-in-memory crossbars.
//!
//! A layer is mapped by sliding parallel windows over its input feature map; each window
//! occupies `IC_t * PW_h * PW_w` wordlines and `OC_t * kernels * weight_bits` bitlines.
//! The mappers here pick window shapes and channel partitions that minimize the number
//! of array activations.

pub mod baseline;
pub mod error;
pub mod grid;
pub mod grouping;
pub mod metrics;
pub mod model;
pub mod network;
pub mod options;
pub mod oracle;
pub mod report;
pub mod scalar;
pub mod tetris;
mod tiling;

pub use error::{Error, Result};
pub use model::{
    ArrayConfig, ChannelRange, GroupSchedule, LayerSpec, MacroGrid, Mapper, MappingPlan,
    ParallelWindow, Placement, TilePlan, WindowKind,
};
pub use options::{GridShape, MapOptions, PrunePolicy};
pub use scalar::Scalar;

/// Exact ratio type used for utilization, speedups and proxy ratios.
pub type Exact = num_rational::Ratio<u128>;
/// Floating-point view of the same ratios.
pub type Approx = f64;

/// Runs one mapper on one layer. Group count comes from the layer itself.
pub fn map_layer(
    layer: &LayerSpec,
    array: &ArrayConfig,
    mapper: Mapper,
    opts: &MapOptions,
) -> Result<MappingPlan> {
    let plan = match mapper {
        Mapper::Img2col => baseline::map_img2col_with(layer, array, opts),
        Mapper::Sdk => baseline::map_sdk_with(layer, array, opts),
        Mapper::VwSdk => baseline::search_vw_sdk_with(layer, array, opts),
        Mapper::VwcSdk => baseline::map_vwc_sdk(layer, array, opts),
        Mapper::Tetris | Mapper::TetrisG => tetris::tetris_plan(layer, array, opts, mapper),
    };
    plan.map_err(|e| Error::Layer {
        name: layer.name().to_string(),
        source: Box::new(e),
    })
}
