//! Domain types: layers, arrays, windows, tiles and plans.
//!
//! Everything here is immutable after construction. Windows can only be built through
//! [`ParallelWindow::new`], which enforces the row and column capacity of the array.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Exact;

fn nonzero(field: &'static str, v: u32) -> Result<u32> {
    if v == 0 {
        Err(Error::ZeroField { field })
    } else {
        Ok(v)
    }
}

/// One convolutional layer. Stride is always 1 and kernels are square.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LayerRecord", into = "LayerRecord")]
pub struct LayerSpec {
    name: String,
    ifm_h: u32,
    ifm_w: u32,
    kernel: u32,
    in_channels: u32,
    out_channels: u32,
    groups: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerRecord {
    name: String,
    ifm_h: u32,
    ifm_w: u32,
    kernel: u32,
    in_channels: u32,
    out_channels: u32,
    #[serde(default = "one")]
    groups: u32,
}

fn one() -> u32 {
    1
}

impl TryFrom<LayerRecord> for LayerSpec {
    type Error = Error;

    fn try_from(r: LayerRecord) -> Result<Self> {
        LayerSpec::new(
            r.name,
            r.ifm_h,
            r.ifm_w,
            r.kernel,
            r.in_channels,
            r.out_channels,
            r.groups,
        )
    }
}

impl From<LayerSpec> for LayerRecord {
    fn from(l: LayerSpec) -> Self {
        LayerRecord {
            name: l.name,
            ifm_h: l.ifm_h,
            ifm_w: l.ifm_w,
            kernel: l.kernel,
            in_channels: l.in_channels,
            out_channels: l.out_channels,
            groups: l.groups,
        }
    }
}

impl LayerSpec {
    pub fn new(
        name: impl Into<String>,
        ifm_h: u32,
        ifm_w: u32,
        kernel: u32,
        in_channels: u32,
        out_channels: u32,
        groups: u32,
    ) -> Result<Self> {
        let layer = LayerSpec {
            name: name.into(),
            ifm_h,
            ifm_w,
            kernel,
            in_channels,
            out_channels,
            groups,
        };
        validate_layer(&layer)?;
        Ok(layer)
    }

    /// Square IFM shorthand with G=1.
    pub fn square(
        name: impl Into<String>,
        ifm: u32,
        kernel: u32,
        in_channels: u32,
        out_channels: u32,
    ) -> Result<Self> {
        Self::new(name, ifm, ifm, kernel, in_channels, out_channels, 1)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn ifm_h(&self) -> u32 {
        self.ifm_h
    }
    pub fn ifm_w(&self) -> u32 {
        self.ifm_w
    }
    pub fn kernel(&self) -> u32 {
        self.kernel
    }
    pub fn in_channels(&self) -> u32 {
        self.in_channels
    }
    pub fn out_channels(&self) -> u32 {
        self.out_channels
    }
    pub fn groups(&self) -> u32 {
        self.groups
    }

    /// Input channels of one group.
    pub fn group_in(&self) -> u32 {
        self.in_channels / self.groups
    }

    /// Output channels of one group.
    pub fn group_out(&self) -> u32 {
        self.out_channels / self.groups
    }

    pub fn out_h(&self) -> u32 {
        self.ifm_h - self.kernel + 1
    }
    pub fn out_w(&self) -> u32 {
        self.ifm_w - self.kernel + 1
    }

    /// Same geometry with a different group count.
    pub fn with_groups(&self, groups: u32) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.ifm_h,
            self.ifm_w,
            self.kernel,
            self.in_channels,
            self.out_channels,
            groups,
        )
    }
}

/// Returns the layer unchanged if every invariant holds.
pub fn validate_layer(layer: &LayerSpec) -> Result<&LayerSpec> {
    nonzero("I_h", layer.ifm_h)?;
    nonzero("I_w", layer.ifm_w)?;
    nonzero("K", layer.kernel)?;
    nonzero("IC", layer.in_channels)?;
    nonzero("OC", layer.out_channels)?;
    nonzero("G", layer.groups)?;
    if layer.kernel > layer.ifm_h.min(layer.ifm_w) {
        return Err(Error::KernelExceedsIfm {
            kernel: layer.kernel,
            ifm_h: layer.ifm_h,
            ifm_w: layer.ifm_w,
        });
    }
    if layer.in_channels % layer.groups != 0 || layer.out_channels % layer.groups != 0 {
        return Err(Error::GroupDoesNotDivide {
            groups: layer.groups,
            in_channels: layer.in_channels,
            out_channels: layer.out_channels,
        });
    }
    Ok(layer)
}

/// Geometry of one CIM macro plus the macro budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ArrayRecord", into = "ArrayRecord")]
pub struct ArrayConfig {
    rows: u32,
    cols: u32,
    weight_bits: u32,
    max_macros: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct ArrayRecord {
    rows: u32,
    cols: u32,
    #[serde(default = "one")]
    weight_bits: u32,
    #[serde(default = "one")]
    max_macros: u32,
}

impl TryFrom<ArrayRecord> for ArrayConfig {
    type Error = Error;

    fn try_from(r: ArrayRecord) -> Result<Self> {
        ArrayConfig::new(r.rows, r.cols, r.weight_bits, r.max_macros)
    }
}

impl From<ArrayConfig> for ArrayRecord {
    fn from(a: ArrayConfig) -> Self {
        ArrayRecord {
            rows: a.rows,
            cols: a.cols,
            weight_bits: a.weight_bits,
            max_macros: a.max_macros,
        }
    }
}

impl ArrayConfig {
    pub fn new(rows: u32, cols: u32, weight_bits: u32, max_macros: u32) -> Result<Self> {
        nonzero("AR", rows)?;
        nonzero("AC", cols)?;
        nonzero("weight_bits", weight_bits)?;
        nonzero("P_max", max_macros)?;
        if weight_bits > cols {
            return Err(Error::WeightBitsExceedColumns { weight_bits, cols });
        }
        Ok(ArrayConfig {
            rows,
            cols,
            weight_bits,
            max_macros,
        })
    }

    /// One-bit weights, single macro.
    pub fn single(rows: u32, cols: u32) -> Result<Self> {
        Self::new(rows, cols, 1, 1)
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }
    pub fn cols(&self) -> u32 {
        self.cols
    }
    pub fn weight_bits(&self) -> u32 {
        self.weight_bits
    }
    pub fn max_macros(&self) -> u32 {
        self.max_macros
    }

    /// Weights that fit side by side on the bitlines.
    pub fn weight_columns(&self) -> u32 {
        self.cols / self.weight_bits
    }

    pub fn with_macros(&self, max_macros: u32) -> Result<Self> {
        Self::new(self.rows, self.cols, self.weight_bits, max_macros)
    }

    /// Rejects the pair when not even one K×K kernel fits the wordlines.
    pub fn check_layer(&self, layer: &LayerSpec) -> Result<()> {
        let k = layer.kernel();
        if (self.rows as u64) < (k as u64) * (k as u64) {
            return Err(Error::ArrayTooSmall {
                rows: self.rows,
                kernel: k,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Regular,
    Square,
    Marginal,
    Depth,
}

/// A parallel window `(PW_w, PW_h, IC_t, OC_t)` for a given kernel size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ParallelWindow {
    width: u32,
    height: u32,
    ic_t: u32,
    oc_t: u32,
    kernel: u32,
    kind: WindowKind,
}

impl ParallelWindow {
    pub fn new(
        width: u32,
        height: u32,
        ic_t: u32,
        oc_t: u32,
        kind: WindowKind,
        kernel: u32,
        array: &ArrayConfig,
    ) -> Result<Self> {
        if kernel == 0 || width < kernel || height < kernel {
            return Err(Error::WindowSmallerThanKernel {
                pw_h: height,
                pw_w: width,
                kernel,
            });
        }
        let area = width as u64 * height as u64;
        if ic_t as u64 * area > array.rows() as u64 {
            return Err(Error::RowConstraint {
                ic_t,
                area: area.min(u32::MAX as u64) as u32,
                rows: array.rows(),
            });
        }
        let kernels = (width - kernel + 1) as u64 * (height - kernel + 1) as u64;
        if oc_t as u64 * kernels * array.weight_bits() as u64 > array.cols() as u64 {
            return Err(Error::ColumnConstraint {
                oc_t,
                kernels: kernels.min(u32::MAX as u64) as u32,
                bits: array.weight_bits(),
                cols: array.cols(),
            });
        }
        Ok(ParallelWindow {
            width,
            height,
            ic_t,
            oc_t,
            kernel,
            kind,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn ic_t(&self) -> u32 {
        self.ic_t
    }
    pub fn oc_t(&self) -> u32 {
        self.oc_t
    }
    pub fn kernel(&self) -> u32 {
        self.kernel
    }
    pub fn kind(&self) -> WindowKind {
        self.kind
    }
    pub fn area(&self) -> u32 {
        self.width * self.height
    }

    /// Kernel positions embedded in the window.
    pub fn kernels(&self) -> u32 {
        (self.width - self.kernel + 1) * (self.height - self.kernel + 1)
    }

    /// Table tuple in `PW_w x PW_h x IC_t x OC_t` order.
    pub fn tuple(&self) -> String {
        format!("{}x{}x{}x{}", self.width, self.height, self.ic_t, self.oc_t)
    }
}

impl fmt::Display for ParallelWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tuple())
    }
}

/// Top-left corner and size of one window on the IFM, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Placement {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Placement {
    pub fn new(x: u32, y: u32, width: u32, height: u32) -> Self {
        Placement {
            x,
            y,
            width,
            height,
        }
    }
}

/// A contiguous slice of input channels mapped in one row pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelRange {
    pub start: u32,
    pub len: u32,
}

/// How the groups of a grouped layer share one macro.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupSchedule {
    /// As many groups per activation as fit the rows and columns, the rest in extra rounds.
    #[default]
    Packed,
    /// One group per activation.
    Serial,
    /// All groups in the same activation, capacity not checked.
    Concurrent,
}

impl FromStr for GroupSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "packed" => Ok(Self::Packed),
            "serial" => Ok(Self::Serial),
            "concurrent" => Ok(Self::Concurrent),
            other => Err(Error::Parse {
                line: 0,
                message: format!("unknown group schedule `{other}`"),
            }),
        }
    }
}

/// One window shape applied to a set of channel partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TilePlan {
    pub window: ParallelWindow,
    pub marginal_windows: Vec<ParallelWindow>,
    pub placements: Vec<Placement>,
    pub n_windows: u64,
    pub n_marginal: u64,
    pub partitions: Vec<ChannelRange>,
    pub ar_c: u64,
    pub ac_c: u64,
    /// Input channels of one group mapped by this tile.
    pub channels_covered: u32,
    /// Input channels of one group dropped by this tile.
    pub channels_pruned: u32,
    /// Groups sharing one activation.
    pub group_slots: u32,
    /// Activations needed to go through all groups.
    pub group_rounds: u64,
}

impl TilePlan {
    pub fn cycles(&self) -> u64 {
        self.n_windows * self.ar_c * self.ac_c * self.group_rounds
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum Mapper {
    #[serde(rename = "img2col")]
    Img2col,
    #[serde(rename = "sdk")]
    Sdk,
    #[serde(rename = "vw-sdk")]
    VwSdk,
    #[serde(rename = "vwc-sdk")]
    VwcSdk,
    #[serde(rename = "tetris")]
    Tetris,
    #[serde(rename = "tetrisg")]
    TetrisG,
}

impl Mapper {
    pub const ALL: [Mapper; 6] = [
        Mapper::Img2col,
        Mapper::Sdk,
        Mapper::VwSdk,
        Mapper::VwcSdk,
        Mapper::Tetris,
        Mapper::TetrisG,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Mapper::Img2col => "img2col",
            Mapper::Sdk => "sdk",
            Mapper::VwSdk => "vw-sdk",
            Mapper::VwcSdk => "vwc-sdk",
            Mapper::Tetris => "tetris",
            Mapper::TetrisG => "tetrisg",
        }
    }
}

impl fmt::Display for Mapper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mapper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Mapper::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::UnknownMapper(s.to_string()))
    }
}

/// The tiles chosen for one layer by one mapper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MappingPlan {
    pub layer: LayerSpec,
    pub mapper: Mapper,
    pub schedule: GroupSchedule,
    pub tiles: Vec<TilePlan>,
    pub total_cycles_single: u64,
    pub utilization_pct: Exact,
    /// Dropped input channels over all groups.
    pub total_pruned_channels: u32,
    /// Set when pruning was wanted but the residual exceeded the budget.
    pub prune_budget_exceeded: bool,
}

impl MappingPlan {
    pub fn new(
        layer: LayerSpec,
        mapper: Mapper,
        schedule: GroupSchedule,
        tiles: Vec<TilePlan>,
        array: &ArrayConfig,
    ) -> Self {
        let total_cycles_single = tiles.iter().map(TilePlan::cycles).sum();
        let total_pruned_channels =
            tiles.iter().map(|t| t.channels_pruned).sum::<u32>() * layer.groups();
        let mut plan = MappingPlan {
            layer,
            mapper,
            schedule,
            tiles,
            total_cycles_single,
            utilization_pct: Exact::from_integer(0),
            total_pruned_channels,
            prune_budget_exceeded: false,
        };
        plan.utilization_pct = crate::metrics::array_utilization::<Exact>(&plan, array);
        plan
    }

    pub fn groups(&self) -> u32 {
        self.layer.groups()
    }

    /// Distinct window tuples in tile order.
    pub fn tuples(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.tiles {
            let s = t.window.tuple();
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }
}

/// An `r x c` arrangement of macros with its cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MacroGrid {
    pub rows: u32,
    pub cols: u32,
    pub cycles_multi: u64,
    pub active_macros: u32,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_accepts_table_layer() {
        let l = LayerSpec::new("2", 18, 18, 3, 24, 32, 1).unwrap();
        assert_eq!(validate_layer(&l).unwrap(), &l);
    }

    #[test]
    fn validate_accepts_kernel_sized_ifm() {
        let l = LayerSpec::new("t", 3, 3, 3, 1, 1, 1).unwrap();
        assert_eq!(l.out_h() * l.out_w(), 1);
    }

    #[test]
    fn validate_rejects_non_dividing_group() {
        let e = LayerSpec::new("f", 5, 5, 3, 5, 3, 2).unwrap_err();
        assert!(matches!(e, Error::GroupDoesNotDivide { .. }));
        assert!(e.to_string().contains("group does not divide channels"));
    }

    #[test]
    fn validate_rejects_large_kernel() {
        let e = LayerSpec::new("k", 4, 6, 5, 1, 1, 1).unwrap_err();
        assert!(e.to_string().contains("kernel exceeds IFM"));
    }

    #[test]
    fn validate_rejects_zero() {
        assert!(LayerSpec::new("z", 4, 4, 3, 0, 1, 1).is_err());
        assert!(ArrayConfig::new(0, 4, 1, 1).is_err());
    }

    #[test]
    fn array_bits_must_fit() {
        assert!(ArrayConfig::new(40, 15, 5, 1).is_ok());
        assert!(ArrayConfig::new(40, 4, 5, 1).is_err());
    }

    #[test]
    fn array_rows_must_hold_kernel() {
        let a = ArrayConfig::single(8, 64).unwrap();
        let l = LayerSpec::square("l", 6, 3, 1, 1).unwrap();
        assert!(matches!(a.check_layer(&l), Err(Error::ArrayTooSmall { .. })));
    }

    #[test]
    fn window_constructor_enforces_capacity() {
        let a = ArrayConfig::single(512, 512).unwrap();
        let w = ParallelWindow::new(10, 4, 12, 32, WindowKind::Regular, 3, &a).unwrap();
        assert_eq!(w.tuple(), "10x4x12x32");
        assert_eq!(w.kernels(), 16);
        assert!(ParallelWindow::new(10, 4, 13, 32, WindowKind::Regular, 3, &a).is_err());
        assert!(ParallelWindow::new(10, 4, 12, 33, WindowKind::Regular, 3, &a).is_err());
        assert!(ParallelWindow::new(2, 4, 1, 1, WindowKind::Regular, 3, &a).is_err());
    }

    #[test]
    fn window_columns_count_weight_bits() {
        let a = ArrayConfig::new(40, 15, 5, 1).unwrap();
        assert!(ParallelWindow::new(3, 3, 4, 3, WindowKind::Regular, 3, &a).is_ok());
        assert!(ParallelWindow::new(3, 4, 4, 2, WindowKind::Regular, 3, &a).is_err());
    }

    #[test]
    fn layer_json_round_trip() {
        let l = LayerSpec::new("3b", 28, 28, 5, 32, 96, 2).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(serde_json::from_str::<LayerSpec>(&s).unwrap(), l);
    }

    #[test]
    fn layer_json_rejects_invalid() {
        let s = r#"{"name":"x","ifm_h":2,"ifm_w":2,"kernel":3,"in_channels":1,"out_channels":1}"#;
        assert!(serde_json::from_str::<LayerSpec>(s).is_err());
    }

    #[test]
    fn mapper_names_parse() {
        for m in Mapper::ALL {
            assert_eq!(m.name().parse::<Mapper>().unwrap(), m);
        }
        assert_eq!("VW_SDK".parse::<Mapper>().unwrap(), Mapper::VwSdk);
        assert!("sdk2".parse::<Mapper>().is_err());
    }
}
