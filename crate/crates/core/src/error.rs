use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{field} must be at least 1")]
    ZeroField { field: &'static str },
    #[error("kernel exceeds IFM: K={kernel} but IFM is {ifm_h}x{ifm_w}")]
    KernelExceedsIfm { kernel: u32, ifm_h: u32, ifm_w: u32 },
    #[error("group does not divide channels: G={groups}, IC={in_channels}, OC={out_channels}")]
    GroupDoesNotDivide {
        groups: u32,
        in_channels: u32,
        out_channels: u32,
    },
    #[error("only unit stride is supported, got {0}")]
    NonUnitStride(u32),
    #[error("only square kernels are supported, got {0}")]
    RectangularKernel(String),
    #[error("array too small: {rows} rows cannot hold one {kernel}x{kernel} kernel")]
    ArrayTooSmall { rows: u32, kernel: u32 },
    #[error("weight_bits {weight_bits} exceeds {cols} array columns")]
    WeightBitsExceedColumns { weight_bits: u32, cols: u32 },
    #[error("window smaller than kernel: {pw_h}x{pw_w} with K={kernel}")]
    WindowSmallerThanKernel { pw_h: u32, pw_w: u32, kernel: u32 },
    #[error("window exceeds IFM: {pw_h}x{pw_w} on {ifm_h}x{ifm_w}")]
    WindowExceedsIfm {
        pw_h: u32,
        pw_w: u32,
        ifm_h: u32,
        ifm_w: u32,
    },
    #[error("row constraint violated: {ic_t} channels x {area} cells > {rows} rows")]
    RowConstraint { ic_t: u32, area: u32, rows: u32 },
    #[error("column constraint violated: {oc_t} x {kernels} kernels x {bits} bits > {cols} columns")]
    ColumnConstraint {
        oc_t: u32,
        kernels: u32,
        bits: u32,
        cols: u32,
    },
    #[error("degenerate marginal: a {strip}-wide strip cannot be reshaped to area {area} with K={kernel}")]
    DegenerateMarginal { strip: u32, area: u32, kernel: u32 },
    #[error("exhausted without fit: {remaining} channels, prune budget {budget}")]
    ExhaustedWithoutFit { remaining: u32, budget: u32 },
    #[error("prune budget exceeded: residual {residual} channels, budget {budget}")]
    PruneBudgetExceeded { residual: u32, budget: u32 },
    #[error("no admissible group: every candidate fails the accuracy gate")]
    NoAdmissibleGroup,
    #[error("instance too large: {candidates} candidates exceed the bound of {bound}")]
    InstanceTooLarge { candidates: u128, bound: u128 },
    #[error("unknown format `{0}`")]
    UnknownFormat(String),
    #[error("unknown mapper `{0}`")]
    UnknownMapper(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("layer {name}: {source}")]
    Layer {
        name: String,
        #[source]
        source: Box<Error>,
    },
    #[error("at least one mapper must be selected")]
    NoMapper,
}

pub type Result<T> = std::result::Result<T, Error>;
