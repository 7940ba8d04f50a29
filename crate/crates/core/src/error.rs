use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported field order {0} (supported: 1, 4, 5, 10, 12)")]
    UnsupportedField(u32),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("invalid block spec `{spec}`: {msg}")]
    BlockSpec { spec: String, msg: String },
    #[error("unknown prototile `{0}`")]
    UnknownPrototile(String),
    #[error("rule failed validation: {0}")]
    InvalidRule(String),
    #[error("patch would contain {tiles} tiles, above the cap of {cap}")]
    DepthTooLarge { tiles: u128, cap: u128 },
    #[error("substitution matrix is not primitive")]
    NotPrimitive,
    #[error("rho = {rho} must exceed the second spectral radius r(M) = {r}")]
    RhoTooSmall { rho: f64, r: f64 },
    #[error("region is not contained in the point window")]
    RegionOutsideWindow,
    #[error("zero count: the cube contains no points")]
    ZeroCount,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("patch does not cover the region")]
    RegionOutsidePatch,
    #[error("delta too small: the region contains no level-0 tile")]
    DeltaTooSmall,
    #[error("region does not fit the tiling at this delta")]
    NotFitted,
    #[error("theorem regime not applicable: r(M) = {r} >= lambda = {lambda}")]
    NotApplicable { r: f64, lambda: f64 },
    #[error("point lies outside the map domain")]
    OutsideDomain,
    #[error("blend width {w} is too wide for mass ratio {alpha}")]
    BlendTooWide { w: f64, alpha: f64 },
    #[error("cell size {cell} too small: an empty cell was found; minimum required c0 = {min_required}")]
    EmptyCell { cell: f64, min_required: f64 },
    #[error("density mismatch: pushed density {ratio} deviates from 1 by more than 2%")]
    DensityMismatch { ratio: f64 },
    #[error("invalid density field: {0}")]
    InvalidDensity(String),
    #[error("no perfect core matching up to D = {cap} (deficiency {deficiency})")]
    NoMatching { cap: f64, deficiency: usize },
    #[error("flattener diagnostics out of tolerance: {0}")]
    Diagnostics(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
