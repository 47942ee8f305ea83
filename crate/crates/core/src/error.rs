use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("raster: cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("raster: cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("raster: cannot write {path}: {message}")]
    Encode { path: PathBuf, message: String },
    #[error("raster: image is {width}x{height}, at least 2x2 is required")]
    TooSmall { width: usize, height: usize },
    #[error("raster: {0}")]
    InvalidRaster(String),
    #[error("{module}: dimension mismatch, expected {expected:?} got {got:?}")]
    DimensionMismatch {
        module: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("{module}: invalid parameter: {message}")]
    InvalidParameter {
        module: &'static str,
        message: String,
    },
    #[error("importance: saliency power iteration did not converge after {iterations} iterations")]
    SaliencyNotConverged { iterations: usize },
    #[error("mesh: degenerate triangulation after {retries} retries")]
    DegenerateMesh { retries: usize },
    #[error("solver: deformed edge ({0}, {1}) has zero length")]
    DegenerateEdge(usize, usize),
    #[error("warp: triangle {0} is flipped or degenerate in the deformed mesh")]
    FlippedTriangle(usize),
    #[error("seam: {0}")]
    Seam(String),
}

impl Error {
    pub(crate) fn param(module: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            module,
            message: message.into(),
        }
    }
}
