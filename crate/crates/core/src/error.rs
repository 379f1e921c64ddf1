use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Coordinates are carried as `f64` regardless of the scalar type the caller
/// works in so the error type stays non-generic.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh format error: {0}")]
    MeshFormat(String),

    #[error("degenerate simplex {simplex} (area {area:e})")]
    DegenerateMesh { simplex: usize, area: f64 },

    #[error("point ({x}, {y}) lies outside the mesh")]
    PointOutsideMesh { x: f64, y: f64 },

    #[error("invalid scale: {0}")]
    InvalidScale(String),

    #[error("scale too coarse: no node lies deeper than {depth} inside the domain")]
    ScaleTooCoarse { depth: f64 },

    #[error("direction set fails to cover the unit sphere: gap {gap} > theta {theta}")]
    CoveringFailure { gap: f64, theta: f64 },

    #[error("stencil point ({x}, {y}) of node {node} lies outside the mesh")]
    StencilOutsideMesh { node: usize, x: f64, y: f64 },

    #[error("node {0} is not an interior node")]
    NotInteriorNode(usize),

    #[error("grid function belongs to a different mesh or cloud")]
    GridMismatch,

    #[error("boundary extension unavailable: {0}")]
    ExtensionUnavailable(String),

    #[error("unknown problem `{0}` (expected aronsson, paraboloid, affine or cone)")]
    UnknownProblem(String),

    #[error("numerical breakdown: non-finite value after {iteration} sweeps")]
    NumericalBreakdown { iteration: usize },

    #[error("the obstacle solver needs an obstacle")]
    ObstacleRequired,

    #[error("obstacle {chi} is not below the boundary value {g} at node {node}")]
    InadmissibleObstacle { node: usize, chi: f64, g: f64 },

    #[error("cloud spacing {spacing} is not smaller than the domain diameter {diameter}")]
    CloudTooCoarse { spacing: f64, diameter: f64 },

    #[error("the radius-{eps} neighbor graph of the cloud is disconnected")]
    DisconnectedCloud { eps: f64 },

    #[error("cloud carries no symmetry certificate (lattice tag)")]
    CloudNotSymmetric,

    #[error("problem `{0}` has no exact solution")]
    NoExactSolution(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
