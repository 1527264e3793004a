use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("baseline {length} is shorter than the minimum {d_min}")]
    DegenerateBaseline { length: f64, d_min: f64 },
    #[error("a vector is within {margin} rad of the baseline direction")]
    DegenerateElevation { margin: f64 },
    #[error("zero-length vector")]
    ZeroVector,
    #[error("null vector of M is not a valid (cos, sin) pair (consistency {consistency})")]
    NoConsistentSolution { consistency: f64 },
    #[error("constraint matrix M is rank deficient")]
    RankDeficientM,
    #[error("first vectors do not align (residual {residual})")]
    MisalignedFirstVector { residual: f64 },
    #[error("second vectors do not align after fixing the pose (residual {residual})")]
    InconsistentSecondVector { residual: f64 },
    #[error("tuples are of different kinds")]
    KindMismatch,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DifferentialError {
    #[error("need more than {k} points, got {got}")]
    TooFewPoints { k: usize, got: usize },
    #[error("neighbourhood of point {index} is degenerate")]
    DegenerateNeighborhood { index: usize },
    #[error("segment has {got} points, at least 3 are required")]
    SegmentTooShort { got: usize },
    #[error("consecutive points {index} and {next} coincide", next = .index + 1)]
    DuplicatePoints { index: usize },
}

#[derive(Debug, Error)]
pub enum MatchingError {
    #[error("surface has no points")]
    EmptySurface,
    #[error("surface has no normals")]
    MissingNormals,
    #[error("no point pair passes the baseline and elevation gates")]
    NoValidPairs,
}

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error("no candidate produced a valid pose")]
    NoHypothesisFound,
    #[error("source has fewer than two points")]
    TooFewSourcePoints,
    #[error("target has no points")]
    EmptyTarget,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: file not found")]
    MissingFile { path: PathBuf },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl IoError {
    pub(crate) fn from_io(path: &std::path::Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            IoError::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            IoError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    pub(crate) fn parse(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub fn is_parse(&self) -> bool {
        matches!(self, IoError::Parse { .. } | IoError::Json { .. })
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("fraction {0} is not one of 0.25, 0.5, 1.0")]
    FractionUnsupported(f64),
    #[error("model is degenerate (fewer than two distinct points)")]
    DegenerateModel,
    #[error("model has no curves to sample")]
    NoCurves,
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Differential(#[from] DifferentialError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
