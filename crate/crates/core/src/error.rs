use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("distance to an empty set is undefined")]
    EmptySet,

    #[error("cut level {level:.6e} lies within {gap:.1e} of eigenvalue {eigenvalue:.6e}")]
    IllPosedCut { level: f64, eigenvalue: f64, gap: f64 },

    #[error("rank condition violated at sample point {point}: {detail}")]
    RankViolation { point: usize, detail: String },

    #[error("construction failed at current mesh resolution ({0}); subdivide and retry")]
    NeedsRefinement(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("scenario error: {0}")]
    Scenario(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn rank(point: usize, detail: impl Into<String>) -> Self {
        Error::RankViolation {
            point,
            detail: detail.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
