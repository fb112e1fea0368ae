use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud `{0}` has no points")]
    EmptyCloud(String),

    #[error("point {index} of cloud `{id}` has a non-finite coordinate")]
    NonFinitePoint { id: String, index: usize },

    #[error("rotation is not orthonormal with det +1 (max deviation {deviation:.3e})")]
    NotRigid { deviation: f64 },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite coefficient in linear program: {0}")]
    NonFiniteCoefficient(String),

    #[error("degenerate correspondences: {0}")]
    DegenerateCorrespondences(String),

    #[error("alignment failed: {0}")]
    AlignmentFailed(String),

    #[error("registration of cloud `{cloud_id}` failed: {source}")]
    PairFailed {
        cloud_id: String,
        #[source]
        source: Box<Error>,
    },
}
