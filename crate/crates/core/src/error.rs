use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("expected {expected} field, got {found}")]
    Valence { expected: String, found: String },

    #[error("form degree {degree} is not below the dimension {dim}")]
    DegreeTooHigh { degree: usize, dim: usize },

    #[error("incomplete transport: solution left the fiber domain at t = {time:.6}")]
    IncompleteTransport { time: f64 },

    #[error("connection is not linear in the base vector (defect {defect:.3e})")]
    NonlinearConnection { defect: f64 },

    #[error("frame is rank deficient (rank {rank}, expected {expected})")]
    RankDeficient { rank: usize, expected: usize },

    #[error("frame is not isotropic (gram defect {defect:.3e})")]
    NotIsotropic { defect: f64 },

    #[error("fiber non-degeneracy fails at point {point:?}")]
    Degenerate { point: Vec<f64> },

    #[error("vector is not in the image of the anchor (residual {residual:.3e})")]
    NotInImage { residual: f64 },

    #[error("generators do not span the subbundle at {point:?}")]
    Spanning { point: Vec<f64> },

    #[error("connection is not flat in the supplied trivialization (max coefficient {max:.3e})")]
    NonFlat { max: f64 },

    #[error("sphere family boundary does not collapse (distance {distance:.3e})")]
    BoundaryCollapse { distance: f64 },

    #[error("2-form is not closed (residual {residual:.3e})")]
    NotClosed { residual: f64 },

    #[error("vertical bivector is not invertible at {point:?}")]
    NotInvertible { point: Vec<f64> },

    #[error("paths are not composable (endpoint gap {gap:.3e})")]
    NonComposable { gap: f64 },

    #[error("lattice report is empty")]
    EmptyReport,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
