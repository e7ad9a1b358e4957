//! Error taxonomy shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported order q={0}; supported boundary orders are 1..=5")]
    UnsupportedOrder(usize),

    #[error("grid too small: {points} points cannot hold two closures of width {closure}")]
    GridTooSmall { points: usize, closure: usize },

    #[error("projection constraints inconsistent: least-squares residual {residual:.3e}")]
    InconsistentConstraints { residual: f64 },

    #[error("glue spaces are not nested: {0}")]
    NotNested(String),

    #[error("interface partitions do not tile [-1,1]: {0}")]
    PartitionMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("penalty parameter alpha must be non-negative, got {0}")]
    NegativeAlpha(f64),

    #[error("non-positive Jacobian {value:.3e} at ({xi1}, {xi2})")]
    NonPositiveJacobian { value: f64, xi1: f64, xi2: f64 },

    #[error("non-positive surface Jacobian {0:.3e}")]
    NonPositiveSurfaceJacobian(f64),

    #[error("face {face:?} of block {block} is neither a boundary nor part of an interface")]
    UnresolvedFace { block: usize, face: crate::fd::Face },

    #[error("state is no longer finite at t={0} (instability)")]
    NonFiniteState(f64),

    #[error("coupled system has {0} unknowns, exceeding the dense-operator guard of {1}")]
    SystemTooLarge(usize, usize),

    #[error("glue order {glue} too low for DG order {dg} / interior order {interior}")]
    GlueOrderTooLow { glue: usize, dg: usize, interior: usize },

    #[error("edge quadrature too coarse: projection compatibility residual {0:.3e}")]
    QuadratureTooCoarse(f64),

    #[error("element mass matrix is singular or not SPD")]
    SingularMass,

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("bad coefficient data: {0}")]
    BadCoefficientData(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable process exit code per error kind (used by the CLI).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigParse(_) => 2,
            Error::UnsupportedOrder(_) => 3,
            Error::GridTooSmall { .. } => 4,
            Error::InconsistentConstraints { .. } => 5,
            Error::NotNested(_) => 6,
            Error::PartitionMismatch(_) => 7,
            Error::ShapeMismatch(_) => 8,
            Error::NegativeAlpha(_) => 9,
            Error::NonPositiveJacobian { .. } => 10,
            Error::NonPositiveSurfaceJacobian(_) => 11,
            Error::UnresolvedFace { .. } => 12,
            Error::NonFiniteState(_) => 13,
            Error::SystemTooLarge(_, _) => 14,
            Error::GlueOrderTooLow { .. } => 15,
            Error::QuadratureTooCoarse(_) => 16,
            Error::SingularMass => 17,
            Error::BadCoefficientData(_) => 18,
            Error::Io(_) => 19,
        }
    }
}
