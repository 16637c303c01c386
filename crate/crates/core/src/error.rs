//! Error types shared across the structure-algebra modules.

use thiserror::Error;

/// Errors produced by subspace arithmetic and structure construction.
#[derive(Debug, Error)]
pub enum StructureError {
    #[error("ambient dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ambient dimension {0} is odd; flow/effort splitting needs an even dimension")]
    OddAmbientDimension(usize),

    #[error("matrix is not skew-symmetric: max |m + m^T| entry = {0:.3e}")]
    NotSkew(f64),

    #[error("structure is not Dirac (classified as {found})")]
    NotDirac { found: &'static str },

    #[error("structure is not isotropic (classified as {found})")]
    NotIsotropic { found: &'static str },

    #[error("structure is not coisotropic (classified as {found})")]
    NotCoisotropic { found: &'static str },

    #[error("induced form is not well defined: gauge efforts leak onto the flow range (residual {0:.3e})")]
    IllDefinedForm(f64),

    #[error("port structure of an open input-output structure must be the full space")]
    OpenPortNotFull,

    #[error("coupling map has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    CouplingShape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },

    #[error("product of input-output structures needs at least one factor")]
    EmptyProduct,

    #[error("product factors must all share the same open kind")]
    MixedKinds,

    #[error("interconnection requires an open structure (OFIO or OBIO)")]
    NotOpen,
}
