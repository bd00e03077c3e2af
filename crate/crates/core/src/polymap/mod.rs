//! Sparse multivariate polynomial maps with float coefficients.
//!
//! A [`PolyMap`] is the carrier for `G(p, A)`, every intermediate map of the
//! reduction pipelines, and the normal forms. All values are immutable after
//! construction and kept in canonical form: graded-lex ordered monomials, no
//! duplicate monomials, no coefficient below [`crate::tol::COEF_DROP`] times the
//! largest coefficient of its component, total degree at most [`MAX_DEGREE`].

mod map;
mod monomial;
mod poly;
mod transform;

pub use map::PolyMap;
pub use monomial::Monomial;
pub use poly::Poly;
pub use transform::{ChainSide, DiffeoChain, ElementaryTransform, ShearRow, TransformKind};

use thiserror::Error;

pub const MAX_DEGREE: u32 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degree {degree} exceeds the supported maximum {max}")]
    DegreeOverflow { degree: u32, max: u32 },
    #[error("duplicate monomial {exp:?} in component {component}")]
    DuplicateMonomial { component: usize, exp: Vec<u32> },
    #[error("non-finite coefficient in component {component}")]
    NonFinite { component: usize },
    #[error("transform `{label}` is not invertible: {reason}")]
    NotInvertible { label: String, reason: String },
    #[error("transform `{label}` violates its structure: {reason}")]
    BadStructure { label: String, reason: String },
}
