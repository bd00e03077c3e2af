//! Generalized distance-squared mappings `G(p, A): R^(n+1) -> R^(k+1)`.
//!
//! Each component of `G` is `sum_j a_ij (x_j - p_ij)^2`. The crate builds these
//! maps as exact sparse polynomial maps, reduces them to normal form (Whitney
//! umbrella or inclusion) through explicit chains of invertible coordinate
//! changes, certifies when the centers fall on a bad set, and constructs
//! perturbations of `A` that flatten the image and make the map unstable.
//!
//! Modules:
//! - [`polymap`]: sparse polynomial maps, composition, Jacobians, elementary transforms.
//! - [`gds`]: coefficient matrices, center configurations, pivoting.
//! - [`reduction`]: the two reduction pipelines and their bad-set certificates.
//! - [`instability`]: the center map `Psi`, the linear map `c -> b(p, c)` and witnesses.
//! - [`verify`]: sampled equality, round trips, singular points, flat images.

pub mod gds;
pub mod instability;
pub mod linalg;
pub mod par;
pub mod polymap;
pub mod reduction;
pub mod sampling;
pub mod tol;
pub mod verify;

pub use gds::{build_gds, CenterConfig, CoefficientMatrix, GdsError};
pub use polymap::{DiffeoChain, ElementaryTransform, PolyError, PolyMap};
pub use reduction::{classify, Classification, NormalFormKind, ReductionError, ReductionResult};
