use serde::{Deserialize, Serialize};

use super::{Monomial, Poly, PolyError, PolyMap};
use crate::linalg::{self, Matrix, Vector};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformKind {
    SourceAffine,
    TargetAffine,
    TargetShear,
}

impl TransformKind {
    pub fn side(self) -> ChainSide {
        match self {
            TransformKind::SourceAffine => ChainSide::Source,
            TransformKind::TargetAffine | TransformKind::TargetShear => ChainSide::Target,
        }
    }
}

/// One row of a triangular target shear.
#[derive(Debug, Clone)]
pub enum ShearRow {
    /// `Y_i = X_i`.
    Keep,
    /// `Y_i = scale * X_i + shift(X)`, where `shift` reads only `Keep` rows.
    Shear { scale: f64, shift: Poly },
}

/// An invertible coordinate change stored together with its explicit inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformRepr", into = "TransformRepr")]
pub struct ElementaryTransform {
    kind: TransformKind,
    label: String,
    forward: PolyMap,
    inverse: PolyMap,
    roundtrip_residual: f64,
}

impl ElementaryTransform {
    /// `x -> linear * x + offset` and its inverse.
    pub fn affine(
        kind: TransformKind,
        label: impl Into<String>,
        linear: &Matrix,
        offset: &Vector,
    ) -> Result<Self, PolyError> {
        let label = label.into();
        if kind == TransformKind::TargetShear {
            return Err(PolyError::BadStructure { label, reason: "affine transform tagged as shear".into() });
        }
        let inv = linalg::inverse(linear, tol::RANK).ok_or_else(|| PolyError::NotInvertible {
            label: label.clone(),
            reason: format!("linear part is singular (cond {:.3e})", linalg::condition_number(linear)),
        })?;
        let inv_offset = -(&inv * offset);
        Self::from_parts(kind, label, PolyMap::affine(linear, offset), PolyMap::affine(&inv, &inv_offset))
    }

    pub fn translation(kind: TransformKind, label: impl Into<String>, offset: &[f64]) -> Result<Self, PolyError> {
        let n = offset.len();
        Self::affine(kind, label, &Matrix::identity(n, n), &Vector::from_column_slice(offset))
    }

    /// `Y_i = X_{perm[i]}`.
    pub fn permutation(kind: TransformKind, label: impl Into<String>, perm: &[usize]) -> Result<Self, PolyError> {
        let n = perm.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &j) in perm.iter().enumerate() {
            m[(i, j)] = 1.0;
        }
        Self::affine(kind, label, &m, &Vector::zeros(n))
    }

    /// Triangular target shear on `R^dim`.
    pub fn target_shear(label: impl Into<String>, rows: Vec<ShearRow>) -> Result<Self, PolyError> {
        let label = label.into();
        let n = rows.len();
        let mut fwd = Vec::with_capacity(n);
        let mut inv = Vec::with_capacity(n);
        for (i, row) in rows.into_iter().enumerate() {
            match row {
                ShearRow::Keep => {
                    fwd.push(Poly::var(n, i, 1.0));
                    inv.push(Poly::var(n, i, 1.0));
                }
                ShearRow::Shear { scale, shift } => {
                    if scale == 0.0 || !scale.is_finite() {
                        return Err(PolyError::NotInvertible {
                            label,
                            reason: format!("row {i} has scale {scale}"),
                        });
                    }
                    let own = Poly::var(n, i, 1.0);
                    fwd.push(own.scale(scale).add(&shift));
                    inv.push(own.sub(&shift).scale(1.0 / scale));
                }
            }
        }
        Self::from_parts(
            TransformKind::TargetShear,
            label,
            PolyMap::new(n, fwd)?,
            PolyMap::new(n, inv)?,
        )
    }

    /// Validates structure and round trip of explicitly given maps.
    pub fn from_parts(
        kind: TransformKind,
        label: impl Into<String>,
        forward: PolyMap,
        inverse: PolyMap,
    ) -> Result<Self, PolyError> {
        let label = label.into();
        let n = forward.n_vars();
        for m in [&forward, &inverse] {
            if m.n_components() != n || m.n_vars() != n {
                return Err(PolyError::BadStructure { label, reason: "transform must be square".into() });
            }
        }
        let max_degree = match kind {
            TransformKind::SourceAffine | TransformKind::TargetAffine => 1,
            TransformKind::TargetShear => 2,
        };
        if forward.degree() > max_degree || inverse.degree() > max_degree {
            return Err(PolyError::BadStructure {
                label,
                reason: format!("degree exceeds {max_degree} for {kind:?}"),
            });
        }
        if kind == TransformKind::TargetShear {
            check_triangular(&label, &forward)?;
        }
        let id = PolyMap::identity(n);
        let a = forward.compose_raw(&inverse)?.max_coefficient_difference(&id)?;
        let b = inverse.compose_raw(&forward)?.max_coefficient_difference(&id)?;
        let residual = a.max(b);
        let scale = (1.0 + forward.max_abs_coefficient()) * (1.0 + inverse.max_abs_coefficient());
        if residual.is_nan() || residual > tol::ROUNDTRIP_COEF * scale {
            return Err(PolyError::NotInvertible {
                label,
                reason: format!("round trip residual {residual:.3e} at scale {scale:.3e}"),
            });
        }
        Ok(ElementaryTransform { kind, label, forward, inverse, roundtrip_residual: residual })
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn forward(&self) -> &PolyMap {
        &self.forward
    }

    pub fn inverse(&self) -> &PolyMap {
        &self.inverse
    }

    pub fn dim(&self) -> usize {
        self.forward.n_vars()
    }

    /// Max coefficient deviation of `forward ∘ inverse` and `inverse ∘ forward` from the identity.
    pub fn roundtrip_residual(&self) -> f64 {
        self.roundtrip_residual
    }

    /// Linear part of an affine transform (the Jacobian, which is constant).
    pub fn linear_part(&self) -> Option<Matrix> {
        match self.kind {
            TransformKind::TargetShear => None,
            _ => self.forward.jacobian(&vec![0.0; self.dim()]).ok(),
        }
    }
}

fn check_triangular(label: &str, forward: &PolyMap) -> Result<(), PolyError> {
    let n = forward.n_vars();
    let keep: Vec<bool> = (0..n)
        .map(|i| *forward.component(i) == Poly::var(n, i, 1.0))
        .collect();
    for i in (0..n).filter(|&i| !keep[i]) {
        let c = forward.component(i);
        let own = Monomial::var(n, i);
        for (m, _) in c.terms() {
            if *m == own {
                continue;
            }
            let bad = m.exponents().iter().enumerate().any(|(v, &e)| e > 0 && !keep[v]);
            if bad {
                return Err(PolyError::BadStructure {
                    label: label.to_string(),
                    reason: format!("row {i} reads a non-pass-through coordinate"),
                });
            }
        }
        if c.coefficient(own.exponents()) == 0.0 {
            return Err(PolyError::BadStructure {
                label: label.to_string(),
                reason: format!("row {i} lost its own coordinate"),
            });
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    kind: TransformKind,
    label: String,
    forward: PolyMap,
    inverse: PolyMap,
}

impl From<ElementaryTransform> for TransformRepr {
    fn from(t: ElementaryTransform) -> Self {
        TransformRepr { kind: t.kind, label: t.label, forward: t.forward, inverse: t.inverse }
    }
}

impl TryFrom<TransformRepr> for ElementaryTransform {
    type Error = PolyError;

    fn try_from(r: TransformRepr) -> Result<Self, Self::Error> {
        ElementaryTransform::from_parts(r.kind, r.label, r.forward, r.inverse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainSide {
    /// Composed as `h_0 ∘ h_1 ∘ ... ∘ h_last` and applied on the right of a map.
    Source,
    /// Composed as `H_last ∘ ... ∘ H_0` and applied on the left of a map.
    Target,
}

/// Ordered list of elementary transforms acting on one side of a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffeoChain {
    side: ChainSide,
    dim: usize,
    transforms: Vec<ElementaryTransform>,
}

impl DiffeoChain {
    pub fn new(side: ChainSide, dim: usize) -> Self {
        DiffeoChain { side, dim, transforms: Vec::new() }
    }

    pub fn push(&mut self, t: ElementaryTransform) -> Result<(), PolyError> {
        if t.dim() != self.dim {
            return Err(PolyError::DimensionMismatch { expected: self.dim, got: t.dim() });
        }
        if t.kind().side() != self.side {
            return Err(PolyError::BadStructure {
                label: t.label().to_string(),
                reason: format!("{:?} transform pushed onto a {:?} chain", t.kind(), self.side),
            });
        }
        self.transforms.push(t);
        Ok(())
    }

    pub fn side(&self) -> ChainSide {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transforms(&self) -> &[ElementaryTransform] {
        &self.transforms
    }

    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }

    /// The whole chain as a single map on `R^dim`.
    pub fn compose(&self) -> Result<PolyMap, PolyError> {
        let mut acc = PolyMap::identity(self.dim);
        for t in &self.transforms {
            acc = match self.side {
                ChainSide::Target => t.forward().compose(&acc)?,
                ChainSide::Source => acc.compose(t.forward())?,
            };
        }
        Ok(acc)
    }

    /// Applies the chain to `map` one transform at a time.
    pub fn apply_to(&self, map: &PolyMap) -> Result<PolyMap, PolyError> {
        let mut acc = map.clone();
        for t in &self.transforms {
            acc = match self.side {
                ChainSide::Target => t.forward().compose(&acc)?,
                ChainSide::Source => acc.compose(t.forward())?,
            };
        }
        Ok(acc)
    }

    /// Pointwise evaluation of the composed chain.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, PolyError> {
        let mut y = x.to_vec();
        let order: Box<dyn Iterator<Item = &ElementaryTransform>> = match self.side {
            ChainSide::Target => Box::new(self.transforms.iter()),
            ChainSide::Source => Box::new(self.transforms.iter().rev()),
        };
        for t in order {
            y = t.forward().eval(&y)?;
        }
        Ok(y)
    }

    /// Pointwise evaluation of the inverse of the composed chain.
    pub fn eval_inverse(&self, y: &[f64]) -> Result<Vec<f64>, PolyError> {
        let mut x = y.to_vec();
        let order: Box<dyn Iterator<Item = &ElementaryTransform>> = match self.side {
            ChainSide::Target => Box::new(self.transforms.iter().rev()),
            ChainSide::Source => Box::new(self.transforms.iter()),
        };
        for t in order {
            x = t.inverse().eval(&x)?;
        }
        Ok(x)
    }
}
