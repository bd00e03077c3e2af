use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Monomial, Poly, PolyError, MAX_DEGREE};
use crate::linalg::{Matrix, Vector};

/// Polynomial map `R^n_vars -> R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyMapRepr", into = "PolyMapRepr")]
pub struct PolyMap {
    n_vars: usize,
    components: Vec<Poly>,
}

impl PolyMap {
    pub fn new(n_vars: usize, components: Vec<Poly>) -> Result<Self, PolyError> {
        for (i, c) in components.iter().enumerate() {
            for (m, coef) in c.terms() {
                if m.n_vars() != n_vars {
                    return Err(PolyError::DimensionMismatch { expected: n_vars, got: m.n_vars() });
                }
                if !coef.is_finite() {
                    return Err(PolyError::NonFinite { component: i });
                }
            }
            let degree = c.degree();
            if degree > MAX_DEGREE {
                return Err(PolyError::DegreeOverflow { degree, max: MAX_DEGREE });
            }
        }
        Ok(PolyMap { n_vars, components })
    }

    pub fn identity(n: usize) -> Self {
        PolyMap {
            n_vars: n,
            components: (0..n).map(|v| Poly::var(n, v, 1.0)).collect(),
        }
    }

    /// `x -> linear * x + offset`.
    pub fn affine(linear: &Matrix, offset: &Vector) -> Self {
        let n = linear.ncols();
        let components = (0..linear.nrows())
            .map(|i| {
                let mut terms: Vec<(Monomial, f64)> = (0..n)
                    .map(|j| (Monomial::var(n, j), linear[(i, j)]))
                    .collect();
                terms.push((Monomial::one(n), offset[i]));
                Poly::from_terms(terms)
            })
            .collect();
        PolyMap { n_vars: n, components }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Poly] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Poly {
        &self.components[i]
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().map(Poly::degree).max().unwrap_or(0)
    }

    pub fn coefficient(&self, component: usize, exp: &[u32]) -> f64 {
        self.components
            .get(component)
            .map_or(0.0, |c| c.coefficient(exp))
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.components
            .iter()
            .map(Poly::max_abs_coefficient)
            .fold(0.0, f64::max)
    }

    /// Largest coefficientwise difference over all components.
    pub fn max_coefficient_difference(&self, other: &PolyMap) -> Result<f64, PolyError> {
        self.check_same_shape(other)?;
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.max_difference(b))
            .fold(0.0, f64::max))
    }

    pub(crate) fn check_same_shape(&self, other: &PolyMap) -> Result<(), PolyError> {
        if self.n_vars != other.n_vars {
            return Err(PolyError::DimensionMismatch { expected: self.n_vars, got: other.n_vars });
        }
        if self.components.len() != other.components.len() {
            return Err(PolyError::DimensionMismatch {
                expected: self.components.len(),
                got: other.components.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, PolyError> {
        self.check_point(x)?;
        Ok(self.components.iter().map(|c| c.eval(x)).collect())
    }

    fn check_point(&self, x: &[f64]) -> Result<(), PolyError> {
        if x.len() != self.n_vars {
            return Err(PolyError::DimensionMismatch { expected: self.n_vars, got: x.len() });
        }
        Ok(())
    }

    /// Partial derivatives at `x`, one row per component.
    pub fn jacobian(&self, x: &[f64]) -> Result<Matrix, PolyError> {
        self.check_point(x)?;
        let mut j = Matrix::zeros(self.components.len(), self.n_vars);
        for (i, c) in self.components.iter().enumerate() {
            for (m, coef) in c.terms() {
                for v in 0..self.n_vars {
                    if let Some((e, low)) = m.derivative(v) {
                        j[(i, v)] += coef * e as f64 * low.eval(x);
                    }
                }
            }
        }
        Ok(j)
    }

    /// `d self / d x_v` as a map (no degree bookkeeping needed: it only drops).
    pub fn partial(&self, v: usize) -> PolyMap {
        PolyMap {
            n_vars: self.n_vars,
            components: self.components.iter().map(|c| c.partial(v)).collect(),
        }
    }

    /// `self ∘ inner`, canonicalized.
    pub fn compose(&self, inner: &PolyMap) -> Result<PolyMap, PolyError> {
        self.compose_with(inner, true)
    }

    /// `self ∘ inner` keeping all nonzero float dust.
    pub fn compose_raw(&self, inner: &PolyMap) -> Result<PolyMap, PolyError> {
        self.compose_with(inner, false)
    }

    fn compose_with(&self, inner: &PolyMap, canonical: bool) -> Result<PolyMap, PolyError> {
        if self.n_vars != inner.components.len() {
            return Err(PolyError::DimensionMismatch {
                expected: self.n_vars,
                got: inner.components.len(),
            });
        }
        let n = inner.n_vars;
        // powers[v][e] = inner_v^e
        let max_exp: Vec<u32> = (0..self.n_vars)
            .map(|v| {
                self.components
                    .iter()
                    .flat_map(|c| c.terms().map(move |(m, _)| m.exponents()[v]))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let one: BTreeMap<Monomial, f64> = [(Monomial::one(n), 1.0)].into_iter().collect();
        let powers: Vec<Vec<BTreeMap<Monomial, f64>>> = (0..self.n_vars)
            .map(|v| {
                let base = inner.components[v].terms_map();
                let mut ps = vec![one.clone()];
                for e in 1..=max_exp[v] as usize {
                    let next = Poly::mul_raw(&ps[e - 1], base);
                    ps.push(next);
                }
                ps
            })
            .collect();

        let mut components = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let mut acc: BTreeMap<Monomial, f64> = BTreeMap::new();
            for (m, coef) in c.terms() {
                let mut prod = one.clone();
                for (v, &e) in m.exponents().iter().enumerate() {
                    if e > 0 {
                        prod = Poly::mul_raw(&prod, &powers[v][e as usize]);
                    }
                }
                for (pm, pc) in prod {
                    *acc.entry(pm).or_insert(0.0) += coef * pc;
                }
            }
            let poly = if canonical { Poly::canonical(acc) } else { Poly::raw(acc) };
            let degree = poly.degree();
            if degree > MAX_DEGREE {
                return Err(PolyError::DegreeOverflow { degree, max: MAX_DEGREE });
            }
            components.push(poly);
        }
        Ok(PolyMap { n_vars: n, components })
    }

    /// Components `range` of the map.
    pub fn select(&self, indices: &[usize]) -> PolyMap {
        PolyMap {
            n_vars: self.n_vars,
            components: indices.iter().map(|&i| self.components[i].clone()).collect(),
        }
    }

    /// `self - other`, canonicalized.
    pub fn sub(&self, other: &PolyMap) -> Result<PolyMap, PolyError> {
        self.check_same_shape(other)?;
        Ok(PolyMap {
            n_vars: self.n_vars,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    exp: Vec<u32>,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyMapRepr {
    n_vars: usize,
    components: Vec<Vec<TermRepr>>,
}

impl From<PolyMap> for PolyMapRepr {
    fn from(map: PolyMap) -> Self {
        PolyMapRepr {
            n_vars: map.n_vars,
            components: map
                .components
                .iter()
                .map(|c| {
                    c.terms()
                        .map(|(m, coef)| TermRepr { exp: m.exponents().to_vec(), coef })
                        .collect()
                })
                .collect(),
        }
    }
}

impl TryFrom<PolyMapRepr> for PolyMap {
    type Error = PolyError;

    fn try_from(repr: PolyMapRepr) -> Result<Self, Self::Error> {
        let mut components = Vec::with_capacity(repr.components.len());
        for (i, terms) in repr.components.into_iter().enumerate() {
            let mut seen = BTreeMap::new();
            for t in terms {
                if t.exp.len() != repr.n_vars {
                    return Err(PolyError::DimensionMismatch { expected: repr.n_vars, got: t.exp.len() });
                }
                if seen.insert(Monomial::new(t.exp.clone()), t.coef).is_some() {
                    return Err(PolyError::DuplicateMonomial { component: i, exp: t.exp });
                }
            }
            components.push(Poly::canonical(seen));
        }
        PolyMap::new(repr.n_vars, components)
    }
}

impl std::fmt::Display for PolyMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if c.is_zero() {
                write!(f, "0")?;
                continue;
            }
            for (k, (m, coef)) in c.terms().enumerate() {
                if k > 0 {
                    write!(f, " {} ", if coef < 0.0 { '-' } else { '+' })?;
                } else if coef < 0.0 {
                    write!(f, "-")?;
                }
                let mag = coef.abs();
                let vars: Vec<String> = m
                    .exponents()
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(v, &e)| if e == 1 { format!("x{v}") } else { format!("x{v}^{e}") })
                    .collect();
                if vars.is_empty() {
                    write!(f, "{mag}")?;
                } else if mag == 1.0 {
                    write!(f, "{}", vars.join("*"))?;
                } else {
                    write!(f, "{mag}*{}", vars.join("*"))?;
                }
            }
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(e: &[u32]) -> Monomial {
        Monomial::new(e.to_vec())
    }

    fn map(n: usize, comps: Vec<Vec<(&[u32], f64)>>) -> PolyMap {
        PolyMap::new(
            n,
            comps
                .into_iter()
                .map(|c| Poly::from_terms(c.into_iter().map(|(e, v)| (mono(e), v))))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn eval_direct_monomials() {
        let f = map(2, vec![vec![(&[2, 0], 1.0)], vec![(&[1, 1], 1.0)], vec![(&[0, 1], 1.0)]]);
        assert_eq!(f.eval(&[2.0, 3.0]).unwrap(), vec![4.0, 6.0, 3.0]);
        assert_eq!(PolyMap::identity(2).eval(&[0.25, -7.0]).unwrap(), vec![0.25, -7.0]);
        assert!(matches!(f.eval(&[1.0]), Err(PolyError::DimensionMismatch { .. })));
    }

    #[test]
    fn compose_identity_and_cancellation() {
        let inner = map(1, vec![vec![(&[2], 1.0)], vec![(&[1], 1.0)]]);
        let id = PolyMap::identity(2);
        assert_eq!(id.compose(&inner).unwrap(), inner);
        // (X0 - X1^2) ∘ (x0^2, x0) = 0
        let outer = map(2, vec![vec![(&[1, 0], 1.0), (&[0, 2], -1.0)]]);
        let r = outer.compose(&inner).unwrap();
        assert_eq!(r.n_components(), 1);
        assert!(r.component(0).is_zero());
    }

    #[test]
    fn compose_rejects_bad_shapes_and_degree() {
        let inner = map(1, vec![vec![(&[2], 1.0)]]);
        let outer = map(2, vec![vec![(&[1, 0], 1.0)]]);
        assert!(matches!(outer.compose(&inner), Err(PolyError::DimensionMismatch { .. })));
        let cube = map(1, vec![vec![(&[3], 1.0)]]);
        assert!(matches!(cube.compose(&inner), Err(PolyError::DegreeOverflow { degree: 6, .. })));
        let quintic = Poly::from_terms([(mono(&[5]), 1.0)]);
        assert!(PolyMap::new(1, vec![quintic]).is_err());
    }

    #[test]
    fn jacobian_of_umbrella() {
        // (x0^2, x0 x1, x1)
        let f = map(2, vec![vec![(&[2, 0], 1.0)], vec![(&[1, 1], 1.0)], vec![(&[0, 1], 1.0)]]);
        let j = f.jacobian(&[0.0, 0.0]).unwrap();
        assert_eq!(crate::linalg::numerical_rank(&j, 1e-10), 1);
        let j = f.jacobian(&[0.5, 0.0]).unwrap();
        assert_eq!(crate::linalg::numerical_rank(&j, 1e-10), 2);
        assert_eq!(j[(1, 1)], 0.5);
    }

    #[test]
    fn json_round_trip_and_duplicate_rejection() {
        let f = map(2, vec![vec![(&[2, 0], 3.0), (&[0, 0], 19.0), (&[1, 0], -6.0)]]);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(
            s,
            r#"{"n_vars":2,"components":[[{"exp":[0,0],"coef":19.0},{"exp":[1,0],"coef":-6.0},{"exp":[2,0],"coef":3.0}]]}"#
        );
        let back: PolyMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        let dup = r#"{"n_vars":1,"components":[[{"exp":[1],"coef":1.0},{"exp":[1],"coef":2.0}]]}"#;
        assert!(serde_json::from_str::<PolyMap>(dup).is_err());
    }
}
