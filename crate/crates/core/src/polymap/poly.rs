use std::collections::BTreeMap;

use super::Monomial;
use crate::tol;

/// One sparse polynomial component, canonical after every public constructor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(n_vars: usize, c: f64) -> Self {
        Poly::from_terms([(Monomial::one(n_vars), c)])
    }

    /// `coef * x_v`.
    pub fn var(n_vars: usize, v: usize, coef: f64) -> Self {
        Poly::from_terms([(Monomial::var(n_vars, v), coef)])
    }

    /// Sums duplicate monomials, then canonicalizes.
    pub fn from_terms<I: IntoIterator<Item = (Monomial, f64)>>(terms: I) -> Self {
        let mut acc = BTreeMap::new();
        for (m, c) in terms {
            *acc.entry(m).or_insert(0.0) += c;
        }
        Poly::canonical(acc)
    }

    /// Drops exact zeros and coefficients at or below `COEF_DROP * max|c|`.
    pub(crate) fn canonical(mut terms: BTreeMap<Monomial, f64>) -> Self {
        let top = terms.values().fold(0.0_f64, |a, c| a.max(c.abs()));
        let floor = tol::COEF_DROP * top;
        terms.retain(|_, c| *c != 0.0 && c.abs() > floor);
        Poly { terms }
    }

    /// Only exact zeros removed; used where float dust must stay measurable.
    pub(crate) fn raw(mut terms: BTreeMap<Monomial, f64>) -> Self {
        terms.retain(|_, c| *c != 0.0);
        Poly { terms }
    }

    pub(crate) fn terms_map(&self) -> &BTreeMap<Monomial, f64> {
        &self.terms
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn coefficient(&self, exp: &[u32]) -> f64 {
        self.terms
            .get(&Monomial::new(exp.to_vec()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.terms
            .iter()
            .find(|(m, _)| m.is_constant())
            .map_or(0.0, |(_, &c)| c)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0_f64, |a, c| a.max(c.abs()))
    }

    /// Largest `|c|` over non-constant monomials.
    pub fn max_abs_nonconstant(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(m, _)| !m.is_constant())
            .fold(0.0_f64, |a, (_, c)| a.max(c.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, &c)| c * m.eval(x)).sum()
    }

    /// Whether variable `v` appears in any term.
    pub fn uses_var(&self, v: usize) -> bool {
        self.terms.keys().any(|m| m.exponents()[v] > 0)
    }

    pub fn partial(&self, v: usize) -> Poly {
        Poly::raw(
            self.terms
                .iter()
                .filter_map(|(m, &c)| m.derivative(v).map(|(e, low)| (low, c * e as f64)))
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::canonical(self.terms.iter().map(|(m, &c)| (m.clone(), c * s)).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut acc = self.terms.clone();
        for (m, &c) in &other.terms {
            *acc.entry(m.clone()).or_insert(0.0) += c;
        }
        Poly::canonical(acc)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    /// Largest coefficientwise `|self - other|`, without any dust removal.
    pub fn max_difference(&self, other: &Poly) -> f64 {
        let mut worst = 0.0_f64;
        for (m, &c) in &self.terms {
            let d = c - other.terms.get(m).copied().unwrap_or(0.0);
            worst = worst.max(d.abs());
        }
        for (m, &c) in &other.terms {
            if !self.terms.contains_key(m) {
                worst = worst.max(c.abs());
            }
        }
        worst
    }

    pub(crate) fn mul_raw(a: &BTreeMap<Monomial, f64>, b: &BTreeMap<Monomial, f64>) -> BTreeMap<Monomial, f64> {
        let mut out = BTreeMap::new();
        for (ma, &ca) in a {
            for (mb, &cb) in b {
                *out.entry(ma.mul(mb)).or_insert(0.0) += ca * cb;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(e: &[u32]) -> Monomial {
        Monomial::new(e.to_vec())
    }

    #[test]
    fn canonical_drops_dust_and_zeros() {
        let p = Poly::from_terms([(m(&[1, 0]), 1.0), (m(&[0, 1]), 1e-14), (m(&[0, 0]), 0.0)]);
        assert_eq!(p.len(), 1);
        let q = Poly::from_terms([(m(&[1, 0]), 1.0), (m(&[1, 0]), -1.0)]);
        assert!(q.is_zero());
    }

    #[test]
    fn coefficient_readout() {
        // 3(x0-1)^2 + 4(x1-2)^2
        let p = Poly::from_terms([
            (m(&[2, 0]), 3.0),
            (m(&[1, 0]), -6.0),
            (m(&[0, 2]), 4.0),
            (m(&[0, 1]), -16.0),
            (m(&[0, 0]), 19.0),
        ]);
        assert_eq!(p.coefficient(&[1, 0]), -6.0);
        assert_eq!(p.coefficient(&[0, 0]), 19.0);
        assert_eq!(p.coefficient(&[1, 1]), 0.0);
        assert_eq!(p.constant_term(), 19.0);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn partial_derivative() {
        let p = Poly::from_terms([(m(&[2, 1]), 3.0), (m(&[0, 1]), 1.0)]);
        let d = p.partial(0);
        assert_eq!(d.coefficient(&[1, 1]), 6.0);
        assert_eq!(d.len(), 1);
    }
}
