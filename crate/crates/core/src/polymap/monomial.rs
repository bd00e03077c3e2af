use std::cmp::Ordering;

/// Exponent vector of a monomial `x_0^e_0 ... x_n^e_n`.
///
/// Ordered graded-lexicographically: lower total degree first, then by
/// exponents with `x_0` most significant (so `x0^2 < x0*x1 < x1^2`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exp: Vec<u32>) -> Self {
        Monomial(exp)
    }

    pub fn one(n_vars: usize) -> Self {
        Monomial(vec![0; n_vars])
    }

    pub fn var(n_vars: usize, v: usize) -> Self {
        let mut e = vec![0; n_vars];
        e[v] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }

    /// `d/dx_v`, returning the multiplicity and the lowered monomial.
    pub fn derivative(&self, v: usize) -> Option<(u32, Monomial)> {
        let e = self.0[v];
        if e == 0 {
            return None;
        }
        let mut lowered = self.0.clone();
        lowered[v] -= 1;
        Some((e, Monomial(lowered)))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
