//! Generalized distance-squared mappings and the matrix data the reductions need.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::polymap::{ElementaryTransform, Monomial, Poly, PolyError, PolyMap, TransformKind};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GdsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid coefficient matrix: {}", describe(.0))]
    InvalidMatrix(Vec<Violation>),
    #[error("rank mismatch: branch {branch:?} needs {needed}, but rank(A) = {rank}")]
    RankMismatch { branch: PivotBranch, needed: String, rank: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

fn describe(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// A defect found by [`validate_matrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    Empty,
    RaggedRow { row: usize, len: usize, expected: usize },
    NonFinite { row: usize, col: usize },
    ZeroEntry { row: usize, col: usize, value: f64 },
    /// The reductions need `k >= 2n`.
    TargetTooSmall { k: usize, n: usize },
}

impl Violation {
    /// Structural defects make the matrix unusable; `TargetTooSmall` only rules out reduction.
    pub fn is_structural(&self) -> bool {
        !matches!(self, Violation::TargetTooSmall { .. })
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Empty => write!(f, "matrix needs at least two rows and two columns"),
            Violation::RaggedRow { row, len, expected } => {
                write!(f, "row {row} has {len} entries, expected {expected}")
            }
            Violation::NonFinite { row, col } => write!(f, "entry ({row}, {col}) is not finite"),
            Violation::ZeroEntry { row, col, value } => write!(f, "entry ({row}, {col}) = {value} is zero"),
            Violation::TargetTooSmall { k, n } => {
                write!(f, "k = {k} < 2n = {}: reduction needs k >= 2n", 2 * n)
            }
        }
    }
}

/// Reports every defect of a candidate `(k+1) x (n+1)` matrix.
pub fn validate_matrix(rows: &[Vec<f64>]) -> Vec<Violation> {
    let mut out = Vec::new();
    let cols = rows.first().map_or(0, Vec::len);
    if rows.len() < 2 || cols < 2 {
        out.push(Violation::Empty);
        return out;
    }
    let mut top = 0.0_f64;
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            out.push(Violation::RaggedRow { row: i, len: r.len(), expected: cols });
        }
        for (j, &v) in r.iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation::NonFinite { row: i, col: j });
            } else {
                top = top.max(v.abs());
            }
        }
    }
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            if v.is_finite() && v.abs() <= tol::COEF_DROP * top {
                out.push(Violation::ZeroEntry { row: i, col: j, value: v });
            }
        }
    }
    let (k, n) = (rows.len() - 1, cols - 1);
    if k < 2 * n {
        out.push(Violation::TargetTooSmall { k, n });
    }
    out
}

/// The `(k+1) x (n+1)` matrix `A` with nonzero entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CoefficientMatrix {
    rows: Vec<Vec<f64>>,
}

impl CoefficientMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, GdsError> {
        let structural: Vec<Violation> = validate_matrix(&rows)
            .into_iter()
            .filter(Violation::is_structural)
            .collect();
        if !structural.is_empty() {
            return Err(GdsError::InvalidMatrix(structural));
        }
        Ok(CoefficientMatrix { rows })
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self, GdsError> {
        Self::new(linalg::to_rows(m))
    }

    /// Every entry 1 (plain distance-squared mapping).
    pub fn distance_squared(n: usize, k: usize) -> Self {
        CoefficientMatrix { rows: vec![vec![1.0; n + 1]; k + 1] }
    }

    /// `a_i0 = -1`, `a_ij = 1` otherwise (Lorentzian distance-squared mapping).
    pub fn lorentzian(n: usize, k: usize) -> Self {
        let row: Vec<f64> = (0..=n).map(|j| if j == 0 { -1.0 } else { 1.0 }).collect();
        CoefficientMatrix { rows: vec![row; k + 1] }
    }

    pub fn n(&self) -> usize {
        self.rows[0].len() - 1
    }

    pub fn k(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn matrix(&self) -> Matrix {
        linalg::from_rows(&self.rows)
    }

    pub fn rank(&self, eps_rank: f64) -> usize {
        linalg::numerical_rank(&self.matrix(), eps_rank)
    }

    /// Rows `range` as a dense block.
    pub fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Matrix {
        let (r0, c0) = (rows.start, cols.start);
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self.rows[r0 + i][c0 + j])
    }

    /// `A_1`: rows and columns `0..=n`.
    pub fn a1(&self) -> Matrix {
        self.block(0..self.n() + 1, 0..self.n() + 1)
    }

    /// `A_2`: rows `n+1..=k`.
    pub fn a2(&self) -> Matrix {
        self.block(self.n() + 1..self.k() + 1, 0..self.n() + 1)
    }

    /// `A_3`: rows and columns `0..n`.
    pub fn a3(&self) -> Matrix {
        self.block(0..self.n(), 0..self.n())
    }

    /// `A'[i][j] = A[row_perm[i]][col_perm[j]]`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        CoefficientMatrix {
            rows: row_perm
                .iter()
                .map(|&i| col_perm.iter().map(|&j| self.rows[i][j]).collect())
                .collect(),
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for CoefficientMatrix {
    type Error = GdsError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        CoefficientMatrix::new(rows)
    }
}

impl From<CoefficientMatrix> for Vec<Vec<f64>> {
    fn from(m: CoefficientMatrix) -> Self {
        m.rows
    }
}

/// Central points `p_0, ..., p_k` in `R^(n+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CenterConfig {
    points: Vec<Vec<f64>>,
}

impl CenterConfig {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, GdsError> {
        let dim = points.first().map_or(0, Vec::len);
        if points.is_empty() || dim == 0 {
            return Err(GdsError::DimensionMismatch("no central points".into()));
        }
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(GdsError::DimensionMismatch(format!(
                "point {i} has dimension {}, expected {dim}",
                p.len()
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GdsError::DimensionMismatch("non-finite center coordinate".into()));
        }
        Ok(CenterConfig { points })
    }

    pub fn zeros(n: usize, k: usize) -> Self {
        CenterConfig { points: vec![vec![0.0; n + 1]; k + 1] }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.points[i][j]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn check_compatible(&self, a: &CoefficientMatrix) -> Result<(), GdsError> {
        if self.len() != a.k() + 1 || self.dim() != a.n() + 1 {
            return Err(GdsError::DimensionMismatch(format!(
                "{} centers in R^{} do not match a {}x{} matrix",
                self.len(),
                self.dim(),
                a.k() + 1,
                a.n() + 1
            )));
        }
        Ok(())
    }

    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        CenterConfig {
            points: row_perm
                .iter()
                .map(|&i| col_perm.iter().map(|&j| self.points[i][j]).collect())
                .collect(),
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for CenterConfig {
    type Error = GdsError;

    fn try_from(points: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        CenterConfig::new(points)
    }
}

impl From<CenterConfig> for Vec<Vec<f64>> {
    fn from(c: CenterConfig) -> Self {
        c.points
    }
}

/// A validated `(p, A)` pair.
///
/// On input, `"A"` may also be the name `"distance-squared"` or `"lorentzian"`,
/// expanded to the `(k+1) x (n+1)` matrix of that kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr")]
pub struct ProblemInstance {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "A")]
    pub matrix: CoefficientMatrix,
    pub p: CenterConfig,
}

impl ProblemInstance {
    pub fn new(matrix: CoefficientMatrix, p: CenterConfig) -> Result<Self, GdsError> {
        p.check_compatible(&matrix)?;
        Ok(ProblemInstance { n: matrix.n(), k: matrix.k(), matrix, p })
    }

    pub fn map(&self) -> PolyMap {
        build_gds_unchecked(self.p.points(), self.matrix.rows())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Named(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRepr {
    n: usize,
    k: usize,
    #[serde(rename = "A")]
    matrix: MatrixSpec,
    p: Vec<Vec<f64>>,
}

impl TryFrom<InstanceRepr> for ProblemInstance {
    type Error = GdsError;

    fn try_from(r: InstanceRepr) -> Result<Self, GdsError> {
        let matrix = match r.matrix {
            MatrixSpec::Rows(rows) => CoefficientMatrix::new(rows)?,
            MatrixSpec::Named(name) => match name.as_str() {
                "distance-squared" => CoefficientMatrix::distance_squared(r.n, r.k),
                "lorentzian" => CoefficientMatrix::lorentzian(r.n, r.k),
                other => {
                    return Err(GdsError::DimensionMismatch(format!(
                        "unknown matrix name `{other}` (expected \"distance-squared\" or \"lorentzian\")"
                    )))
                }
            },
        };
        if matrix.n() != r.n || matrix.k() != r.k {
            return Err(GdsError::DimensionMismatch(format!(
                "declared n = {}, k = {} but A is {} x {}",
                r.n,
                r.k,
                matrix.k() + 1,
                matrix.n() + 1
            )));
        }
        ProblemInstance::new(matrix, CenterConfig::new(r.p)?)
    }
}

/// `G(p, A)` with component `i = sum_j a_ij (x_j - p_ij)^2`.
pub fn build_gds(p: &CenterConfig, a: &CoefficientMatrix) -> Result<PolyMap, GdsError> {
    p.check_compatible(a)?;
    Ok(build_gds_unchecked(p.points(), a.rows()))
}

/// Same expansion without validating the matrix; zero entries are allowed here.
pub fn build_gds_unchecked(points: &[Vec<f64>], rows: &[Vec<f64>]) -> PolyMap {
    let n_vars = rows[0].len();
    let components = rows
        .iter()
        .zip(points)
        .map(|(a, p)| {
            let mut terms = Vec::with_capacity(2 * n_vars + 1);
            let mut constant = 0.0;
            for j in 0..n_vars {
                let mut sq = vec![0; n_vars];
                sq[j] = 2;
                terms.push((Monomial::new(sq), a[j]));
                terms.push((Monomial::var(n_vars, j), -2.0 * a[j] * p[j]));
                constant += a[j] * p[j] * p[j];
            }
            terms.push((Monomial::one(n_vars), constant));
            Poly::from_terms(terms)
        })
        .collect();
    PolyMap::new(n_vars, components).expect("quadratic components are within the degree cap")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotBranch {
    /// `rank(A) = n + 1`, leading `(n+1) x (n+1)` block `A_1` made nonsingular.
    FullRank,
    /// Leading `r x r` block made nonsingular, with at least `n + 1` rows left over.
    Inclusion,
}

/// Row and column permutations bringing a nonsingular `r x r` minor to the top left.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotPlan {
    pub rank: usize,
    /// `A'[i] = A[row_perm[i]]`.
    pub row_perm: Vec<usize>,
    /// `A'[.][j] = A[.][col_perm[j]]`.
    pub col_perm: Vec<usize>,
    /// `Y_i = X_{row_perm[i]}` on the target.
    pub target: ElementaryTransform,
    /// Source coordinate change with `G ∘ source = G'` for the permuted columns.
    pub source: ElementaryTransform,
    /// `sigma_min / sigma_max` of the permuted leading minor.
    pub leading_inverse_condition: f64,
}

impl PivotPlan {
    pub fn rows_permuted(&self) -> bool {
        self.row_perm.iter().enumerate().any(|(i, &r)| i != r)
    }

    pub fn columns_permuted(&self) -> bool {
        self.col_perm.iter().enumerate().any(|(i, &c)| i != c)
    }
}

pub fn select_pivot(a: &CoefficientMatrix, branch: PivotBranch, eps_rank: f64) -> Result<PivotPlan, GdsError> {
    let (n, k) = (a.n(), a.k());
    let m = a.matrix();
    let rank = linalg::numerical_rank(&m, eps_rank);
    match branch {
        PivotBranch::FullRank if rank != n + 1 => {
            return Err(GdsError::RankMismatch { branch, needed: format!("rank {}", n + 1), rank });
        }
        PivotBranch::Inclusion if k + 1 < rank + n + 1 => {
            return Err(GdsError::RankMismatch {
                branch,
                needed: format!("(k+1) - rank >= {}", n + 1),
                rank,
            });
        }
        _ => {}
    }

    let identity_rows: Vec<usize> = (0..=k).collect();
    let identity_cols: Vec<usize> = (0..=n).collect();
    let leading_ok = |rows: &[usize], cols: &[usize]| {
        let minor = Matrix::from_fn(rank, rank, |i, j| m[(rows[i], cols[j])]);
        let s = linalg::inverse_condition(&minor);
        (s > eps_rank).then_some(s)
    };

    let (row_perm, col_perm) = if leading_ok(&identity_rows, &identity_cols).is_some() {
        (identity_rows, identity_cols)
    } else {
        let (rows, cols) = complete_pivoting(&m, rank);
        let row_perm = swap_into_front(k + 1, &rows);
        if leading_ok(&row_perm, &identity_cols).is_some() {
            (row_perm, identity_cols)
        } else {
            (row_perm, swap_into_front(n + 1, &cols))
        }
    };
    let leading_inverse_condition = leading_ok(&row_perm, &col_perm).ok_or_else(|| GdsError::RankMismatch {
        branch,
        needed: "a nonsingular leading minor".into(),
        rank,
    })?;

    let target = ElementaryTransform::permutation(TransformKind::TargetAffine, "P (target pivot)", &row_perm)?;
    let mut col_inv = vec![0; n + 1];
    for (j, &c) in col_perm.iter().enumerate() {
        col_inv[c] = j;
    }
    let source = ElementaryTransform::permutation(TransformKind::SourceAffine, "p (source pivot)", &col_inv)?;
    Ok(PivotPlan { rank, row_perm, col_perm, target, source, leading_inverse_condition })
}

/// Greedy complete pivoting; ties go to the lowest row, then the lowest column.
fn complete_pivoting(m: &Matrix, steps: usize) -> (Vec<usize>, Vec<usize>) {
    let mut work = m.clone();
    let mut rows = Vec::with_capacity(steps);
    let mut cols = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in (0..work.nrows()).filter(|i| !rows.contains(i)) {
            for j in (0..work.ncols()).filter(|j| !cols.contains(j)) {
                let v = work[(i, j)].abs();
                if best.is_none_or(|(_, _, b)| v > b) {
                    best = Some((i, j, v));
                }
            }
        }
        let Some((pi, pj, pv)) = best else { break };
        if pv == 0.0 {
            break;
        }
        rows.push(pi);
        cols.push(pj);
        let pivot_row = work.row(pi).clone_owned();
        for i in (0..work.nrows()).filter(|i| !rows.contains(i)) {
            let factor = work[(i, pj)] / pivot_row[pj];
            for j in 0..work.ncols() {
                work[(i, j)] -= factor * pivot_row[j];
            }
        }
    }
    (rows, cols)
}

/// Permutation of `0..len` placing `chosen` in the first `chosen.len()` slots
/// with as few transpositions as possible.
fn swap_into_front(len: usize, chosen: &[usize]) -> Vec<usize> {
    let r = chosen.len();
    let mut perm: Vec<usize> = (0..len).collect();
    let mut free: Vec<usize> = (0..r).filter(|i| !chosen.contains(i)).collect();
    free.reverse();
    let mut outside: Vec<usize> = chosen.iter().copied().filter(|&c| c >= r).collect();
    outside.sort_unstable();
    for c in outside {
        let slot = free.pop().expect("one free slot per outside index");
        perm.swap(slot, c);
    }
    perm
}
