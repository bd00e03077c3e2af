//! Small dense linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    Matrix::from_fn(r, c, |i, j| rows[i][j])
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Singular values in descending order. Empty for an empty matrix.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > rel_tol * top).count(),
        _ => 0,
    }
}

/// `sigma_min / sigma_max` for a square or rectangular matrix (0 when degenerate).
pub fn inverse_condition(m: &Matrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&top), Some(&low)) if top > 0.0 => low / top,
        _ => 0.0,
    }
}

pub fn condition_number(m: &Matrix) -> f64 {
    let r = inverse_condition(m);
    if r > 0.0 {
        1.0 / r
    } else {
        f64::INFINITY
    }
}

/// Determinant, with the empty matrix giving 1.
pub fn determinant(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    m.clone().lu().determinant()
}

/// Product of the Euclidean row norms; bounds `|det m|`.
pub fn hadamard_bound(m: &Matrix) -> f64 {
    m.row_iter().map(|r| r.norm()).product()
}

/// Solves `m x = rhs` for square `m`; `None` when `m` is numerically singular.
pub fn solve(m: &Matrix, rhs: &Matrix, rel_tol: f64) -> Option<Matrix> {
    if m.nrows() != m.ncols() || m.nrows() != rhs.nrows() {
        return None;
    }
    if m.nrows() == 0 {
        return Some(rhs.clone());
    }
    if numerical_rank(m, rel_tol) < m.nrows() {
        return None;
    }
    m.clone().lu().solve(rhs)
}

pub fn inverse(m: &Matrix, rel_tol: f64) -> Option<Matrix> {
    solve(m, &Matrix::identity(m.nrows(), m.ncols()), rel_tol)
}

/// Minimum-norm least-squares solution of `m x = rhs`.
pub fn least_squares(m: &Matrix, rhs: &Matrix, rel_tol: f64) -> Matrix {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Matrix::zeros(m.ncols(), rhs.ncols());
    }
    let svd = m.clone().svd(true, true);
    let top = svd.singular_values.max();
    svd.solve(rhs, rel_tol * top.max(f64::MIN_POSITIVE))
        .expect("both singular bases were requested")
}

/// Orthonormal basis of the right null space, one vector per column.
///
/// Wide matrices are zero-padded to square so the full right basis is available.
pub fn null_space(m: &Matrix, rel_tol: f64) -> Matrix {
    let cols = m.ncols();
    if cols == 0 {
        return Matrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return Matrix::identity(cols, cols);
    }
    let padded = if m.nrows() < cols {
        let mut p = Matrix::zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let top = svd.singular_values.max();
    let kernel: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| top <= 0.0 || svd.singular_values[i] <= rel_tol * top)
        .collect();
    let mut basis = Matrix::zeros(cols, kernel.len());
    for (c, &i) in kernel.iter().enumerate() {
        for r in 0..cols {
            basis[(r, c)] = v_t[(i, r)];
        }
    }
    basis
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
