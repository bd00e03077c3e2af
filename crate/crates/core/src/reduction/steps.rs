//! Linear-algebra steps shared by the reduction pipelines.

use serde::{Deserialize, Serialize};

use super::certificate::{affine_columns, b_minor, full_rank_certificate};
use super::ReductionError;
use crate::gds::{build_gds, CenterConfig, CoefficientMatrix};
use crate::linalg::{self, Matrix, Vector};
use crate::polymap::{ElementaryTransform, PolyMap, TransformKind};
use crate::tol;

/// `(Lambda_1, Lambda_2)` with `A_1^T Lambda_1 = E` and `A_1^T Lambda_2 = -A_2^T`.
pub fn solve_lambda(a: &CoefficientMatrix, eps_rank: f64) -> Result<(Matrix, Matrix), ReductionError> {
    let n = a.n();
    let a1t = a.a1().transpose();
    let a2t = a.a2().transpose();
    let lambda1 = linalg::solve(&a1t, &Matrix::identity(n + 1, n + 1), eps_rank).ok_or(ReductionError::SingularA1)?;
    let lambda2 = linalg::solve(&a1t, &(-&a2t), eps_rank).ok_or(ReductionError::SingularA1)?;
    let norm = a.matrix().norm();
    let r1 = linalg::max_abs(&(&a1t * &lambda1 - Matrix::identity(n + 1, n + 1)));
    let r2 = linalg::max_abs(&(&a1t * &lambda2 + &a2t));
    if r1.max(r2) > tol::SELF_CHECK * norm.max(1.0) * (1.0 + linalg::max_abs(&lambda1) + linalg::max_abs(&lambda2)) {
        return Err(ReductionError::SelfCheck { what: "Lambda residual".into(), deviation: r1.max(r2) });
    }
    Ok((lambda1, lambda2))
}

/// STEP-1 matrix in row-vector convention: `H_1(X) = X M`.
pub fn full_rank_step_one(lambda1: &Matrix, lambda2: &Matrix) -> Matrix {
    let n1 = lambda1.nrows();
    let k1 = n1 + lambda2.ncols();
    let mut m = Matrix::identity(k1, k1);
    m.view_mut((0, 0), (n1, n1)).copy_from(lambda1);
    m.view_mut((0, n1), (n1, lambda2.ncols())).copy_from(lambda2);
    m
}

/// `X -> X M` as a target transform.
pub(crate) fn row_vector_transform(label: &str, m: &Matrix) -> Result<ElementaryTransform, ReductionError> {
    Ok(ElementaryTransform::affine(
        TransformKind::TargetAffine,
        label,
        &m.transpose(),
        &Vector::zeros(m.nrows()),
    )?)
}

/// Coefficients of `H_1 ∘ G`, read out and cross-checked against closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPart {
    /// `b[i][l]`: coefficient of `x_l` in component `i`.
    pub b: Vec<Vec<f64>>,
    /// Constant term of each component.
    pub c: Vec<f64>,
    /// `quadratic[i][l]`: coefficient of `x_l^2` in component `i`.
    pub quadratic: Vec<Vec<f64>>,
    /// Largest readout-versus-closed-form deviation, relative to the map scale.
    pub self_check: f64,
}

/// Composes `H_1 = (X -> X M)` with `G(p, A)` and reads off `b`, `c`.
///
/// The closed forms `b_il = -2 sum_k M_ki a_kl p_kl` and
/// `c_i = sum_k M_ki sum_l a_kl p_kl^2` must agree with the readout.
pub fn linear_part(
    p: &CenterConfig,
    a: &CoefficientMatrix,
    step_one: &Matrix,
) -> Result<(PolyMap, LinearPart), ReductionError> {
    let g = build_gds(p, a)?;
    let h1 = PolyMap::affine(&step_one.transpose(), &Vector::zeros(step_one.nrows()));
    let phi = h1.compose(&g)?;
    let (n1, k1) = (a.n() + 1, a.k() + 1);
    let mut unit = vec![0u32; n1];
    let mut b = vec![vec![0.0; n1]; k1];
    let mut quadratic = vec![vec![0.0; n1]; k1];
    let mut c = vec![0.0; k1];
    for i in 0..k1 {
        for l in 0..n1 {
            unit[l] = 1;
            b[i][l] = phi.coefficient(i, &unit);
            unit[l] = 2;
            quadratic[i][l] = phi.coefficient(i, &unit);
            unit[l] = 0;
        }
        c[i] = phi.component(i).constant_term();
    }

    let mut deviation = 0.0_f64;
    for i in 0..k1 {
        let mut ci = 0.0;
        for kk in 0..k1 {
            let w = step_one[(kk, i)];
            if w == 0.0 {
                continue;
            }
            ci += w * (0..n1).map(|l| a.get(kk, l) * p.get(kk, l).powi(2)).sum::<f64>();
        }
        deviation = deviation.max((ci - c[i]).abs());
        for l in 0..n1 {
            let bil: f64 = -2.0 * (0..k1).map(|kk| step_one[(kk, i)] * a.get(kk, l) * p.get(kk, l)).sum::<f64>();
            let qil: f64 = (0..k1).map(|kk| step_one[(kk, i)] * a.get(kk, l)).sum();
            deviation = deviation.max((bil - b[i][l]).abs()).max((qil - quadratic[i][l]).abs());
        }
    }
    let scale = 1.0 + phi.max_abs_coefficient();
    let self_check = deviation / scale;
    if self_check > tol::SELF_CHECK {
        return Err(ReductionError::SelfCheck { what: "linear part readout".into(), deviation: self_check });
    }
    Ok((phi, LinearPart { b, c, quadratic, self_check }))
}

/// `Gamma` and the predicted `d` values of the umbrella STEP 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSolution {
    /// `gamma[i - n - 1][j]` for affine rows `i = n+1..=2n`, columns `j = 0..=2n`.
    pub gamma: Vec<Vec<f64>>,
    /// `d_{j,j}`, `j = 0..=n`.
    pub d_diag: Vec<f64>,
    /// `(d_{j,0}, d_{j,j-n})`, `j = n+1..=2n`.
    pub d_affine: Vec<(f64, f64)>,
}

/// Solves the STEP-3 systems for `Gamma` given all `b` rows (`2n + 1` of them).
///
/// Columns `j <= n` solve `B_j^T gamma = -(b_{j,l})_{l != j}`; columns `j > n`
/// span the kernel of `B~_{j-n}^T`, normalized to unit length with `d_{j,0} > 0`.
pub fn solve_gamma(b: &[Vec<f64>], eps_det: f64) -> Result<GammaSolution, ReductionError> {
    let n = b[0].len() - 1;
    if b.len() != 2 * n + 1 {
        return Err(ReductionError::WrongBranch(format!("{} rows of b, expected {}", b.len(), 2 * n + 1)));
    }
    let certificate = full_rank_certificate(b, n, eps_det);
    if !certificate.outside_bad_set {
        return Err(ReductionError::BadSet(Box::new(certificate)));
    }
    let cols = affine_columns(b, n);
    let mut gamma = vec![vec![0.0; 2 * n + 1]; n];
    let mut d_diag = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let bj = b_minor(&cols, j);
        let rhs = Vector::from_iterator(n, (0..=n).filter(|&l| l != j).map(|l| -b[j][l]));
        let sol = linalg::solve(&bj.transpose(), &Matrix::from_column_slice(n, 1, rhs.as_slice()), 0.0)
            .ok_or_else(|| ReductionError::BadSet(Box::new(certificate.clone())))?;
        let mut djj = b[j][j];
        for i in 0..n {
            gamma[i][j] = sol[(i, 0)];
            djj += sol[(i, 0)] * cols[(i, j)];
        }
        d_diag.push(djj);
    }

    let scale = linalg::max_abs(&cols).max(f64::MIN_POSITIVE);
    let mut d_affine = Vec::with_capacity(n);
    for jp in 1..=n {
        // B~_jp: columns b_1..b_n without b_jp
        let tilde = Matrix::from_fn(n, n - 1, |i, c| cols[(i, if c + 1 < jp { c + 1 } else { c + 2 })]);
        let kernel = linalg::null_space(&tilde.transpose(), tol::RANK);
        if kernel.ncols() != 1 {
            return Err(ReductionError::DegenerateKernel { column: n + jp, dim: kernel.ncols() });
        }
        let mut v: Vec<f64> = kernel.column(0).iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let dot = |v: &[f64], l: usize| (0..n).map(|i| v[i] * cols[(i, l)]).sum::<f64>();
        if dot(&v, 0) < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let (d0, dj) = (dot(&v, 0), dot(&v, jp));
        if d0.abs() <= 1e-10 * scale || dj.abs() <= 1e-10 * scale {
            return Err(ReductionError::Degenerate(format!(
                "d_{{{},0}} = {d0:.3e}, d_{{{},{jp}}} = {dj:.3e} at scale {scale:.3e}",
                n + jp,
                n + jp
            )));
        }
        for i in 0..n {
            gamma[i][n + jp] = v[i];
        }
        d_affine.push((d0, dj));
    }
    Ok(GammaSolution { gamma, d_diag, d_affine })
}

/// `alpha[i - r][j]` with `sum_{j<r} alpha_ji a_j + a_i = 0` for every row `i >= r`,
/// where the first `r` rows span the row space.
pub fn solve_alpha(a: &CoefficientMatrix, r: usize, eps_rank: f64) -> Result<Vec<Vec<f64>>, ReductionError> {
    let k1 = a.k() + 1;
    let m = a.matrix();
    let rank = linalg::numerical_rank(&m, eps_rank);
    let span = a.block(0..r, 0..a.n() + 1);
    if linalg::numerical_rank(&span, eps_rank) != rank || r != rank {
        return Err(ReductionError::RankMismatch(format!(
            "the leading {r} rows do not span the row space (rank {rank})"
        )));
    }
    let spt = span.transpose();
    let norm = m.norm();
    let mut alpha = Vec::with_capacity(k1 - r);
    for i in r..k1 {
        let rhs = -a.block(i..i + 1, 0..a.n() + 1).transpose();
        let sol = linalg::least_squares(&spt, &rhs, eps_rank);
        let residual = (&spt * &sol - &rhs).norm();
        if residual > tol::SELF_CHECK * norm {
            return Err(ReductionError::RankMismatch(format!(
                "row {i} is not a combination of the spanning rows (residual {residual:.3e})"
            )));
        }
        alpha.push(sol.column(0).iter().copied().collect());
    }
    Ok(alpha)
}

/// STEP-1 matrix of the inclusion reduction: `X M` adds `alpha` combinations to the dependent rows.
pub fn inclusion_step_one(alpha: &[Vec<f64>], r: usize, k1: usize) -> Matrix {
    let mut m = Matrix::identity(k1, k1);
    for (offset, row) in alpha.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[(j, r + offset)] = v;
        }
    }
    m
}
