//! Unstable configurations for `k = 2n`.
//!
//! Write `A = (A_1 | C)` with `A_1` the leading `(n+1) x (n+1)` block and `C`
//! the `n x (n+1)` affine block. With `W = (A_1^T)^{-1}` and
//! `M_mj = sum_k W_km a_kj q_kj`, the linear coefficients of the affine rows of
//! `H_1 ∘ G` are
//!
//! ```text
//! b_ij = -2 (c_ij p_ij - sum_m c_im M_mj)
//! ```
//!
//! which is linear in `c` (block diagonal, one block per affine row) and
//! vanishes identically at `p_ij = (sum_m c_im M_mj) / c_ij`, the center map `Psi`.
//! A nonzero kernel vector of `c -> b(p, c)` with no zero entry is a perturbation
//! `A~ = (A_1 | c)` whose map has flat image in the last `n` target directions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gds::{build_gds_unchecked, CenterConfig, CoefficientMatrix, GdsError};
use crate::linalg::{self, Matrix};
use crate::polymap::PolyError;
use crate::reduction::{full_rank_step_one, linear_part, solve_lambda, ReductionError};
use crate::tol;
use crate::verify::{check_image_flat, find_singular_point, FlatReport, SampleSpec, SingularPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstabilityError {
    #[error("A_1 is singular")]
    SingularA1,
    #[error("c entry ({row}, {col}) is zero")]
    ZeroEntry { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Gds(#[from] GdsError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error("witness certification failed: {}", .0.join(", "))]
    Certification(Vec<String>),
}

/// `A_1` and `W = (A_1^T)^{-1}`.
#[derive(Debug, Clone)]
struct Leading {
    a1: Matrix,
    w: Matrix,
}

impl Leading {
    fn new(a1_rows: &[Vec<f64>]) -> Result<Self, InstabilityError> {
        let n1 = a1_rows.len();
        if n1 == 0 || a1_rows.iter().any(|r| r.len() != n1) {
            return Err(InstabilityError::Dimension("A_1 must be square".into()));
        }
        let a1 = linalg::from_rows(a1_rows);
        let w = linalg::inverse(&a1.transpose(), tol::RANK).ok_or(InstabilityError::SingularA1)?;
        Ok(Leading { a1, w })
    }

    fn n1(&self) -> usize {
        self.a1.nrows()
    }

    /// `M_mj = sum_k W_km a_kj q_kj`.
    fn m(&self, q: &[Vec<f64>]) -> Matrix {
        let n1 = self.n1();
        Matrix::from_fn(n1, n1, |m, j| (0..n1).map(|k| self.w[(k, m)] * self.a1[(k, j)] * q[k][j]).sum())
    }
}

fn check_q(q: &[Vec<f64>], n1: usize) -> Result<(), InstabilityError> {
    if q.len() != n1 || q.iter().any(|r| r.len() != n1) {
        return Err(InstabilityError::Dimension(format!("q must be {n1} x {n1}")));
    }
    Ok(())
}

fn check_c(c: &[Vec<f64>], n1: usize) -> Result<(), InstabilityError> {
    if c.len() + 1 != n1 || c.iter().any(|r| r.len() != n1) {
        return Err(InstabilityError::Dimension(format!("c must be {} x {n1}", n1 - 1)));
    }
    for (i, row) in c.iter().enumerate() {
        if let Some(j) = row.iter().position(|&v| v == 0.0) {
            return Err(InstabilityError::ZeroEntry { row: i, col: j });
        }
    }
    Ok(())
}

/// `Psi(q, c)`: the first `n + 1` centers are `q`, the rest make every affine `b_ij` vanish.
pub fn psi_map(q: &[Vec<f64>], c: &[Vec<f64>], a1_rows: &[Vec<f64>]) -> Result<CenterConfig, InstabilityError> {
    let lead = Leading::new(a1_rows)?;
    let n1 = lead.n1();
    check_q(q, n1)?;
    check_c(c, n1)?;
    let m = lead.m(q);
    let mut points = q.to_vec();
    for ci in c {
        points.push((0..n1).map(|j| (0..n1).map(|mm| ci[mm] * m[(mm, j)]).sum::<f64>() / ci[j]).collect());
    }
    Ok(CenterConfig::new(points)?)
}

/// `d psi~ / d c`, block diagonal; block `i` is `J_i[j][m] = M_mj / c_ij - delta_jm N_ij / c_ij^2`.
fn psi_c_blocks(m: &Matrix, c: &[Vec<f64>]) -> Vec<Matrix> {
    let n1 = m.nrows();
    c.iter()
        .map(|ci| {
            Matrix::from_fn(n1, n1, |j, mm| {
                let nij: f64 = (0..n1).map(|s| ci[s] * m[(s, j)]).sum();
                let diag = if j == mm { nij / (ci[j] * ci[j]) } else { 0.0 };
                m[(mm, j)] / ci[j] - diag
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiJacobianReport {
    /// `det J Psi` from central finite differences of the whole map.
    pub finite_difference: f64,
    /// `det (d psi~ / d c)` from the analytic block structure.
    pub block: f64,
    /// Hadamard bound of the analytic block matrix.
    pub scale: f64,
    /// `|finite_difference - block| / scale`.
    pub agreement: f64,
    pub step: f64,
}

pub const PSI_FD_STEP: f64 = 1e-6;

/// `det J Psi(q, c)` by both routes.
pub fn psi_jacobian_det(q: &[Vec<f64>], c: &[Vec<f64>], a1_rows: &[Vec<f64>]) -> Result<PsiJacobianReport, InstabilityError> {
    let lead = Leading::new(a1_rows)?;
    let n1 = lead.n1();
    check_q(q, n1)?;
    check_c(c, n1)?;
    let n = n1 - 1;
    let dim = n1 * n1 + n * n1;
    let flat_in: Vec<f64> = q.iter().chain(c).flatten().copied().collect();
    let unflatten = |v: &[f64]| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let rows: Vec<Vec<f64>> = v.chunks(n1).map(<[f64]>::to_vec).collect();
        (rows[..n1].to_vec(), rows[n1..].to_vec())
    };
    let eval = |v: &[f64]| -> Result<Vec<f64>, InstabilityError> {
        let (qq, cc) = unflatten(v);
        Ok(psi_map(&qq, &cc, a1_rows)?.points().iter().flatten().copied().collect())
    };
    let mut jac = Matrix::zeros(dim, dim);
    for col in 0..dim {
        let h = PSI_FD_STEP * flat_in[col].abs().max(1.0);
        let mut plus = flat_in.clone();
        let mut minus = flat_in.clone();
        plus[col] += h;
        minus[col] -= h;
        let (fp, fm) = (eval(&plus)?, eval(&minus)?);
        for row in 0..dim {
            jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    let finite_difference = linalg::determinant(&jac);

    let blocks = psi_c_blocks(&lead.m(q), c);
    let block: f64 = blocks.iter().map(linalg::determinant).product();
    let scale: f64 = blocks.iter().map(linalg::hadamard_bound).product();
    let agreement = if scale > 0.0 { (finite_difference - block).abs() / scale } else { (finite_difference - block).abs() };
    Ok(PsiJacobianReport { finite_difference, block, scale, agreement, step: PSI_FD_STEP })
}

/// Index of `c_ij` (affine row `i = 0..n`, column `j`) in the flattened vector.
pub fn c_index(n: usize, i: usize, j: usize) -> usize {
    i * (n + 1) + j
}

type Rows = Vec<Vec<f64>>;

fn split_p(p: &CenterConfig, n1: usize) -> Result<(Rows, Rows), InstabilityError> {
    if p.len() != 2 * n1 - 1 || p.dim() != n1 {
        return Err(InstabilityError::Dimension(format!("expected {} centers in R^{n1}", 2 * n1 - 1)));
    }
    let pts = p.points();
    Ok((pts[..n1].to_vec(), pts[n1..].to_vec()))
}

/// Blocks `L_i` of the linear map `c -> b(p, c)`; `L_i[j][m] = -2 (p_ij delta_jm - M_mj)`.
fn instability_blocks(p: &CenterConfig, a1_rows: &[Vec<f64>]) -> Result<Vec<Matrix>, InstabilityError> {
    let lead = Leading::new(a1_rows)?;
    let n1 = lead.n1();
    let (q, affine) = split_p(p, n1)?;
    let m = lead.m(&q);
    Ok(affine
        .iter()
        .map(|pi| Matrix::from_fn(n1, n1, |j, mm| -2.0 * (if j == mm { pi[j] } else { 0.0 } - m[(mm, j)])))
        .collect())
}

/// The `n(n+1)`-square matrix of `c -> (b_ij)` over the affine rows, indexed by [`c_index`].
pub fn build_instability_matrix(p: &CenterConfig, a: &CoefficientMatrix) -> Result<Matrix, InstabilityError> {
    check_shape(a)?;
    let a1_rows: Vec<Vec<f64>> = a.rows()[..=a.n()].to_vec();
    Ok(assemble(&instability_blocks(p, &a1_rows)?))
}

fn assemble(blocks: &[Matrix]) -> Matrix {
    let n1 = blocks.first().map_or(0, Matrix::nrows);
    let dim = n1 * blocks.len();
    let mut l = Matrix::zeros(dim, dim);
    for (i, b) in blocks.iter().enumerate() {
        l.view_mut((i * n1, i * n1), (n1, n1)).copy_from(b);
    }
    l
}

fn check_shape(a: &CoefficientMatrix) -> Result<(), InstabilityError> {
    if a.k() != 2 * a.n() {
        return Err(InstabilityError::Dimension(format!("need k = 2n, got n = {}, k = {}", a.n(), a.k())));
    }
    Ok(())
}

/// `b_ij` of the affine rows of `H_1 ∘ G(p, (A_1 | c))` by coefficient readout.
pub fn affine_b_readout(p: &CenterConfig, a1_rows: &[Vec<f64>], c: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, InstabilityError> {
    let n1 = a1_rows.len();
    let rows: Vec<Vec<f64>> = a1_rows.iter().chain(c).cloned().collect();
    let a = CoefficientMatrix::new(rows)?;
    let (l1, l2) = solve_lambda(&a, tol::RANK).map_err(|e| match e {
        ReductionError::SingularA1 => InstabilityError::SingularA1,
        other => other.into(),
    })?;
    let (_, lp) = linear_part(p, &a, &full_rank_step_one(&l1, &l2))?;
    Ok(lp.b[n1..].to_vec())
}

/// A perturbation `A~ = (A_1 | c)` of `A` at fixed `p` with `b(p, c) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityWitness {
    pub q: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub p: CenterConfig,
    /// Rows of `A~`.
    pub a_tilde: Vec<Vec<f64>>,
    /// `max |L_p c|`.
    pub residual: f64,
    /// `max |b_ij|` read from `H_1 ∘ G(p, A~)`.
    pub readout_residual: f64,
    /// Max |non-constant coefficient| of the last `n` components of `H_1 ∘ G(p, A~)`.
    pub flatness: f64,
    pub singular_point: Option<SingularPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DestabilizeOutcome {
    Witness(Box<InstabilityWitness>),
    /// No admissible kernel vector.
    None { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestabilizeReport {
    /// Singular values of `L_p`, descending.
    pub singular_values: Vec<f64>,
    pub smallest_singular_value: f64,
    pub kernel_dim: usize,
    /// Kernel dimension of each affine block.
    pub block_kernel_dims: Vec<usize>,
    pub outcome: DestabilizeOutcome,
}

impl DestabilizeReport {
    pub fn witness(&self) -> Option<&InstabilityWitness> {
        match &self.outcome {
            DestabilizeOutcome::Witness(w) => Some(w),
            DestabilizeOutcome::None { .. } => None,
        }
    }
}

/// Grid points on the unit sphere of `R^d`: normalized nonzero lattice points of
/// `{-g..g}^d` with positive first nonzero coordinate.
fn sphere_grid(d: usize) -> Vec<Vec<f64>> {
    let g: i64 = match d {
        1 => 1,
        2 => 90,
        3 => 20,
        4 => 7,
        _ => 3,
    };
    let side = (2 * g + 1) as usize;
    let total = side.pow(d as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut rem = idx;
        let v: Vec<f64> = (0..d)
            .map(|_| {
                let c = (rem % side) as i64 - g;
                rem /= side;
                c as f64
            })
            .collect();
        match v.iter().find(|x| **x != 0.0) {
            Some(&first) if first > 0.0 => {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                out.push(v.iter().map(|x| x / norm).collect());
            }
            _ => {}
        }
    }
    out
}

/// Kernel vector of a block maximizing the smallest `|entry|` (relative to the largest).
fn best_kernel_vector(kernel: &Matrix) -> Vec<f64> {
    let d = kernel.ncols();
    let score = |v: &[f64]| {
        let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let min = v.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        if max > 0.0 {
            min / max
        } else {
            0.0
        }
    };
    let mut best: (f64, Vec<f64>) = (-1.0, Vec::new());
    for w in sphere_grid(d) {
        let v: Vec<f64> = (0..kernel.nrows()).map(|r| (0..d).map(|s| kernel[(r, s)] * w[s]).sum()).collect();
        let s = score(&v);
        if s > best.0 {
            best = (s, v);
        }
    }
    best.1
}

/// Searches `ker L_p` for an admissible `c` and certifies the resulting witness.
pub fn find_unstable_perturbation(p: &CenterConfig, a: &CoefficientMatrix, spec: &SampleSpec) -> Result<DestabilizeReport, InstabilityError> {
    check_shape(a)?;
    p.check_compatible(a)?;
    let n = a.n();
    let n1 = n + 1;
    let a1_rows: Vec<Vec<f64>> = a.rows()[..n1].to_vec();
    let blocks = instability_blocks(p, &a1_rows)?;
    let l = assemble(&blocks);
    let singular_values = linalg::singular_values(&l);
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let smallest_singular_value = singular_values.last().copied().unwrap_or(0.0);
    let kernel_dim = singular_values.iter().filter(|&&s| s <= tol::KERNEL * smax).count();
    let kernels: Vec<Matrix> = blocks.iter().map(|b| block_kernel(b, smax)).collect();
    let block_kernel_dims: Vec<usize> = kernels.iter().map(Matrix::ncols).collect();
    let report = |outcome| DestabilizeReport {
        singular_values: singular_values.clone(),
        smallest_singular_value,
        kernel_dim,
        block_kernel_dims: block_kernel_dims.clone(),
        outcome,
    };
    if let Some(i) = block_kernel_dims.iter().position(|&d| d == 0) {
        return Ok(report(DestabilizeOutcome::None {
            reason: format!(
                "block {i} of L_p is nonsingular; smallest singular value of L_p is {smallest_singular_value:.3e}"
            ),
        }));
    }

    let a2 = a.a2();
    let mut c = Vec::with_capacity(n);
    for (i, kernel) in kernels.iter().enumerate() {
        let mut v = best_kernel_vector(kernel);
        let row: Vec<f64> = (0..n1).map(|j| a2[(i, j)]).collect();
        let target_norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let lead = (0..n1).fold(0, |b, j| if row[j].abs() > row[b].abs() { j } else { b });
        let sign = if (v[lead] >= 0.0) == (row[lead] >= 0.0) { 1.0 } else { -1.0 };
        v.iter_mut().for_each(|x| *x *= sign * target_norm / norm);
        c.push(v);
    }
    let max = c.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    let min = c.iter().flatten().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if min <= tol::WITNESS_MIN_ENTRY * max {
        return Ok(report(DestabilizeOutcome::None {
            reason: format!("every kernel vector has an entry below {:.0e} relative (best {:.3e})", tol::WITNESS_MIN_ENTRY, min / max),
        }));
    }
    let witness = build_witness(p, &a1_rows, c, spec)?;
    Ok(report(DestabilizeOutcome::Witness(Box::new(witness))))
}

/// Kernel of one block, with singular values compared against the largest one of the whole `L_p`.
fn block_kernel(block: &Matrix, global_max: f64) -> Matrix {
    let top = linalg::singular_values(block).first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Matrix::identity(block.nrows(), block.ncols());
    }
    linalg::null_space(block, tol::KERNEL * global_max / top)
}

/// Assembles a witness for `A~ = (A_1 | c)` at `p`, filling in the evidence fields.
pub fn build_witness(p: &CenterConfig, a1_rows: &[Vec<f64>], c: Vec<Vec<f64>>, spec: &SampleSpec) -> Result<InstabilityWitness, InstabilityError> {
    let n1 = a1_rows.len();
    let (q, _) = split_p(p, n1)?;
    let a_tilde: Vec<Vec<f64>> = a1_rows.iter().chain(&c).cloned().collect();
    let blocks = instability_blocks(p, a1_rows)?;
    let flat_c: Vec<f64> = c.iter().flatten().copied().collect();
    let lc = assemble(&blocks) * Matrix::from_column_slice(flat_c.len(), 1, &flat_c);
    let residual = linalg::max_abs(&lc);
    let (readout_residual, flatness) = match CoefficientMatrix::new(a_tilde.clone()) {
        Ok(_) => {
            let b = affine_b_readout(p, a1_rows, &c)?;
            let flat = h1_flatness(p, a1_rows, &c)?;
            (b.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs())), flat.max_nonconstant)
        }
        Err(_) => (f64::INFINITY, f64::INFINITY),
    };
    let g = build_gds_unchecked(p.points(), &a_tilde);
    let singular_point = find_singular_point(&g, spec).point;
    Ok(InstabilityWitness { q, c, p: p.clone(), a_tilde, residual, readout_residual, flatness, singular_point })
}

fn h1_flatness(p: &CenterConfig, a1_rows: &[Vec<f64>], c: &[Vec<f64>]) -> Result<FlatReport, InstabilityError> {
    let a = CoefficientMatrix::new(a1_rows.iter().chain(c).cloned().collect())?;
    let (l1, l2) = solve_lambda(&a, tol::RANK)?;
    let (phi, _) = linear_part(p, &a, &full_rank_step_one(&l1, &l2))?;
    Ok(check_image_flat(&phi, a.n()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub checks: Vec<WitnessCheck>,
    pub passed: bool,
}

impl CertificationReport {
    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
    }

    pub fn into_result(self) -> Result<Self, InstabilityError> {
        if self.passed {
            Ok(self)
        } else {
            Err(InstabilityError::Certification(self.failures()))
        }
    }
}

/// Re-verifies a witness from scratch:
/// (i) `b = 0` by formula and by readout, (ii) flat image,
/// (iii) a singular point, (iv) `rank A~ = n + 1` with no zero entry.
pub fn certify_witness(w: &InstabilityWitness, spec: &SampleSpec) -> CertificationReport {
    let n1 = w.q.len();
    let n = n1.saturating_sub(1);
    let a1_rows: Vec<Vec<f64>> = w.a_tilde.iter().take(n1).cloned().collect();
    let mut checks = Vec::new();
    let scale = 1.0 + w.p.points().iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
        * w.a_tilde.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));

    // (i)
    let formula = instability_blocks(&w.p, &a1_rows).map(|b| {
        let flat_c: Vec<f64> = w.c.iter().flatten().copied().collect();
        linalg::max_abs(&(assemble(&b) * Matrix::from_column_slice(flat_c.len(), 1, &flat_c)))
    });
    let readout = affine_b_readout(&w.p, &a1_rows, &w.c)
        .map(|b| b.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs())));
    let (value, detail) = match (&formula, &readout) {
        (Ok(f), Ok(r)) => (f.max(*r), format!("formula {f:.3e}, readout {r:.3e}")),
        (Err(e), _) | (_, Err(e)) => (f64::INFINITY, e.to_string()),
    };
    checks.push(WitnessCheck {
        name: "b_residual".into(),
        value,
        threshold: tol::WITNESS_RESIDUAL * scale,
        passed: value <= tol::WITNESS_RESIDUAL * scale,
        detail,
    });

    // (ii)
    let flat = h1_flatness(&w.p, &a1_rows, &w.c);
    checks.push(match flat {
        Ok(f) => WitnessCheck {
            name: "flat_image".into(),
            value: f.max_nonconstant,
            threshold: tol::FLAT * f.scale,
            passed: f.flat,
            detail: format!("last {n} components of H_1 ∘ G"),
        },
        Err(e) => WitnessCheck { name: "flat_image".into(), value: f64::INFINITY, threshold: 0.0, passed: false, detail: e.to_string() },
    });

    // (iii)
    let g = build_gds_unchecked(w.p.points(), &w.a_tilde);
    let search = find_singular_point(&g, spec);
    checks.push(WitnessCheck {
        name: "singular_point".into(),
        value: search.point.as_ref().map_or(search.best_relative, SingularPoint::relative),
        threshold: search.threshold,
        passed: search.found(),
        detail: match &search.point {
            Some(p) => format!("x* = {:?} ({:?})", p.x, p.method),
            None => format!("none after {} lines and {} Newton starts", search.lines_tried, search.newton_starts),
        },
    });

    // (iv)
    let m = linalg::from_rows(&w.a_tilde);
    let rank = linalg::numerical_rank(&m, tol::RANK);
    let max = w.a_tilde.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    let min = w.a_tilde.iter().flatten().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let zero = w
        .a_tilde
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, v)| (i, j, *v)))
        .find(|(_, _, v)| v.abs() <= tol::WITNESS_MIN_ENTRY * max);
    checks.push(WitnessCheck {
        name: "rank_and_nonzero".into(),
        value: if max > 0.0 { min / max } else { 0.0 },
        threshold: tol::WITNESS_MIN_ENTRY,
        passed: rank == n1 && zero.is_none(),
        detail: match zero {
            Some((i, j, v)) => format!("rank {rank}; entry ({i}, {j}) = {v:.3e} is zero"),
            None => format!("rank {rank}"),
        },
    });
    let passed = checks.iter().all(|c| c.passed);
    CertificationReport { checks, passed }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A1: [[f64; 2]; 2] = [[1.0, 1.0], [1.0, 2.0]];

    fn a1() -> Vec<Vec<f64>> {
        A1.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn psi_at_zero_q_vanishes_and_is_homogeneous() {
        let q = vec![vec![0.0; 2]; 2];
        let c = vec![vec![0.7, -1.3]];
        let p = psi_map(&q, &c, &a1()).unwrap();
        assert_eq!(p.point(2), &[0.0, 0.0]);
        let q = vec![vec![0.3, -0.2], vec![0.5, 0.9]];
        let base = psi_map(&q, &c, &a1()).unwrap();
        for t in [0.5, 2.0, -3.0] {
            let ct: Vec<Vec<f64>> = c.iter().map(|r| r.iter().map(|x| x * t).collect()).collect();
            let pt = psi_map(&q, &ct, &a1()).unwrap();
            for (x, y) in pt.points().iter().flatten().zip(base.points().iter().flatten()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_c_entry_rejected() {
        let q = vec![vec![0.0; 2]; 2];
        assert_eq!(psi_map(&q, &[vec![1.0, 0.0]], &a1()), Err(InstabilityError::ZeroEntry { row: 0, col: 1 }));
        let singular = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(psi_map(&q, &[vec![1.0, 1.0]], &singular), Err(InstabilityError::SingularA1));
    }

    #[test]
    fn diagonal_matrix_at_zero_q() {
        let a = CoefficientMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let p = CenterConfig::new(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.4, -0.7]]).unwrap();
        let l = build_instability_matrix(&p, &a).unwrap();
        assert_eq!(l, Matrix::from_row_slice(2, 2, &[-0.8, 0.0, 0.0, 1.4]));
        let r = find_unstable_perturbation(&p, &a, &SampleSpec::default()).unwrap();
        assert!(r.witness().is_none());
        assert_eq!(r.kernel_dim, 0);
        assert!((r.smallest_singular_value - 0.8).abs() < 1e-15);
    }

    #[test]
    fn psi_jacobian_routes_agree_and_vanish() {
        let q = vec![vec![0.3, -0.2], vec![0.5, 0.9]];
        let c = vec![vec![0.7, -1.3]];
        let r = psi_jacobian_det(&q, &c, &a1()).unwrap();
        assert!(r.agreement <= 1e-5, "{r:?}");
        assert!(r.block.abs() <= 1e-12 * r.scale.max(1.0));
        let zero = psi_jacobian_det(&[vec![0.0; 2], vec![0.0; 2]], &c, &a1()).unwrap();
        assert_eq!(zero.block, 0.0);
    }

    #[test]
    fn witness_from_psi_certifies() {
        let q = vec![vec![0.3, -0.2], vec![0.5, 0.9]];
        let c = vec![vec![0.7, -1.3]];
        let p = psi_map(&q, &c, &a1()).unwrap();
        let a = CoefficientMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![0.9, -1.1]]).unwrap();
        let spec = SampleSpec::default();
        let r = find_unstable_perturbation(&p, &a, &spec).unwrap();
        let w = r.witness().expect("kernel contains c");
        let ratio = w.c[0][0] / c[0][0];
        assert!((w.c[0][1] / c[0][1] - ratio).abs() < 1e-9);
        let cert = certify_witness(w, &spec);
        assert!(cert.passed, "{cert:?}");

        let mut broken = w.clone();
        broken.c[0][1] = 0.0;
        broken.a_tilde[2][1] = 0.0;
        let cert = certify_witness(&broken, &spec);
        assert!(!cert.passed);
        assert!(cert.failures().contains(&"rank_and_nonzero".to_string()));
        assert!(matches!(cert.into_result(), Err(InstabilityError::Certification(_))));
    }

    #[test]
    fn sphere_grid_is_on_the_sphere() {
        for d in 1..=4 {
            let g = sphere_grid(d);
            assert!(!g.is_empty());
            assert!(g.iter().all(|v| (v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12));
        }
    }
}
