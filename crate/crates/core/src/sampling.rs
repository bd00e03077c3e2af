//! Random instances, bad-set constructions and certificate sweeps.
//!
//! Coefficient entries are drawn with magnitude in `[0.5, 2]` and a random
//! sign; centers are uniform in `[-1, 1]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gds::{select_pivot, CenterConfig, CoefficientMatrix, PivotBranch};
use crate::linalg::{self, Matrix};
use crate::par::{self, Execution};
use crate::reduction::{
    badset_certificate, linear_part, solve_alpha, solve_lambda, ReductionConfig, ReductionError,
};
use crate::verify::SampleSpec;

pub const ENTRY_MIN: f64 = 0.5;
pub const ENTRY_MAX: f64 = 2.0;

/// Magnitude in `[ENTRY_MIN, ENTRY_MAX]`, random sign.
pub fn signed_entry(rng: &mut impl Rng) -> f64 {
    let m = rng.random_range(ENTRY_MIN..=ENTRY_MAX);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

pub fn random_rows(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| signed_entry(rng)).collect()).collect()
}

pub fn random_centers(rng: &mut impl Rng, n: usize, k: usize) -> CenterConfig {
    let pts = (0..=k).map(|_| (0..=n).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
    CenterConfig::new(pts).expect("finite")
}

/// `(k+1) x (n+1)` matrix of rank `n + 1` (requires `k >= n`).
pub fn random_full_rank(rng: &mut impl Rng, n: usize, k: usize) -> CoefficientMatrix {
    loop {
        let a = CoefficientMatrix::new(random_rows(rng, k + 1, n + 1)).expect("nonzero entries");
        if linalg::inverse_condition(&a.a1()) > 1e-3 && a.rank(crate::tol::RANK) == n + 1 {
            return a;
        }
    }
}

/// `(k+1) x (n+1)` matrix of rank exactly `rank`: the first `rank` rows are
/// random, the rest are random combinations of them.
pub fn random_rank_deficient(rng: &mut impl Rng, n: usize, k: usize, rank: usize) -> CoefficientMatrix {
    assert!(rank >= 1 && rank <= n + 1 && rank <= k + 1);
    loop {
        let basis = random_rows(rng, rank, n + 1);
        let mut rows = basis.clone();
        for _ in rank..=k {
            let w: Vec<f64> = (0..rank).map(|_| signed_entry(rng)).collect();
            rows.push((0..=n).map(|j| (0..rank).map(|s| w[s] * basis[s][j]).sum()).collect());
        }
        let max = rows.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        if rows.iter().flatten().any(|v| v.abs() < 0.05 * max) {
            continue;
        }
        let a = CoefficientMatrix::new(rows).expect("nonzero entries");
        let lead = a.block(0..rank, 0..rank);
        if a.rank(crate::tol::RANK) == rank && linalg::inverse_condition(&lead) > 1e-3 {
            return a;
        }
    }
}

/// Adjusts column `l` of `p` (min-norm change) so that `b_il = target[r]` for
/// each `i = rows[r]`, where `b = linear part of (X -> X M) ∘ G`.
fn force_column(p: &CenterConfig, a: &CoefficientMatrix, m: &Matrix, rows: &[usize], l: usize, target: &[f64]) -> CenterConfig {
    let k1 = a.k() + 1;
    let coef = Matrix::from_fn(rows.len(), k1, |r, kk| -2.0 * m[(kk, rows[r])] * a.get(kk, l));
    let current = Matrix::from_fn(k1, 1, |kk, _| p.get(kk, l));
    let rhs = Matrix::from_fn(rows.len(), 1, |r, _| target[r]) - &coef * &current;
    let delta = linalg::least_squares(&coef, &rhs, 0.0);
    let mut pts = p.points().to_vec();
    for (kk, pt) in pts.iter_mut().enumerate() {
        pt[l] += delta[(kk, 0)];
    }
    CenterConfig::new(pts).expect("finite")
}

fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &v) in perm.iter().enumerate() {
        inv[v] = i;
    }
    inv
}

/// Moves `p` onto the bad set so that `det B_j` (and generically only it) vanishes.
///
/// Column `l1 != j` of the affine block is forced to the sum of the columns other than `j` and `l1`.
pub fn full_rank_badset(p: &CenterConfig, a: &CoefficientMatrix, j: usize, config: &ReductionConfig) -> Result<CenterConfig, ReductionError> {
    let n = a.n();
    assert!(j <= n);
    let plan = select_pivot(a, PivotBranch::FullRank, config.eps_rank)?;
    let ap = a.permuted(&plan.row_perm, &plan.col_perm);
    let pp = p.permuted(&plan.row_perm, &plan.col_perm);
    let (l1m, l2m) = solve_lambda(&ap, config.eps_rank)?;
    let m = crate::reduction::full_rank_step_one(&l1m, &l2m);
    let (_, lp) = linear_part(&pp, &ap, &m)?;
    let l1 = if j == 0 { 1 } else { 0 };
    let rows: Vec<usize> = (n + 1..=2 * n).collect();
    let target: Vec<f64> = rows
        .iter()
        .map(|&i| (0..=n).filter(|&l| l != j && l != l1).map(|l| lp.b[i][l]).sum())
        .collect();
    let forced = force_column(&pp, &ap, &m, &rows, l1, &target);
    Ok(forced.permuted(&inverse_perm(&plan.row_perm), &inverse_perm(&plan.col_perm)))
}

/// Moves `p` onto the bad set of the inclusion reduction (`det B = 0`).
pub fn inclusion_badset(p: &CenterConfig, a: &CoefficientMatrix, config: &ReductionConfig) -> Result<CenterConfig, ReductionError> {
    let n = a.n();
    let plan = select_pivot(a, PivotBranch::Inclusion, config.eps_rank)?;
    let r = plan.rank;
    let ap = a.permuted(&plan.row_perm, &plan.col_perm);
    let pp = p.permuted(&plan.row_perm, &plan.col_perm);
    let alpha = solve_alpha(&ap, r, config.eps_rank)?;
    let m = crate::reduction::inclusion_step_one(&alpha, r, a.k() + 1);
    let (_, lp) = linear_part(&pp, &ap, &m)?;
    let rows: Vec<usize> = (r..=r + n).collect();
    let target: Vec<f64> = rows.iter().map(|&i| (1..=n).map(|l| lp.b[i][l]).sum()).collect();
    let forced = force_column(&pp, &ap, &m, &rows, 0, &target);
    Ok(forced.permuted(&inverse_perm(&plan.row_perm), &inverse_perm(&plan.col_perm)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadSetSweep {
    pub branch: PivotBranch,
    pub samples: usize,
    pub seed: u64,
    pub outside: usize,
    pub inside: usize,
    pub conditioning_warnings: usize,
    pub fraction_outside: f64,
    /// Smallest `|det| / scale` over all samples.
    pub min_relative: f64,
}

/// Certificate verdicts for `count` random center configurations at fixed `A`.
pub fn badset_sweep(
    a: &CoefficientMatrix,
    branch: PivotBranch,
    spec: &SampleSpec,
    config: &ReductionConfig,
    exec: Execution,
) -> Result<BadSetSweep, ReductionError> {
    let certs = par::map_indices(exec, spec.count, |i| {
        let mut rng: ChaCha8Rng = spec.rng(i);
        let p = random_centers(&mut rng, a.n(), a.k());
        badset_certificate(&p, a, branch, config)
    });
    let mut sweep = BadSetSweep {
        branch,
        samples: spec.count,
        seed: spec.seed,
        outside: 0,
        inside: 0,
        conditioning_warnings: 0,
        fraction_outside: 0.0,
        min_relative: f64::INFINITY,
    };
    for c in certs {
        let c = c?;
        if c.outside_bad_set {
            sweep.outside += 1;
        } else {
            sweep.inside += 1;
        }
        sweep.conditioning_warnings += c.warnings.len();
        sweep.min_relative = sweep.min_relative.min(c.min_relative());
    }
    sweep.fraction_outside = sweep.outside as f64 / spec.count as f64;
    Ok(sweep)
}
