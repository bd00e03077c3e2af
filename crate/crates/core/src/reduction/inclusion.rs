use super::certificate::inclusion_certificate;
use super::full_rank::{poly, rows_of, term};
use super::pipeline::{Pipeline, PivotRecord, ReductionTrace};
use super::steps::{inclusion_step_one, linear_part, row_vector_transform, solve_alpha};
use super::{
    inclusion_normal_form, BadSetCertificate, NormalFormKind, ReductionConfig, ReductionError, ReductionResult,
};
use crate::gds::{build_gds, select_pivot, CenterConfig, CoefficientMatrix, PivotBranch, ProblemInstance};
use crate::linalg::{self, Matrix, Vector};
use crate::polymap::{ElementaryTransform, Poly, PolyMap, ShearRow, TransformKind};
use crate::tol;

fn check_branch(a: &CoefficientMatrix, eps_rank: f64) -> Result<(), ReductionError> {
    let (n, k) = (a.n(), a.k());
    if k == 2 * n && a.rank(eps_rank) == n + 1 {
        return Err(ReductionError::WrongBranch(
            "k = 2n with full rank reduces to the Whitney umbrella, not the inclusion".into(),
        ));
    }
    Ok(())
}

/// Square affine block: linear coefficients of rows `r..=r+n`.
fn b_square(b: &[Vec<f64>], r: usize, n: usize) -> Matrix {
    Matrix::from_fn(n + 1, n + 1, |i, l| b[r + i][l])
}

pub(crate) fn certificate_only(
    p: &CenterConfig,
    a: &CoefficientMatrix,
    config: &ReductionConfig,
) -> Result<BadSetCertificate, ReductionError> {
    check_branch(a, config.eps_rank)?;
    p.check_compatible(a)?;
    let plan = select_pivot(a, PivotBranch::Inclusion, config.eps_rank)?;
    let ap = a.permuted(&plan.row_perm, &plan.col_perm);
    let pp = p.permuted(&plan.row_perm, &plan.col_perm);
    let r = plan.rank;
    let alpha = solve_alpha(&ap, r, config.eps_rank)?;
    let (_, lp) = linear_part(&pp, &ap, &inclusion_step_one(&alpha, r, a.k() + 1))?;
    Ok(inclusion_certificate(&b_square(&lp.b, r, a.n()), config.eps_det))
}

/// Reduces `G(p, A)` to `(x0, ..., xn, 0, ..., 0)` when `rank(A) <= n` or `k > 2n`.
pub fn reduce_to_inclusion(
    p: &CenterConfig,
    a: &CoefficientMatrix,
    config: &ReductionConfig,
) -> Result<ReductionResult, ReductionError> {
    check_branch(a, config.eps_rank)?;
    let (n, k) = (a.n(), a.k());
    let (nv, k1) = (n + 1, k + 1);
    let g = build_gds(p, a)?;
    let mut pl = Pipeline::new(&g, config.tolerance);

    let plan = select_pivot(a, PivotBranch::Inclusion, config.eps_rank)?;
    let r = plan.rank;
    let ap = a.permuted(&plan.row_perm, &plan.col_perm);
    let pp = p.permuted(&plan.row_perm, &plan.col_perm);
    if plan.rows_permuted() {
        pl.target(plan.target.clone())?;
    }
    if plan.columns_permuted() {
        pl.source(plan.source.clone())?;
    }
    pl.snapshot("pivot");
    pl.claim("pivot: P ∘ G ∘ p = G(p', A')", &build_gds(&pp, &ap)?)?;

    // STEP 1
    let alpha = solve_alpha(&ap, r, config.eps_rank)?;
    let m1 = inclusion_step_one(&alpha, r, k1);
    let (_, lp) = linear_part(&pp, &ap, &m1)?;
    pl.target(row_vector_transform("H1 (alpha)", &m1)?)?;
    pl.snapshot("phi1");
    let quad = (r..k1)
        .flat_map(|i| pl.current.component(i).terms().filter(|(m, _)| m.degree() == 2).map(|(_, c)| c.abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    pl.claim_value("step 1: dependent rows are affine", quad)?;

    let bsq = b_square(&lp.b, r, n);
    let certificate = inclusion_certificate(&bsq, config.eps_det);
    if !certificate.outside_bad_set {
        return Err(ReductionError::BadSet(Box::new(certificate)));
    }

    // STEP 2
    let shift: Vec<f64> = (0..k1).map(|i| if i >= r { -lp.c[i] } else { 0.0 }).collect();
    pl.target(ElementaryTransform::translation(TransformKind::TargetAffine, "H2 (-c)", &shift)?)?;
    pl.snapshot("phi2");
    let constants = (r..k1).map(|i| pl.current.component(i).constant_term().abs()).fold(0.0, f64::max);
    pl.claim_value("step 2: affine rows are linear", constants)?;

    // STEP 3
    let binv = linalg::inverse(&bsq, 0.0)
        .ok_or_else(|| ReductionError::BadSet(Box::new(certificate.clone())))?;
    let mut l3 = Matrix::identity(k1, k1);
    for l in 0..nv {
        for s in 0..nv {
            l3[(r + l, r + s)] = binv[(l, s)];
        }
    }
    for i in r + nv..k1 {
        for s in 0..nv {
            let coef: f64 = (0..nv).map(|l| lp.b[i][l] * binv[(l, s)]).sum();
            l3[(i, r + s)] = -coef;
        }
    }
    pl.target(ElementaryTransform::affine(TransformKind::TargetAffine, "H3 (B^-1)", &l3, &Vector::zeros(k1))?)?;
    pl.snapshot("phi3");
    let step3: Vec<Poly> = (0..k1)
        .map(|i| {
            if i < r {
                pl.current.component(i).clone()
            } else if i < r + nv {
                Poly::var(nv, i - r, 1.0)
            } else {
                Poly::zero()
            }
        })
        .collect();
    pl.claim("step 3: selected rows are x, surplus rows vanish", &PolyMap::new(nv, step3)?)?;

    // STEP 4
    let consts: Vec<f64> = (0..k1).map(|i| if i < r { pl.current.component(i).constant_term() } else { 0.0 }).collect();
    let mut deviation = 0.0_f64;
    for (i, c) in consts.iter().enumerate().take(r) {
        let want: f64 = (0..nv).map(|j| ap.get(i, j) * pp.get(i, j).powi(2)).sum();
        deviation = deviation.max((want - c).abs());
    }
    if pl.relative(deviation) > tol::SELF_CHECK.max(config.tolerance) {
        return Err(ReductionError::SelfCheck { what: "quadratic row constants".into(), deviation: pl.relative(deviation) });
    }
    let neg: Vec<f64> = consts.iter().map(|c| -c).collect();
    pl.target(ElementaryTransform::translation(TransformKind::TargetAffine, "H4 (-constants)", &neg)?)?;
    pl.snapshot("phi4");
    let step4: Vec<Poly> = (0..k1)
        .map(|i| {
            if i < r {
                poly((0..nv)
                    .flat_map(|j| [term(nv, &[j, j], ap.get(i, j)), term(nv, &[j], -2.0 * ap.get(i, j) * pp.get(i, j))])
                    .collect())
            } else {
                pl.current.component(i).clone()
            }
        })
        .collect();
    pl.claim("step 4: quadratic rows have no constant", &PolyMap::new(nv, step4)?)?;

    // STEP 5
    let select = PolyMap::new(k1, (0..nv).map(|l| Poly::var(k1, r + l, 1.0)).collect())?;
    let mut rows = Vec::with_capacity(k1);
    for i in 0..k1 {
        if i < r {
            let lifted = PolyMap::new(nv, vec![pl.current.component(i).clone()])?.compose(&select)?;
            rows.push(ShearRow::Shear { scale: 1.0, shift: lifted.component(0).scale(-1.0) });
        } else {
            rows.push(ShearRow::Keep);
        }
    }
    pl.target(ElementaryTransform::target_shear("H5 (shear)", rows)?)?;
    pl.snapshot("phi5");
    let zeros = (0..r).map(|i| pl.current.component(i).max_abs_coefficient()).fold(0.0, f64::max);
    pl.claim_value("step 5: quadratic rows vanish", zeros)?;

    let perm: Vec<usize> = (r..r + nv).chain(0..r).chain(r + nv..k1).collect();
    pl.target(ElementaryTransform::permutation(TransformKind::TargetAffine, "P5 (reorder)", &perm)?)?;
    pl.snapshot("phi6");
    let nf = inclusion_normal_form(n, k);
    pl.claim("inclusion normal form", &nf)?;

    let residual = pl.final_residual(&g, &nf)?;
    if residual > config.tolerance {
        return Err(ReductionError::Verification { what: "normal form".into(), residual, tolerance: config.tolerance });
    }
    let mut warnings = certificate.warnings.clone();
    if plan.leading_inverse_condition < tol::DET * tol::DET_WARN_FACTOR {
        warnings.push(format!("ConditioningWarning: leading minor has 1/cond {:.3e}", plan.leading_inverse_condition));
    }
    let trace = ReductionTrace {
        pivot: PivotRecord::from(&plan),
        lambda1: None,
        lambda2: None,
        alpha: Some(alpha),
        b: lp.b,
        c: lp.c,
        b_square: Some(rows_of(&bsq)),
        gamma: None,
        d_diag: None,
        d_affine: None,
        d_tilde: None,
        linear_self_check: lp.self_check,
        order: pl.order,
        snapshots: pl.snapshots,
        claims: pl.claims,
    };
    Ok(ReductionResult {
        kind: NormalFormKind::Inclusion,
        instance: ProblemInstance::new(a.clone(), p.clone())?,
        certificate,
        source_chain: pl.source,
        target_chain: pl.target,
        trace,
        residual,
        tolerance: config.tolerance,
        warnings,
    })
}
