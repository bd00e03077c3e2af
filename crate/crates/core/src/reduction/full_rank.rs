use super::certificate::full_rank_certificate;
use super::pipeline::{Pipeline, PivotRecord, ReductionTrace};
use super::steps::{full_rank_step_one, linear_part, row_vector_transform, solve_gamma, solve_lambda};
use super::{
    umbrella_normal_form, BadSetCertificate, NormalFormKind, ReductionConfig, ReductionError, ReductionResult,
};
use crate::gds::{build_gds, select_pivot, CenterConfig, CoefficientMatrix, PivotBranch, ProblemInstance};
use crate::linalg::{Matrix, Vector};
use crate::polymap::{ElementaryTransform, Monomial, Poly, PolyMap, ShearRow, TransformKind};
use crate::tol;

pub(crate) fn term(nv: usize, vars: &[usize], coef: f64) -> (Monomial, f64) {
    let mut e = vec![0; nv];
    for &v in vars {
        e[v] += 1;
    }
    (Monomial::new(e), coef)
}

pub(crate) fn poly(terms: Vec<(Monomial, f64)>) -> Poly {
    Poly::from_terms(terms)
}

fn check_shape(a: &CoefficientMatrix) -> Result<(), ReductionError> {
    if a.k() != 2 * a.n() {
        return Err(ReductionError::WrongBranch(format!(
            "the umbrella reduction needs k = 2n, got n = {}, k = {}",
            a.n(),
            a.k()
        )));
    }
    Ok(())
}

pub(crate) fn certificate_only(
    p: &CenterConfig,
    a: &CoefficientMatrix,
    config: &ReductionConfig,
) -> Result<BadSetCertificate, ReductionError> {
    check_shape(a)?;
    p.check_compatible(a)?;
    let plan = select_pivot(a, PivotBranch::FullRank, config.eps_rank)?;
    let a1 = a.permuted(&plan.row_perm, &plan.col_perm);
    let p1 = p.permuted(&plan.row_perm, &plan.col_perm);
    let (l1, l2) = solve_lambda(&a1, config.eps_rank)?;
    let (_, lp) = linear_part(&p1, &a1, &full_rank_step_one(&l1, &l2))?;
    Ok(full_rank_certificate(&lp.b, a.n(), config.eps_det))
}

/// Reduces `G(p, A)` with `k = 2n` and `rank(A) = n + 1` to the Whitney umbrella.
pub fn reduce_full_rank(
    p: &CenterConfig,
    a: &CoefficientMatrix,
    config: &ReductionConfig,
) -> Result<ReductionResult, ReductionError> {
    check_shape(a)?;
    let n = a.n();
    let (nv, k1) = (n + 1, 2 * n + 1);
    let g = build_gds(p, a)?;
    let mut pl = Pipeline::new(&g, config.tolerance);

    let plan = select_pivot(a, PivotBranch::FullRank, config.eps_rank)?;
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
    let (l1, l2) = solve_lambda(&ap, config.eps_rank)?;
    let m1 = full_rank_step_one(&l1, &l2);
    let (_, lp) = linear_part(&pp, &ap, &m1)?;
    pl.target(row_vector_transform("H1 (Lambda)", &m1)?)?;
    pl.snapshot("phi1");
    let step1: Vec<Poly> = (0..k1)
        .map(|i| {
            let mut t: Vec<_> = (0..nv).map(|l| term(nv, &[l], lp.b[i][l])).collect();
            t.push(term(nv, &[], lp.c[i]));
            if i <= n {
                t.push(term(nv, &[i, i], 1.0));
            }
            poly(t)
        })
        .collect();
    pl.claim("step 1: x_i^2 + linear, then linear rows", &PolyMap::new(nv, step1)?)?;

    let certificate = full_rank_certificate(&lp.b, n, config.eps_det);
    if !certificate.outside_bad_set {
        return Err(ReductionError::BadSet(Box::new(certificate)));
    }

    // STEP 2
    let neg_c: Vec<f64> = lp.c.iter().map(|c| -c).collect();
    pl.target(ElementaryTransform::translation(TransformKind::TargetAffine, "H2 (-c)", &neg_c)?)?;
    pl.snapshot("phi2");
    let constants = (0..k1).map(|i| pl.current.component(i).constant_term().abs()).fold(0.0, f64::max);
    pl.claim_value("step 2: constants vanish", constants)?;

    // STEP 3
    let gs = solve_gamma(&lp.b, config.eps_det)?;
    let mut m3 = Matrix::identity(k1, k1);
    for j in n + 1..k1 {
        m3[(j, j)] = 0.0;
    }
    for r in 0..n {
        for j in 0..k1 {
            m3[(n + 1 + r, j)] += gs.gamma[r][j];
        }
    }
    pl.target(row_vector_transform("H3 (Gamma)", &m3)?)?;
    pl.snapshot("phi3");
    let d_diag: Vec<f64> = (0..=n).map(|j| pl.current.coefficient(j, &unit(nv, j))).collect();
    let d_affine: Vec<(f64, f64)> = (1..=n)
        .map(|jp| {
            let j = n + jp;
            (pl.current.coefficient(j, &unit(nv, 0)), pl.current.coefficient(j, &unit(nv, jp)))
        })
        .collect();
    let mut deviation = 0.0_f64;
    for (got, want) in d_diag.iter().zip(&gs.d_diag) {
        deviation = deviation.max((got - want).abs());
    }
    for (got, want) in d_affine.iter().zip(&gs.d_affine) {
        deviation = deviation.max((got.0 - want.0).abs()).max((got.1 - want.1).abs());
    }
    if pl.relative(deviation) > tol::SELF_CHECK.max(config.tolerance) {
        return Err(ReductionError::SelfCheck { what: "d readout".into(), deviation: pl.relative(deviation) });
    }
    let step3: Vec<Poly> = (0..k1)
        .map(|j| {
            if j <= n {
                poly(vec![term(nv, &[j, j], 1.0), term(nv, &[j], d_diag[j])])
            } else {
                let (d0, dj) = d_affine[j - n - 1];
                poly(vec![term(nv, &[0], d0), term(nv, &[j - n], dj)])
            }
        })
        .collect();
    pl.claim("step 3: x_j^2 + d_jj x_j and d_j0 x0 + d_jj' x_j'", &PolyMap::new(nv, step3)?)?;

    // STEP 4
    let half: Vec<f64> = d_diag.iter().map(|d| -d / 2.0).collect();
    pl.source(ElementaryTransform::translation(TransformKind::SourceAffine, "h1 (x - d/2)", &half)?)?;
    pl.snapshot("phi4");
    let d_tilde: Vec<f64> = (0..k1).map(|j| pl.current.component(j).constant_term()).collect();
    let mut deviation = 0.0_f64;
    for j in 0..k1 {
        let want = if j <= n {
            -d_diag[j] * d_diag[j] / 4.0
        } else {
            let jp = j - n;
            let (d0, dj) = d_affine[jp - 1];
            -(d0 * d_diag[0] + dj * d_diag[jp]) / 2.0
        };
        deviation = deviation.max((want - d_tilde[j]).abs());
    }
    if pl.relative(deviation) > tol::SELF_CHECK.max(config.tolerance) {
        return Err(ReductionError::SelfCheck { what: "d~ readout".into(), deviation: pl.relative(deviation) });
    }
    let neg_dt: Vec<f64> = d_tilde.iter().map(|d| -d).collect();
    pl.target(ElementaryTransform::translation(TransformKind::TargetAffine, "H4 (-d~)", &neg_dt)?)?;
    pl.snapshot("phi5");
    let step4: Vec<Poly> = (0..k1)
        .map(|j| {
            if j <= n {
                poly(vec![term(nv, &[j, j], 1.0)])
            } else {
                let (d0, dj) = d_affine[j - n - 1];
                poly(vec![term(nv, &[0], d0), term(nv, &[j - n], dj)])
            }
        })
        .collect();
    pl.claim("step 4: x_j^2 and d_j0 x0 + d_jj' x_j'", &PolyMap::new(nv, step4)?)?;

    // STEP 5
    let mut lin = Matrix::zeros(nv, nv);
    lin[(0, 0)] = 1.0;
    for jp in 1..=n {
        let (d0, dj) = d_affine[jp - 1];
        lin[(jp, 0)] = -d0 / dj;
        lin[(jp, jp)] = 1.0 / dj;
    }
    pl.source(ElementaryTransform::affine(TransformKind::SourceAffine, "h2", &lin, &Vector::zeros(nv))?)?;
    pl.snapshot("phi6");
    let rows = (0..k1)
        .map(|j| {
            if j == 0 || j > n {
                return ShearRow::Keep;
            }
            let (d0, dj) = d_affine[j - 1];
            ShearRow::Shear {
                scale: -dj * dj / (2.0 * d0),
                shift: poly(vec![term(k1, &[0], d0 / 2.0), term(k1, &[n + j, n + j], 1.0 / (2.0 * d0))]),
            }
        })
        .collect();
    pl.target(ElementaryTransform::target_shear("H5 (shear)", rows)?)?;
    pl.snapshot("phi7");
    let nf = umbrella_normal_form(n);
    pl.claim("step 5: Whitney umbrella", &nf)?;

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
        lambda1: Some(rows_of(&l1)),
        lambda2: Some(rows_of(&l2)),
        alpha: None,
        b: lp.b,
        c: lp.c,
        b_square: None,
        gamma: Some(gs.gamma),
        d_diag: Some(d_diag),
        d_affine: Some(d_affine),
        d_tilde: Some(d_tilde),
        linear_self_check: lp.self_check,
        order: pl.order,
        snapshots: pl.snapshots,
        claims: pl.claims,
    };
    Ok(ReductionResult {
        kind: NormalFormKind::WhitneyUmbrella,
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

pub(crate) fn unit(nv: usize, v: usize) -> Vec<u32> {
    let mut e = vec![0; nv];
    e[v] = 1;
    e
}

pub(crate) fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
