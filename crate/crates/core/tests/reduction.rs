mod common;

use gdsmap::polymap::ChainSide;
use gdsmap::gds::{build_gds, CenterConfig, CoefficientMatrix, PivotBranch};
use gdsmap::reduction::{
    badset_certificate, classify, reduce_full_rank, reduce_to_inclusion, solve_lambda, Classification, NormalFormKind,
    ReductionConfig, ReductionError,
};
use gdsmap::sampling::{full_rank_badset, inclusion_badset, random_centers, random_full_rank, random_rank_deficient};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg() -> ReductionConfig {
    ReductionConfig::default()
}

#[test]
fn lambda_example_multiplies_back() {
    let a = CoefficientMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 1.0]]).unwrap();
    let (l1, l2) = solve_lambda(&a, 1e-10).unwrap();
    let a1t = a.a1().transpose();
    let id = &a1t * &l1;
    assert!((id[(0, 0)] - 1.0).abs() < 1e-14 && id[(0, 1)].abs() < 1e-14 && (id[(1, 1)] - 1.0).abs() < 1e-14);
    assert!((l1[(0, 0)] - 2.0).abs() < 1e-14 && (l1[(0, 1)] + 1.0).abs() < 1e-14 && (l1[(1, 1)] - 1.0).abs() < 1e-14);
    assert!((l2[(0, 0)] + 1.0).abs() < 1e-14 && l2[(1, 0)].abs() < 1e-14);
}

#[test]
fn umbrella_example_against_expansion_oracle() {
    let a = CoefficientMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut done = 0;
    while done < 20 {
        let p = random_centers(&mut rng, 1, 2);
        match reduce_full_rank(&p, &a, &cfg()) {
            Ok(r) => {
                assert!(r.residual <= 1e-9);
                let o = common::oracle_residual(&r);
                assert!(o <= 1e-9, "oracle residual {o}");
                done += 1;
            }
            Err(ReductionError::BadSet(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn gds_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_full_rank(&mut rng, 2, 4);
    let p = random_centers(&mut rng, 2, 4);
    let g = build_gds(&p, &a).unwrap();
    for x in [[0.1, 0.2, 0.3], [-1.0, 2.0, 0.5]] {
        let got = g.eval(&x).unwrap();
        let want = common::gds_direct(&p, &a, &x);
        for (u, v) in got.iter().zip(&want) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}

#[test]
fn trace_snapshots_and_claims() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=3 {
        let a = random_full_rank(&mut rng, n, 2 * n);
        let p = random_centers(&mut rng, n, 2 * n);
        let r = reduce_full_rank(&p, &a, &cfg()).unwrap();
        let g = build_gds(&p, &a).unwrap();
        let scale = 1.0 + g.max_abs_coefficient();
        for s in &r.trace.snapshots {
            let (mut si, mut ti) = (0, 0);
            let mut m = g.clone();
            for side in &r.trace.order[..s.source_len + s.target_len] {
                if *side == ChainSide::Source {
                    m = m.compose(r.source_chain.transforms()[si].forward()).unwrap();
                    si += 1;
                } else {
                    m = r.target_chain.transforms()[ti].forward().compose(&m).unwrap();
                    ti += 1;
                }
            }
            assert!(m.max_coefficient_difference(&s.map).unwrap() / scale <= 1e-10, "{}", s.label);
        }
        assert!(r.trace.claims.iter().all(|c| c.passed));
        let d = r.trace.d_affine.as_ref().unwrap();
        assert!(d.iter().all(|(d0, dj)| *d0 > 0.0 && dj.abs() > 0.0));
        // step 1 forces unit squares on the quadratic rows
        let phi1 = &r.trace.snapshots.iter().find(|s| s.label == "phi1").unwrap().map;
        for i in 0..=n {
            let mut e = vec![0; n + 1];
            e[i] = 2;
            assert!((phi1.coefficient(i, &e) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn all_transforms_invertible() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_full_rank(&mut rng, 2, 4);
    let p = random_centers(&mut rng, 2, 4);
    let r = reduce_full_rank(&p, &a, &cfg()).unwrap();
    for t in r.source_chain.transforms().iter().chain(r.target_chain.transforms()) {
        let round = t.inverse().compose(t.forward()).unwrap();
        let id = gdsmap::PolyMap::identity(t.dim());
        assert!(round.max_coefficient_difference(&id).unwrap() < 1e-10, "{}", t.label());
    }
}

#[test]
fn proposition_matrices_reduce_to_inclusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..=3 {
        for a in [CoefficientMatrix::distance_squared(n, 2 * n), CoefficientMatrix::lorentzian(n, 2 * n)] {
            let p = random_centers(&mut rng, n, 2 * n);
            let c = classify(&p, &a, &cfg()).unwrap();
            assert_eq!(c.label(), "Inclusion");
            assert!(common::oracle_residual(c.result().unwrap()) <= 1e-9);
        }
    }
}

#[test]
fn deficient_and_wide_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in 1..=2 {
        for k in [2 * n, 2 * n + 1, 2 * n + 2] {
            for rank in 1..=(n + 1) {
                if k == 2 * n && rank == n + 1 {
                    continue;
                }
                let a = if rank == n + 1 { random_full_rank(&mut rng, n, k) } else { random_rank_deficient(&mut rng, n, k, rank) };
                let p = random_centers(&mut rng, n, k);
                let r = reduce_to_inclusion(&p, &a, &cfg()).unwrap();
                assert_eq!(r.kind, NormalFormKind::Inclusion);
                assert!(common::oracle_residual(&r) <= 1e-9, "n={n} k={k} rank={rank}");
                assert!(r.trace.alpha.is_some() && r.trace.b_square.is_some());
            }
        }
    }
}

#[test]
fn full_rank_at_k_equal_2n_is_not_inclusion() {
    let a = CoefficientMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    let p = CenterConfig::zeros(1, 2);
    assert!(matches!(reduce_to_inclusion(&p, &a, &cfg()), Err(ReductionError::WrongBranch(_))));
}

#[test]
fn constructed_bad_points_are_rejected_with_label() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 1..=3 {
        let a = random_full_rank(&mut rng, n, 2 * n);
        let p = random_centers(&mut rng, n, 2 * n);
        for j in 0..=n {
            let bad = full_rank_badset(&p, &a, j, &cfg()).unwrap();
            match classify(&bad, &a, &cfg()).unwrap() {
                Classification::BadSet(c) => assert_eq!(c.offending().unwrap().label, format!("det B_{j}")),
                other => panic!("expected bad set, got {}", other.label()),
            }
        }
        let a = random_rank_deficient(&mut rng, n, 2 * n, n);
        let bad = inclusion_badset(&p, &a, &cfg()).unwrap();
        let c = badset_certificate(&bad, &a, PivotBranch::Inclusion, &cfg()).unwrap();
        assert_eq!(c.offending().unwrap().label, "det B");
    }
}

#[test]
fn one_by_one_certificate_from_centers() {
    // n = 1 and A_1 = [[1,1],[1,2]], A_2 = [1,1]: Lambda_2 = (-1, 0), so the affine row of
    // H_1 ∘ G is G_2 - G_0 with b = (-2 (p_20 - p_00), -2 (p_21 - p_01)).
    let a = CoefficientMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 1.0]]).unwrap();
    let p = CenterConfig::new(vec![vec![0.0, 0.0], vec![0.3, 0.1], vec![-2.5, -3.5]]).unwrap();
    let c = badset_certificate(&p, &a, PivotBranch::FullRank, &cfg()).unwrap();
    assert!((c.entries[0].determinant - 7.0).abs() < 1e-12);
    assert!((c.entries[1].determinant - 5.0).abs() < 1e-12);
    let bad = CenterConfig::new(vec![vec![0.0, 0.0], vec![0.3, 0.1], vec![-2.5, 0.0]]).unwrap();
    let c = badset_certificate(&bad, &a, PivotBranch::FullRank, &cfg()).unwrap();
    assert_eq!(c.offending().unwrap().label, "det B_0");
    assert_eq!(c.entries[0].determinant, 0.0);
}

#[test]
fn result_json_round_trip_is_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = random_full_rank(&mut rng, 2, 4);
    let p = random_centers(&mut rng, 2, 4);
    let r = reduce_full_rank(&p, &a, &cfg()).unwrap();
    let s = serde_json::to_string(&r).unwrap();
    let back: gdsmap::ReductionResult = serde_json::from_str(&s).unwrap();
    assert_eq!(back, r);
    assert_eq!(serde_json::to_string(&back).unwrap(), s);
}

#[test]
fn row_pivot_is_recorded() {
    // A_1 = [[1,1],[1,1]] is singular; the row pivot brings row 2 up.
    let a = CoefficientMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
    let p = CenterConfig::new(vec![vec![0.2, -0.1], vec![0.9, 0.4], vec![-0.3, 0.8]]).unwrap();
    let r = reduce_full_rank(&p, &a, &cfg()).unwrap();
    assert_eq!(r.trace.pivot.row_perm, vec![0, 2, 1]);
    assert!(common::oracle_residual(&r) <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduction_is_sound(seed in any::<u64>(), n in 1usize..=3, deficient in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = if deficient {
            let rank = 1 + (seed as usize) % n;
            random_rank_deficient(&mut rng, n, 2 * n, rank)
        } else {
            random_full_rank(&mut rng, n, 2 * n)
        };
        let p = random_centers(&mut rng, n, 2 * n);
        match classify(&p, &a, &cfg()) {
            Ok(Classification::BadSet(_)) => {}
            Ok(c) => {
                let r = c.result().unwrap();
                prop_assert_eq!(r.kind == NormalFormKind::Inclusion, deficient);
                prop_assert!(r.residual <= 1e-9);
                let o = common::oracle_check(r);
                prop_assert!(o.ok(1e-9), "{:?}", o);
                for x in [[0.3, -1.2, 0.8, 1.9], [-1.5, 0.4, -0.2, 0.9]] {
                    prop_assert!(common::pointwise_residual(r, &x[..=n]) <= 1e-9);
                }
            }
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}
