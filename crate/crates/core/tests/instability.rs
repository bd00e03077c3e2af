mod common;

use gdsmap::gds::{CenterConfig, CoefficientMatrix};
use gdsmap::instability::{
    affine_b_readout, build_instability_matrix, certify_witness, find_unstable_perturbation, psi_map, DestabilizeOutcome,
};
use gdsmap::linalg::Matrix;
use gdsmap::sampling::{random_full_rank, random_rows, signed_entry};
use gdsmap::verify::SampleSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Case {
    a1: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

fn case(rng: &mut ChaCha8Rng, n: usize) -> Case {
    let a = random_full_rank(rng, n, 2 * n);
    let a1 = a.rows()[..=n].to_vec();
    let q = random_rows(rng, n + 1, n + 1);
    let c = (0..n).map(|_| (0..=n).map(|_| signed_entry(rng)).collect()).collect();
    Case { a1, q, c }
}

fn scale(p: &CenterConfig, a1: &[Vec<f64>], c: &[Vec<f64>]) -> f64 {
    let pmax = p.points().iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    let amax = a1.iter().chain(c).flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    1.0 + pmax * pmax * amax * amax
}

fn max_abs(v: &[Vec<f64>]) -> f64 {
    v.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn psi_kills_the_affine_linear_part() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let n = 1 + trial % 2;
        let Case { a1, q, c } = case(&mut rng, n);
        let p = psi_map(&q, &c, &a1).unwrap();
        assert_eq!(&p.points()[..=n], &q[..]);
        let s = scale(&p, &a1, &c);
        let oracle = max_abs(&common::b_oracle(&p, &a1, &c));
        assert!(oracle <= 1e-10 * s, "trial {trial}: oracle b = {oracle:e}");
        let readout = max_abs(&affine_b_readout(&p, &a1, &c).unwrap());
        assert!(readout <= 1e-10 * s, "trial {trial}: readout b = {readout:e}");
    }
}

#[test]
fn psi_is_homogeneous_of_degree_zero_in_c() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..50 {
        let Case { a1, q, c } = case(&mut rng, 1 + trial % 2);
        let base = psi_map(&q, &c, &a1).unwrap();
        for t in [0.5, -0.5, 2.0, -2.0, 10.0, -10.0] {
            let ct: Vec<Vec<f64>> = c.iter().map(|r| r.iter().map(|x| t * x).collect()).collect();
            let pt = psi_map(&q, &ct, &a1).unwrap();
            for (u, v) in pt.points().iter().flatten().zip(base.points().iter().flatten()) {
                assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }
}

#[test]
fn c_is_in_the_kernel_at_psi() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..200 {
        let n = 1 + trial % 2;
        let Case { a1, q, c } = case(&mut rng, n);
        let p = psi_map(&q, &c, &a1).unwrap();
        let a = CoefficientMatrix::new(a1.iter().chain(&c).cloned().collect()).unwrap();
        let l = build_instability_matrix(&p, &a).unwrap();
        let flat: Vec<f64> = c.iter().flatten().copied().collect();
        let lc = &l * Matrix::from_column_slice(flat.len(), 1, &flat);
        let cn = flat.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(lc.amax() <= 1e-10 * l.norm() * cn, "trial {trial}");
    }
}

#[test]
fn matrix_agrees_with_oracle_and_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for trial in 0..40 {
        let n = 1 + trial % 2;
        let a = random_full_rank(&mut rng, n, 2 * n);
        let a1 = a.rows()[..=n].to_vec();
        let p = CenterConfig::new(random_rows(&mut rng, 2 * n + 1, n + 1)).unwrap();
        let l = build_instability_matrix(&p, &a).unwrap();
        let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> { (0..n).map(|_| (0..=n).map(|_| signed_entry(rng)).collect()).collect() };
        let (c1, c2) = (draw(&mut rng), draw(&mut rng));
        let (s, t): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mix: Vec<Vec<f64>> = c1.iter().zip(&c2).map(|(u, v)| u.iter().zip(v).map(|(x, y)| s * x + t * y).collect()).collect();
        let (b1, b2, bm) = (common::b_oracle(&p, &a1, &c1), common::b_oracle(&p, &a1, &c2), common::b_oracle(&p, &a1, &mix));
        let sc = scale(&p, &a1, &mix);
        for i in 0..n {
            for j in 0..=n {
                assert!((bm[i][j] - (s * b1[i][j] + t * b2[i][j])).abs() <= 1e-11 * sc);
                let lc: f64 = (0..n).flat_map(|r| (0..=n).map(move |m| (r, m))).map(|(r, m)| l[(i * (n + 1) + j, r * (n + 1) + m)] * mix[r][m]).sum();
                assert!((lc - bm[i][j]).abs() <= 1e-10 * sc, "trial {trial}");
            }
        }
    }
}

#[test]
fn affine_rows_are_constant_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let spec = SampleSpec::new(2.0, 500, 15);
    for trial in 0..20 {
        let n = 1 + trial % 2;
        let Case { a1, q, c } = case(&mut rng, n);
        let p = psi_map(&q, &c, &a1).unwrap();
        let s = scale(&p, &a1, &c);
        let f0 = common::affine_rows(&p, &a1, &c, &vec![0.0; n + 1]);
        for x in spec.points(n + 1) {
            let fx = common::affine_rows(&p, &a1, &c, &x);
            for (u, v) in fx.iter().zip(&f0) {
                assert!((u - v).abs() <= 1e-9 * s);
            }
        }
    }
}

#[test]
fn witnesses_from_psi_certify() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let spec = SampleSpec::new(2.0, 200, 16);
    let mut found = 0;
    for trial in 0..30 {
        let n = 1 + trial % 2;
        let Case { a1, q, c } = case(&mut rng, n);
        let p = psi_map(&q, &c, &a1).unwrap();
        let a2 = random_rows(&mut rng, n, n + 1);
        let a = CoefficientMatrix::new(a1.iter().chain(&a2).cloned().collect()).unwrap();
        let report = find_unstable_perturbation(&p, &a, &spec).unwrap();
        assert!(report.block_kernel_dims.iter().all(|&d| d >= 1));
        if let Some(w) = report.witness() {
            let cert = certify_witness(w, &spec);
            assert!(cert.passed, "trial {trial}: {:?}", cert.failures());
            found += 1;
        }
    }
    assert!(found >= 25, "only {found} witnesses");
}

#[test]
fn diagonal_instability_matrix_has_no_witness() {
    // q = 0 makes M vanish, so L_p = -2 diag(p_2) = diag(-0.8, 1.4)
    let a = CoefficientMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    let p = CenterConfig::new(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.4, -0.7]]).unwrap();
    let l = build_instability_matrix(&p, &a).unwrap();
    assert_eq!(l[(0, 1)], 0.0);
    assert_eq!(l[(1, 0)], 0.0);
    let report = find_unstable_perturbation(&p, &a, &SampleSpec::default()).unwrap();
    assert!(matches!(report.outcome, DestabilizeOutcome::None { .. }));
    assert!((report.smallest_singular_value - 0.8).abs() < 1e-12);
}
