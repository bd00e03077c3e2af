//! Oracles that do not go through `PolyMap::compose`.
#![allow(dead_code)]

use std::collections::BTreeMap;

use gdsmap::gds::{CenterConfig, CoefficientMatrix};
use gdsmap::reduction::ReductionResult;

/// `sum_j a_ij (x_j - p_ij)^2`, straight from the definition.
pub fn gds_direct(p: &CenterConfig, a: &CoefficientMatrix, x: &[f64]) -> Vec<f64> {
    (0..=a.k())
        .map(|i| (0..=a.n()).map(|j| a.get(i, j) * (x[j] - p.get(i, j)).powi(2)).sum())
        .collect()
}

/// `H(G(h(x)))` evaluated one transform at a time.
pub fn chain_pointwise(r: &ReductionResult, x: &[f64]) -> Vec<f64> {
    let mut u = x.to_vec();
    for t in r.source_chain.transforms().iter().rev() {
        u = t.forward().eval(&u).unwrap();
    }
    let mut y = gds_direct(&r.instance.p, &r.instance.matrix, &u);
    for t in r.target_chain.transforms() {
        y = t.forward().eval(&y).unwrap();
    }
    y
}

/// Coefficients of a map known to be a polynomial of degree at most 2, recovered
/// from unit-step differences (exact for quadratics up to rounding).
pub fn quadratic_coefficients(f: &dyn Fn(&[f64]) -> Vec<f64>, nv: usize) -> Vec<BTreeMap<Vec<u32>, f64>> {
    let at = |pairs: &[(usize, f64)]| {
        let mut x = vec![0.0; nv];
        for &(i, v) in pairs {
            x[i] += v;
        }
        f(&x)
    };
    let f0 = at(&[]);
    let m = f0.len();
    let mut out = vec![BTreeMap::new(); m];
    let mut put = |exp: Vec<u32>, vals: Vec<f64>| {
        for (c, v) in vals.into_iter().enumerate() {
            out[c].insert(exp.clone(), v);
        }
    };
    put(vec![0; nv], f0.clone());
    let plus: Vec<Vec<f64>> = (0..nv).map(|i| at(&[(i, 1.0)])).collect();
    for i in 0..nv {
        let minus = at(&[(i, -1.0)]);
        let mut e = vec![0; nv];
        e[i] = 1;
        put(e.clone(), (0..m).map(|c| (plus[i][c] - minus[c]) / 2.0).collect());
        e[i] = 2;
        put(e, (0..m).map(|c| (plus[i][c] + minus[c] - 2.0 * f0[c]) / 2.0).collect());
        for j in i + 1..nv {
            let both = at(&[(i, 1.0), (j, 1.0)]);
            let mut e = vec![0; nv];
            e[i] = 1;
            e[j] = 1;
            put(e, (0..m).map(|c| both[c] - plus[i][c] - plus[j][c] + f0[c]).collect());
        }
    }
    out
}

/// Evaluates a dense coefficient table.
pub fn eval_table(table: &[BTreeMap<Vec<u32>, f64>], x: &[f64]) -> Vec<f64> {
    table
        .iter()
        .map(|comp| {
            comp.iter()
                .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product::<f64>())
                .sum()
        })
        .collect()
}

/// Dense coefficient table of the umbrella normal form.
pub fn umbrella_table(n: usize) -> Vec<BTreeMap<Vec<u32>, f64>> {
    let nv = n + 1;
    let mono = |vars: &[usize]| {
        let mut e = vec![0u32; nv];
        for &v in vars {
            e[v] += 1;
        }
        e
    };
    let mut t = Vec::new();
    for j in 0..=n {
        t.push(BTreeMap::from([(mono(&[0, j]), 1.0)]));
    }
    for j in 1..=n {
        t.push(BTreeMap::from([(mono(&[j]), 1.0)]));
    }
    t
}

pub fn inclusion_table(n: usize, k: usize) -> Vec<BTreeMap<Vec<u32>, f64>> {
    (0..=k)
        .map(|i| {
            let mut m = BTreeMap::new();
            if i <= n {
                let mut e = vec![0u32; n + 1];
                e[i] = 1;
                m.insert(e, 1.0);
            }
            m
        })
        .collect()
}

/// Max |coefficient difference| between two tables, missing entries read as 0.
pub fn table_difference(a: &[BTreeMap<Vec<u32>, f64>], b: &[BTreeMap<Vec<u32>, f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut worst = 0.0_f64;
    for (x, y) in a.iter().zip(b) {
        for (e, v) in x {
            worst = worst.max((v - y.get(e).copied().unwrap_or(0.0)).abs());
        }
        for (e, v) in y {
            worst = worst.max((v - x.get(e).copied().unwrap_or(0.0)).abs());
        }
    }
    worst
}

pub type Table = Vec<BTreeMap<Vec<u32>, f64>>;

pub fn table_of(m: &gdsmap::PolyMap) -> Table {
    m.components()
        .iter()
        .map(|c| c.terms().map(|(e, v)| (e.exponents().to_vec(), v)).collect())
        .collect()
}

fn mul(a: &BTreeMap<Vec<u32>, f64>, b: &BTreeMap<Vec<u32>, f64>) -> BTreeMap<Vec<u32>, f64> {
    let mut out = BTreeMap::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            *out.entry(e).or_insert(0.0) += ca * cb;
        }
    }
    out
}

fn abs_table(t: &BTreeMap<Vec<u32>, f64>) -> BTreeMap<Vec<u32>, f64> {
    t.iter().map(|(e, c)| (e.clone(), c.abs())).collect()
}

/// `outer ∘ inner` by multiplying out every monomial. Also returns the same
/// expansion with every coefficient replaced by its absolute value, which bounds
/// the rounding error of the cancellation.
pub fn compose_tables(outer: &Table, inner: &Table, nv: usize) -> Table {
    compose_tables_with_bound(outer, inner, None, nv).0
}

pub fn compose_tables_with_bound(
    outer: &Table,
    inner: &Table,
    bounds: Option<(&Table, &Table)>,
    nv: usize,
) -> (Table, Table) {
    let (ob, ib): (Table, Table) = match bounds {
        Some((o, i)) => (o.clone(), i.clone()),
        None => (outer.iter().map(abs_table).collect(), inner.iter().map(abs_table).collect()),
    };
    let expand = |outer: &Table, inner: &Table| -> Table {
        outer
            .iter()
            .map(|comp| {
                let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
                for (e, c) in comp {
                    let mut term = BTreeMap::from([(vec![0u32; nv], *c)]);
                    for (v, &k) in e.iter().enumerate() {
                        for _ in 0..k {
                            term = mul(&term, &inner[v]);
                        }
                    }
                    for (m, x) in term {
                        *acc.entry(m).or_insert(0.0) += x;
                    }
                }
                acc
            })
            .collect()
    };
    (expand(outer, inner), expand(&ob, &ib))
}

fn table_max(t: &Table) -> f64 {
    t.iter().flat_map(|c| c.values()).fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Result of the brute-force re-expansion.
#[derive(Debug, Clone, Copy)]
pub struct OracleCheck {
    /// Max coefficient difference to the normal form, relative to `1 + max|coef G|`.
    pub residual: f64,
    /// Worst-case rounding error of the expansion on the same scale.
    pub rounding: f64,
}

impl OracleCheck {
    pub fn ok(&self, tol: f64) -> bool {
        self.residual <= tol + self.rounding
    }
}

/// Oracle residual of a reduction: re-expands the chains around `G` by brute
/// force, in the recorded order, and compares with the normal form. Relative to
/// `1 + max|coef G|`.
pub fn oracle_residual(r: &ReductionResult) -> f64 {
    oracle_check(r).residual
}

pub fn oracle_check(r: &ReductionResult) -> OracleCheck {
    let n = r.instance.n;
    let nv = n + 1;
    let (p, a) = (&r.instance.p, &r.instance.matrix);
    // G from its definition
    let mut table: Table = (0..=a.k())
        .map(|i| {
            let mut m = BTreeMap::new();
            for j in 0..nv {
                let mut e = vec![0u32; nv];
                e[j] = 2;
                *m.entry(e.clone()).or_insert(0.0) += a.get(i, j);
                e[j] = 1;
                *m.entry(e).or_insert(0.0) += -2.0 * a.get(i, j) * p.get(i, j);
                *m.entry(vec![0u32; nv]).or_insert(0.0) += a.get(i, j) * p.get(i, j) * p.get(i, j);
            }
            m
        })
        .collect();
    let mut bound: Table = table.iter().map(abs_table).collect();
    let (mut si, mut ti) = (0, 0);
    for side in &r.trace.order {
        let (t, b) = match side {
            gdsmap::polymap::ChainSide::Source => {
                let f = table_of(r.source_chain.transforms()[si].forward());
                let fb: Table = f.iter().map(abs_table).collect();
                si += 1;
                compose_tables_with_bound(&table, &f, Some((&bound, &fb)), nv)
            }
            gdsmap::polymap::ChainSide::Target => {
                let f = table_of(r.target_chain.transforms()[ti].forward());
                let fb: Table = f.iter().map(abs_table).collect();
                ti += 1;
                compose_tables_with_bound(&f, &table, Some((&fb, &bound)), nv)
            }
        };
        table = t;
        bound = b;
    }
    assert_eq!((si, ti), (r.source_chain.len(), r.target_chain.len()));
    let want = match r.kind {
        gdsmap::NormalFormKind::WhitneyUmbrella => umbrella_table(n),
        gdsmap::NormalFormKind::Inclusion => inclusion_table(n, r.instance.k),
    };
    let scale = 1.0 + r.instance.map().max_abs_coefficient();
    let steps = r.trace.order.len() as f64;
    OracleCheck {
        residual: table_difference(&table, &want) / scale,
        rounding: 8.0 * steps * f64::EPSILON * table_max(&bound) / scale,
    }
}

/// Pointwise check through the chains, relative to the largest intermediate value.
pub fn pointwise_residual(r: &ReductionResult, x: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut scale = inf(x);
    let mut u = x.to_vec();
    for t in r.source_chain.transforms().iter().rev() {
        u = t.forward().eval(&u).unwrap();
        scale = scale.max(inf(&u));
    }
    let mut y = gds_direct(&r.instance.p, &r.instance.matrix, &u);
    scale = scale.max(inf(&y));
    for t in r.target_chain.transforms() {
        y = t.forward().eval(&y).unwrap();
        scale = scale.max(inf(&y));
    }
    let want = r.normal_form().eval(x).unwrap();
    let d: Vec<f64> = y.iter().zip(&want).map(|(a, b)| a - b).collect();
    inf(&d) / (1.0 + scale)
}

/// Affine rows of `G` after cancelling their quadratic part against the leading
/// rows, evaluated straight from the definition of `G`.
pub fn affine_rows(p: &CenterConfig, a1: &[Vec<f64>], c: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let n1 = a1.len();
    let rows: Vec<Vec<f64>> = a1.iter().chain(c).cloned().collect();
    let a = CoefficientMatrix::new(rows).unwrap();
    let g = gds_direct(p, &a, x);
    let a1t = nalgebra::DMatrix::from_fn(n1, n1, |i, j| a1[j][i]);
    let lu = a1t.lu();
    c.iter()
        .enumerate()
        .map(|(i, ci)| {
            // lambda^T A_1 = c_i
            let lambda = lu.solve(&nalgebra::DVector::from_column_slice(ci)).unwrap();
            g[n1 + i] - (0..n1).map(|k| lambda[k] * g[k]).sum::<f64>()
        })
        .collect()
}

/// Linear coefficients of the affine rows by unit steps (exact for affine maps).
pub fn b_oracle(p: &CenterConfig, a1: &[Vec<f64>], c: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n1 = a1.len();
    let f0 = affine_rows(p, a1, c, &vec![0.0; n1]);
    let steps: Vec<Vec<f64>> = (0..n1)
        .map(|j| {
            let mut e = vec![0.0; n1];
            e[j] = 1.0;
            affine_rows(p, a1, c, &e)
        })
        .collect();
    (0..c.len()).map(|i| (0..n1).map(|j| steps[j][i] - f0[i]).collect()).collect()
}
