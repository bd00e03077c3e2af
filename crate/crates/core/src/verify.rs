//! Verification oracles: sampled map equality, round trips, singular points
//! and flat images.
//!
//! Sample `i` of a [`SampleSpec`] comes from its own ChaCha stream `(seed, i)`,
//! so reports do not depend on how the work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, Matrix, Vector};
use crate::par::{self, Execution};
use crate::polymap::{ElementaryTransform, PolyError, PolyMap};
use crate::reduction::{NormalFormKind, ReductionResult};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub half_width: f64,
    pub count: usize,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { half_width: 2.0, count: 1000, seed: 0 }
    }
}

impl SampleSpec {
    pub fn new(half_width: f64, count: usize, seed: u64) -> Self {
        SampleSpec { half_width, count: count.max(1), seed }
    }

    /// Generator for sample `index`.
    pub fn rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }

    /// Sample `index`, uniform in `[-half_width, half_width]^dim`.
    pub fn point(&self, dim: usize, index: usize) -> Vec<f64> {
        let mut rng = self.rng(index);
        (0..dim).map(|_| rng.random_range(-self.half_width..=self.half_width)).collect()
    }

    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        (0..self.count).map(|i| self.point(dim, i)).collect()
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEqualityReport {
    /// `max_x |f(x) - g(x)| / (1 + |g(x)|)`, sup norms.
    pub max_relative: f64,
    /// Max coefficient difference of the canonical forms.
    pub coefficient_difference: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub equal: bool,
}

pub fn check_map_equality(f: &PolyMap, g: &PolyMap, spec: &SampleSpec) -> Result<MapEqualityReport, PolyError> {
    check_map_equality_with(f, g, spec, tol::MAP_EQUALITY, Execution::default())
}

pub fn check_map_equality_with(
    f: &PolyMap,
    g: &PolyMap,
    spec: &SampleSpec,
    tolerance: f64,
    exec: Execution,
) -> Result<MapEqualityReport, PolyError> {
    let coefficient_difference = f.max_coefficient_difference(g)?;
    let errs = par::map_indices(exec, spec.count, |i| {
        let x = spec.point(f.n_vars(), i);
        let fx = f.eval(&x).expect("shape checked");
        let gx = g.eval(&x).expect("shape checked");
        let d: Vec<f64> = fx.iter().zip(&gx).map(|(a, b)| a - b).collect();
        inf_norm(&d) / (1.0 + inf_norm(&gx))
    });
    let max_relative = errs.into_iter().fold(0.0, f64::max);
    Ok(MapEqualityReport {
        max_relative,
        coefficient_difference,
        samples: spec.count,
        tolerance,
        equal: max_relative <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub label: String,
    /// `max_x |inv(fwd(x)) - x| / (1 + |x|)`.
    pub max_error: f64,
    /// Coefficient residual of `inverse ∘ forward - id` stored with the transform.
    pub coefficient_residual: f64,
    /// Condition number of the linear part, for affine transforms.
    pub condition_number: Option<f64>,
    pub warning: Option<String>,
    pub passed: bool,
}

pub fn check_roundtrip(t: &ElementaryTransform, spec: &SampleSpec) -> RoundtripReport {
    let n = t.dim();
    let mut max_error = 0.0_f64;
    for i in 0..spec.count {
        let x = spec.point(n, i);
        let y = t.forward().eval(&x).expect("square transform");
        let back = t.inverse().eval(&y).expect("square transform");
        let d: Vec<f64> = back.iter().zip(&x).map(|(a, b)| a - b).collect();
        max_error = max_error.max(inf_norm(&d) / (1.0 + inf_norm(&x)));
    }
    let condition_number = t.linear_part().map(|m| linalg::condition_number(&m));
    let warning = condition_number
        .filter(|&c| c > tol::ROUNDTRIP_COND_WARN)
        .map(|c| format!("ConditioningWarning: {} has condition number {c:.3e}", t.label()));
    RoundtripReport {
        label: t.label().to_string(),
        max_error,
        coefficient_residual: t.roundtrip_residual(),
        condition_number,
        warning,
        passed: max_error <= tol::ROUNDTRIP_SAMPLE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    LineBisection,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub x: Vec<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub method: SearchMethod,
}

impl SingularPoint {
    pub fn relative(&self) -> f64 {
        if self.sigma_max > 0.0 {
            self.sigma_min / self.sigma_max
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSearchReport {
    pub point: Option<SingularPoint>,
    pub threshold: f64,
    pub lines_tried: usize,
    pub newton_starts: usize,
    /// Smallest `sigma_min / sigma_max` seen, as evidence when nothing was found.
    pub best_relative: f64,
}

impl SingularSearchReport {
    pub fn found(&self) -> bool {
        self.point.is_some()
    }
}

const LINE_BUDGET: usize = 50;
const LINE_GRID: usize = 64;
const NEWTON_STARTS: usize = 20;
const NEWTON_ITERS: usize = 60;

fn extreme_singular_values(j: &Matrix) -> (f64, f64) {
    let s = linalg::singular_values(j);
    let k = j.nrows().min(j.ncols());
    let smin = if s.len() < j.ncols() { 0.0 } else { s[k - 1] };
    (smin, s.first().copied().unwrap_or(0.0))
}

fn leading_det(f: &PolyMap, x: &[f64]) -> f64 {
    let n1 = f.n_vars();
    let j = f.jacobian(x).expect("dimension");
    linalg::determinant(&j.view((0, 0), (n1, n1)).clone_owned())
}

/// Searches for `x` with `sigma_min(Jf(x)) <= SINGULAR * sigma_max`.
///
/// Line bisection on the leading `(n+1)`-minor first; when no line gives a
/// singular point, a Newton search on `Jf(x) v = 0, |v| = 1` from seeded starts.
pub fn find_singular_point(f: &PolyMap, spec: &SampleSpec) -> SingularSearchReport {
    find_singular_point_with(f, spec, tol::SINGULAR)
}

pub fn find_singular_point_with(f: &PolyMap, spec: &SampleSpec, threshold: f64) -> SingularSearchReport {
    let n1 = f.n_vars();
    let mut best = f64::INFINITY;
    let accept = |x: &[f64], best: &mut f64| -> Option<(f64, f64)> {
        let (smin, smax) = extreme_singular_values(&f.jacobian(x).ok()?);
        let rel = if smax > 0.0 { smin / smax } else { 0.0 };
        *best = best.min(rel);
        (rel <= threshold).then_some((smin, smax))
    };
    let mut report = SingularSearchReport {
        point: None,
        threshold,
        lines_tried: 0,
        newton_starts: 0,
        best_relative: f64::INFINITY,
    };
    if f.n_components() < n1 {
        return report;
    }

    let reach = 2.0 * spec.half_width;
    for line in 0..LINE_BUDGET {
        report.lines_tried = line + 1;
        let mut rng = spec.rng(line);
        let x0: Vec<f64> = (0..n1).map(|_| rng.random_range(-spec.half_width..=spec.half_width)).collect();
        let mut v: Vec<f64> = (0..n1).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm = inf_norm(&v).max(f64::MIN_POSITIVE);
        v.iter_mut().for_each(|c| *c /= norm);
        let at = |t: f64| -> Vec<f64> { x0.iter().zip(&v).map(|(a, b)| a + t * b).collect() };
        let det = |t: f64| leading_det(f, &at(t));
        let mut prev_t = -reach;
        let mut prev = det(prev_t);
        for s in 1..=LINE_GRID {
            let t = -reach + 2.0 * reach * s as f64 / LINE_GRID as f64;
            let cur = det(t);
            if prev == 0.0 || prev.signum() != cur.signum() {
                let (mut lo, mut hi, mut flo) = (prev_t, t, prev);
                if prev != 0.0 {
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        let fm = det(mid);
                        if fm == 0.0 {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if fm.signum() == flo.signum() {
                            lo = mid;
                            flo = fm;
                        } else {
                            hi = mid;
                        }
                    }
                }
                let x = at(if prev == 0.0 { prev_t } else { 0.5 * (lo + hi) });
                if let Some((smin, smax)) = accept(&x, &mut best) {
                    report.best_relative = best;
                    report.point = Some(SingularPoint { x, sigma_min: smin, sigma_max: smax, method: SearchMethod::LineBisection });
                    return report;
                }
            }
            prev_t = t;
            prev = cur;
        }
    }

    let partials: Vec<PolyMap> = (0..n1).map(|l| f.partial(l)).collect();
    let second: Vec<Vec<PolyMap>> = partials.iter().map(|p| (0..n1).map(|s| p.partial(s)).collect()).collect();
    for start in 0..NEWTON_STARTS {
        report.newton_starts = start + 1;
        let mut x = spec.point(n1, LINE_BUDGET + start);
        let mut v = smallest_right_singular(&f.jacobian(&x).expect("dimension"));
        for _ in 0..NEWTON_ITERS {
            let j = f.jacobian(&x).expect("dimension");
            let m = j.nrows();
            let jv = &j * Vector::from_column_slice(&v);
            let mut residual = Vector::zeros(m + 1);
            residual.rows_mut(0, m).copy_from(&jv);
            residual[m] = 0.5 * (v.iter().map(|c| c * c).sum::<f64>() - 1.0);
            if residual.amax() < 1e-15 * (1.0 + j.amax()) {
                break;
            }
            let mut jac = Matrix::zeros(m + 1, 2 * n1);
            for s in 0..n1 {
                for l in 0..n1 {
                    let d = second[l][s].eval(&x).expect("dimension");
                    for i in 0..m {
                        jac[(i, s)] += v[l] * d[i];
                    }
                }
            }
            jac.view_mut((0, n1), (m, n1)).copy_from(&j);
            for l in 0..n1 {
                jac[(m, n1 + l)] = v[l];
            }
            let step = jac.svd(true, true).solve(&residual, 1e-14).unwrap_or_else(|_| Vector::zeros(2 * n1));
            for s in 0..n1 {
                x[s] -= step[s];
                v[s] -= step[n1 + s];
            }
            if !x.iter().chain(&v).all(|c| c.is_finite()) || inf_norm(&x) > 1e6 {
                break;
            }
        }
        if x.iter().all(|c| c.is_finite()) {
            if let Some((smin, smax)) = accept(&x, &mut best) {
                report.best_relative = best;
                report.point = Some(SingularPoint { x, sigma_min: smin, sigma_max: smax, method: SearchMethod::Newton });
                return report;
            }
        }
    }
    report.best_relative = best;
    report
}

fn smallest_right_singular(j: &Matrix) -> Vec<f64> {
    let n = j.ncols();
    let svd = j.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    if svd.singular_values.len() < n {
        // wide Jacobian: any kernel direction will do, take the last basis row
        let k = linalg::null_space(j, tol::RANK);
        if k.ncols() > 0 {
            return k.column(0).iter().copied().collect();
        }
    }
    vt.row(idx).iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatReport {
    pub last_m: usize,
    pub max_nonconstant: f64,
    pub scale: f64,
    pub flat: bool,
}

/// Whether the last `last_m` components of `f` are constant.
pub fn check_image_flat(f: &PolyMap, last_m: usize) -> FlatReport {
    let m = f.n_components();
    let max_nonconstant =
        (m.saturating_sub(last_m)..m).map(|i| f.component(i).max_abs_nonconstant()).fold(0.0, f64::max);
    let scale = f.max_abs_coefficient().max(1.0);
    FlatReport { last_m, max_nonconstant, scale, flat: max_nonconstant <= tol::FLAT * scale }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSampleReport {
    pub samples: usize,
    /// Smallest `sigma_min / sigma_max` over the samples.
    pub min_relative: f64,
    pub full_rank: bool,
}

/// Jacobian rank at every sample point.
pub fn check_full_rank(f: &PolyMap, spec: &SampleSpec, exec: Execution) -> RankSampleReport {
    let rel = par::map_indices(exec, spec.count, |i| {
        let (smin, smax) = extreme_singular_values(&f.jacobian(&spec.point(f.n_vars(), i)).expect("dimension"));
        if smax > 0.0 {
            smin / smax
        } else {
            0.0
        }
    });
    let min_relative = rel.into_iter().fold(f64::INFINITY, f64::min);
    RankSampleReport { samples: spec.count, min_relative, full_rank: min_relative > tol::SINGULAR }
}

/// Independent re-check of a stored [`ReductionResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionCheckReport {
    pub kind: NormalFormKind,
    /// Coefficient residual of the recomposed chain, relative to `1 + max|coef G|`.
    pub coefficient_residual: f64,
    /// Pointwise `H(G(h(x)))` against the normal form.
    pub sampled: MapEqualityReport,
    pub roundtrips: Vec<RoundtripReport>,
    pub singular: Option<SingularSearchReport>,
    pub rank: Option<RankSampleReport>,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn check_reduction(result: &ReductionResult, spec: &SampleSpec, exec: Execution) -> Result<ReductionCheckReport, PolyError> {
    let g = result.instance.map();
    let nf = result.normal_form();
    let composed = result.composed()?;
    let scale = 1.0 + g.max_abs_coefficient();
    let coefficient_residual = composed.max_coefficient_difference(&nf)? / scale;

    let errs = par::map_indices(exec, spec.count, |i| {
        let x = spec.point(g.n_vars(), i);
        // relative to the largest value seen along the way, which is what
        // rounding in the chain scales with
        let mut magnitude = inf_norm(&x);
        let mut u = x.clone();
        for t in result.source_chain.transforms().iter().rev() {
            u = t.forward().eval(&u).expect("chains match the instance");
            magnitude = magnitude.max(inf_norm(&u));
        }
        let mut y = g.eval(&u).expect("chains match the instance");
        magnitude = magnitude.max(inf_norm(&y));
        for t in result.target_chain.transforms() {
            y = t.forward().eval(&y).expect("chains match the instance");
            magnitude = magnitude.max(inf_norm(&y));
        }
        let want = nf.eval(&x).expect("dimension");
        let d: Vec<f64> = y.iter().zip(&want).map(|(a, b)| a - b).collect();
        inf_norm(&d) / (1.0 + magnitude)
    });
    let max_relative = errs.into_iter().fold(0.0, f64::max);
    let sampled = MapEqualityReport {
        max_relative,
        coefficient_difference: coefficient_residual,
        samples: spec.count,
        tolerance: result.tolerance,
        equal: max_relative <= result.tolerance,
    };

    let roundtrip_spec = SampleSpec::new(spec.half_width, spec.count.min(100), spec.seed);
    let roundtrips: Vec<RoundtripReport> = result
        .source_chain
        .transforms()
        .iter()
        .chain(result.target_chain.transforms())
        .map(|t| check_roundtrip(t, &roundtrip_spec))
        .collect();

    let (singular, rank) = match result.kind {
        NormalFormKind::WhitneyUmbrella => (Some(find_singular_point(&g, spec)), None),
        NormalFormKind::Inclusion => (None, Some(check_full_rank(&g, spec, exec))),
    };
    let dichotomy = singular.as_ref().is_none_or(|s| s.found()) && rank.as_ref().is_none_or(|r| r.full_rank);
    let passed = coefficient_residual <= result.tolerance
        && sampled.equal
        && roundtrips.iter().all(|r| r.passed)
        && dichotomy;
    Ok(ReductionCheckReport {
        kind: result.kind,
        coefficient_residual,
        sampled,
        roundtrips,
        singular,
        rank,
        tolerance: result.tolerance,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymap::{Monomial, Poly, ShearRow, TransformKind};
    use crate::reduction::{inclusion_normal_form, umbrella_normal_form};

    #[test]
    fn samples_are_deterministic_and_in_the_box() {
        let s = SampleSpec::default();
        assert_eq!(s.point(3, 17), s.point(3, 17));
        assert_ne!(s.point(3, 17), s.point(3, 18));
        assert!(s.points(2).iter().flatten().all(|x| x.abs() <= 2.0));
    }

    #[test]
    fn equality_reflexive_and_detects_perturbation() {
        let u = umbrella_normal_form(2);
        let spec = SampleSpec::default();
        assert_eq!(check_map_equality(&u, &u, &spec).unwrap().max_relative, 0.0);
        let mut comps = u.components().to_vec();
        comps[0] = comps[0].add(&Poly::from_terms([(Monomial::new(vec![2, 0, 0]), 1e-3)]));
        let v = PolyMap::new(3, comps).unwrap();
        let r = check_map_equality(&v, &u, &spec).unwrap();
        assert!(r.max_relative >= 1e-4 && !r.equal, "{}", r.max_relative);
    }

    #[test]
    fn roundtrips() {
        let spec = SampleSpec::new(2.0, 200, 0);
        let t = ElementaryTransform::translation(TransformKind::TargetAffine, "v", &[1.0, -2.0, 3.0]).unwrap();
        assert!(check_roundtrip(&t, &spec).max_error == 0.0);
        let shear = ElementaryTransform::target_shear(
            "H5",
            vec![
                ShearRow::Keep,
                ShearRow::Shear {
                    scale: -0.5,
                    shift: Poly::from_terms([(Monomial::new(vec![1, 0, 0]), 0.5), (Monomial::new(vec![0, 0, 2]), 0.5)]),
                },
                ShearRow::Keep,
            ],
        )
        .unwrap();
        assert!(check_roundtrip(&shear, &spec).max_error <= 1e-12);
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-8]);
        let ill = ElementaryTransform::affine(TransformKind::SourceAffine, "ill", &m, &Vector::zeros(2)).unwrap();
        assert!(check_roundtrip(&ill, &spec).warning.is_some());
    }

    #[test]
    fn singular_points() {
        let spec = SampleSpec::default();
        for n in 1..=3 {
            let r = find_singular_point(&umbrella_normal_form(n), &spec);
            let p = r.point.expect("umbrella is singular at the origin");
            assert!(p.relative() <= r.threshold);
            assert!(p.x[0].abs() < 1e-6);
        }
        assert!(!find_singular_point(&inclusion_normal_form(2, 4), &spec).found());
    }

    #[test]
    fn singular_point_by_bisection() {
        // components x0^2 + x1^2, x0^2 + 2 x1^2: leading minor 4 x0 x1
        let a = crate::gds::CoefficientMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 1.0]]).unwrap();
        let g = crate::gds::build_gds(&crate::gds::CenterConfig::zeros(1, 2), &a).unwrap();
        let r = find_singular_point(&g, &SampleSpec::default());
        let p = r.point.unwrap();
        assert_eq!(p.method, SearchMethod::LineBisection);
        assert!(p.x[0].abs() < 1e-6 || p.x[1].abs() < 1e-6);
    }

    #[test]
    fn flat_images() {
        assert!(check_image_flat(&inclusion_normal_form(2, 4), 2).flat);
        let r = check_image_flat(&umbrella_normal_form(2), 2);
        assert!(!r.flat);
        assert_eq!(r.max_nonconstant, 1.0);
    }
}
