//! Constructive reduction of `G(p, A)` to normal form.
//!
//! Two pipelines:
//! - full rank, `k = 2n`, `rank(A) = n + 1`: Whitney umbrella
//!   `(x0^2, x0 x1, ..., x0 xn, x1, ..., xn)`;
//! - otherwise (`rank(A) <= n`, or any rank when `k > 2n`): the inclusion
//!   `(x0, ..., xn, 0, ..., 0)`.
//!
//! Each pipeline applies explicit invertible transforms to `G` one at a time.
//! Every coefficient it needs (`b`, `c`, `d`, `d~`) is read from the composed map
//! and cross-checked against its closed form. The result carries both chains,
//! a per-step trace and the bad-set certificate.

mod certificate;
mod full_rank;
mod inclusion;
mod pipeline;
mod steps;

pub use certificate::{BadSetCertificate, CertificateBranch, DeterminantEntry, Verdict};
pub use full_rank::reduce_full_rank;
pub use inclusion::reduce_to_inclusion;
pub use pipeline::{compose_in_order, ClaimCheck, PivotRecord, ReductionTrace, Snapshot};
pub use steps::{
    full_rank_step_one, inclusion_step_one, linear_part, solve_alpha, solve_gamma, solve_lambda, GammaSolution,
    LinearPart,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gds::{CenterConfig, CoefficientMatrix, GdsError, PivotBranch, ProblemInstance};
use crate::polymap::{DiffeoChain, Monomial, Poly, PolyError, PolyMap};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error(transparent)]
    Gds(#[from] GdsError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("centers lie in the bad set: {}", offending_label(.0))]
    BadSet(Box<BadSetCertificate>),
    #[error("A_1 is singular")]
    SingularA1,
    #[error("rank mismatch: {0}")]
    RankMismatch(String),
    #[error("wrong branch: {0}")]
    WrongBranch(String),
    #[error("kernel for column {column} has dimension {dim}, expected 1")]
    DegenerateKernel { column: usize, dim: usize },
    #[error("degenerate reduction data: {0}")]
    Degenerate(String),
    #[error("self-check failed for {what}: deviation {deviation:.3e}")]
    SelfCheck { what: String, deviation: f64 },
    #[error("verification of `{what}` failed: residual {residual:.3e} > {tolerance:.1e}")]
    Verification { what: String, residual: f64, tolerance: f64 },
}

fn offending_label(c: &BadSetCertificate) -> String {
    c.offending()
        .map(|e| format!("{} = {:.3e} (scale {:.3e})", e.label, e.determinant, e.scale))
        .unwrap_or_else(|| "no offending determinant".into())
}

/// Thresholds used by the pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub eps_rank: f64,
    pub eps_det: f64,
    /// Relative tolerance for every claim and for the final normal form.
    pub tolerance: f64,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig { eps_rank: tol::RANK, eps_det: tol::DET, tolerance: tol::NORMAL_FORM }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalFormKind {
    WhitneyUmbrella,
    Inclusion,
}

impl NormalFormKind {
    pub fn normal_form(self, n: usize, k: usize) -> PolyMap {
        match self {
            NormalFormKind::WhitneyUmbrella => umbrella_normal_form(n),
            NormalFormKind::Inclusion => inclusion_normal_form(n, k),
        }
    }
}

/// `(x0^2, x0 x1, ..., x0 xn, x1, ..., xn)`.
pub fn umbrella_normal_form(n: usize) -> PolyMap {
    let nv = n + 1;
    let mut comps = Vec::with_capacity(2 * n + 1);
    for j in 0..=n {
        let mut e = vec![0; nv];
        e[0] += 1;
        e[j] += 1;
        comps.push(Poly::from_terms([(Monomial::new(e), 1.0)]));
    }
    for j in 1..=n {
        comps.push(Poly::var(nv, j, 1.0));
    }
    PolyMap::new(nv, comps).expect("quadratic")
}

/// `(x0, ..., xn, 0, ..., 0)` into `R^(k+1)`.
pub fn inclusion_normal_form(n: usize, k: usize) -> PolyMap {
    let nv = n + 1;
    let comps = (0..=k)
        .map(|i| if i <= n { Poly::var(nv, i, 1.0) } else { Poly::zero() })
        .collect();
    PolyMap::new(nv, comps).expect("linear")
}

/// Outcome of a successful reduction: `target ∘ G ∘ source` equals the normal form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionResult {
    pub kind: NormalFormKind,
    pub instance: ProblemInstance,
    pub certificate: BadSetCertificate,
    pub source_chain: DiffeoChain,
    pub target_chain: DiffeoChain,
    pub trace: ReductionTrace,
    /// Max coefficient deviation from the normal form over max |coefficient of G|.
    pub residual: f64,
    pub tolerance: f64,
    pub warnings: Vec<String>,
}

impl ReductionResult {
    pub fn normal_form(&self) -> PolyMap {
        self.kind.normal_form(self.instance.n, self.instance.k)
    }

    /// `target ∘ G ∘ source`, recomputed from the stored chains in application order.
    pub fn composed(&self) -> Result<PolyMap, PolyError> {
        compose_in_order(&self.instance.map(), &self.source_chain, &self.target_chain, &self.trace.order)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    WhitneyUmbrella(Box<ReductionResult>),
    Inclusion(Box<ReductionResult>),
    BadSet(Box<BadSetCertificate>),
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::WhitneyUmbrella(_) => "WhitneyUmbrella",
            Classification::Inclusion(_) => "Inclusion",
            Classification::BadSet(_) => "BadSet",
        }
    }

    pub fn result(&self) -> Option<&ReductionResult> {
        match self {
            Classification::WhitneyUmbrella(r) | Classification::Inclusion(r) => Some(r),
            Classification::BadSet(_) => None,
        }
    }

    pub fn certificate(&self) -> &BadSetCertificate {
        match self {
            Classification::WhitneyUmbrella(r) | Classification::Inclusion(r) => &r.certificate,
            Classification::BadSet(c) => c,
        }
    }
}

/// Which pipeline applies to `A`.
pub fn branch_for(a: &CoefficientMatrix, eps_rank: f64) -> Result<PivotBranch, ReductionError> {
    let (n, k) = (a.n(), a.k());
    if k < 2 * n {
        return Err(ReductionError::WrongBranch(format!("k = {k} < 2n = {}", 2 * n)));
    }
    let rank = a.rank(eps_rank);
    Ok(if k == 2 * n && rank == n + 1 { PivotBranch::FullRank } else { PivotBranch::Inclusion })
}

/// Dispatches on `rank(A)` and `k`; bad-set outcomes become [`Classification::BadSet`].
pub fn classify(p: &CenterConfig, a: &CoefficientMatrix, config: &ReductionConfig) -> Result<Classification, ReductionError> {
    let outcome = match branch_for(a, config.eps_rank)? {
        PivotBranch::FullRank => reduce_full_rank(p, a, config).map(|r| Classification::WhitneyUmbrella(Box::new(r))),
        PivotBranch::Inclusion => reduce_to_inclusion(p, a, config).map(|r| Classification::Inclusion(Box::new(r))),
    };
    match outcome {
        Err(ReductionError::BadSet(cert)) => Ok(Classification::BadSet(cert)),
        other => other,
    }
}

/// Bad-set certificate for `p` without running the rest of the pipeline.
pub fn badset_certificate(
    p: &CenterConfig,
    a: &CoefficientMatrix,
    branch: PivotBranch,
    config: &ReductionConfig,
) -> Result<BadSetCertificate, ReductionError> {
    match branch {
        PivotBranch::FullRank => full_rank::certificate_only(p, a, config),
        PivotBranch::Inclusion => inclusion::certificate_only(p, a, config),
    }
}
