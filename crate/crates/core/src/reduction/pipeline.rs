use serde::{Deserialize, Serialize};

use super::ReductionError;
use crate::gds::PivotPlan;
use crate::polymap::{ChainSide, DiffeoChain, ElementaryTransform, PolyError, PolyMap};

/// The map after a given step, with the chain lengths that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub label: String,
    pub target_len: usize,
    pub source_len: usize,
    pub map: PolyMap,
}

/// A structural claim about an intermediate map, checked against the readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimCheck {
    pub label: String,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotRecord {
    pub rank: usize,
    pub row_perm: Vec<usize>,
    pub col_perm: Vec<usize>,
    pub rows_permuted: bool,
    pub columns_permuted: bool,
    pub leading_inverse_condition: f64,
}

impl From<&PivotPlan> for PivotRecord {
    fn from(p: &PivotPlan) -> Self {
        PivotRecord {
            rank: p.rank,
            row_perm: p.row_perm.clone(),
            col_perm: p.col_perm.clone(),
            rows_permuted: p.rows_permuted(),
            columns_permuted: p.columns_permuted(),
            leading_inverse_condition: p.leading_inverse_condition,
        }
    }
}

/// Intermediate data of a reduction. Branch-specific fields are `None` when unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub pivot: PivotRecord,
    pub lambda1: Option<Vec<Vec<f64>>>,
    pub lambda2: Option<Vec<Vec<f64>>>,
    pub alpha: Option<Vec<Vec<f64>>>,
    /// Linear coefficients of `H_1 ∘ G'` (after pivoting).
    pub b: Vec<Vec<f64>>,
    /// Constant terms of `H_1 ∘ G'`.
    pub c: Vec<f64>,
    /// Square affine block of the inclusion reduction.
    pub b_square: Option<Vec<Vec<f64>>>,
    pub gamma: Option<Vec<Vec<f64>>>,
    pub d_diag: Option<Vec<f64>>,
    pub d_affine: Option<Vec<(f64, f64)>>,
    pub d_tilde: Option<Vec<f64>>,
    pub linear_self_check: f64,
    /// Side of each transform in the order it was applied.
    pub order: Vec<ChainSide>,
    pub snapshots: Vec<Snapshot>,
    pub claims: Vec<ClaimCheck>,
}

/// Applies transforms to `G` one at a time and records what happened.
pub(crate) struct Pipeline {
    pub current: PolyMap,
    pub source: DiffeoChain,
    pub target: DiffeoChain,
    pub order: Vec<ChainSide>,
    pub snapshots: Vec<Snapshot>,
    pub claims: Vec<ClaimCheck>,
    /// Max |coefficient| of the original map; residuals are relative to `1 + scale`.
    pub scale: f64,
    pub tolerance: f64,
}

impl Pipeline {
    pub fn new(g: &PolyMap, tolerance: f64) -> Self {
        Pipeline {
            current: g.clone(),
            source: DiffeoChain::new(ChainSide::Source, g.n_vars()),
            target: DiffeoChain::new(ChainSide::Target, g.n_components()),
            order: Vec::new(),
            snapshots: Vec::new(),
            claims: Vec::new(),
            scale: g.max_abs_coefficient(),
            tolerance,
        }
    }

    pub fn target(&mut self, t: ElementaryTransform) -> Result<(), ReductionError> {
        self.current = t.forward().compose(&self.current)?;
        self.target.push(t)?;
        self.order.push(ChainSide::Target);
        Ok(())
    }

    pub fn source(&mut self, t: ElementaryTransform) -> Result<(), ReductionError> {
        self.current = self.current.compose(t.forward())?;
        self.source.push(t)?;
        self.order.push(ChainSide::Source);
        Ok(())
    }

    pub fn snapshot(&mut self, label: &str) {
        self.snapshots.push(Snapshot {
            label: label.into(),
            target_len: self.target.len(),
            source_len: self.source.len(),
            map: self.current.clone(),
        });
    }

    pub fn relative(&self, deviation: f64) -> f64 {
        deviation / (1.0 + self.scale)
    }

    /// Records `current == expected`; fails the reduction if the claim does not hold.
    pub fn claim(&mut self, label: &str, expected: &PolyMap) -> Result<(), ReductionError> {
        let deviation = self.current.max_coefficient_difference(expected)?;
        self.claim_value(label, deviation)
    }

    /// Records a claim whose absolute deviation was computed by the caller.
    pub fn claim_value(&mut self, label: &str, deviation: f64) -> Result<(), ReductionError> {
        let residual = self.relative(deviation);
        let passed = residual <= self.tolerance;
        self.claims.push(ClaimCheck { label: label.into(), residual, passed });
        if passed {
            Ok(())
        } else {
            Err(ReductionError::Verification { what: label.into(), residual, tolerance: self.tolerance })
        }
    }

    /// `target ∘ G ∘ source` recomputed from scratch, compared with `normal_form`.
    pub fn final_residual(&self, g: &PolyMap, normal_form: &PolyMap) -> Result<f64, ReductionError> {
        let composed = compose_in_order(g, &self.source, &self.target, &self.order)?;
        Ok(self.relative(composed.max_coefficient_difference(normal_form)?))
    }
}

/// Applies both chains to `g`, interleaved as recorded in `order`.
///
/// Composition is associative, but not in floating point: near the bad set the
/// source translations are large, and applying all of them before the target
/// chain makes the target chain cancel much larger coefficients.
pub fn compose_in_order(
    g: &PolyMap,
    source: &DiffeoChain,
    target: &DiffeoChain,
    order: &[ChainSide],
) -> Result<PolyMap, PolyError> {
    let (mut si, mut ti) = (0, 0);
    let mut acc = g.clone();
    for side in order {
        acc = match side {
            ChainSide::Source => {
                si += 1;
                acc.compose(source.transforms()[si - 1].forward())?
            }
            ChainSide::Target => {
                ti += 1;
                target.transforms()[ti - 1].forward().compose(&acc)?
            }
        };
    }
    if si != source.len() || ti != target.len() {
        return Err(PolyError::BadStructure {
            label: "application order".into(),
            reason: format!("order covers {si}/{} source and {ti}/{} target transforms", source.len(), target.len()),
        });
    }
    Ok(acc)
}
