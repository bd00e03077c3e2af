use serde::{Deserialize, Serialize};

use crate::linalg::{self, Matrix};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateBranch {
    /// Determinants `det B_0 .. det B_n` of the umbrella reduction.
    FullRank,
    /// Single determinant `det B` of the inclusion reduction.
    Inclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    OutsideBadSet,
    InsideBadSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantEntry {
    pub label: String,
    pub determinant: f64,
    /// Hadamard bound (product of row norms) of the matrix.
    pub scale: f64,
    pub verdict: Verdict,
    /// Passing, but within [`tol::DET_WARN_FACTOR`] of the threshold.
    pub conditioning_warning: bool,
}

impl DeterminantEntry {
    pub fn from_matrix(label: impl Into<String>, m: &Matrix, eps_det: f64) -> Self {
        let determinant = linalg::determinant(m);
        let scale = linalg::hadamard_bound(m);
        let threshold = eps_det * scale;
        let outside = determinant.abs() > threshold;
        DeterminantEntry {
            label: label.into(),
            determinant,
            scale,
            verdict: if outside { Verdict::OutsideBadSet } else { Verdict::InsideBadSet },
            conditioning_warning: outside && determinant.abs() <= tol::DET_WARN_FACTOR * threshold,
        }
    }

    pub fn passes(&self) -> bool {
        self.verdict == Verdict::OutsideBadSet
    }

    /// `|det| / scale`; 0 when the scale vanishes.
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.determinant.abs() / self.scale
        } else {
            0.0
        }
    }
}

/// Determinant evidence for or against bad-set membership of `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadSetCertificate {
    pub branch: CertificateBranch,
    pub eps_det: f64,
    pub entries: Vec<DeterminantEntry>,
    pub outside_bad_set: bool,
    pub warnings: Vec<String>,
}

impl BadSetCertificate {
    pub fn new(branch: CertificateBranch, eps_det: f64, entries: Vec<DeterminantEntry>) -> Self {
        let outside_bad_set = entries.iter().all(DeterminantEntry::passes);
        let warnings = entries
            .iter()
            .filter(|e| e.conditioning_warning)
            .map(|e| format!("ConditioningWarning: {} = {:.3e} is within a factor {} of the threshold", e.label, e.determinant, tol::DET_WARN_FACTOR))
            .collect();
        BadSetCertificate { branch, eps_det, entries, outside_bad_set, warnings }
    }

    /// First determinant that puts `p` in the bad set.
    pub fn offending(&self) -> Option<&DeterminantEntry> {
        self.entries.iter().find(|e| !e.passes())
    }

    /// Smallest `|det| / scale` among the entries.
    pub fn min_relative(&self) -> f64 {
        self.entries.iter().map(DeterminantEntry::relative).fold(f64::INFINITY, f64::min)
    }
}

/// `b_l = (b_{n+1,l}, ..., b_{2n,l})` for the umbrella branch; `b` holds all rows.
pub(crate) fn affine_columns(b: &[Vec<f64>], n: usize) -> Matrix {
    Matrix::from_fn(n, n + 1, |i, l| b[n + 1 + i][l])
}

/// `B_j`: the affine block with column `j` deleted.
pub(crate) fn b_minor(cols: &Matrix, j: usize) -> Matrix {
    let n = cols.nrows();
    Matrix::from_fn(n, n, |i, c| cols[(i, if c < j { c } else { c + 1 })])
}

pub(crate) fn full_rank_certificate(b: &[Vec<f64>], n: usize, eps_det: f64) -> BadSetCertificate {
    let cols = affine_columns(b, n);
    let entries = (0..=n)
        .map(|j| DeterminantEntry::from_matrix(format!("det B_{j}"), &b_minor(&cols, j), eps_det))
        .collect();
    BadSetCertificate::new(CertificateBranch::FullRank, eps_det, entries)
}

pub(crate) fn inclusion_certificate(b_square: &Matrix, eps_det: f64) -> BadSetCertificate {
    BadSetCertificate::new(
        CertificateBranch::Inclusion,
        eps_det,
        vec![DeterminantEntry::from_matrix("det B", b_square, eps_det)],
    )
}
