//! Default numerical thresholds. All are relative unless stated otherwise.

/// Coefficients with `|c| <= COEF_DROP * max|c|` in their component are removed.
pub const COEF_DROP: f64 = 1e-12;

/// Singular values below `RANK * sigma_max` count as zero.
pub const RANK: f64 = 1e-10;

/// Bad-set determinant threshold, relative to the Hadamard bound.
pub const DET: f64 = 1e-9;

/// Band above [`DET`] in which a passing verdict still raises a conditioning warning.
pub const DET_WARN_FACTOR: f64 = 10.0;

/// Final normal-form residual, relative to the largest coefficient of `G`.
pub const NORMAL_FORM: f64 = 1e-9;

/// Readout-versus-closed-form agreement for extracted coefficients.
pub const SELF_CHECK: f64 = 1e-10;

/// Coefficient-level round trip of an elementary transform.
pub const ROUNDTRIP_COEF: f64 = 1e-12;

/// Sampled round trip of an elementary transform.
pub const ROUNDTRIP_SAMPLE: f64 = 1e-10;

/// Condition number above which a round-trip report carries a warning.
pub const ROUNDTRIP_COND_WARN: f64 = 1e6;

/// Smallest singular value (relative to the largest) accepted as singular.
pub const SINGULAR: f64 = 1e-8;

/// Flat-image threshold for non-constant coefficients.
pub const FLAT: f64 = 1e-10;

/// Kernel threshold for `L_p`.
pub const KERNEL: f64 = 1e-9;

/// Residual threshold for `b(p, c)` of a witness.
pub const WITNESS_RESIDUAL: f64 = 1e-10;

/// Minimum `|c_ij| / max|c|` for a witness entry to count as nonzero.
pub const WITNESS_MIN_ENTRY: f64 = 1e-6;

/// Sampled map equality default.
pub const MAP_EQUALITY: f64 = 1e-9;
