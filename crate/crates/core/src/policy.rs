//! Global numeric policy: rank and comparison tolerances shared by every
//! geometric operation in the crate.

use std::sync::RwLock;

/// Tolerances used by subspace arithmetic and structure classification.
///
/// The defaults match the contracts documented on the individual operations:
/// rank decisions are relative to the largest singular value, subspace
/// equality is an absolute Frobenius bound on orthogonal projectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericPolicy {
    /// Relative singular-value cutoff for rank decisions.
    pub rank_rel_tol: f64,
    /// Absolute Frobenius tolerance for projector comparisons (subspace
    /// equality and containment).
    pub projector_tol: f64,
    /// Tolerance for skew-symmetry checks on two-forms and bivectors.
    pub skew_tol: f64,
    /// Tolerance for pointwise residuals (membership, well-definedness).
    pub residual_tol: f64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        NumericPolicy {
            rank_rel_tol: 1e-10,
            projector_tol: 1e-9,
            skew_tol: 1e-12,
            residual_tol: 1e-9,
        }
    }
}

static POLICY: RwLock<NumericPolicy> = RwLock::new(NumericPolicy {
    rank_rel_tol: 1e-10,
    projector_tol: 1e-9,
    skew_tol: 1e-12,
    residual_tol: 1e-9,
});

/// Current global policy (cheap copy).
pub fn policy() -> NumericPolicy {
    *POLICY.read().expect("numeric policy lock poisoned")
}

/// Replaces the global policy. Intended for tooling and experiments; the
/// defaults are what the test suite pins.
pub fn set_policy(p: NumericPolicy) {
    *POLICY.write().expect("numeric policy lock poisoned") = p;
}
