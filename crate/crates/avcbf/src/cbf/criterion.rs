//! Pointwise feasibility criterion.
//!
//! Keeping the next-to-highest barrier level strictly positive is a
//! sufficient condition for the step QP to remain feasible under
//! bounded controls, so simulations monitor it every step and the tuner
//! uses it as its objective.

use crate::scalar::Scalar;

/// Outcome of a feasibility-criterion check at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyFeasibilityReport<S> {
    /// Value of the monitored barrier level `ψ_{mₐ−1}`.
    pub criterion_value: S,
    /// Threshold the value is compared against.
    pub threshold: S,
    /// True iff `criterion_value > threshold` strictly.
    pub criterion_ok: bool,
}

/// Evaluates the strict criterion `value > threshold`.
pub fn safety_feasibility_criterion<S: Scalar>(
    criterion_value: S,
    threshold: S,
) -> SafetyFeasibilityReport<S> {
    SafetyFeasibilityReport {
        criterion_value,
        threshold,
        criterion_ok: criterion_value > threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_margin_passes() {
        // ψ₁ = ȧ₁b + a₁ḃ + k₁a₁b = 90 + 7.89 + 9 = 106.89 at the nominal
        // following-distance state; comfortably above a 0.1 threshold.
        let (b, bd, a1, a1d, k1) = (90.0_f64, 7.89, 1.0, 1.0, 0.1);
        let psi1 = a1d * b + a1 * bd + k1 * a1 * b;
        assert!((psi1 - 106.89).abs() < 1e-12);
        let report = safety_feasibility_criterion(psi1, 0.1);
        assert!(report.criterion_ok);
    }

    #[test]
    fn boundary_value_fails_strictly() {
        let report = safety_feasibility_criterion(0.1, 0.1);
        assert!(!report.criterion_ok);
        assert!(safety_feasibility_criterion(0.1 + 1e-12, 0.1).criterion_ok);
    }

    #[test]
    fn negative_value_fails() {
        assert!(!safety_feasibility_criterion(-0.5, 0.0).criterion_ok);
    }
}
