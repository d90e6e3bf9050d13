//! Linear class-κ functions and high-order barrier cascades.

use crate::cbf::CbfError;
use crate::scalar::Scalar;

/// Linear class-κ function `α(s) = k·s` with `k > 0`.
///
/// Linear gains keep every constraint row affine in the decision
/// variables, which is what lets the per-step problem stay a QP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassKappaLinear<S> {
    gain: S,
}

impl<S: Scalar> ClassKappaLinear<S> {
    /// Creates `α(s) = k·s`; fails unless `k > 0`.
    pub fn new(gain: S) -> Result<Self, CbfError> {
        if !(gain > S::zero()) || !gain.is_finite() {
            return Err(CbfError::NonPositiveGain(gain.to_real()));
        }
        Ok(Self { gain })
    }

    /// The gain `k`.
    pub fn gain(&self) -> S {
        self.gain
    }

    /// Evaluates `α(s) = k·s`.
    pub fn eval(&self, s: S) -> S {
        self.gain * s
    }
}

/// Free-function form of [`ClassKappaLinear::eval`].
pub fn eval_class_kappa<S: Scalar>(alpha: &ClassKappaLinear<S>, s: S) -> S {
    alpha.eval(s)
}

/// Coefficient vectors of a linear class-κ cascade.
///
/// Level `i` of the cascade `ψ₀ = b`, `ψᵢ = ψ̇ᵢ₋₁ + kᵢ·ψᵢ₋₁` is a fixed
/// linear combination of `b` and its time derivatives; entry `j` of
/// vector `i` multiplies the `j`-th derivative.
fn cascade_coefficients<S: Scalar>(gains: &[S]) -> Vec<Vec<S>> {
    let mut all = Vec::with_capacity(gains.len() + 1);
    all.push(vec![S::one()]);
    for (i, &k) in gains.iter().enumerate() {
        let prev = &all[i];
        let mut next = vec![S::zero(); prev.len() + 1];
        for (j, &c) in prev.iter().enumerate() {
            // Differentiation shifts each coefficient up one derivative
            // order; the class-κ term keeps it in place scaled by k.
            next[j + 1] = next[j + 1] + c;
            next[j] = next[j] + k * c;
        }
        all.push(next);
    }
    all
}

/// Values `ψ₀ … ψ_r` of the cascade `ψᵢ = ψ̇ᵢ₋₁ + αᵢ(ψᵢ₋₁)` with linear
/// gains, given the barrier value and its time derivatives
/// `derivs = (b, ḃ, b̈, …)`.
///
/// `derivs` must provide at least `alphas.len() + 1` entries.
pub fn cascade_levels<S: Scalar>(
    derivs: &[S],
    alphas: &[ClassKappaLinear<S>],
) -> Result<Vec<S>, CbfError> {
    let needed = alphas.len() + 1;
    if derivs.len() < needed {
        return Err(CbfError::LengthMismatch {
            context: "barrier cascade",
            needed,
            got: derivs.len(),
        });
    }
    let gains: Vec<S> = alphas.iter().map(|a| a.gain()).collect();
    let coeffs = cascade_coefficients(&gains);
    Ok(coeffs
        .iter()
        .map(|c| {
            c.iter()
                .zip(derivs)
                .fold(S::zero(), |acc, (&ci, &di)| acc + ci * di)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_must_be_positive() {
        assert!(ClassKappaLinear::new(0.5).is_ok());
        assert!(matches!(
            ClassKappaLinear::new(0.0),
            Err(CbfError::NonPositiveGain(_))
        ));
        assert!(matches!(
            ClassKappaLinear::new(-1.0),
            Err(CbfError::NonPositiveGain(_))
        ));
    }

    #[test]
    fn eval_is_linear() {
        let alpha = ClassKappaLinear::new(0.1).unwrap();
        assert_eq!(eval_class_kappa(&alpha, 90.0), 9.0);
        assert_eq!(alpha.eval(-2.0), -0.2);
    }

    #[test]
    fn first_order_level_from_following_distance() {
        // b = 90, ḃ = 7.89, k₁ = 0.1 → ψ₁ = 7.89 + 9 = 16.89.
        let k1 = ClassKappaLinear::<f64>::new(0.1).unwrap();
        let psi = cascade_levels(&[90.0, 7.89], &[k1]).unwrap();
        assert_eq!(psi[0], 90.0);
        assert!((psi[1] - 16.89).abs() < 1e-12);
    }

    #[test]
    fn second_order_level_expansion() {
        // ψ₂ = b̈ + (k₁+k₂)ḃ + k₁k₂b for distinct gains.
        let k1 = ClassKappaLinear::<f64>::new(0.2).unwrap();
        let k2 = ClassKappaLinear::<f64>::new(0.5).unwrap();
        let (b, bd, bdd) = (4.0, -1.0, 0.25);
        let psi = cascade_levels(&[b, bd, bdd], &[k1, k2]).unwrap();
        let psi1 = bd + 0.2 * b;
        assert!((psi[1] - psi1).abs() < 1e-15);
        assert!((psi[2] - (bdd + 0.2 * bd + 0.5 * psi1)).abs() < 1e-15);
    }

    #[test]
    fn short_derivative_vector_is_rejected() {
        let k1 = ClassKappaLinear::new(0.1).unwrap();
        assert!(matches!(
            cascade_levels(&[1.0], &[k1]),
            Err(CbfError::LengthMismatch { .. })
        ));
    }
}
