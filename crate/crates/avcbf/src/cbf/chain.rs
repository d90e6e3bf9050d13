//! Auxiliary-variable chains.
//!
//! Each adaptive barrier level is multiplied by a positive auxiliary
//! function `Aᵢ` driven by an integrator chain `π̇ᵢ,ⱼ = πᵢ,ⱼ₊₁` whose last
//! state is driven by a free input `νᵢ`. Positivity of `Aᵢ` is itself
//! enforced with a high-order barrier cascade on the chain, which
//! contributes one affine row (in `νᵢ`) per chain to the step QP.

use crate::cbf::kappa::{cascade_levels, ClassKappaLinear};
use crate::cbf::row::{ConstraintRow, RowTag};
use crate::cbf::CbfError;
use crate::scalar::Scalar;

/// Functional form of the auxiliary multiplier `Aᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxFnKind {
    /// `Aᵢ = aᵢ` — the chain head itself; positivity is enforced with a
    /// chain cascade row.
    Identity,
    /// `Aᵢ = exp(−aᵢ/v)` over a strictly positive speed `v`; structurally
    /// positive, so no positivity row is needed.
    ExpOverSpeed,
    /// `Aᵢ = aᵢ + (plant states)`, e.g. `a₁ + v + θ`; its derivative
    /// couples plant controls, so the owning scenario assembles the
    /// positivity row itself.
    SumWithStates,
}

/// Auxiliary chain definition: drives the multiplier `Aᵢ` on barrier
/// level `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryChain<S> {
    /// Which barrier level this chain multiplies (1-based, matching the
    /// `Aᵢ` numbering).
    pub index: usize,
    /// Initial chain states `(aᵢ, ȧᵢ, …)`; the chain length decreases by
    /// one per level so every chain's input appears in the highest-order
    /// barrier row.
    pub initial_states: Vec<S>,
    /// Positivity-cascade gains `lᵢ,ⱼ`, one per chain state.
    pub gains: Vec<S>,
    /// Strict-positivity margin `εᵢ` for the cascade row.
    pub margin: S,
    /// Functional form of the multiplier.
    pub kind: AuxFnKind,
}

impl<S: Scalar> AuxiliaryChain<S> {
    /// Identity-multiplier chain with the given initial states and gains.
    pub fn identity(index: usize, initial_states: Vec<S>, gains: Vec<S>, margin: S) -> Self {
        Self {
            index,
            initial_states,
            gains,
            margin,
            kind: AuxFnKind::Identity,
        }
    }

    /// Number of chain states.
    pub fn len(&self) -> usize {
        self.initial_states.len()
    }

    /// True when the chain has no states.
    pub fn is_empty(&self) -> bool {
        self.initial_states.is_empty()
    }

    /// Positivity-cascade levels `φᵢ,₀ … φᵢ,q₋₁` at the given chain
    /// states (the input-dependent top level is excluded; it becomes the
    /// QP row instead). Only meaningful for [`AuxFnKind::Identity`].
    pub fn positivity_levels(&self, states: &[S]) -> Result<Vec<S>, CbfError> {
        if states.len() != self.len() {
            return Err(CbfError::LengthMismatch {
                context: "auxiliary chain states",
                needed: self.len(),
                got: states.len(),
            });
        }
        // Use all but the last gain: φ levels up to order q−1 depend only
        // on chain states.
        let alphas: Result<Vec<_>, _> = self.gains[..self.gains.len().saturating_sub(1)]
            .iter()
            .map(|&l| ClassKappaLinear::new(l))
            .collect();
        cascade_levels(states, &alphas?)
    }
}

/// Builds the positivity row `νᵢ + (cascade terms) ≥ εᵢ` for an
/// [`AuxFnKind::Identity`] chain, placed in a decision vector of
/// dimension `dim` with the chain input at `nu_index`.
///
/// Returns `Ok(None)` for non-identity multiplier kinds: the
/// exponential form is structurally positive and needs no row, and
/// state-coupled sums need plant-control terms only the scenario can
/// supply.
pub fn build_aux_chain_row<S: Scalar>(
    chain: &AuxiliaryChain<S>,
    states: &[S],
    dim: usize,
    nu_index: usize,
) -> Result<Option<ConstraintRow<S>>, CbfError> {
    if chain.kind != AuxFnKind::Identity {
        return Ok(None);
    }
    if states.len() != chain.len() {
        return Err(CbfError::LengthMismatch {
            context: "auxiliary chain states",
            needed: chain.len(),
            got: states.len(),
        });
    }
    if chain.gains.len() != chain.len() {
        return Err(CbfError::LengthMismatch {
            context: "auxiliary chain gains",
            needed: chain.len(),
            got: chain.gains.len(),
        });
    }
    // The top cascade level is φ_q = ν + (shifted/gain-weighted states);
    // evaluate it with the input set to zero to isolate the state part,
    // then move it to the right-hand side: ν ≥ ε − state_part.
    let alphas: Result<Vec<_>, _> = chain
        .gains
        .iter()
        .map(|&l| ClassKappaLinear::new(l))
        .collect();
    let alphas = alphas?;
    let mut derivs = states.to_vec();
    derivs.push(S::zero()); // ν slot
    let levels = cascade_levels(&derivs, &alphas)?;
    let state_part = levels[chain.len()];

    let mut coeffs = vec![S::zero(); dim];
    coeffs[nu_index] = S::one();
    Ok(Some(ConstraintRow {
        coeffs,
        rhs: chain.margin - state_part,
        tag: RowTag::AuxChain(chain.index),
        level_values: Vec::new(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_chain_row_matches_hand_expansion() {
        // ν₁ ≥ ε − (l₁+l₂)ȧ₁ − l₁l₂a₁ with a₁ = ȧ₁ = 1, l = 0.1:
        // rhs = ε − 0.21.
        let chain = AuxiliaryChain::<f64>::identity(1, vec![1.0, 1.0], vec![0.1, 0.1], 1e-10);
        let row = build_aux_chain_row(&chain, &[1.0, 1.0], 3, 1)
            .unwrap()
            .expect("identity chains emit a row");
        assert_eq!(row.coeffs, vec![0.0, 1.0, 0.0]);
        assert!((row.rhs - (1e-10 - 0.21)).abs() < 1e-15);
        assert_eq!(row.tag, RowTag::AuxChain(1));
    }

    #[test]
    fn single_state_chain_row() {
        // ν ≥ ε − l·a for a length-1 chain.
        let chain = AuxiliaryChain::<f64>::identity(2, vec![0.5], vec![0.3], 1e-10);
        let row = build_aux_chain_row(&chain, &[0.5], 2, 0).unwrap().unwrap();
        assert_eq!(row.coeffs[0], 1.0);
        assert!((row.rhs - (1e-10 - 0.15)).abs() < 1e-15);
    }

    #[test]
    fn exp_kind_emits_no_row() {
        let chain = AuxiliaryChain {
            index: 1,
            initial_states: vec![-30.0],
            gains: vec![],
            margin: 1e-10,
            kind: AuxFnKind::ExpOverSpeed,
        };
        assert_eq!(build_aux_chain_row(&chain, &[-30.0], 3, 1).unwrap(), None);
    }

    #[test]
    fn state_coupled_kind_emits_no_row() {
        let chain = AuxiliaryChain {
            index: 1,
            initial_states: vec![50.0],
            gains: vec![0.5],
            margin: 1e-10,
            kind: AuxFnKind::SumWithStates,
        };
        assert_eq!(build_aux_chain_row(&chain, &[50.0], 4, 2).unwrap(), None);
    }

    #[test]
    fn positivity_levels_track_lower_cascade() {
        let chain = AuxiliaryChain::<f64>::identity(1, vec![1.0, 1.0], vec![0.1, 0.1], 1e-10);
        let phi = chain.positivity_levels(&[1.0, 1.0]).unwrap();
        // φ₀ = a₁, φ₁ = ȧ₁ + l₁a₁.
        assert_eq!(phi[0], 1.0);
        assert!((phi[1] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn wrong_state_count_is_rejected() {
        let chain = AuxiliaryChain::identity(1, vec![1.0, 1.0], vec![0.1, 0.1], 1e-10);
        assert!(matches!(
            build_aux_chain_row(&chain, &[1.0], 3, 1),
            Err(CbfError::LengthMismatch { .. })
        ));
    }
}
