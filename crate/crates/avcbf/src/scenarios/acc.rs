//! Adaptive cruise control scenarios.
//!
//! The plant is the ego vehicle of a two-car following problem: state
//! `x = (z, v)` with gap `z` to the lead vehicle (driving at constant
//! speed `v_p`) and ego forward speed `v`, input `u` the wheel force,
//! and rolling/drag resistance `F_r(v)`. Safety requires keeping the
//! gap above a minimum headway `l_p`, i.e. `b(x) = z − l_p ≥ 0`, a
//! relative-degree-two constraint. Four controller variants share the
//! plant:
//!
//! * [`AccVariant::Hocbf`] — the plain HOCBF cascade on `b`.
//! * [`AccVariant::Avcbf`] — `b` multiplied by an auxiliary function
//!   `a₁(t)` driven by a two-integrator chain, which adds the unbounded
//!   input `ν₁` to the step QP.
//! * [`AccVariant::Pacbf`] — the penalty-adaptive baseline: a penalty
//!   `p₁(t)` on the squared level, boxed into `[0, p1_max]` and steered
//!   toward `p₁*` by its own Lyapunov row.
//! * [`AccVariant::Reduced`] — the relative-degree-reducing design
//!   `A₁ = e^(−a₁/v)`, whose speed dependence pulls `u` into the very
//!   first derivative of `A₁·b`, collapsing the cascade to one level.

use crate::cbf::{
    build_aux_chain_row, build_clf_row, build_control_bound_rows, AuxFnKind, AuxiliaryChain,
    ConstraintRow, CostSpec, RowTag,
};
use crate::dynamics::{AffineDynamics, AugmentedState};
use crate::numkit::Matrix;
use crate::scalar::{real, Scalar};
use crate::scenarios::{Scenario, ScenarioError};

/// Deceleration-capacity profile `c_d(t)`: constant when
/// `start == end`, otherwise linearly interpolated from `start` at
/// `t = 0` to `end` at `t = horizon` (clamped outside that range).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdProfile<S> {
    /// Value at the start of the run.
    pub start: S,
    /// Value at the end of the horizon.
    pub end: S,
}

impl<S: Scalar> CdProfile<S> {
    /// Constant profile.
    pub fn constant(value: S) -> Self {
        Self {
            start: value,
            end: value,
        }
    }

    /// Profile value at time `t` for a run of length `horizon`.
    pub fn value(&self, t: S, horizon: S) -> S {
        if horizon <= S::zero() {
            return self.start;
        }
        let frac = (t / horizon).max(S::zero()).min(S::one());
        self.start + (self.end - self.start) * frac
    }
}

/// Physical and controller parameters shared by every ACC variant.
#[derive(Debug, Clone, PartialEq)]
pub struct AccParams<S> {
    /// Lead-vehicle speed (m/s), constant.
    pub v_p: S,
    /// Desired cruising speed tracked by the Lyapunov row (m/s).
    pub v_d: S,
    /// Vehicle mass (kg).
    pub mass: S,
    /// Gravitational acceleration (m/s²).
    pub gravity: S,
    /// Initial gap to the lead vehicle (m).
    pub z0: S,
    /// Minimum safe headway (m).
    pub l_p: S,
    /// Coulomb resistance coefficient (N).
    pub f0: S,
    /// Linear resistance coefficient (N·s/m).
    pub f1: S,
    /// Quadratic resistance coefficient (N·s²/m²).
    pub f2: S,
    /// Acceleration capacity: `u ≤ c_a·M·g`.
    pub c_a: S,
    /// Deceleration capacity: `u ≥ −c_d(t)·M·g`.
    pub c_d: CdProfile<S>,
    /// Lyapunov convergence rate.
    pub c3: S,
    /// Slack weight in the cost.
    pub q: S,
    /// Auxiliary-input weight in the cost.
    pub w1: S,
    /// Reference value for the auxiliary input `ν₁` (the tunable
    /// hyperparameter of the gradient-ascent procedure).
    pub a_1w: S,
    /// First barrier-cascade gain.
    pub k1: S,
    /// Second barrier-cascade gain.
    pub k2: S,
    /// First positivity-cascade gain.
    pub l1: S,
    /// Second positivity-cascade gain.
    pub l2: S,
    /// Positivity margin `ε` kept by the auxiliary chain.
    pub margin: S,
    /// Control interval (s).
    pub dt: S,
    /// Run length (s).
    pub horizon: S,
    /// Initial ego speed (m/s).
    pub v0: S,
    /// Initial auxiliary value `a₁(0)`.
    pub a1_0: S,
    /// Initial auxiliary rate `π₁₂(0) = ȧ₁(0)` (two-integrator chain
    /// only).
    pub pi12_0: S,
}

impl<S: Scalar> AccParams<S> {
    /// Benign cruising setup: slow ego car closing a large gap on a
    /// faster lead vehicle, mild gains.
    pub fn cruise() -> Self {
        Self {
            v_p: real(13.89),
            v_d: real(24.0),
            mass: real(1650.0),
            gravity: real(9.81),
            z0: real(100.0),
            l_p: real(10.0),
            f0: real(0.1),
            f1: real(5.0),
            f2: real(0.25),
            c_a: real(0.4),
            c_d: CdProfile::constant(real(0.4)),
            c3: real(2.0),
            q: real(1000.0),
            w1: real(1000.0),
            a_1w: real(1.0),
            k1: real(0.1),
            k2: real(0.1),
            l1: real(0.1),
            l2: real(0.1),
            margin: real(1e-10),
            dt: real(0.1),
            horizon: real(50.0),
            v0: real(6.0),
            a1_0: real(1.0),
            pi12_0: real(1.0),
        }
    }

    /// Urgent-braking setup: fast ego car, weak brakes, aggressive
    /// Lyapunov rate. The plain HOCBF controller runs into a
    /// braking-capacity conflict here while the auxiliary-variable
    /// controller survives it.
    ///
    /// `w1` is deliberately large: with a cheap auxiliary input the
    /// sampled controller defers braking by inflating `a1` each step,
    /// and the accumulated `pi12` debt eventually outruns the braking
    /// capacity. Pricing `nu1` at 2e7 makes the optimizer brake early
    /// enough to settle at the lead speed with the gap still open.
    pub fn urgent_braking() -> Self {
        Self {
            c_d: CdProfile::constant(real(0.23)),
            c3: real(70.0),
            q: real(7e5),
            w1: real(2e7),
            horizon: real(30.0),
            v0: real(20.0),
            ..Self::cruise()
        }
    }

    /// Setup for the penalty-adaptive baseline runs.
    pub fn penalty_baseline() -> Self {
        Self {
            horizon: real(30.0),
            v0: real(20.0),
            ..Self::cruise()
        }
    }

    /// Setup for the relative-degree-reducing design `A₁ = e^(−a₁/v)`.
    pub fn reduced_degree() -> Self {
        Self {
            c3: real(120.0),
            a_1w: real(0.0),
            v0: real(20.0),
            a1_0: real(-30.0),
            ..Self::cruise()
        }
    }

    /// Checks the structural invariants the derivations rely on.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: &str| Err(ScenarioError::InitialMembership(msg.to_string()));
        if !(self.mass > S::zero()) {
            return bad("vehicle mass must be positive");
        }
        if !(self.l_p > S::zero()) {
            return bad("minimum headway must be positive");
        }
        if !(self.v_p > S::zero()) {
            return bad("lead-vehicle speed must be positive");
        }
        if !(self.c_a > S::zero()) {
            return bad("acceleration capacity must be positive");
        }
        if !(self.c_d.start > S::zero() && self.c_d.end > S::zero()) {
            return bad("deceleration capacity must stay positive over the run");
        }
        if !(self.dt > S::zero()) {
            return bad("control interval must be positive");
        }
        if self.horizon < S::zero() {
            return bad("horizon must be nonnegative");
        }
        Ok(())
    }
}

/// Parameters of the penalty-adaptive baseline controller.
#[derive(Debug, Clone, PartialEq)]
pub struct PacbfParams<S> {
    /// Initial penalty value `p₁(0)`.
    pub p1_0: S,
    /// Reference for the second penalty `p₂ = ν₂` in the cost.
    pub p2_0: S,
    /// Target the penalty is steered toward by its Lyapunov row.
    pub p1_star: S,
    /// Upper end of the penalty box `[0, p1_max]`.
    pub p1_max: S,
    /// Convergence rate of the penalty Lyapunov row.
    pub rho: S,
    /// Linear weight on `ν₁` in the cost.
    pub w1: S,
    /// Quadratic weight on `ν₂ − p2_0`.
    pub w2: S,
    /// Speed-tracking slack weight.
    pub q: S,
    /// Penalty-tracking slack weight.
    pub q_p: S,
    /// Speed Lyapunov convergence rate.
    pub c3: S,
}

impl<S: Scalar> Default for PacbfParams<S> {
    fn default() -> Self {
        Self {
            p1_0: real(0.103),
            p2_0: real(1.0),
            p1_star: real(0.103),
            p1_max: real(3.0),
            rho: real(10.0),
            w1: real(2e12),
            w2: real(2e12),
            q: real(1.0),
            q_p: real(1.0),
            c3: real(10.0),
        }
    }
}

/// Piecewise cost weights of the reduced-degree variant, switched on
/// whether the ego speed exceeds the lead speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedWeights<S> {
    /// `ν₁` weight while `v > v_p`.
    pub w1_over: S,
    /// Slack weight while `v > v_p`.
    pub q_over: S,
    /// `ν₁` weight while `v ≤ v_p`.
    pub w1_under: S,
    /// Slack weight while `v ≤ v_p`.
    pub q_under: S,
}

impl<S: Scalar> Default for ReducedWeights<S> {
    fn default() -> Self {
        Self {
            w1_over: real(1e5),
            q_over: real(2e4),
            w1_under: real(1.0 / 30.0),
            q_under: real(1.0 / 150.0),
        }
    }
}

/// Resistance force `F_r(v) = f₀ + f₁·v + f₂·v²` for forward motion.
///
/// The model assumes strictly forward travel, so `v ≤ 0` is rejected
/// rather than extrapolated through the sign change of the Coulomb
/// term.
pub fn acc_resistance<S: Scalar>(v: S, params: &AccParams<S>) -> Result<S, ScenarioError> {
    if !(v > S::zero()) {
        return Err(ScenarioError::InvalidState(format!(
            "resistance model requires forward speed, got v = {v}"
        )));
    }
    Ok(params.f0 + params.f1 * v + params.f2 * v * v)
}

/// Which ACC controller the scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccVariant {
    /// Auxiliary-variable adaptive controller (two-integrator chain).
    Avcbf,
    /// Plain high-order cascade.
    Hocbf,
    /// Penalty-adaptive baseline.
    Pacbf,
    /// Relative-degree-reducing auxiliary function `e^(−a₁/v)`.
    Reduced,
}

impl AccVariant {
    /// Registry identifier of the variant.
    pub fn id(&self) -> &'static str {
        match self {
            AccVariant::Avcbf => "acc_avcbf",
            AccVariant::Hocbf => "acc_hocbf",
            AccVariant::Pacbf => "acc_pacbf",
            AccVariant::Reduced => "acc_reduced",
        }
    }
}

/// A complete ACC scenario: plant, auxiliary structure, row builders
/// and cost for one controller variant.
pub struct AccScenario<S: Scalar> {
    params: AccParams<S>,
    pacbf: PacbfParams<S>,
    reduced: ReducedWeights<S>,
    variant: AccVariant,
    dynamics: AffineDynamics<S>,
    chain: Option<AuxiliaryChain<S>>,
}

impl<S: Scalar> AccScenario<S> {
    /// Builds the scenario, validating parameters first.
    pub fn new(params: AccParams<S>, variant: AccVariant) -> Result<Self, ScenarioError> {
        params.validate()?;
        let v_p = params.v_p;
        let mass = params.mass;
        let (f0, f1, f2) = (params.f0, params.f1, params.f2);
        let dynamics = AffineDynamics::new(
            2,
            1,
            move |x: &[S]| vec![v_p - x[1], -(f0 + f1 * x[1] + f2 * x[1] * x[1]) / mass],
            move |_x: &[S]| Matrix::from_rows(&[&[S::zero()], &[S::one() / mass]]),
        );
        let chain = match variant {
            AccVariant::Avcbf => Some(AuxiliaryChain::identity(
                1,
                vec![params.a1_0, params.pi12_0],
                vec![params.l1, params.l2],
                params.margin,
            )),
            AccVariant::Reduced => Some(AuxiliaryChain {
                index: 1,
                initial_states: vec![params.a1_0],
                gains: vec![params.l1],
                margin: params.margin,
                kind: AuxFnKind::ExpOverSpeed,
            }),
            AccVariant::Hocbf | AccVariant::Pacbf => None,
        };
        Ok(Self {
            params,
            pacbf: PacbfParams::default(),
            reduced: ReducedWeights::default(),
            variant,
            dynamics,
            chain,
        })
    }

    /// Replaces the penalty-baseline parameters.
    pub fn with_pacbf(mut self, pacbf: PacbfParams<S>) -> Self {
        self.pacbf = pacbf;
        self
    }

    /// Replaces the reduced-degree cost weights.
    pub fn with_reduced_weights(mut self, weights: ReducedWeights<S>) -> Self {
        self.reduced = weights;
        self
    }

    /// Shared parameters.
    pub fn params(&self) -> &AccParams<S> {
        &self.params
    }

    /// Penalty-baseline parameters.
    pub fn pacbf_params(&self) -> &PacbfParams<S> {
        &self.pacbf
    }

    /// Controller variant.
    pub fn variant(&self) -> AccVariant {
        self.variant
    }

    /// Control bounds `[−c_d(t)·M·g, c_a·M·g]` at time `t`.
    fn bounds(&self, t: S) -> (S, S) {
        let p = &self.params;
        let mg = p.mass * p.gravity;
        (-p.c_d.value(t, p.horizon) * mg, p.c_a * mg)
    }

    /// Speed-tracking Lyapunov row `−LgV·u + δ ≥ LfV + c₃V` with
    /// `V = (v − v_d)²`.
    fn speed_clf_row(&self, v: S, fr: S, c3: S, dim: usize, delta_index: usize) -> ConstraintRow<S> {
        let p = &self.params;
        let two = real::<S>(2.0);
        let diff = v - p.v_d;
        let v_lyap = diff * diff;
        let lf_v = -two * diff * fr / p.mass;
        let lg_v = two * diff / p.mass;
        build_clf_row(lf_v, &[lg_v], c3, v_lyap, dim, &[0], delta_index)
    }
}

impl<S: Scalar> Scenario<S> for AccScenario<S> {
    fn name(&self) -> String {
        self.variant.id().to_string()
    }

    fn state_names(&self) -> Vec<String> {
        vec!["z".into(), "v".into()]
    }

    fn chain_state_names(&self) -> Vec<String> {
        match self.variant {
            AccVariant::Avcbf => vec!["a1".into(), "pi12".into()],
            AccVariant::Hocbf => Vec::new(),
            AccVariant::Pacbf => vec!["p1".into()],
            AccVariant::Reduced => vec!["a1".into()],
        }
    }

    fn decision_names(&self) -> Vec<String> {
        match self.variant {
            AccVariant::Avcbf | AccVariant::Reduced => {
                vec!["u".into(), "nu1".into(), "delta".into()]
            }
            AccVariant::Hocbf => vec!["u".into(), "delta".into()],
            AccVariant::Pacbf => vec![
                "u".into(),
                "nu1".into(),
                "nu2".into(),
                "delta".into(),
                "delta_p".into(),
            ],
        }
    }

    fn control_indices(&self) -> Vec<usize> {
        vec![0]
    }

    fn chain_input_indices(&self) -> Vec<usize> {
        match self.variant {
            AccVariant::Hocbf => Vec::new(),
            _ => vec![1],
        }
    }

    fn slack_indices(&self) -> Vec<usize> {
        match self.variant {
            AccVariant::Avcbf | AccVariant::Reduced => vec![2],
            AccVariant::Hocbf => vec![1],
            AccVariant::Pacbf => vec![3, 4],
        }
    }

    fn dynamics(&self) -> &AffineDynamics<S> {
        &self.dynamics
    }

    fn initial_state(&self) -> AugmentedState<S> {
        let p = &self.params;
        let chains = match self.variant {
            AccVariant::Avcbf => vec![vec![p.a1_0, p.pi12_0]],
            AccVariant::Hocbf => Vec::new(),
            AccVariant::Pacbf => vec![vec![self.pacbf.p1_0]],
            AccVariant::Reduced => vec![vec![p.a1_0]],
        };
        AugmentedState::new(vec![p.z0, p.v0], chains)
    }

    fn dt(&self) -> S {
        self.params.dt
    }

    fn horizon(&self) -> S {
        self.params.horizon
    }

    fn barrier(&self, state: &AugmentedState<S>) -> S {
        state.x[0] - self.params.l_p
    }

    fn psi_levels(&self, state: &AugmentedState<S>) -> Vec<S> {
        let p = &self.params;
        let b = state.x[0] - p.l_p;
        let bdot = p.v_p - state.x[1];
        match self.variant {
            AccVariant::Avcbf => {
                let a1 = state.chains[0][0];
                let pi12 = state.chains[0][1];
                let psi0 = a1 * b;
                vec![psi0, pi12 * b + a1 * bdot + p.k1 * psi0]
            }
            AccVariant::Hocbf => vec![b, bdot + p.k1 * b],
            AccVariant::Pacbf => {
                let p1 = state.chains[0][0];
                vec![b, bdot + p1 * b * b]
            }
            AccVariant::Reduced => {
                let a1 = state.chains[0][0];
                vec![(-a1 / state.x[1]).exp() * b]
            }
        }
    }

    fn rows(&self, state: &AugmentedState<S>) -> Result<Vec<ConstraintRow<S>>, ScenarioError> {
        let p = &self.params;
        let two = real::<S>(2.0);
        let v = state.x[1];
        let b = state.x[0] - p.l_p;
        let bdot = p.v_p - v;
        let fr = acc_resistance(v, p)?;
        let (lo, hi) = self.bounds(state.t);
        let mut rows = Vec::new();

        match self.variant {
            AccVariant::Avcbf => {
                let dim = 3;
                let a1 = state.chains[0][0];
                let pi12 = state.chains[0][1];
                let psi0 = a1 * b;
                let psi1 = pi12 * b + a1 * bdot + p.k1 * psi0;
                // ψ̇₁ + k₂ψ₁ ≥ 0 expanded with v̇ = (u − F_r)/M and
                // ä₁ = ν₁: the u and ν₁ coefficients move left, the
                // state-only remainder becomes the right-hand side.
                let mut coeffs = vec![S::zero(); dim];
                coeffs[0] = -a1 / p.mass;
                coeffs[1] = b;
                let rest = two * pi12 * bdot
                    + a1 * fr / p.mass
                    + (p.k1 + p.k2) * (pi12 * b + a1 * bdot)
                    + p.k1 * p.k2 * a1 * b;
                rows.push(ConstraintRow {
                    coeffs,
                    rhs: -rest,
                    tag: RowTag::Barrier,
                    level_values: vec![psi0, psi1],
                });
                let chain = self.chain.as_ref().expect("variant carries a chain");
                if let Some(row) = build_aux_chain_row(chain, &state.chains[0], dim, 1)? {
                    rows.push(row);
                }
                rows.push(self.speed_clf_row(v, fr, p.c3, dim, 2));
                rows.extend(build_control_bound_rows(&[lo], &[hi], dim, &[0])?);
            }
            AccVariant::Hocbf => {
                let dim = 2;
                let mut coeffs = vec![S::zero(); dim];
                coeffs[0] = -S::one() / p.mass;
                let rest = fr / p.mass + (p.k1 + p.k2) * bdot + p.k1 * p.k2 * b;
                rows.push(ConstraintRow {
                    coeffs,
                    rhs: -rest,
                    tag: RowTag::Barrier,
                    level_values: vec![b, bdot + p.k1 * b],
                });
                rows.push(self.speed_clf_row(v, fr, p.c3, dim, 1));
                rows.extend(build_control_bound_rows(&[lo], &[hi], dim, &[0])?);
            }
            AccVariant::Pacbf => {
                let dim = 5;
                let pb = &self.pacbf;
                let p1 = state.chains[0][0];
                let psi1 = bdot + p1 * b * b;
                // ψ̇₁ + ν₂ψ₁ ≥ 0 with ψ̇₁ = b̈ + ν₁b² + 2p₁bḃ; the
                // bilinear ν₂ψ₁ term is affine in ν₂ at a fixed state.
                let mut coeffs = vec![S::zero(); dim];
                coeffs[0] = -S::one() / p.mass;
                coeffs[1] = b * b;
                coeffs[2] = psi1;
                rows.push(ConstraintRow {
                    coeffs,
                    rhs: -(fr / p.mass + two * p1 * b * bdot),
                    tag: RowTag::Barrier,
                    level_values: vec![b, psi1],
                });
                // First-order barrier pair keeping p₁ inside
                // [0, p1_max]: ṗ₁ + p₁ ≥ 0 and −ṗ₁ + (p1_max − p₁) ≥ 0.
                let mut lo_coeffs = vec![S::zero(); dim];
                lo_coeffs[1] = S::one();
                rows.push(ConstraintRow {
                    coeffs: lo_coeffs,
                    rhs: -p1,
                    tag: RowTag::PacbfAux { upper: false },
                    level_values: Vec::new(),
                });
                let mut hi_coeffs = vec![S::zero(); dim];
                hi_coeffs[1] = -S::one();
                rows.push(ConstraintRow {
                    coeffs: hi_coeffs,
                    rhs: p1 - pb.p1_max,
                    tag: RowTag::PacbfAux { upper: true },
                    level_values: Vec::new(),
                });
                // Penalty Lyapunov row: 2(p₁−p₁*)ν₁ + ρ(p₁−p₁*)² ≤ δ_p.
                let diff = p1 - pb.p1_star;
                let mut clf_coeffs = vec![S::zero(); dim];
                clf_coeffs[1] = -two * diff;
                clf_coeffs[4] = S::one();
                rows.push(ConstraintRow {
                    coeffs: clf_coeffs,
                    rhs: pb.rho * diff * diff,
                    tag: RowTag::PacbfClf,
                    level_values: Vec::new(),
                });
                rows.push(self.speed_clf_row(v, fr, pb.c3, dim, 3));
                rows.extend(build_control_bound_rows(&[lo], &[hi], dim, &[0])?);
            }
            AccVariant::Reduced => {
                let dim = 3;
                let a1 = state.chains[0][0];
                let a_fn = (-a1 / v).exp();
                // ψ̇₀ + k₁ψ₀ ≥ 0 where ψ₀ = e^(−a₁/v)·b; the chain rule
                // through the exponent produces both the u coefficient
                // (via v̇) and the ν₁ coefficient (via ȧ₁) in one level.
                let mut coeffs = vec![S::zero(); dim];
                coeffs[0] = a_fn * a1 * b / (p.mass * v * v);
                coeffs[1] = -a_fn * b / v;
                let rest = a_fn * (-a1 * fr * b / (p.mass * v * v) + bdot + p.k1 * b);
                rows.push(ConstraintRow {
                    coeffs,
                    rhs: -rest,
                    tag: RowTag::Barrier,
                    level_values: vec![a_fn * b],
                });
                rows.push(self.speed_clf_row(v, fr, p.c3, dim, 2));
                rows.extend(build_control_bound_rows(&[lo], &[hi], dim, &[0])?);
            }
        }
        Ok(rows)
    }

    fn cost(&self, state: &AugmentedState<S>, aux_targets: &[S]) -> CostSpec<S> {
        let p = &self.params;
        let two = real::<S>(2.0);
        let v = state.x[1];
        // The cost references F_r(v) as the neutral force holding the
        // current speed; clamp to the v→0⁺ limit if the state has
        // degenerated (the run aborts separately in that case).
        let fr = if v > S::zero() {
            p.f0 + p.f1 * v + p.f2 * v * v
        } else {
            p.f0
        };
        let m2 = p.mass * p.mass;
        match self.variant {
            AccVariant::Avcbf => {
                let target = aux_targets.first().copied().unwrap_or(p.a_1w);
                CostSpec {
                    hessian: Matrix::from_diagonal(&[two / m2, two * p.w1, two * p.q]),
                    linear: vec![-two * fr / m2, -two * p.w1 * target, S::zero()],
                    constant: fr * fr / m2 + p.w1 * target * target,
                    var_names: self.decision_names(),
                }
            }
            AccVariant::Hocbf => CostSpec {
                hessian: Matrix::from_diagonal(&[two / m2, two * p.q]),
                linear: vec![-two * fr / m2, S::zero()],
                constant: fr * fr / m2,
                var_names: self.decision_names(),
            },
            AccVariant::Pacbf => {
                let pb = &self.pacbf;
                CostSpec {
                    hessian: Matrix::from_diagonal(&[
                        two / m2,
                        S::zero(),
                        two * pb.w2,
                        two * pb.q,
                        two * pb.q_p,
                    ]),
                    linear: vec![
                        -two * fr / m2,
                        pb.w1,
                        -two * pb.w2 * pb.p2_0,
                        S::zero(),
                        S::zero(),
                    ],
                    constant: fr * fr / m2 + pb.w2 * pb.p2_0 * pb.p2_0,
                    var_names: self.decision_names(),
                }
            }
            AccVariant::Reduced => {
                let (w1, q) = if v > p.v_p {
                    (self.reduced.w1_over, self.reduced.q_over)
                } else {
                    (self.reduced.w1_under, self.reduced.q_under)
                };
                let target = aux_targets.first().copied().unwrap_or(p.a_1w);
                CostSpec {
                    hessian: Matrix::from_diagonal(&[two / m2, two * w1, two * q]),
                    linear: vec![-two * fr / m2, -two * w1 * target, S::zero()],
                    constant: fr * fr / m2 + w1 * target * target,
                    var_names: self.decision_names(),
                }
            }
        }
    }

    fn default_aux_targets(&self) -> Vec<S> {
        match self.variant {
            AccVariant::Avcbf | AccVariant::Reduced => vec![self.params.a_1w],
            AccVariant::Hocbf | AccVariant::Pacbf => Vec::new(),
        }
    }

    fn initial_membership(&self) -> Result<(), ScenarioError> {
        self.params.validate()?;
        let state = self.initial_state();
        self.validate_state(&state)?;
        for (i, level) in self.psi_levels(&state).iter().enumerate() {
            if !(*level >= S::zero()) {
                return Err(ScenarioError::InitialMembership(format!(
                    "barrier level {i} is {level} < 0 at the initial state"
                )));
            }
        }
        match self.variant {
            AccVariant::Avcbf => {
                let chain = self.chain.as_ref().expect("variant carries a chain");
                for (i, phi) in chain
                    .positivity_levels(&state.chains[0])?
                    .iter()
                    .enumerate()
                {
                    if !(*phi >= S::zero()) {
                        return Err(ScenarioError::InitialMembership(format!(
                            "auxiliary positivity level {i} is {phi} < 0 initially"
                        )));
                    }
                }
            }
            AccVariant::Pacbf => {
                let p1 = self.pacbf.p1_0;
                if !(p1 >= S::zero() && p1 <= self.pacbf.p1_max) {
                    return Err(ScenarioError::InitialMembership(format!(
                        "initial penalty {p1} outside [0, {}]",
                        self.pacbf.p1_max
                    )));
                }
            }
            AccVariant::Hocbf | AccVariant::Reduced => {}
        }
        Ok(())
    }

    fn validate_state(&self, state: &AugmentedState<S>) -> Result<(), ScenarioError> {
        let v = state.x[1];
        if !(v > S::zero()) {
            return Err(ScenarioError::InvalidState(format!(
                "ego speed must stay positive, got v = {v} at t = {}",
                state.t
            )));
        }
        Ok(())
    }
}
