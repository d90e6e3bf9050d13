//! Unicycle obstacle-avoidance scenarios.
//!
//! A ground vehicle steers around one circular obstacle toward a
//! circular target area while a Lyapunov row pulls the heading toward
//! the target bearing. Safety keeps the squared clearance
//! `b = (x−x_o)² + (y−y_o)² − r_o²` nonnegative. Two plants share the
//! scenario:
//!
//! * the speed-steered unicycle `(x, y, θ, v)` with inputs
//!   `u₁ = θ̇` (angular velocity) and `u₂ = M·v̇` (driven force), where
//!   `b` has relative degree two — variants [`UnicycleVariant::Hocbf`],
//!   [`UnicycleVariant::Avcbf1`], [`UnicycleVariant::Avcbf2`] and
//!   [`UnicycleVariant::AvcbfR`];
//! * the acceleration-steered unicycle `(x, y, θ, φ, v)` with
//!   `u₁ = φ̇` (angular acceleration), where `b` has relative degree
//!   three in `u₁` but two in `u₂` — variant
//!   [`UnicycleVariant::AvcbfM`], whose auxiliary function
//!   `A₁ = a₁ + v + φ` pulls both inputs into a single
//!   relative-degree-one row.

use crate::cbf::{
    build_aux_chain_row, build_clf_row, build_control_bound_rows, AuxFnKind, AuxiliaryChain,
    ConstraintRow, CostSpec, RowTag,
};
use crate::dynamics::{AffineDynamics, AugmentedState};
use crate::numkit::Matrix;
use crate::scalar::{real, Scalar};
use crate::scenarios::{Scenario, ScenarioError};

/// Parameters shared by every unicycle variant.
#[derive(Debug, Clone, PartialEq)]
pub struct UnicycleParams<S> {
    /// Vehicle mass (kg).
    pub mass: S,
    /// Obstacle center x (m).
    pub x_o: S,
    /// Obstacle center y (m).
    pub y_o: S,
    /// Obstacle radius (m).
    pub r_o: S,
    /// Target center x (m).
    pub x_d: S,
    /// Target center y (m).
    pub y_d: S,
    /// Target radius (m).
    pub r_d: S,
    /// Symmetric bound on `u₁`.
    pub u1_max: S,
    /// Symmetric bound on `u₂` (N).
    pub u2_max: S,
    /// First barrier-cascade gain.
    pub k1: S,
    /// Second barrier-cascade gain.
    pub k2: S,
    /// Positivity gain `l₁,₁` of the first auxiliary chain.
    pub l11: S,
    /// Positivity gain `l₁,₂` of the first auxiliary chain.
    pub l12: S,
    /// Positivity gain `l₂,₁` of the second auxiliary chain.
    pub l21: S,
    /// Weight on `ν₁ − a_1w` in the cost.
    pub w1: S,
    /// Weight on `ν₂ − a_2w` in the cost.
    pub w2: S,
    /// Slack weight in the cost.
    pub q: S,
    /// Reference for the first auxiliary input (tunable).
    pub a_1w: S,
    /// Reference for the second auxiliary input.
    pub a_2w: S,
    /// Lyapunov convergence rate.
    pub c3: S,
    /// Positivity margin `ε` of the auxiliary chains.
    pub margin: S,
    /// Initial position x (m).
    pub x0: S,
    /// Initial position y (m).
    pub y0: S,
    /// Initial heading (rad).
    pub theta0: S,
    /// Initial speed (m/s).
    pub v0: S,
    /// Initial rotation speed (rad/s), acceleration-steered plant only.
    pub phi0: S,
    /// Initial auxiliary value `a₁(0)`.
    pub a1_0: S,
    /// Initial auxiliary rate `π₁,₂(0)` (two-integrator chain only).
    pub pi12_0: S,
    /// Initial auxiliary value `a₂(0)` (second chain only).
    pub a2_0: S,
    /// Control interval (s).
    pub dt: S,
    /// Run length (s).
    pub horizon: S,
}

impl<S: Scalar> UnicycleParams<S> {
    /// Benchmark setup for the speed-steered plant: start at `(−3, 0)`
    /// heading along `+x`, obstacle at the origin, target at
    /// `(1.5, 0)`, stiff cascade gains.
    pub fn benchmark() -> Self {
        Self {
            mass: real(1650.0),
            x_o: real(0.0),
            y_o: real(0.0),
            r_o: real(1.0),
            x_d: real(1.5),
            y_d: real(0.0),
            r_d: real(0.1),
            u1_max: real(5.0),
            u2_max: real(8250.0),
            k1: real(10.0),
            k2: real(10.0),
            l11: real(0.1),
            l12: real(0.1),
            l21: real(0.1),
            w1: real(1000.0),
            w2: real(1000.0),
            q: real(1e5),
            a_1w: real(0.0),
            a_2w: real(0.0),
            c3: real(10.0),
            margin: real(1e-10),
            x0: real(-3.0),
            y0: real(0.0),
            theta0: real(0.0),
            v0: real(2.0),
            phi0: real(0.01),
            a1_0: real(0.1),
            pi12_0: real(0.1),
            a2_0: real(0.1),
            dt: real(0.1),
            horizon: real(10.0),
        }
    }

    /// Setup for the state-coupled auxiliary function `a₁ + v + θ` on
    /// the speed-steered plant.
    pub fn sum_coupled() -> Self {
        Self {
            a1_0: real(50.0),
            l11: real(0.5),
            ..Self::benchmark()
        }
    }

    /// Setup for the mixed-relative-degree plant: start at `(−4, 0)`,
    /// target at `(3, 0)` with a wider radius, fine control interval.
    pub fn mixed_degree() -> Self {
        Self {
            x_d: real(3.0),
            r_d: real(0.2),
            k1: real(0.1),
            l11: real(0.1),
            w1: real(1.0),
            q: real(1e3),
            x0: real(-4.0),
            a1_0: real(0.1),
            dt: real(0.01),
            horizon: real(5.0),
            ..Self::benchmark()
        }
    }

    /// Checks the structural invariants the derivations rely on.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: &str| Err(ScenarioError::InitialMembership(msg.to_string()));
        if !(self.mass > S::zero()) {
            return bad("vehicle mass must be positive");
        }
        if !(self.r_o > S::zero()) {
            return bad("obstacle radius must be positive");
        }
        if !(self.r_d > S::zero()) {
            return bad("target radius must be positive");
        }
        if !(self.u1_max > S::zero() && self.u2_max > S::zero()) {
            return bad("control bounds must be positive");
        }
        if !(self.dt > S::zero()) {
            return bad("control interval must be positive");
        }
        if self.horizon < S::zero() {
            return bad("horizon must be nonnegative");
        }
        let dx = self.x0 - self.x_o;
        let dy = self.y0 - self.y_o;
        if !(dx * dx + dy * dy > self.r_o * self.r_o) {
            return bad("initial position must lie strictly outside the obstacle");
        }
        Ok(())
    }
}

/// Which unicycle controller the scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnicycleVariant {
    /// Plain high-order cascade on the speed-steered plant.
    Hocbf,
    /// One auxiliary function `a₁(t)` (two-integrator chain).
    Avcbf1,
    /// Two auxiliary functions `a₁(t)`, `a₂(t)`.
    Avcbf2,
    /// State-coupled auxiliary function `a₁ + v + θ`, collapsing the
    /// cascade to a single relative-degree-one row.
    AvcbfR,
    /// State-coupled auxiliary function `a₁ + v + φ` on the
    /// acceleration-steered plant (mixed relative degree).
    AvcbfM,
}

impl UnicycleVariant {
    /// Registry identifier of the variant.
    pub fn id(&self) -> &'static str {
        match self {
            UnicycleVariant::Hocbf => "uni_hocbf",
            UnicycleVariant::Avcbf1 => "uni_avcbf1",
            UnicycleVariant::Avcbf2 => "uni_avcbf2",
            UnicycleVariant::AvcbfR => "uni_avcbf_r",
            UnicycleVariant::AvcbfM => "uni_avcbf_m",
        }
    }

    /// True for the acceleration-steered five-state plant.
    fn mixed(&self) -> bool {
        matches!(self, UnicycleVariant::AvcbfM)
    }
}

/// Obstacle geometry of one state: clearance `b`, its drift derivative
/// `ḃ`, and the two trigonometric alignment factors that carry the
/// controls into `b̈`.
struct Clearance<S> {
    b: S,
    bdot: S,
    /// `(x−x_o)·cosθ + (y−y_o)·sinθ` — radial alignment of the motion.
    align: S,
    /// `(y−y_o)·cosθ − (x−x_o)·sinθ` — tangential alignment.
    cross: S,
    v: S,
}

/// A complete unicycle scenario: plant, auxiliary structure, row
/// builders and cost for one controller variant.
pub struct UnicycleScenario<S: Scalar> {
    params: UnicycleParams<S>,
    variant: UnicycleVariant,
    dynamics: AffineDynamics<S>,
    chains: Vec<AuxiliaryChain<S>>,
}

impl<S: Scalar> UnicycleScenario<S> {
    /// Builds the scenario, validating parameters first.
    pub fn new(params: UnicycleParams<S>, variant: UnicycleVariant) -> Result<Self, ScenarioError> {
        params.validate()?;
        let mass = params.mass;
        let dynamics = if variant.mixed() {
            AffineDynamics::new(
                5,
                2,
                |x: &[S]| {
                    vec![
                        x[4] * x[2].cos(),
                        x[4] * x[2].sin(),
                        x[3],
                        S::zero(),
                        S::zero(),
                    ]
                },
                move |_x: &[S]| {
                    Matrix::from_rows(&[
                        &[S::zero(), S::zero()],
                        &[S::zero(), S::zero()],
                        &[S::zero(), S::zero()],
                        &[S::one(), S::zero()],
                        &[S::zero(), S::one() / mass],
                    ])
                },
            )
        } else {
            AffineDynamics::new(
                4,
                2,
                |x: &[S]| vec![x[3] * x[2].cos(), x[3] * x[2].sin(), S::zero(), S::zero()],
                move |_x: &[S]| {
                    Matrix::from_rows(&[
                        &[S::zero(), S::zero()],
                        &[S::zero(), S::zero()],
                        &[S::one(), S::zero()],
                        &[S::zero(), S::one() / mass],
                    ])
                },
            )
        };
        let chains = match variant {
            UnicycleVariant::Hocbf => Vec::new(),
            UnicycleVariant::Avcbf1 => vec![AuxiliaryChain::identity(
                1,
                vec![params.a1_0, params.pi12_0],
                vec![params.l11, params.l12],
                params.margin,
            )],
            UnicycleVariant::Avcbf2 => vec![
                AuxiliaryChain::identity(
                    1,
                    vec![params.a1_0, params.pi12_0],
                    vec![params.l11, params.l12],
                    params.margin,
                ),
                AuxiliaryChain::identity(2, vec![params.a2_0], vec![params.l21], params.margin),
            ],
            UnicycleVariant::AvcbfR | UnicycleVariant::AvcbfM => vec![AuxiliaryChain {
                index: 1,
                initial_states: vec![params.a1_0],
                gains: vec![params.l11],
                margin: params.margin,
                kind: AuxFnKind::SumWithStates,
            }],
        };
        Ok(Self {
            params,
            variant,
            dynamics,
            chains,
        })
    }

    /// Shared parameters.
    pub fn params(&self) -> &UnicycleParams<S> {
        &self.params
    }

    /// Controller variant.
    pub fn variant(&self) -> UnicycleVariant {
        self.variant
    }

    fn speed(&self, state: &AugmentedState<S>) -> S {
        if self.variant.mixed() {
            state.x[4]
        } else {
            state.x[3]
        }
    }

    fn clearance(&self, state: &AugmentedState<S>) -> Clearance<S> {
        let p = &self.params;
        let two = real::<S>(2.0);
        let dx = state.x[0] - p.x_o;
        let dy = state.x[1] - p.y_o;
        let theta = state.x[2];
        let v = self.speed(state);
        let align = dx * theta.cos() + dy * theta.sin();
        let cross = dy * theta.cos() - dx * theta.sin();
        Clearance {
            b: dx * dx + dy * dy - p.r_o * p.r_o,
            bdot: two * v * align,
            align,
            cross,
            v,
        }
    }

    /// State-coupled auxiliary value: `a₁ + v + θ` on the speed-steered
    /// plant, `a₁ + v + φ` on the acceleration-steered plant.
    fn coupled_aux(&self, state: &AugmentedState<S>) -> S {
        let a1 = state.chains[0][0];
        if self.variant.mixed() {
            a1 + state.x[4] + state.x[3]
        } else {
            a1 + state.x[3] + state.x[2]
        }
    }

    /// Target bearing from the current position.
    fn bearing(&self, state: &AugmentedState<S>) -> S {
        let p = &self.params;
        (p.y_d - state.x[1]).atan2(p.x_d - state.x[0])
    }

    /// Heading Lyapunov row. On the speed-steered plant
    /// `V = (θ − θ_d)²` with the bearing frozen over the step, so the
    /// drift term vanishes and only `u₁` appears. On the
    /// acceleration-steered plant the heading responds to `u₁` one
    /// integration later, so `V = (0.1(θ − θ_d) + φ)²` blends the
    /// heading error with the rotation speed.
    fn heading_clf_row(&self, state: &AugmentedState<S>, dim: usize, delta_index: usize) -> ConstraintRow<S> {
        let p = &self.params;
        let two = real::<S>(2.0);
        let diff = state.x[2] - self.bearing(state);
        if self.variant.mixed() {
            let blend = real::<S>(0.1);
            let phi = state.x[3];
            let s = blend * diff + phi;
            let lf_v = two * s * blend * phi;
            build_clf_row(lf_v, &[two * s, S::zero()], p.c3, s * s, dim, &[0, 1], delta_index)
        } else {
            build_clf_row(
                S::zero(),
                &[two * diff, S::zero()],
                p.c3,
                diff * diff,
                dim,
                &[0, 1],
                delta_index,
            )
        }
    }

    fn bound_rows(&self, dim: usize) -> Result<Vec<ConstraintRow<S>>, ScenarioError> {
        let p = &self.params;
        Ok(build_control_bound_rows(
            &[-p.u1_max, -p.u2_max],
            &[p.u1_max, p.u2_max],
            dim,
            &[0, 1],
        )?)
    }
}

impl<S: Scalar> Scenario<S> for UnicycleScenario<S> {
    fn name(&self) -> String {
        self.variant.id().to_string()
    }

    fn state_names(&self) -> Vec<String> {
        if self.variant.mixed() {
            vec!["x".into(), "y".into(), "theta".into(), "phi".into(), "v".into()]
        } else {
            vec!["x".into(), "y".into(), "theta".into(), "v".into()]
        }
    }

    fn chain_state_names(&self) -> Vec<String> {
        match self.variant {
            UnicycleVariant::Hocbf => Vec::new(),
            UnicycleVariant::Avcbf1 => vec!["a1".into(), "pi12".into()],
            UnicycleVariant::Avcbf2 => vec!["a1".into(), "pi12".into(), "a2".into()],
            UnicycleVariant::AvcbfR | UnicycleVariant::AvcbfM => vec!["a1".into()],
        }
    }

    fn decision_names(&self) -> Vec<String> {
        match self.variant {
            UnicycleVariant::Hocbf => vec!["u1".into(), "u2".into(), "delta".into()],
            UnicycleVariant::Avcbf1 | UnicycleVariant::AvcbfR | UnicycleVariant::AvcbfM => {
                vec!["u1".into(), "u2".into(), "nu1".into(), "delta".into()]
            }
            UnicycleVariant::Avcbf2 => vec![
                "u1".into(),
                "u2".into(),
                "nu1".into(),
                "nu2".into(),
                "delta".into(),
            ],
        }
    }

    fn control_indices(&self) -> Vec<usize> {
        vec![0, 1]
    }

    fn chain_input_indices(&self) -> Vec<usize> {
        match self.variant {
            UnicycleVariant::Hocbf => Vec::new(),
            UnicycleVariant::Avcbf2 => vec![2, 3],
            _ => vec![2],
        }
    }

    fn slack_indices(&self) -> Vec<usize> {
        match self.variant {
            UnicycleVariant::Hocbf => vec![2],
            UnicycleVariant::Avcbf2 => vec![4],
            _ => vec![3],
        }
    }

    fn dynamics(&self) -> &AffineDynamics<S> {
        &self.dynamics
    }

    fn initial_state(&self) -> AugmentedState<S> {
        let p = &self.params;
        let x = if self.variant.mixed() {
            vec![p.x0, p.y0, p.theta0, p.phi0, p.v0]
        } else {
            vec![p.x0, p.y0, p.theta0, p.v0]
        };
        let chains = self
            .chains
            .iter()
            .map(|c| c.initial_states.clone())
            .collect();
        AugmentedState::new(x, chains)
    }

    fn dt(&self) -> S {
        self.params.dt
    }

    fn horizon(&self) -> S {
        self.params.horizon
    }

    fn barrier(&self, state: &AugmentedState<S>) -> S {
        self.clearance(state).b
    }

    fn psi_levels(&self, state: &AugmentedState<S>) -> Vec<S> {
        let p = &self.params;
        let c = self.clearance(state);
        match self.variant {
            UnicycleVariant::Hocbf => vec![c.b, c.bdot + p.k1 * c.b],
            UnicycleVariant::Avcbf1 => {
                let a1 = state.chains[0][0];
                let pi12 = state.chains[0][1];
                let psi0 = a1 * c.b;
                vec![psi0, pi12 * c.b + a1 * c.bdot + p.k1 * psi0]
            }
            UnicycleVariant::Avcbf2 => {
                let a1 = state.chains[0][0];
                let pi12 = state.chains[0][1];
                let a2 = state.chains[1][0];
                let psi0 = a1 * c.b;
                vec![psi0, a2 * (pi12 * c.b + a1 * c.bdot + p.k1 * psi0)]
            }
            UnicycleVariant::AvcbfR | UnicycleVariant::AvcbfM => {
                vec![self.coupled_aux(state) * c.b]
            }
        }
    }

    fn rows(&self, state: &AugmentedState<S>) -> Result<Vec<ConstraintRow<S>>, ScenarioError> {
        let p = &self.params;
        let two = real::<S>(2.0);
        let c = self.clearance(state);
        let mut rows = Vec::new();

        // b̈ = 2v² + 2·align·u₂/M + 2v·cross·u₁ on the speed-steered
        // plant; the two u-carrying factors reappear scaled in every
        // cascaded variant below.
        let u1_carrier = two * c.v * c.cross;
        let u2_carrier = two * c.align / p.mass;
        let b_ddot_drift = two * c.v * c.v;

        match self.variant {
            UnicycleVariant::Hocbf => {
                let dim = 3;
                let mut coeffs = vec![S::zero(); dim];
                coeffs[0] = u1_carrier;
                coeffs[1] = u2_carrier;
                let rest = b_ddot_drift + (p.k1 + p.k2) * c.bdot + p.k1 * p.k2 * c.b;
                rows.push(ConstraintRow {
                    coeffs,
                    rhs: -rest,
                    tag: RowTag::Barrier,
                    level_values: vec![c.b, c.bdot + p.k1 * c.b],
                });
                rows.push(self.heading_clf_row(state, dim, 2));
                rows.extend(self.bound_rows(dim)?);
            }
            UnicycleVariant::Avcbf1 => {
                let dim = 4;
                let a1 = state.chains[0][0];
                let pi12 = state.chains[0][1];
                let psi0 = a1 * c.b;
                let psi1 = pi12 * c.b + a1 * c.bdot + p.k1 * psi0;
                let mut coeffs = vec![S::zero(); dim];
                coeffs[0] = a1 * u1_carrier;
                coeffs[1] = a1 * u2_carrier;
                coeffs[2] = c.b;
                let rest = a1 * b_ddot_drift
                    + two * pi12 * c.bdot
                    + (p.k1 + p.k2) * (pi12 * c.b + a1 * c.bdot)
                    + p.k1 * p.k2 * a1 * c.b;
                rows.push(ConstraintRow {
                    coeffs,
                    rhs: -rest,
                    tag: RowTag::Barrier,
                    level_values: vec![psi0, psi1],
                });
                if let Some(row) = build_aux_chain_row(&self.chains[0], &state.chains[0], dim, 2)? {
                    rows.push(row);
                }
                rows.push(self.heading_clf_row(state, dim, 3));
                rows.extend(self.bound_rows(dim)?);
            }
            UnicycleVariant::Avcbf2 => {
                let dim = 5;
                let a1 = state.chains[0][0];
                let pi12 = state.chains[0][1];
                let a2 = state.chains[1][0];
                let psi0 = a1 * c.b;
                let inner = pi12 * c.b + a1 * c.bdot + p.k1 * psi0;
                let psi1 = a2 * inner;
                let mut coeffs = vec![S::zero(); dim];
                coeffs[0] = a2 * a1 * u1_carrier;
                coeffs[1] = a2 * a1 * u2_carrier;
                coeffs[2] = a2 * c.b;
                coeffs[3] = inner;
                let rest = a2
                    * (a1 * b_ddot_drift
                        + two * pi12 * c.bdot
                        + p.k1 * (pi12 * c.b + a1 * c.bdot))
                    + p.k2 * psi1;
                rows.push(ConstraintRow {
                    coeffs,
                    rhs: -rest,
                    tag: RowTag::Barrier,
                    level_values: vec![psi0, psi1],
                });
                if let Some(row) = build_aux_chain_row(&self.chains[0], &state.chains[0], dim, 2)? {
                    rows.push(row);
                }
                if let Some(row) = build_aux_chain_row(&self.chains[1], &state.chains[1], dim, 3)? {
                    rows.push(row);
                }
                rows.push(self.heading_clf_row(state, dim, 4));
                rows.extend(self.bound_rows(dim)?);
            }
            UnicycleVariant::AvcbfR | UnicycleVariant::AvcbfM => {
                let dim = 4;
                let aux = self.coupled_aux(state);
                // Ȧ = ν₁ + u₁ + u₂/M on both plants: the summed state is
                // θ (θ̇ = u₁) on the speed-steered plant and φ (φ̇ = u₁)
                // on the acceleration-steered one, while v̇ = u₂/M on
                // both. ψ̇₀ + k₁ψ₀ ≥ 0 with ψ₀ = A·b then carries every
                // input through Ȧ·b.
                let mut coeffs = vec![S::zero(); dim];
                coeffs[0] = c.b;
                coeffs[1] = c.b / p.mass;
                coeffs[2] = c.b;
                rows.push(ConstraintRow {
                    coeffs,
                    rhs: -(aux * c.bdot + p.k1 * aux * c.b),
                    tag: RowTag::Barrier,
                    level_values: vec![aux * c.b],
                });
                // Positivity of A itself: Ȧ + l₁,₁·A ≥ ε, assembled here
                // because Ȧ contains plant controls.
                let mut pos_coeffs = vec![S::zero(); dim];
                pos_coeffs[0] = S::one();
                pos_coeffs[1] = S::one() / p.mass;
                pos_coeffs[2] = S::one();
                rows.push(ConstraintRow {
                    coeffs: pos_coeffs,
                    rhs: self.chains[0].margin - p.l11 * aux,
                    tag: RowTag::AuxChain(1),
                    level_values: Vec::new(),
                });
                rows.push(self.heading_clf_row(state, dim, 3));
                rows.extend(self.bound_rows(dim)?);
            }
        }
        Ok(rows)
    }

    fn cost(&self, _state: &AugmentedState<S>, aux_targets: &[S]) -> CostSpec<S> {
        let p = &self.params;
        let two = real::<S>(2.0);
        match self.variant {
            UnicycleVariant::Hocbf => CostSpec {
                hessian: Matrix::from_diagonal(&[two, two, two * p.q]),
                linear: vec![S::zero(); 3],
                constant: S::zero(),
                var_names: self.decision_names(),
            },
            UnicycleVariant::Avcbf1 | UnicycleVariant::AvcbfR | UnicycleVariant::AvcbfM => {
                let t1 = aux_targets.first().copied().unwrap_or(p.a_1w);
                CostSpec {
                    hessian: Matrix::from_diagonal(&[two, two, two * p.w1, two * p.q]),
                    linear: vec![S::zero(), S::zero(), -two * p.w1 * t1, S::zero()],
                    constant: p.w1 * t1 * t1,
                    var_names: self.decision_names(),
                }
            }
            UnicycleVariant::Avcbf2 => {
                let t1 = aux_targets.first().copied().unwrap_or(p.a_1w);
                let t2 = aux_targets.get(1).copied().unwrap_or(p.a_2w);
                CostSpec {
                    hessian: Matrix::from_diagonal(&[
                        two,
                        two,
                        two * p.w1,
                        two * p.w2,
                        two * p.q,
                    ]),
                    linear: vec![
                        S::zero(),
                        S::zero(),
                        -two * p.w1 * t1,
                        -two * p.w2 * t2,
                        S::zero(),
                    ],
                    constant: p.w1 * t1 * t1 + p.w2 * t2 * t2,
                    var_names: self.decision_names(),
                }
            }
        }
    }

    fn default_aux_targets(&self) -> Vec<S> {
        match self.variant {
            UnicycleVariant::Hocbf => Vec::new(),
            UnicycleVariant::Avcbf2 => vec![self.params.a_1w, self.params.a_2w],
            _ => vec![self.params.a_1w],
        }
    }

    fn initial_membership(&self) -> Result<(), ScenarioError> {
        self.params.validate()?;
        let state = self.initial_state();
        for (i, level) in self.psi_levels(&state).iter().enumerate() {
            if !(*level >= S::zero()) {
                return Err(ScenarioError::InitialMembership(format!(
                    "barrier level {i} is {level} < 0 at the initial state"
                )));
            }
        }
        match self.variant {
            UnicycleVariant::Avcbf1 | UnicycleVariant::Avcbf2 => {
                for (chain, states) in self.chains.iter().zip(&state.chains) {
                    for (i, phi) in chain.positivity_levels(states)?.iter().enumerate() {
                        if !(*phi >= S::zero()) {
                            return Err(ScenarioError::InitialMembership(format!(
                                "auxiliary positivity level {i} of chain {} is {phi} < 0 initially",
                                chain.index
                            )));
                        }
                    }
                }
            }
            UnicycleVariant::AvcbfR | UnicycleVariant::AvcbfM => {
                let aux = self.coupled_aux(&state);
                if !(aux > S::zero()) {
                    return Err(ScenarioError::InitialMembership(format!(
                        "state-coupled auxiliary value {aux} must start positive"
                    )));
                }
            }
            UnicycleVariant::Hocbf => {}
        }
        Ok(())
    }

    fn target_reached(&self, state: &AugmentedState<S>) -> Option<bool> {
        let p = &self.params;
        let dx = state.x[0] - p.x_d;
        let dy = state.x[1] - p.y_d;
        Some(dx * dx + dy * dy <= p.r_d * p.r_d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn benchmark(variant: UnicycleVariant) -> UnicycleScenario<f64> {
        UnicycleScenario::new(UnicycleParams::benchmark(), variant).expect("valid parameters")
    }

    fn barrier_row(rows: &[ConstraintRow<f64>]) -> &ConstraintRow<f64> {
        rows.iter()
            .find(|r| r.tag == RowTag::Barrier)
            .expect("barrier row present")
    }

    #[test]
    fn clearance_matches_hand_values() {
        let sc = benchmark(UnicycleVariant::Hocbf);
        let state = sc.initial_state();
        // (x, y) = (−3, 0), r_o = 1 → b = 8; θ = 0, v = 2 → ḃ = −12.
        assert!((sc.barrier(&state) - 8.0).abs() < 1e-12);
        let levels = sc.psi_levels(&state);
        assert!((levels[0] - 8.0).abs() < 1e-12);
        assert!((levels[1] - 68.0).abs() < 1e-12);
    }

    #[test]
    fn plain_cascade_rows_match_hand_expansion() {
        let sc = benchmark(UnicycleVariant::Hocbf);
        let rows = sc.rows(&sc.initial_state()).unwrap();
        let row = barrier_row(&rows);
        // Head-on approach: the steering carrier 2v(dy·cosθ − dx·sinθ)
        // vanishes, the force carrier is 2·dx/M.
        assert!(row.coeffs[0].abs() < 1e-15);
        assert!((row.coeffs[1] - (-6.0 / 1650.0)).abs() < 1e-15);
        let rest = 8.0 + 20.0 * (-12.0) + 100.0 * 8.0;
        assert!((row.rhs - (-rest)).abs() < 1e-12);
    }

    #[test]
    fn off_axis_state_steers_through_both_inputs() {
        let sc = benchmark(UnicycleVariant::Hocbf);
        let mut state = sc.initial_state();
        state.x[2] = 0.3;
        let rows = sc.rows(&state).unwrap();
        let row = barrier_row(&rows);
        let (dx, dy, v) = (-3.0, 0.0, 2.0);
        let u1 = 2.0 * v * (dy * 0.3f64.cos() - dx * 0.3f64.sin());
        let u2 = 2.0 * (dx * 0.3f64.cos() + dy * 0.3f64.sin()) / 1650.0;
        assert!((row.coeffs[0] - u1).abs() < 1e-12);
        assert!((row.coeffs[1] - u2).abs() < 1e-15);
    }

    #[test]
    fn unit_auxiliary_degenerates_to_plain_cascade() {
        let adaptive = benchmark(UnicycleVariant::Avcbf1);
        let plain = benchmark(UnicycleVariant::Hocbf);
        let mut state = adaptive.initial_state();
        state.chains[0] = vec![1.0, 0.0];
        let a_rows = adaptive.rows(&state).unwrap();
        let p_rows = plain.rows(&plain.initial_state()).unwrap();
        let a = barrier_row(&a_rows);
        let p = barrier_row(&p_rows);
        assert!((a.coeffs[0] - p.coeffs[0]).abs() < 1e-15);
        assert!((a.coeffs[1] - p.coeffs[1]).abs() < 1e-15);
        assert!((a.rhs - p.rhs).abs() < 1e-12);
    }

    #[test]
    fn two_auxiliary_rows_match_hand_expansion() {
        let sc = benchmark(UnicycleVariant::Avcbf2);
        let state = sc.initial_state();
        let rows = sc.rows(&state).unwrap();
        let row = barrier_row(&rows);
        // a₁ = π₁,₂ = a₂ = 0.1: inner level π₁,₂b + a₁ḃ + k₁a₁b = 7.6,
        // ψ₁ = a₂·7.6 = 0.76.
        assert!((row.level_values[0] - 0.8).abs() < 1e-12);
        assert!((row.level_values[1] - 0.76).abs() < 1e-12);
        assert!((row.coeffs[2] - 0.8).abs() < 1e-12);
        assert!((row.coeffs[3] - 7.6).abs() < 1e-12);
        assert!((row.coeffs[1] - 0.01 * (-6.0) / 1650.0).abs() < 1e-15);
        // rest = a₂(2a₁v² + 2π₁,₂ḃ + k₁(π₁,₂b + a₁ḃ)) + k₂ψ₁
        let rest = 0.1 * (0.8 + 2.0 * 0.1 * (-12.0) + 10.0 * (0.8 - 1.2)) + 10.0 * 0.76;
        assert!((row.rhs - (-rest)).abs() < 1e-12);
        // Both positivity chains emit rows.
        assert!(rows.iter().any(|r| r.tag == RowTag::AuxChain(1)));
        assert!(rows.iter().any(|r| r.tag == RowTag::AuxChain(2)));
    }

    #[test]
    fn state_coupled_rows_match_hand_expansion() {
        let sc = UnicycleScenario::new(UnicycleParams::<f64>::sum_coupled(), UnicycleVariant::AvcbfR)
            .unwrap();
        let state = sc.initial_state();
        let rows = sc.rows(&state).unwrap();
        let row = barrier_row(&rows);
        // A = 50 + 2 + 0 = 52; b = 8, ḃ = −12, k₁ = 10.
        assert!((row.coeffs[0] - 8.0).abs() < 1e-12);
        assert!((row.coeffs[1] - 8.0 / 1650.0).abs() < 1e-15);
        assert!((row.coeffs[2] - 8.0).abs() < 1e-12);
        let rest = 52.0 * (-12.0) + 10.0 * 52.0 * 8.0;
        assert!((row.rhs - (-rest)).abs() < 1e-9);
        assert!((row.level_values[0] - 52.0 * 8.0).abs() < 1e-9);
        let pos = rows.iter().find(|r| r.tag == RowTag::AuxChain(1)).unwrap();
        assert_eq!(pos.coeffs[0], 1.0);
        assert!((pos.coeffs[1] - 1.0 / 1650.0).abs() < 1e-18);
        assert_eq!(pos.coeffs[2], 1.0);
        assert!((pos.rhs - (1e-10 - 0.5 * 52.0)).abs() < 1e-9);
    }

    #[test]
    fn mixed_degree_row_carries_both_inputs() {
        let sc = UnicycleScenario::new(
            UnicycleParams::<f64>::mixed_degree(),
            UnicycleVariant::AvcbfM,
        )
        .unwrap();
        let state = sc.initial_state();
        let rows = sc.rows(&state).unwrap();
        let row = barrier_row(&rows);
        // (x, y) = (−4, 0) → b = 15; A = 0.1 + 2 + 0.01 = 2.11;
        // ḃ = 2·2·(−4) = −16.
        assert!((row.coeffs[0] - 15.0).abs() < 1e-12);
        assert!((row.coeffs[1] - 15.0 / 1650.0).abs() < 1e-15);
        assert!((row.coeffs[2] - 15.0).abs() < 1e-12);
        let rest = 2.11 * (-16.0) + 0.1 * 2.11 * 15.0;
        assert!((row.rhs - (-rest)).abs() < 1e-12);
        assert!(row.coeffs[0].abs() > 1e-9 && row.coeffs[1].abs() > 1e-9);
    }

    #[test]
    fn mixed_degree_heading_row_blends_rotation_speed() {
        let sc = UnicycleScenario::new(
            UnicycleParams::<f64>::mixed_degree(),
            UnicycleVariant::AvcbfM,
        )
        .unwrap();
        let state = sc.initial_state();
        let rows = sc.rows(&state).unwrap();
        let clf = rows.iter().find(|r| r.tag == RowTag::Clf).unwrap();
        // Bearing from (−4, 0) to (3, 0) is 0, so s = 0.1·0 + φ = 0.01:
        // row −2s·u₁ + δ ≥ 0.2sφ + c₃s².
        assert!((clf.coeffs[0] - (-0.02)).abs() < 1e-15);
        assert_eq!(clf.coeffs[1], 0.0);
        assert_eq!(clf.coeffs[3], 1.0);
        assert!((clf.rhs - (0.2 * 0.01 * 0.01 + 10.0 * 1e-4)).abs() < 1e-15);
    }

    #[test]
    fn heading_row_uses_frozen_bearing() {
        let sc = benchmark(UnicycleVariant::Hocbf);
        let mut state = sc.initial_state();
        state.x[2] = 0.5;
        let rows = sc.rows(&state).unwrap();
        let clf = rows.iter().find(|r| r.tag == RowTag::Clf).unwrap();
        // Bearing from (−3, 0) to (1.5, 0) is 0 → diff = 0.5.
        assert!((clf.coeffs[0] - (-1.0)).abs() < 1e-12);
        assert!((clf.rhs - 10.0 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn target_membership_matches_hand_checks() {
        let sc = benchmark(UnicycleVariant::Hocbf);
        let mut state = sc.initial_state();
        state.x[0] = 1.5;
        state.x[1] = 0.0;
        assert_eq!(sc.target_reached(&state), Some(true));
        state.x[0] = 1.39;
        assert_eq!(sc.target_reached(&state), Some(false));
        state.x[0] = 1.41;
        assert_eq!(sc.target_reached(&state), Some(true));
    }

    #[test]
    fn membership_accepts_defaults_and_rejects_obstacle_starts() {
        for variant in [
            UnicycleVariant::Hocbf,
            UnicycleVariant::Avcbf1,
            UnicycleVariant::Avcbf2,
        ] {
            assert!(
                benchmark(variant).initial_membership().is_ok(),
                "{variant:?}"
            );
        }
        let r = UnicycleScenario::new(UnicycleParams::<f64>::sum_coupled(), UnicycleVariant::AvcbfR)
            .unwrap();
        assert!(r.initial_membership().is_ok());
        let m = UnicycleScenario::new(
            UnicycleParams::<f64>::mixed_degree(),
            UnicycleVariant::AvcbfM,
        )
        .unwrap();
        assert!(m.initial_membership().is_ok());

        let mut params = UnicycleParams::<f64>::benchmark();
        params.x0 = 0.5;
        params.y0 = 0.0;
        assert!(UnicycleScenario::new(params, UnicycleVariant::Hocbf).is_err());
    }

    #[test]
    fn bounds_and_cost_match_stated_limits() {
        let sc = benchmark(UnicycleVariant::Avcbf2);
        let rows = sc.rows(&sc.initial_state()).unwrap();
        let u1_lo = rows
            .iter()
            .find(|r| {
                r.tag
                    == RowTag::ControlBound {
                        index: 0,
                        upper: false,
                    }
            })
            .unwrap();
        assert_eq!(u1_lo.rhs, -5.0);
        let u2_hi = rows
            .iter()
            .find(|r| {
                r.tag
                    == RowTag::ControlBound {
                        index: 1,
                        upper: true,
                    }
            })
            .unwrap();
        assert_eq!(u2_hi.rhs, -8250.0);

        let cost = sc.cost(&sc.initial_state(), &sc.default_aux_targets());
        assert_eq!(cost.hessian.row(0)[0], 2.0);
        assert_eq!(cost.hessian.row(1)[1], 2.0);
        assert_eq!(cost.hessian.row(2)[2], 2000.0);
        assert_eq!(cost.hessian.row(3)[3], 2000.0);
        assert_eq!(cost.hessian.row(4)[4], 2e5);
        assert!(cost.linear.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn advance_moves_plant_toward_obstacle() {
        let sc = benchmark(UnicycleVariant::Avcbf1);
        let state = sc.initial_state();
        let next = sc.advance(&state, &[0.0, 0.0, 0.0, 0.0], 10).unwrap();
        // Straight-line coasting at v = 2 for dt = 0.1.
        assert!((next.x[0] - (-2.8)).abs() < 1e-12);
        assert!(next.x[1].abs() < 1e-12);
        assert!((next.x[3] - 2.0).abs() < 1e-12);
        // Chain drifts by its own rate: a₁ += π₁,₂·dt.
        assert!((next.chains[0][0] - 0.11).abs() < 1e-15);
    }
}
