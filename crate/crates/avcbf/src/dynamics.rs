//! Plant integration under zero-order-hold controls.
//!
//! Plants are control-affine, `ẋ = f(x) + g(x)·u`. Between control
//! updates the input is held constant and the plant is advanced with the
//! classical fixed-step fourth-order Runge–Kutta scheme. Auxiliary
//! chains are pure integrator cascades driven by a held input, so they
//! are advanced with their exact polynomial solution instead.

use thiserror::Error;

use crate::numkit::Matrix;
use crate::scalar::{real, Scalar};

/// Errors from plant integration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    /// A derivative or state became NaN/infinite.
    #[error("non-finite state produced during integration")]
    NonFinite,
    /// Input sizes do not match the declared dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Control-affine plant `ẋ = f(x) + g(x)·u`.
pub struct AffineDynamics<S> {
    /// State dimension.
    pub dim_x: usize,
    /// Control dimension.
    pub dim_u: usize,
    drift: Box<dyn Fn(&[S]) -> Vec<S> + Send + Sync>,
    input_map: Box<dyn Fn(&[S]) -> Matrix<S> + Send + Sync>,
}

impl<S: Scalar> AffineDynamics<S> {
    /// Creates a plant from its drift `f` and input map `g` (returned as
    /// a `dim_x × dim_u` matrix).
    pub fn new(
        dim_x: usize,
        dim_u: usize,
        drift: impl Fn(&[S]) -> Vec<S> + Send + Sync + 'static,
        input_map: impl Fn(&[S]) -> Matrix<S> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim_x,
            dim_u,
            drift: Box::new(drift),
            input_map: Box::new(input_map),
        }
    }

    /// Full derivative `f(x) + g(x)·u`.
    pub fn xdot(&self, x: &[S], u: &[S]) -> Result<Vec<S>, DynamicsError> {
        if x.len() != self.dim_x || u.len() != self.dim_u {
            return Err(DynamicsError::DimensionMismatch(format!(
                "state {} / control {} vs declared {} / {}",
                x.len(),
                u.len(),
                self.dim_x,
                self.dim_u
            )));
        }
        let mut dx = (self.drift)(x);
        let g = (self.input_map)(x);
        let gu = g.matvec(u);
        for (d, gu_i) in dx.iter_mut().zip(gu) {
            *d = *d + gu_i;
        }
        Ok(dx)
    }
}

/// Default number of integrator substeps per control interval.
pub const DEFAULT_SUBSTEPS: usize = 10;

/// One classical fourth-order Runge–Kutta step of `ẋ = f(x)`.
pub fn rk4_step<S: Scalar>(f: &dyn Fn(&[S]) -> Vec<S>, x: &[S], dt: S) -> Vec<S> {
    let half = real::<S>(0.5);
    let sixth = S::one() / real::<S>(6.0);
    let two = real::<S>(2.0);

    let k1 = f(x);
    let x2: Vec<S> = x.iter().zip(&k1).map(|(&xi, &k)| xi + half * dt * k).collect();
    let k2 = f(&x2);
    let x3: Vec<S> = x.iter().zip(&k2).map(|(&xi, &k)| xi + half * dt * k).collect();
    let k3 = f(&x3);
    let x4: Vec<S> = x.iter().zip(&k3).map(|(&xi, &k)| xi + dt * k).collect();
    let k4 = f(&x4);

    x.iter()
        .enumerate()
        .map(|(i, &xi)| xi + dt * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect()
}

/// Advances `ẋ = f(x) + g(x)·u` by `dt` under a held control, splitting
/// the interval into `substeps` RK4 steps.
pub fn step_plant<S: Scalar>(
    dynamics: &AffineDynamics<S>,
    x: &[S],
    u: &[S],
    dt: S,
    substeps: usize,
) -> Result<Vec<S>, DynamicsError> {
    let n = substeps.max(1);
    let h = dt / real::<S>(n as f64);
    let mut state = x.to_vec();
    let f = |x: &[S]| -> Vec<S> {
        dynamics
            .xdot(x, u)
            .expect("dimensions checked before integration")
    };
    // Pre-check dimensions once so the closure cannot panic.
    dynamics.xdot(x, u)?;
    for _ in 0..n {
        state = rk4_step(&f, &state, h);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFinite);
        }
    }
    Ok(state)
}

/// Advances an integrator chain `π̇ⱼ = πⱼ₊₁`, `π̇_q = ν` by `dt` using the
/// exact polynomial solution under the held input.
pub fn step_chain<S: Scalar>(states: &[S], nu: S, dt: S) -> Vec<S> {
    let q = states.len();
    (0..q)
        .map(|j| {
            let mut value = S::zero();
            let mut pow = S::one(); // dt^(i−j) / (i−j)!
            for (k, &s) in states[j..].iter().enumerate() {
                value = value + s * pow;
                pow = pow * dt / real::<S>((k + 1) as f64);
            }
            value + nu * pow
        })
        .collect()
}

/// Plant state, auxiliary chain states, and time.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState<S> {
    /// Plant state `x`.
    pub x: Vec<S>,
    /// Auxiliary chain states, one vector per chain.
    pub chains: Vec<Vec<S>>,
    /// Time.
    pub t: S,
}

impl<S: Scalar> AugmentedState<S> {
    /// Creates a state at `t = 0`.
    pub fn new(x: Vec<S>, chains: Vec<Vec<S>>) -> Self {
        Self {
            x,
            chains,
            t: S::zero(),
        }
    }

    /// All chain states flattened in chain order.
    pub fn flat_chains(&self) -> Vec<S> {
        self.chains.iter().flatten().copied().collect()
    }
}

/// Advances plant and chains together by one control interval: the plant
/// by RK4 under the held `u`, each chain by its exact polynomial update
/// under the held `nu`, and time by `dt`.
pub fn step_augmented<S: Scalar>(
    dynamics: &AffineDynamics<S>,
    state: &AugmentedState<S>,
    u: &[S],
    nu: &[S],
    dt: S,
    substeps: usize,
) -> Result<AugmentedState<S>, DynamicsError> {
    if nu.len() != state.chains.len() {
        return Err(DynamicsError::DimensionMismatch(format!(
            "{} chain inputs for {} chains",
            nu.len(),
            state.chains.len()
        )));
    }
    let x = step_plant(dynamics, &state.x, u, dt, substeps)?;
    let chains: Vec<Vec<S>> = state
        .chains
        .iter()
        .zip(nu)
        .map(|(c, &v)| step_chain(c, v, dt))
        .collect();
    if chains.iter().flatten().any(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFinite);
    }
    Ok(AugmentedState {
        x,
        chains,
        t: state.t + dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> AffineDynamics<f64> {
        AffineDynamics::new(
            1,
            1,
            |x: &[f64]| vec![-x[0]],
            |_x: &[f64]| Matrix::zeros(1, 1),
        )
    }

    #[test]
    fn rk4_single_step_on_exponential_decay() {
        // ẋ = −x, x(0) = 1, dt = 0.1 → 0.90483742 within 1e-7.
        let f = |x: &[f64]| vec![-x[0]];
        let x1 = rk4_step(&f, &[1.0], 0.1);
        assert!((x1[0] - 0.904_837_42).abs() < 1e-7, "x1 = {}", x1[0]);
    }

    #[test]
    fn rk4_is_exact_on_held_integrator() {
        // ẋ = u with u held: x(t+dt) = x + u·dt exactly.
        let plant = AffineDynamics::new(
            1,
            1,
            |_x: &[f64]| vec![0.0],
            |_x: &[f64]| {
                let mut g = Matrix::zeros(1, 1);
                g[(0, 0)] = 1.0;
                g
            },
        );
        let x1 = step_plant(&plant, &[2.0], &[3.0], 0.25, 10).unwrap();
        assert!((x1[0] - (2.0 + 3.0 * 0.25)).abs() < 1e-13);
    }

    #[test]
    fn rk4_convergence_order_is_at_least_3_8() {
        // Integrate ẋ = −x over [0, 1] at two resolutions and compare
        // errors against e⁻¹.
        let plant = decay();
        let exact = (-1.0f64).exp();
        let run = |steps: usize| -> f64 {
            let mut x = vec![1.0];
            let dt = 1.0 / steps as f64;
            for _ in 0..steps {
                x = step_plant(&plant, &x, &[0.0], dt, 1).unwrap();
            }
            (x[0] - exact).abs()
        };
        let e1 = run(10);
        let e2 = run(20);
        let order = (e1 / e2).log2();
        assert!(order >= 3.8, "observed order {order}");
    }

    #[test]
    fn zoh_stepping_is_bit_deterministic() {
        let plant = decay();
        let a = step_plant(&plant, &[1.0], &[0.0], 0.1, 10).unwrap();
        let b = step_plant(&plant, &[1.0], &[0.0], 0.1, 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_state_chain_polynomial_update() {
        // (a, ȧ) = (1, 1), ν = 2, dt = 0.1 → (1.11, 1.2) exactly.
        let next = step_chain(&[1.0_f64, 1.0], 2.0, 0.1);
        assert!((next[0] - 1.11).abs() < 1e-15);
        assert!((next[1] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn single_state_chain_is_a_plain_integrator() {
        // a = 50, ν = −10, dt = 0.1 → 49.
        let next = step_chain(&[50.0_f64], -10.0, 0.1);
        assert!((next[0] - 49.0).abs() < 1e-15);
    }

    #[test]
    fn chain_update_matches_taylor_polynomial_to_machine_precision() {
        // Three-state chain: closed form vs explicit Taylor expansion.
        let (p1, p2, p3, nu, dt) = (0.3_f64, -0.7, 2.0, 1.5, 0.05);
        let next = step_chain(&[p1, p2, p3], nu, dt);
        let d2 = dt * dt / 2.0;
        let d3 = dt * dt * dt / 6.0;
        assert!((next[0] - (p1 + p2 * dt + p3 * d2 + nu * d3)).abs() < 1e-16);
        assert!((next[1] - (p2 + p3 * dt + nu * d2)).abs() < 1e-16);
        assert!((next[2] - (p3 + nu * dt)).abs() < 1e-16);
    }

    #[test]
    fn augmented_step_moves_plant_chains_and_time() {
        let plant = decay();
        let state = AugmentedState::new(vec![1.0], vec![vec![1.0, 1.0]]);
        let next = step_augmented(&plant, &state, &[0.0], &[2.0], 0.1, 10).unwrap();
        assert!((next.x[0] - 0.9048374180359595).abs() < 1e-9);
        assert!((next.chains[0][0] - 1.11).abs() < 1e-15);
        assert!((next.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn non_finite_states_are_flagged() {
        let blowup = AffineDynamics::new(
            1,
            1,
            |x: &[f64]| vec![x[0] * x[0] * 1e200],
            |_x: &[f64]| Matrix::zeros(1, 1),
        );
        let err = step_plant(&blowup, &[1e200], &[0.0], 1.0, 2).unwrap_err();
        assert_eq!(err, DynamicsError::NonFinite);
    }

    #[test]
    fn chain_input_count_must_match() {
        let plant = decay();
        let state = AugmentedState::new(vec![1.0], vec![vec![1.0]]);
        assert!(matches!(
            step_augmented(&plant, &state, &[0.0], &[], 0.1, 1),
            Err(DynamicsError::DimensionMismatch(_))
        ));
    }
}
