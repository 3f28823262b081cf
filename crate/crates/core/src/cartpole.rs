//! Single-pole cart dynamics with two discrete pushes.
//!
//! Uses Wieland's pole-on-cart equations with the angular acceleration sign
//! reversed, so an unforced pole tilted by `theta` accelerates further in the
//! direction of `theta`. Integration is forward Euler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-range of the uniform start distribution for `x` and `theta`.
pub const START_HALF_RANGE: f64 = 0.05;

/// Reward emitted on the failing step.
pub const FAILURE_REWARD: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsParams {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_half_length: f64,
    pub force_magnitude: f64,
    pub track_half_width: f64,
    pub fail_angle: f64,
    pub timestep: f64,
    pub friction_cart: f64,
    pub friction_pole: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            gravity: 9.81,
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_half_length: 0.5,
            force_magnitude: 25.0,
            track_half_width: 2.4,
            fail_angle: 36f64.to_radians(),
            timestep: 0.02,
            friction_cart: 0.0,
            friction_pole: 0.0,
        }
    }
}

impl PhysicsParams {
    pub fn with_force(mut self, newtons: f64) -> Self {
        self.force_magnitude = newtons;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("physics.gravity", self.gravity),
            ("physics.cart_mass", self.cart_mass),
            ("physics.pole_mass", self.pole_mass),
            ("physics.pole_half_length", self.pole_half_length),
            ("physics.force_magnitude", self.force_magnitude),
            ("physics.track_half_width", self.track_half_width),
            ("physics.timestep", self.timestep),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.fail_angle > 0.0 && self.fail_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::config(
                "physics.fail_angle",
                format!("must lie in (0, pi/2) radians, got {}", self.fail_angle),
            ));
        }
        for (field, v) in [
            ("physics.friction_cart", self.friction_cart),
            ("physics.friction_pole", self.friction_pole),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(
                    field,
                    format!("must be non-negative, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartState {
    pub x: f64,
    pub x_dot: f64,
    pub x_ddot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub theta_ddot: f64,
}

impl CartState {
    pub fn upright() -> Self {
        Self::default()
    }

    pub fn with_pose(x: f64, theta: f64) -> Self {
        Self {
            x,
            theta,
            ..Self::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.x,
            self.x_dot,
            self.x_ddot,
            self.theta,
            self.theta_dot,
            self.theta_ddot,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    pub fn is_failure(&self, params: &PhysicsParams) -> bool {
        self.x.abs() > params.track_half_width || self.theta.abs() > params.fail_angle
    }
}

/// The two pushes available to the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    PushLeft,
    PushRight,
}

impl Action {
    pub const COUNT: usize = 2;

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Action::PushLeft),
            1 => Some(Action::PushRight),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Action::PushLeft => 0,
            Action::PushRight => 1,
        }
    }

    pub fn force(self, params: &PhysicsParams) -> f64 {
        match self {
            Action::PushLeft => -params.force_magnitude,
            Action::PushRight => params.force_magnitude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: CartState,
    pub reward: f64,
    pub failed: bool,
}

/// Start state with `x` and `theta` uniform in `[-0.05, 0.05]`, everything else zero.
pub fn reset(seed: u64) -> CartState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    reset_with(&mut rng)
}

pub fn reset_with<R: Rng + ?Sized>(rng: &mut R) -> CartState {
    let x = rng.gen_range(-START_HALF_RANGE..=START_HALF_RANGE);
    let theta = rng.gen_range(-START_HALF_RANGE..=START_HALF_RANGE);
    CartState::with_pose(x, theta)
}

/// `(x_ddot, theta_ddot)` for the given state and applied horizontal force.
pub fn accelerations(state: &CartState, force: f64, params: &PhysicsParams) -> (f64, f64) {
    let PhysicsParams {
        gravity: g,
        cart_mass,
        pole_mass: m,
        pole_half_length: l,
        friction_cart,
        friction_pole,
        ..
    } = *params;
    let (sin, cos) = state.theta.sin_cos();
    let pole_friction = friction_pole * state.theta_dot / (m * l);
    let effective_force = m * l * state.theta_dot * state.theta_dot * sin
        + 0.75 * m * cos * (pole_friction + g * sin);
    let effective_mass = m * (1.0 - 0.75 * cos * cos);
    let x_ddot = (force - friction_cart * sign(state.x_dot) + effective_force)
        / (cart_mass + effective_mass);
    let theta_ddot = 0.75 * (x_ddot * cos + g * sin + pole_friction) / l;
    (x_ddot, theta_ddot)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Advances one Euler step under an arbitrary horizontal force.
///
/// The agent only reaches this through [`step`]; a zero force is used by the
/// uncontrolled baseline and by tests.
pub fn step_with_force(
    state: &CartState,
    force: f64,
    params: &PhysicsParams,
) -> Result<StepOutcome> {
    if !state.is_finite() {
        return Err(Error::NonFinite("cart state"));
    }
    let (x_ddot, theta_ddot) = accelerations(state, force, params);
    let dt = params.timestep;
    let next_state = CartState {
        x: state.x + dt * state.x_dot,
        x_dot: state.x_dot + dt * x_ddot,
        x_ddot,
        theta: state.theta + dt * state.theta_dot,
        theta_dot: state.theta_dot + dt * theta_ddot,
        theta_ddot,
    };
    let failed = next_state.is_failure(params);
    Ok(StepOutcome {
        next_state,
        reward: if failed { FAILURE_REWARD } else { 0.0 },
        failed,
    })
}

pub fn step(state: &CartState, action: Action, params: &PhysicsParams) -> Result<StepOutcome> {
    step_with_force(state, action.force(params), params)
}

/// Steps survived with no force applied, counting the failing step, capped at `step_cap`.
pub fn free_fall_steps(start: CartState, params: &PhysicsParams, step_cap: usize) -> Result<usize> {
    let mut state = start;
    for n in 1..=step_cap {
        let out = step_with_force(&state, 0.0, params)?;
        if out.failed {
            return Ok(n);
        }
        state = out.next_state;
    }
    Ok(step_cap)
}

/// Mean uncontrolled episode length over `episodes` seeded starts.
pub fn free_fall_baseline(
    params: &PhysicsParams,
    seed: u64,
    episodes: usize,
    step_cap: usize,
) -> Result<f64> {
    if episodes == 0 {
        return Err(Error::config("episodes", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0usize;
    for _ in 0..episodes {
        total += free_fall_steps(reset_with(&mut rng), params, step_cap)?;
    }
    Ok(total as f64 / episodes as f64)
}
