//! Sign-split observation vector.
//!
//! Each of the six physical quantities `(x, x_dot, x_ddot, theta, theta_dot,
//! theta_ddot)` owns two slots: slot `2i` carries a non-negative value and
//! slot `2i + 1` a negative one, both as magnitudes. Linear quantities are
//! divided by 20; angular ones are converted to degrees and divided by 60.

use crate::cartpole::CartState;
use crate::error::{Error, Result};

pub const PARAMETER_COUNT: usize = 6;
pub const OBSERVATION_WIDTH: usize = 2 * PARAMETER_COUNT;

pub const LINEAR_SCALE: f64 = 20.0;
pub const ANGULAR_SCALE: f64 = 60.0;

/// Divisor for each parameter, in encoding order.
pub const SCALES: [f64; PARAMETER_COUNT] = [
    LINEAR_SCALE,
    LINEAR_SCALE,
    LINEAR_SCALE,
    ANGULAR_SCALE,
    ANGULAR_SCALE,
    ANGULAR_SCALE,
];

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector {
    values: [f64; OBSERVATION_WIDTH],
}

impl ObservationVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn values(&self) -> &[f64; OBSERVATION_WIDTH] {
        &self.values
    }

    /// Magnitude of parameter `i` as stored, before rescaling.
    pub fn magnitude(&self, i: usize) -> f64 {
        self.values[2 * i] + self.values[2 * i + 1]
    }
}

impl AsRef<[f64]> for ObservationVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Physical parameters in encoding order, angles in degrees.
pub fn raw_parameters(state: &CartState) -> [f64; PARAMETER_COUNT] {
    [
        state.x,
        state.x_dot,
        state.x_ddot,
        state.theta.to_degrees(),
        state.theta_dot.to_degrees(),
        state.theta_ddot.to_degrees(),
    ]
}

pub fn encode(state: &CartState) -> Result<ObservationVector> {
    if !state.is_finite() {
        return Err(Error::NonFinite("cart state"));
    }
    let mut values = [0.0; OBSERVATION_WIDTH];
    for (i, (v, scale)) in raw_parameters(state).iter().zip(SCALES).enumerate() {
        let slot = if *v >= 0.0 { 2 * i } else { 2 * i + 1 };
        values[slot] = v.abs() / scale;
    }
    Ok(ObservationVector { values })
}
