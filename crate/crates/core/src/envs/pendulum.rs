use std::f64::consts::PI;

use rand::Rng as _;

use super::{ActionBounds, Dynamics};
use crate::rng::Rng;

/// Torque-limited pendulum swing-up with the classic rod dynamics.
///
/// State `(theta, omega)` with `theta = 0` upright and wrapped to `[-pi, pi)`.
/// `omega' = clip(omega + dt (3g/(2l) sin theta + 3/(m l^2) u), +-max_speed)`,
/// `theta' = wrap(theta + dt omega')`.
#[derive(Clone, Debug)]
pub struct Pendulum {
    pub g: f64,
    pub m: f64,
    pub l: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub max_steps: usize,
    /// Energy-pumping gain of the expert.
    pub pump_gain: f64,
    /// |theta| below which the expert switches to PD capture.
    pub capture_angle: f64,
    pub capture_kp: f64,
    pub capture_kd: f64,
    bounds: ActionBounds,
}

impl Default for Pendulum {
    fn default() -> Self {
        Pendulum {
            g: 10.0,
            m: 1.0,
            l: 1.0,
            dt: 0.05,
            max_speed: 8.0,
            max_steps: 200,
            pump_gain: 1.0,
            capture_angle: 0.6,
            capture_kp: 12.0,
            capture_kd: 3.0,
            bounds: ActionBounds::symmetric(1, 2.0),
        }
    }
}

pub(crate) fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Pendulum {
    /// Mechanical energy relative to resting upright (zero there, negative below).
    pub fn energy(&self, theta: f64, omega: f64) -> f64 {
        let inertia = self.m * self.l * self.l / 3.0;
        0.5 * inertia * omega * omega + self.m * self.g * 0.5 * self.l * (theta.cos() - 1.0)
    }
}

impl Dynamics for Pendulum {
    fn name(&self) -> &'static str {
        "Pendulum"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn action_bounds(&self) -> &ActionBounds {
        &self.bounds
    }

    fn max_steps(&self) -> usize {
        self.max_steps
    }

    fn initial_state(&self, rng: &mut Rng) -> Vec<f64> {
        vec![rng.random_range(-PI..PI), 0.0]
    }

    fn advance(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        let accel = 3.0 * self.g / (2.0 * self.l) * s[0].sin()
            + 3.0 / (self.m * self.l * self.l) * a[0];
        let omega = (s[1] + self.dt * accel).clamp(-self.max_speed, self.max_speed);
        vec![wrap_angle(s[0] + self.dt * omega), omega]
    }

    fn reward(&self, s: &[f64], a: &[f64]) -> f64 {
        let th = wrap_angle(s[0]);
        -(th * th + 0.1 * s[1] * s[1] + 0.001 * a[0] * a[0])
    }

    fn speed(&self, s: &[f64]) -> f64 {
        s[1].abs()
    }

    fn expert_action(&self, s: &[f64]) -> Vec<f64> {
        let (th, om) = (wrap_angle(s[0]), s[1]);
        let u = if th.abs() < self.capture_angle {
            -self.capture_kp * th - self.capture_kd * om
        } else if om.abs() < 1e-3 {
            // kick off the (unstable for the pump) resting point
            if th >= 0.0 {
                -2.0
            } else {
                2.0
            }
        } else {
            -self.pump_gain * self.energy(th, om) * om.signum() * 10.0
        };
        vec![u]
    }

    fn expert_threshold(&self) -> f64 {
        -400.0
    }

    fn velocity_threshold(&self) -> f64 {
        1.0
    }
}
