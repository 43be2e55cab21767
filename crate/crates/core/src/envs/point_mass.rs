use rand::Rng as _;

use super::{ActionBounds, Dynamics};
use crate::rng::Rng;

/// Planar point mass pushed toward a goal.
///
/// State `(px, py, vx, vy)`, action a force in `[-1, 1]^2`. Semi-implicit
/// Euler: `v' = v + dt (a - drag v)`, `p' = p + dt v'`. Initial position is
/// uniform in a square of half-width `init_spread` around `start`, at rest.
#[derive(Clone, Debug)]
pub struct PointMass {
    pub dt: f64,
    pub drag: f64,
    pub goal: [f64; 2],
    pub start: [f64; 2],
    pub init_spread: f64,
    pub max_steps: usize,
    pub kp: f64,
    pub kd: f64,
    bounds: ActionBounds,
}

impl Default for PointMass {
    fn default() -> Self {
        PointMass {
            dt: 0.05,
            drag: 0.1,
            goal: [1.0, 1.0],
            start: [-1.0, -1.0],
            init_spread: 0.5,
            max_steps: 200,
            kp: 4.0,
            kd: 2.0,
            bounds: ActionBounds::symmetric(2, 1.0),
        }
    }
}

impl PointMass {
    pub fn with_drag(mut self, drag: f64) -> Self {
        self.drag = drag;
        self
    }

    pub fn with_init_spread(mut self, spread: f64) -> Self {
        self.init_spread = spread;
        self
    }
}

impl Dynamics for PointMass {
    fn name(&self) -> &'static str {
        "PointMass2D"
    }

    fn state_dim(&self) -> usize {
        4
    }

    fn action_bounds(&self) -> &ActionBounds {
        &self.bounds
    }

    fn max_steps(&self) -> usize {
        self.max_steps
    }

    fn initial_state(&self, rng: &mut Rng) -> Vec<f64> {
        let mut jitter = || {
            if self.init_spread > 0.0 {
                rng.random_range(-self.init_spread..=self.init_spread)
            } else {
                0.0
            }
        };
        let (dx, dy) = (jitter(), jitter());
        vec![self.start[0] + dx, self.start[1] + dy, 0.0, 0.0]
    }

    fn advance(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        let vx = s[2] + self.dt * (a[0] - self.drag * s[2]);
        let vy = s[3] + self.dt * (a[1] - self.drag * s[3]);
        vec![s[0] + self.dt * vx, s[1] + self.dt * vy, vx, vy]
    }

    fn reward(&self, s: &[f64], a: &[f64]) -> f64 {
        let dx = s[0] - self.goal[0];
        let dy = s[1] - self.goal[1];
        -(dx * dx + dy * dy) - 0.01 * (a[0] * a[0] + a[1] * a[1])
    }

    fn speed(&self, s: &[f64]) -> f64 {
        s[2].hypot(s[3])
    }

    fn expert_action(&self, s: &[f64]) -> Vec<f64> {
        (0..2)
            .map(|i| self.kp * (self.goal[i] - s[i]) - self.kd * s[i + 2])
            .collect()
    }

    fn expert_threshold(&self) -> f64 {
        -400.0
    }

    fn velocity_threshold(&self) -> f64 {
        0.3
    }
}
