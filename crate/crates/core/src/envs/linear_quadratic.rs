use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{ActionBounds, Dynamics};
use crate::rng::{Rng, Seed};

const STATE_DIM: usize = 4;
const ACTION_DIM: usize = 2;

/// `s' = A s + B a` with a fixed, open-loop stable `A`, reward
/// `-(s'Qs + a'Ra)` and an LQR expert `a = -K s`.
#[derive(Clone, Debug)]
pub struct LinearQuadratic {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    gain: DMatrix<f64>,
    pub max_steps: usize,
    bounds: ActionBounds,
}

impl Default for LinearQuadratic {
    fn default() -> Self {
        Self::from_seed(Seed::new(0x1a5e_ed00))
    }
}

impl LinearQuadratic {
    /// Random system matrices drawn from `seed`; `A` is rescaled to spectral
    /// norm 0.95 so the uncontrolled system is stable.
    pub fn from_seed(seed: Seed) -> Self {
        let mut rng = seed.rng();
        let mut draw = |r, c, scale: f64| {
            DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal) * scale)
        };
        let raw = draw(STATE_DIM, STATE_DIM, 1.0);
        let norm = raw.clone().svd(false, false).singular_values.max();
        let a = raw * (0.95 / norm);
        let b = draw(STATE_DIM, ACTION_DIM, 0.5);
        let q = DMatrix::identity(STATE_DIM, STATE_DIM);
        let r = DMatrix::identity(ACTION_DIM, ACTION_DIM) * 0.1;
        let gain = lqr_gain_policy_iteration(&a, &b, &q, &r);
        LinearQuadratic {
            a,
            b,
            q,
            r,
            gain,
            max_steps: 100,
            bounds: ActionBounds::symmetric(ACTION_DIM, 10.0),
        }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Feedback gain `K` of the expert `a = -K s`.
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }
}

/// Hewer's policy iteration: evaluate the closed loop exactly by solving the
/// Lyapunov equation as a linear system, then improve the gain.
fn lqr_gain_policy_iteration(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = a.nrows();
    // A is stable, so K = 0 is a valid stabilising start.
    let mut k = DMatrix::zeros(b.ncols(), n);
    for _ in 0..100 {
        let closed = a - b * &k;
        let cost = q + k.transpose() * r * &k;
        // vec(P) = (I - Acl' (x) Acl')^{-1} vec(cost)
        let kron = closed.transpose().kronecker(&closed.transpose());
        let system = DMatrix::identity(n * n, n * n) - kron;
        let rhs = DVector::from_column_slice(cost.as_slice());
        let p_vec = system
            .lu()
            .solve(&rhs)
            .expect("closed loop stays stable under policy iteration");
        let p = DMatrix::from_column_slice(n, n, p_vec.as_slice());
        let lhs = r + b.transpose() * &p * b;
        let next = lhs
            .lu()
            .solve(&(b.transpose() * &p * a))
            .expect("R + B'PB is positive definite");
        let delta = (&next - &k).abs().max();
        k = next;
        if delta < 1e-14 {
            break;
        }
    }
    k
}

impl Dynamics for LinearQuadratic {
    fn name(&self) -> &'static str {
        "LinearQuadratic"
    }

    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn action_bounds(&self) -> &ActionBounds {
        &self.bounds
    }

    fn max_steps(&self) -> usize {
        self.max_steps
    }

    fn initial_state(&self, rng: &mut Rng) -> Vec<f64> {
        (0..STATE_DIM).map(|_| rng.random_range(-1.0..=1.0)).collect()
    }

    fn advance(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        let s = DVector::from_column_slice(s);
        let a = DVector::from_column_slice(a);
        (&self.a * s + &self.b * a).as_slice().to_vec()
    }

    fn reward(&self, s: &[f64], a: &[f64]) -> f64 {
        let s = DVector::from_column_slice(s);
        let a = DVector::from_column_slice(a);
        -((s.transpose() * &self.q * &s)[0] + (a.transpose() * &self.r * &a)[0])
    }

    fn speed(&self, s: &[f64]) -> f64 {
        s[2].hypot(s[3])
    }

    fn expert_action(&self, s: &[f64]) -> Vec<f64> {
        let s = DVector::from_column_slice(s);
        (-&self.gain * s).as_slice().to_vec()
    }

    fn expert_threshold(&self) -> f64 {
        -20.0
    }

    fn velocity_threshold(&self) -> f64 {
        0.3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain-array discrete Riccati value iteration, independent of nalgebra.
    fn riccati_gain(lq: &LinearQuadratic) -> Vec<Vec<f64>> {
        let n = STATE_DIM;
        let m = ACTION_DIM;
        let get = |mat: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..mat.nrows())
                .map(|i| (0..mat.ncols()).map(|j| mat[(i, j)]).collect())
                .collect()
        };
        let (a, b, q, r) = (get(lq.a()), get(lq.b()), get(lq.q()), get(lq.r()));
        let mul = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..x.len())
                .map(|i| {
                    (0..y[0].len())
                        .map(|j| (0..y.len()).map(|k| x[i][k] * y[k][j]).sum())
                        .collect()
                })
                .collect()
        };
        let tr = |x: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..x[0].len())
                .map(|j| (0..x.len()).map(|i| x[i][j]).collect())
                .collect()
        };
        let inv2 = |x: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            let det = x[0][0] * x[1][1] - x[0][1] * x[1][0];
            vec![
                vec![x[1][1] / det, -x[0][1] / det],
                vec![-x[1][0] / det, x[0][0] / det],
            ]
        };
        let mut p = q.clone();
        let mut k = vec![vec![0.0; n]; m];
        for _ in 0..5000 {
            let bt_p = mul(&tr(&b), &p);
            let s = {
                let mut s = mul(&bt_p, &b);
                for i in 0..m {
                    for j in 0..m {
                        s[i][j] += r[i][j];
                    }
                }
                s
            };
            k = mul(&inv2(&s), &mul(&bt_p, &a));
            let at_p_a = mul(&mul(&tr(&a), &p), &a);
            let at_p_b = mul(&mul(&tr(&a), &p), &b);
            let corr = mul(&at_p_b, &k);
            p = (0..n)
                .map(|i| (0..n).map(|j| q[i][j] + at_p_a[i][j] - corr[i][j]).collect())
                .collect();
        }
        k
    }

    #[test]
    fn expert_gain_matches_riccati_iteration() {
        let lq = LinearQuadratic::default();
        let oracle = riccati_gain(&lq);
        for (i, row) in oracle.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!(
                    (lq.gain()[(i, j)] - v).abs() < 1e-9,
                    "K[{i}][{j}] = {} vs {v}",
                    lq.gain()[(i, j)]
                );
            }
        }
    }

    #[test]
    fn a_is_stable() {
        let lq = LinearQuadratic::default();
        let norm = lq.a().clone().svd(false, false).singular_values.max();
        assert!((norm - 0.95).abs() < 1e-12);
    }
}
