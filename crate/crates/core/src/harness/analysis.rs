use std::fmt::Write as _;

use super::{mean_std, rollout, Algorithm, ExperimentSpec, Lab};
use crate::envs::Env;
use crate::error::{Error, Result};
use crate::imitation::{reward, Discriminator, GaussianPolicy, PolicyMode};
use crate::rng::Seed;

pub const CURVE_HEADER: &str = "H, mean_normalized, stderr";
pub const HISTOGRAM_HEADER: &str = "bin_left, bin_right, density_policy, density_expert";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub horizon: usize,
    pub mean_normalized: f64,
    pub stderr: f64,
    pub n_seeds: usize,
}

/// Normalized IMPLANT return against planning horizon at a fixed budget.
/// `base` supplies the env, seeds, episodes and perturbation.
pub fn horizon_sweep(
    lab: &mut Lab,
    base: &ExperimentSpec,
    budget: usize,
    horizons: &[usize],
) -> Result<Vec<CurvePoint>> {
    let specs: Vec<ExperimentSpec> = horizons
        .iter()
        .map(|&h| {
            let mut s = base.clone();
            s.algorithm = Algorithm::Implant;
            s.planner.budget = budget;
            s.planner.horizon = h;
            s
        })
        .collect();
    let rows = lab.run_matrix(&specs)?;
    Ok(specs
        .iter()
        .zip(rows.chunks(base.seeds.len()))
        .map(|(spec, rows)| {
            let norms: Vec<f64> = rows.iter().filter(|r| r.ok()).map(|r| r.normalized).collect();
            let (mean, std) = if norms.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_std(&norms)
            };
            CurvePoint {
                horizon: spec.planner.horizon,
                mean_normalized: mean,
                stderr: std / (norms.len() as f64).sqrt(),
                n_seeds: norms.len(),
            }
        })
        .collect())
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in points {
        writeln!(out, "{}, {:.6}, {:.6}", p.horizon, p.mean_normalized, p.stderr).unwrap();
    }
    out
}

/// Two densities over shared bin edges.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density_policy: Vec<f64>,
    pub density_expert: Vec<f64>,
    pub mean_policy: f64,
    pub mean_expert: f64,
}

impl Histogram {
    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn integral(density: &[f64], edges: &[f64]) -> f64 {
        density
            .iter()
            .enumerate()
            .map(|(i, d)| d * (edges[i + 1] - edges[i]))
            .sum()
    }
}

fn densities(values: &[f64], edges: &[f64]) -> Vec<f64> {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = (((v - lo) / (hi - lo)) * bins as f64).floor() as isize;
        counts[i.clamp(0, bins as isize - 1) as usize] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 / (values.len() as f64 * (edges[i + 1] - edges[i])))
        .collect()
}

/// Histograms of the inferred reward over policy and expert (state, action)
/// pairs on common bins spanning both sets.
pub fn reward_histograms(
    d: &Discriminator,
    policy_pairs: &[(Vec<f64>, Vec<f64>)],
    expert_pairs: &[(Vec<f64>, Vec<f64>)],
    bins: usize,
) -> Result<Histogram> {
    if policy_pairs.is_empty() || expert_pairs.is_empty() || bins == 0 {
        return Err(Error::RejectedInput(
            "histograms need pairs on both sides and at least one bin".into(),
        ));
    }
    let score = |pairs: &[(Vec<f64>, Vec<f64>)]| -> Result<Vec<f64>> {
        pairs.iter().map(|(s, a)| reward(d, s, a)).collect()
    };
    let (p, e) = (score(policy_pairs)?, score(expert_pairs)?);
    let lo = p.iter().chain(&e).copied().fold(f64::INFINITY, f64::min);
    let mut hi = p.iter().chain(&e).copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + (hi - lo) * i as f64 / bins as f64 })
        .collect();
    Ok(Histogram {
        density_policy: densities(&p, &edges),
        density_expert: densities(&e, &edges),
        mean_policy: mean_std(&p).0,
        mean_expert: mean_std(&e).0,
        edges,
    })
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for i in 0..h.density_policy.len() {
        writeln!(
            out,
            "{:.6}, {:.6}, {:.6}, {:.6}",
            h.edges[i],
            h.edges[i + 1],
            h.density_policy[i],
            h.density_expert[i]
        )
        .unwrap();
    }
    out
}

/// (state, action) pairs visited by `policy` over full episodes.
pub fn policy_pairs(
    env: &mut dyn Env,
    policy: &GaussianPolicy,
    mode: PolicyMode,
    episodes: usize,
    seed: Seed,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut out = Vec::new();
    for e in 0..episodes {
        let traj = rollout::run_policy_episode(env, policy, mode, seed.index(e as u64))?;
        out.extend(traj.pairs().map(|(s, a)| (s.to_vec(), a.to_vec())));
    }
    Ok(out)
}

/// (state, action) pairs of full expert episodes.
pub fn expert_pairs(env: &mut dyn Env, episodes: usize, seed: Seed) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut out = Vec::new();
    for e in 0..episodes {
        let traj = rollout::run_expert_episode(env, seed.index(e as u64))?;
        out.extend(traj.pairs().map(|(s, a)| (s.to_vec(), a.to_vec())));
    }
    Ok(out)
}

/// Mean cosine similarity between the policy's mean action and the trailing
/// `action_dim` observation entries. States where either vector is zero are
/// skipped.
pub fn copy_score(policy: &GaussianPolicy, states: &[Vec<f64>]) -> Result<f64> {
    let k = policy.action_dim();
    let mut total = 0.0;
    let mut n = 0usize;
    for s in states {
        if s.len() < k {
            return Err(Error::RejectedInput("state is shorter than the action".into()));
        }
        let out = policy.mean(s)?;
        let nuisance = &s[s.len() - k..];
        let dot: f64 = out.iter().zip(nuisance).map(|(a, b)| a * b).sum();
        let norm = out.iter().map(|a| a * a).sum::<f64>().sqrt()
            * nuisance.iter().map(|b| b * b).sum::<f64>().sqrt();
        if norm > 0.0 {
            total += dot / norm;
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

/// Observations visited by `policy` in `env` (normally the train-mode
/// action-nuisance wrapper).
pub fn confounded_states(
    env: &mut dyn Env,
    policy: &GaussianPolicy,
    episodes: usize,
    seed: Seed,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for e in 0..episodes {
        let traj = rollout::run_policy_episode(env, policy, PolicyMode::Mean, seed.index(e as u64))?;
        out.extend(traj.states[..traj.len()].iter().cloned());
    }
    Ok(out)
}

/// Copy-score of a policy trained under the action nuisance, measured on
/// its own confounded rollouts.
pub fn causal_confusion_probe(
    train_env: &mut dyn Env,
    policy: &GaussianPolicy,
    episodes: usize,
    seed: Seed,
) -> Result<f64> {
    let states = confounded_states(train_env, policy, episodes, seed)?;
    copy_score(policy, &states)
}
