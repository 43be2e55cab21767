use std::fmt::Write as _;
use std::path::Path;

use super::{Env, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{reset_stream, Seed};

/// How expert data is gathered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DemoProtocol {
    pub n_traj: usize,
    pub subsample: usize,
    /// Length of each recorded expert episode; the env's time limit when unset.
    pub episode_steps: Option<usize>,
}

impl Default for DemoProtocol {
    fn default() -> Self {
        DemoProtocol {
            n_traj: 4,
            subsample: 20,
            episode_steps: Some(1000),
        }
    }
}

/// Sub-sampled expert (state, action) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoSet {
    pub env: String,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    /// Ground-truth expert returns per trajectory over the env's standard
    /// episode length. Not persisted.
    pub expert_returns: Vec<f64>,
}

impl DemoSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn mean_expert_return(&self) -> Option<f64> {
        (!self.expert_returns.is_empty())
            .then(|| self.expert_returns.iter().sum::<f64>() / self.expert_returns.len() as f64)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "implant-demos v1, env={}, obs_dim={}, act_dim={}, pairs={}\n",
            self.env,
            self.obs_dim,
            self.act_dim,
            self.len()
        );
        for (s, a) in self.states.iter().zip(&self.actions) {
            let row: Vec<String> = s.iter().chain(a).map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty file")?;
        let fields: Vec<&str> = header.split(", ").collect();
        if fields.len() != 5 || fields[0] != "implant-demos v1" {
            return Err(format!("unrecognised header {header:?}"));
        }
        let value = |i: usize, key: &str| -> std::result::Result<&str, String> {
            fields[i]
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| format!("header field {i} should be {key}=..."))
        };
        let env = value(1, "env")?.to_string();
        let num = |i, key| -> std::result::Result<usize, String> {
            value(i, key)?
                .parse()
                .map_err(|e| format!("{key}: {e}"))
        };
        let (obs_dim, act_dim, pairs) = (num(2, "obs_dim")?, num(3, "act_dim")?, num(4, "pairs")?);
        let mut states = Vec::with_capacity(pairs);
        let mut actions = Vec::with_capacity(pairs);
        for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("row {i}: {e}"))?;
            if row.len() != obs_dim + act_dim {
                return Err(format!(
                    "row {i} has {} columns, expected {}",
                    row.len(),
                    obs_dim + act_dim
                ));
            }
            states.push(row[..obs_dim].to_vec());
            actions.push(row[obs_dim..].to_vec());
        }
        if states.len() != pairs {
            return Err(format!("header says {pairs} pairs, found {}", states.len()));
        }
        Ok(DemoSet {
            env,
            obs_dim,
            act_dim,
            states,
            actions,
            expert_returns: Vec::new(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|reason| Error::Format {
            path: path.to_path_buf(),
            reason,
        })
    }
}

/// Runs the expert for `steps` steps from a start drawn with `episode`.
/// Only true termination ends the episode early; the time limit is ignored so
/// longer demonstrations can be recorded.
pub fn rollout_expert(env: &mut dyn Env, episode: Seed, steps: usize) -> Result<Trajectory> {
    let (_, obs) = env.reset(&mut reset_stream(episode));
    let mut traj = Trajectory::new(obs, env.discount());
    for _ in 0..steps {
        let obs = traj.states.last().unwrap();
        let action = env.action_bounds().clip(&env.expert_action(obs));
        let step = env.step(&action)?;
        traj.push(action, &step);
        if step.terminated {
            break;
        }
    }
    Ok(traj)
}

/// Rolls out `n_traj` expert episodes and keeps every `subsample`-th pair.
pub fn collect_demos(env: &mut dyn Env, protocol: DemoProtocol, seed: Seed) -> Result<DemoSet> {
    if protocol.n_traj == 0 || protocol.subsample == 0 {
        return Err(Error::Config(
            "demo protocol needs n_traj >= 1 and subsample >= 1".into(),
        ));
    }
    let steps = protocol.episode_steps.unwrap_or_else(|| env.max_steps());
    let mut set = DemoSet {
        env: env.name().to_string(),
        obs_dim: env.obs_dim(),
        act_dim: env.action_dim(),
        states: Vec::new(),
        actions: Vec::new(),
        expert_returns: Vec::new(),
    };
    let horizon = env.max_steps();
    for i in 0..protocol.n_traj {
        let traj = rollout_expert(env, seed.derive("demos").index(i as u64), steps)?;
        set.expert_returns
            .push(traj.env_rewards.iter().take(horizon).sum());
        for (t, (s, a)) in traj.pairs().enumerate() {
            if t % protocol.subsample == 0 {
                set.states.push(s.to_vec());
                set.actions.push(a.to_vec());
            }
        }
    }
    let mean = set.mean_expert_return().unwrap();
    if mean < env.expert_threshold() {
        return Err(Error::DegenerateExpert {
            env: env.name().into(),
            mean_return: mean,
            threshold: env.expert_threshold(),
        });
    }
    Ok(set)
}
