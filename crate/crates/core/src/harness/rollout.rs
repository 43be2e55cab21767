use crate::envs::{Env, Trajectory};
use crate::error::Result;
use crate::imitation::{GaussianPolicy, PolicyMode};
use crate::rng::{candidate_stream, reset_stream, Seed};

/// Runs `policy` for one episode. Sampled actions at step `t` come from the
/// same stream a planner would use for its candidate 0.
pub fn run_policy_episode(
    env: &mut dyn Env,
    policy: &GaussianPolicy,
    mode: PolicyMode,
    episode: Seed,
) -> Result<Trajectory> {
    run_episode_with(env, episode, |t, obs, _| {
        policy.act(obs, mode, &mut candidate_stream(episode, t, 0))
    })
}

/// Uniformly random actions.
pub fn run_random_episode(env: &mut dyn Env, episode: Seed) -> Result<Trajectory> {
    let mut rng = episode.derive("random-actions").rng();
    run_episode_with(env, episode, |_, _, env| {
        Ok(env.action_bounds().sample_uniform(&mut rng))
    })
}

pub fn run_expert_episode(env: &mut dyn Env, episode: Seed) -> Result<Trajectory> {
    run_episode_with(env, episode, |_, obs, env| {
        Ok(env.action_bounds().clip(&env.expert_action(obs)))
    })
}

fn run_episode_with(
    env: &mut dyn Env,
    episode: Seed,
    mut act: impl FnMut(usize, &[f64], &dyn Env) -> Result<Vec<f64>>,
) -> Result<Trajectory> {
    let (_, obs) = env.reset(&mut reset_stream(episode));
    let mut traj = Trajectory::new(obs, env.discount());
    for t in 0..env.max_steps() {
        let action = act(t, traj.states.last().unwrap(), &*env)?;
        let step = env.step(&action)?;
        let done = step.done();
        traj.push(action, &step);
        if done {
            break;
        }
    }
    Ok(traj)
}
