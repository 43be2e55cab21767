//! Experiment orchestration: demos, training, zero-shot evaluation and
//! reports over a matrix of environments, algorithms, perturbations and seeds.

pub mod analysis;
pub mod report;
mod rollout;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::{collect_demos, make_env, DemoProtocol, DemoSet, Env, RewardFreeEnv};
use crate::error::{Error, Result};
use crate::imitation::{bc_train, irl_train, BcConfig, GaussianPolicy, IrlConfig, IrlOutcome, PolicyMode};
use crate::perturb::{PerturbationKind, PerturbationSpec};
use crate::planner::{Planner, PlannerConfig};
use crate::rng::Seed;

pub use analysis::{
    causal_confusion_probe, confounded_states, copy_score, curve_csv, expert_pairs, histogram_csv,
    horizon_sweep, policy_pairs, reward_histograms, CurvePoint, Histogram, CURVE_HEADER,
    HISTOGRAM_HEADER,
};
pub use report::{aggregate, aggregates_csv, perturbation_label, results_csv, AggregateRow, ResultRow, RESULT_HEADER};
pub use rollout::{run_expert_episode, run_policy_episode, run_random_episode};

/// Seed of the episodes used to measure expert and random reference returns.
const REFERENCE_SEED: Seed = Seed::new(0x0005_EED0_F2EF);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "BC")]
    Bc,
    #[serde(rename = "BC-Dropout")]
    BcDropout,
    #[serde(rename = "GAIL")]
    Gail,
    #[serde(rename = "GAIL-Expert-Noise")]
    GailExpertNoise,
    #[serde(rename = "GAIL-Reward-Only")]
    GailRewardOnly,
    #[serde(rename = "IMPLANT")]
    Implant,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Bc,
        Algorithm::BcDropout,
        Algorithm::Gail,
        Algorithm::GailExpertNoise,
        Algorithm::GailRewardOnly,
        Algorithm::Implant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Bc => "BC",
            Algorithm::BcDropout => "BC-Dropout",
            Algorithm::Gail => "GAIL",
            Algorithm::GailExpertNoise => "GAIL-Expert-Noise",
            Algorithm::GailRewardOnly => "GAIL-Reward-Only",
            Algorithm::Implant => "IMPLANT",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Algorithm::Bc => Family::Bc,
            Algorithm::BcDropout => Family::BcDropout,
            Algorithm::GailExpertNoise => Family::IrlExpertNoise,
            Algorithm::Gail | Algorithm::GailRewardOnly | Algorithm::Implant => Family::Irl,
        }
    }

    pub fn plans(self) -> bool {
        matches!(self, Algorithm::GailRewardOnly | Algorithm::Implant)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Distinct training procedures; algorithms in one family share a trained run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Bc,
    BcDropout,
    Irl,
    IrlExpertNoise,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Bc => "bc",
            Family::BcDropout => "bc-dropout",
            Family::Irl => "irl",
            Family::IrlExpertNoise => "irl-expert-noise",
        }
    }

    pub fn is_irl(self) -> bool {
        matches!(self, Family::Irl | Family::IrlExpertNoise)
    }
}

/// One cell family of the evaluation matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub env: String,
    pub algorithm: Algorithm,
    pub perturbation: PerturbationSpec,
    /// Used by planning algorithms only.
    pub planner: PlannerConfig,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub demos: DemoProtocol,
    /// Action selection for the non-planning algorithms.
    pub eval_mode: PolicyMode,
}

impl ExperimentSpec {
    pub fn new(env: &str, algorithm: Algorithm) -> Self {
        ExperimentSpec {
            env: env.to_string(),
            algorithm,
            perturbation: PerturbationSpec::none(),
            planner: PlannerConfig::default(),
            seeds: (0..5).collect(),
            episodes: 20,
            demos: DemoProtocol::default(),
            eval_mode: PolicyMode::Mean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        make_env(&self.env)?;
        self.perturbation.validate()?;
        self.planner.validate()?;
        if self.seeds.is_empty() || self.episodes == 0 {
            return Err(Error::Config("experiments need at least one seed and one episode".into()));
        }
        Ok(())
    }

    /// Planner settings actually used; the reward-only baseline always
    /// shoots uniformly random candidates.
    pub fn effective_planner(&self) -> PlannerConfig {
        match self.algorithm {
            Algorithm::GailRewardOnly => self.planner.clone().reward_only(),
            _ => self.planner.clone(),
        }
    }

    /// Training happens with nuisances in train mode and without noise, so
    /// only the nuisance part of the perturbation identifies a training run.
    fn training_perturbation(&self) -> (PerturbationKind, Option<u64>) {
        if self.perturbation.kind.is_nuisance() {
            (self.perturbation.kind, self.perturbation.v_th.map(f64::to_bits))
        } else {
            (PerturbationKind::None, None)
        }
    }

    pub fn demo_key(&self, seed: u64) -> DemoKey {
        let (nuisance, v_th) = self.training_perturbation();
        DemoKey {
            env: self.env.clone(),
            nuisance,
            v_th,
            n_traj: self.demos.n_traj,
            subsample: self.demos.subsample,
            episode_steps: self.demos.episode_steps,
            seed,
        }
    }

    pub fn train_key(&self, seed: u64) -> TrainKey {
        TrainKey {
            demos: self.demo_key(seed),
            family: self.algorithm.family(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DemoKey {
    pub env: String,
    pub nuisance: PerturbationKind,
    pub v_th: Option<u64>,
    pub n_traj: usize,
    pub subsample: usize,
    pub episode_steps: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrainKey {
    pub demos: DemoKey,
    pub family: Family,
}

/// Output of one training run.
#[derive(Clone, Debug)]
pub enum Trained {
    Bc(GaussianPolicy),
    Irl(IrlOutcome),
}

impl Trained {
    pub fn policy(&self) -> &GaussianPolicy {
        match self {
            Trained::Bc(p) => p,
            Trained::Irl(o) => &o.policy,
        }
    }

    pub fn irl(&self) -> Option<&IrlOutcome> {
        match self {
            Trained::Irl(o) => Some(o),
            Trained::Bc(_) => None,
        }
    }

    fn fingerprint(&self) -> Vec<u64> {
        match self {
            Trained::Bc(p) => vec![p.mean_net.fingerprint()],
            Trained::Irl(o) => vec![
                o.policy.mean_net.fingerprint(),
                o.discriminator.net.fingerprint(),
                o.value.net.fingerprint(),
            ],
        }
    }
}

/// Settings shared by every cell of a lab.
#[derive(Clone, Debug, PartialEq)]
pub struct LabConfig {
    pub irl: IrlConfig,
    pub bc: BcConfig,
    pub bc_dropout_rate: f64,
    pub expert_noise_sigma: f64,
    pub reference_episodes: usize,
    pub jobs: usize,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            irl: IrlConfig::default(),
            bc: BcConfig::default(),
            bc_dropout_rate: 0.2,
            expert_noise_sigma: 0.05,
            reference_episodes: 20,
            jobs: 1,
        }
    }
}

/// Mean undiscounted returns of the expert and of uniformly random actions
/// in the unperturbed environment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct References {
    pub expert: f64,
    pub random: f64,
}

impl References {
    pub fn normalize(&self, value: f64) -> f64 {
        (value - self.random) / (self.expert - self.random)
    }
}

/// Caches demos, trained models and reference returns across experiments.
pub struct Lab {
    pub config: LabConfig,
    demos: BTreeMap<DemoKey, Arc<DemoSet>>,
    trained: BTreeMap<TrainKey, std::result::Result<Arc<Trained>, String>>,
    references: BTreeMap<String, References>,
    pool: Option<rayon::ThreadPool>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Lab {
    pub fn new(config: LabConfig) -> Result<Self> {
        config.irl.validate()?;
        config.bc.validate()?;
        let pool = if config.jobs > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.jobs)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Lab {
            config,
            demos: BTreeMap::new(),
            trained: BTreeMap::new(),
            references: BTreeMap::new(),
            pool,
        })
    }

    pub fn base_env(name: &str) -> Result<Box<dyn Env>> {
        Ok(Box::new(make_env(name)?))
    }

    pub fn default_v_th(name: &str) -> Result<f64> {
        Ok(make_env(name)?.dynamics().velocity_threshold())
    }

    /// Environment used for demos, training and as the planner's model.
    pub fn train_env(spec: &ExperimentSpec) -> Result<Box<dyn Env>> {
        spec.perturbation
            .train_env(Self::base_env(&spec.env)?, Self::default_v_th(&spec.env)?)
    }

    /// Environment used for zero-shot evaluation of seed `seed`.
    pub fn eval_env(spec: &ExperimentSpec, seed: u64) -> Result<Box<dyn Env>> {
        spec.perturbation.eval_env(
            Self::base_env(&spec.env)?,
            Self::default_v_th(&spec.env)?,
            Seed::new(seed).derive("eval-env"),
        )
    }

    pub fn demos(&mut self, spec: &ExperimentSpec, seed: u64) -> Result<Arc<DemoSet>> {
        let key = spec.demo_key(seed);
        if let Some(d) = self.demos.get(&key) {
            return Ok(d.clone());
        }
        let mut env = Self::train_env(spec)?;
        let demos = Arc::new(collect_demos(env.as_mut(), spec.demos, Seed::new(seed))?);
        self.demos.insert(key, demos.clone());
        Ok(demos)
    }

    pub fn insert_demos(&mut self, spec: &ExperimentSpec, seed: u64, demos: DemoSet) {
        self.demos.insert(spec.demo_key(seed), Arc::new(demos));
    }

    pub fn insert_trained(&mut self, key: TrainKey, trained: Trained) {
        self.trained.insert(key, Ok(Arc::new(trained)));
    }

    /// Trains the family of `spec` on seed `seed` without consulting the cache.
    pub fn train_uncached(config: &LabConfig, spec: &ExperimentSpec, seed: u64, demos: &DemoSet) -> Result<Trained> {
        let family = spec.algorithm.family();
        let train_seed = Seed::new(seed).derive("train").derive(family.label());
        let bounds = make_env(&spec.env)?.action_bounds().clone();
        match family {
            Family::Bc | Family::BcDropout => {
                let mut cfg = config.bc.clone();
                if family == Family::BcDropout {
                    cfg.dropout_rate = config.bc_dropout_rate;
                }
                Ok(Trained::Bc(bc_train(demos, bounds, &cfg, train_seed)?.0))
            }
            Family::Irl | Family::IrlExpertNoise => {
                let mut cfg = config.irl.clone();
                if family == Family::IrlExpertNoise {
                    cfg.expert_noise_sigma = config.expert_noise_sigma;
                }
                let mut env = RewardFreeEnv::new(Self::train_env(spec)?);
                Ok(Trained::Irl(irl_train(&mut env, demos, &cfg, train_seed)?))
            }
        }
    }

    /// Cached training result; failures are cached as their message.
    pub fn trained(&mut self, spec: &ExperimentSpec, seed: u64) -> Result<std::result::Result<Arc<Trained>, String>> {
        self.ensure_trained(&[(spec.clone(), seed)])?;
        Ok(self.trained[&spec.train_key(seed)].clone())
    }

    fn ensure_trained(&mut self, cells: &[(ExperimentSpec, u64)]) -> Result<()> {
        let mut todo: BTreeMap<TrainKey, (ExperimentSpec, u64, Arc<DemoSet>)> = BTreeMap::new();
        for (spec, seed) in cells {
            let key = spec.train_key(*seed);
            if self.trained.contains_key(&key) || todo.contains_key(&key) {
                continue;
            }
            let demos = self.demos(spec, *seed)?;
            todo.insert(key, (spec.clone(), *seed, demos));
        }
        let config = &self.config;
        let work: Vec<_> = todo.into_iter().collect();
        let train = |(key, (spec, seed, demos)): &(TrainKey, (ExperimentSpec, u64, Arc<DemoSet>))| {
            let r = Self::train_uncached(config, spec, *seed, demos)
                .map(Arc::new)
                .map_err(|e| e.to_string());
            (key.clone(), r)
        };
        let results: Vec<_> = match &self.pool {
            Some(pool) => pool.install(|| work.par_iter().map(train).collect()),
            None => work.iter().map(train).collect(),
        };
        self.trained.extend(results);
        Ok(())
    }

    pub fn references(&mut self, env: &str) -> Result<References> {
        if let Some(r) = self.references.get(env) {
            return Ok(*r);
        }
        let mut base = Self::base_env(env)?;
        let n = self.config.reference_episodes.max(1);
        let mut expert = Vec::with_capacity(n);
        let mut random = Vec::with_capacity(n);
        for e in 0..n as u64 {
            expert.push(run_expert_episode(base.as_mut(), REFERENCE_SEED.derive("expert").index(e))?.total_reward());
            random.push(run_random_episode(base.as_mut(), REFERENCE_SEED.derive("random").index(e))?.total_reward());
        }
        let refs = References {
            expert: mean_std(&expert).0,
            random: mean_std(&random).0,
        };
        if !(refs.expert > refs.random) {
            return Err(Error::DegenerateExpert {
                env: env.to_string(),
                mean_return: refs.expert,
                threshold: refs.random,
            });
        }
        self.references.insert(env.to_string(), refs);
        Ok(refs)
    }

    /// Per-episode undiscounted returns of `trained` under the test conditions of
    /// `spec`. No parameter may change while this runs.
    pub fn evaluate(spec: &ExperimentSpec, seed: u64, trained: &Trained, planner_pool: Option<&rayon::ThreadPool>) -> Result<Vec<f64>> {
        let before = trained.fingerprint();
        let mut env = Self::eval_env(spec, seed)?;
        let episode = |e: usize| Seed::new(seed).derive("eval").index(e as u64);
        let mut returns = Vec::with_capacity(spec.episodes);
        if spec.algorithm.plans() {
            let irl = trained.irl().ok_or_else(|| {
                Error::Config(format!("{} needs an adversarial training run", spec.algorithm))
            })?;
            let model = Self::train_env(spec)?;
            let planner = Planner {
                policy: &irl.policy,
                discriminator: &irl.discriminator,
                value: &irl.value,
                model: model.as_ref(),
                config: spec.effective_planner(),
                pool: planner_pool,
            };
            for e in 0..spec.episodes {
                returns.push(planner.run_episode(env.as_mut(), episode(e), None)?.total_reward());
            }
        } else {
            for e in 0..spec.episodes {
                let traj = run_policy_episode(env.as_mut(), trained.policy(), spec.eval_mode, episode(e))?;
                returns.push(traj.total_reward());
            }
        }
        if trained.fingerprint() != before {
            return Err(Error::State("parameters changed during zero-shot evaluation".into()));
        }
        Ok(returns)
    }

    /// Runs every (spec, seed) cell. Rows come back in spec order, then seed
    /// order; failed cells are reported with a `failed` status.
    pub fn run_matrix(&mut self, specs: &[ExperimentSpec]) -> Result<Vec<ResultRow>> {
        for s in specs {
            s.validate()?;
        }
        let cells: Vec<(ExperimentSpec, u64)> = specs
            .iter()
            .flat_map(|s| s.seeds.iter().map(move |&seed| (s.clone(), seed)))
            .collect();
        let mut demo_failures = BTreeMap::new();
        let mut trainable = Vec::new();
        for (spec, seed) in &cells {
            match self.demos(spec, *seed) {
                Ok(_) => trainable.push((spec.clone(), *seed)),
                Err(e) => {
                    demo_failures.insert(spec.demo_key(*seed), e.to_string());
                }
            }
        }
        self.ensure_trained(&trainable)?;
        let mut jobs = Vec::with_capacity(cells.len());
        for (spec, seed) in &cells {
            let refs = self.references(&spec.env)?;
            let trained = match demo_failures.get(&spec.demo_key(*seed)) {
                Some(msg) => Err(msg.clone()),
                None => self.trained[&spec.train_key(*seed)].clone(),
            };
            jobs.push((spec, *seed, refs, trained));
        }
        let eval = |(spec, seed, refs, trained): &(&ExperimentSpec, u64, References, std::result::Result<Arc<Trained>, String>)| {
            let outcome = trained
                .clone()
                .and_then(|t| Self::evaluate(spec, *seed, &t, None).map_err(|e| e.to_string()));
            ResultRow::new(spec, *seed, refs, outcome)
        };
        Ok(match &self.pool {
            Some(pool) => pool.install(|| jobs.par_iter().map(eval).collect()),
            None => jobs.iter().map(eval).collect(),
        })
    }
}
