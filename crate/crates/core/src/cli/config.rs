use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::DemoProtocol;
use crate::error::{Error, Result};
use crate::harness::{Algorithm, ExperimentSpec, LabConfig};
use crate::imitation::{BcConfig, IrlConfig, PolicyMode};
use crate::perturb::PerturbationSpec;
use crate::planner::PlannerConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub name: String,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            name: "PointMass2D".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemosSection {
    pub n_traj: usize,
    pub subsample: usize,
    /// Steps per recorded expert episode; the env time limit when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episode_steps: Option<usize>,
}

impl Default for DemosSection {
    fn default() -> Self {
        let p = DemoProtocol::default();
        DemosSection {
            n_traj: p.n_traj,
            subsample: p.subsample,
            episode_steps: p.episode_steps,
        }
    }
}

impl DemosSection {
    pub fn protocol(&self) -> DemoProtocol {
        DemoProtocol {
            n_traj: self.n_traj,
            subsample: self.subsample,
            episode_steps: self.episode_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmSection {
    pub name: Algorithm,
    pub bc_dropout_rate: f64,
    pub expert_noise_sigma: f64,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        let lab = LabConfig::default();
        AlgorithmSection {
            name: Algorithm::Implant,
            bc_dropout_rate: lab.bc_dropout_rate,
            expert_noise_sigma: lab.expert_noise_sigma,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub policy_mode: PolicyMode,
    pub reference_episodes: usize,
    pub histogram_bins: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            seeds: (0..5).collect(),
            episodes: 20,
            policy_mode: PolicyMode::Mean,
            reference_episodes: 20,
            histogram_bins: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub out: PathBuf,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection {
            out: PathBuf::from("runs"),
        }
    }
}

/// Everything a pipeline run depends on.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: EnvSection,
    pub demos: DemosSection,
    pub algorithm: AlgorithmSection,
    pub irl: IrlConfig,
    pub bc: BcConfig,
    pub planner: PlannerConfig,
    pub perturbation: PerturbationSpec,
    pub eval: EvalSection,
    pub io: IoSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.lab_config().validate()?;
        self.spec().validate()?;
        if self.demos.n_traj == 0 || self.demos.subsample == 0 {
            return Err(Error::Config("demos need n_traj >= 1 and subsample >= 1".into()));
        }
        Ok(())
    }

    pub fn lab_config(&self) -> LabConfig {
        LabConfig {
            irl: self.irl.clone(),
            bc: self.bc.clone(),
            bc_dropout_rate: self.algorithm.bc_dropout_rate,
            expert_noise_sigma: self.algorithm.expert_noise_sigma,
            reference_episodes: self.eval.reference_episodes,
            jobs: 1,
        }
    }

    pub fn spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            env: self.env.name.clone(),
            algorithm: self.algorithm.name,
            perturbation: self.perturbation,
            planner: self.planner.clone(),
            seeds: self.eval.seeds.clone(),
            episodes: self.eval.episodes,
            demos: self.demos.protocol(),
            eval_mode: self.eval.policy_mode,
        }
    }
}

impl LabConfig {
    pub fn validate(&self) -> Result<()> {
        self.irl.validate()?;
        self.bc.validate()?;
        if !(0.0..1.0).contains(&self.bc_dropout_rate) || !(self.expert_noise_sigma >= 0.0) {
            return Err(Error::Config(
                "bc_dropout_rate must lie in [0, 1) and expert_noise_sigma must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::parse("[planner]\nbudgett = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(RunConfig::parse("[nonsense]\n").is_err());
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = RunConfig::parse(
            "[algorithm]\nname = \"GAIL-Reward-Only\"\n[planner]\nhorizon = 7\nrollout_policy = \"policy_sample\"\n[perturbation]\nkind = \"motor_noise\"\nsigma = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.algorithm.name, Algorithm::GailRewardOnly);
        assert_eq!(cfg.planner.horizon, 7);
        assert_eq!(cfg.perturbation.sigma, 0.5);
        assert_eq!(cfg.planner.budget, 20);
    }
}
