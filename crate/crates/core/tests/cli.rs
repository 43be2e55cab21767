use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use implant::cli::RunConfig;

const TINY: &str = r#"
[demos]
n_traj = 1
subsample = 20
episode_steps = 200

[algorithm]
name = "GAIL"

[irl]
iterations = 2
batch_steps = 200
minibatch = 100
hidden = [16, 16]

[bc]
epochs = 3
hidden = [16, 16]

[planner]
budget = 2
horizon = 3

[eval]
seeds = [0]
episodes = 2
reference_episodes = 2
policy_mode = "sample"
histogram_bins = 8
"#;

struct Run {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

impl Run {
    fn new(config: &str) -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("out");
        let path = tmp.path().join("config.toml");
        std::fs::write(&path, config).unwrap();
        Run {
            _tmp: tmp,
            root,
            config: path,
        }
    }

    fn cmd(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_implant"))
            .args(args)
            .arg("--config")
            .arg(&self.config)
            .arg("--out")
            .arg(&self.root)
            .env_remove("IMPLANT_OUT")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.cmd(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn stage(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn default_demos_report_200_pairs_and_rerun_is_identical() {
    let run = Run::new("[eval]\nseeds = [3]\n");
    let out = run.ok(&["demos"]);
    assert!(out.contains("200 pairs"), "{out}");
    run.ok(&["demos"]);
    let a = std::fs::read(run.stage("demos-001/demos-seed3.csv")).unwrap();
    let b = std::fs::read(run.stage("demos-002/demos-seed3.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_unsubsampled_trajectory_gives_200_pairs() {
    let run = Run::new("[demos]\nn_traj = 1\nsubsample = 1\nepisode_steps = 200\n[eval]\nseeds = [0]\n");
    assert!(run.ok(&["demos"]).contains("200 pairs"));
}

#[test]
fn frozen_config_reparses_to_resolved_config() {
    let run = Run::new(TINY);
    run.ok(&["demos", "--seed", "4", "--horizon", "9"]);
    let frozen = RunConfig::load(&run.stage("demos-001/config.toml")).unwrap();
    let mut expected = RunConfig::parse(TINY).unwrap();
    expected.eval.seeds = vec![4];
    expected.planner.horizon = 9;
    expected.io.out = run.root.clone();
    assert_eq!(frozen, expected);
}

#[test]
fn unknown_config_key_fails() {
    let run = Run::new("[planner]\nbudgett = 4\n");
    let out = run.cmd(&["demos"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn implant_out_is_the_default_root() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "[demos]\nn_traj = 1\nepisode_steps = 200\n[eval]\nseeds = [0]\n").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_implant"))
        .args(["demos", "--config"])
        .arg(&cfg)
        .env("IMPLANT_OUT", tmp.path().join("env-root"))
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(tmp.path().join("env-root/demos-001/demos-seed0.csv").exists());
}

#[test]
fn bc_training_writes_only_a_policy() {
    let run = Run::new(TINY);
    run.ok(&["demos"]);
    run.ok(&["train", "--algorithm", "BC"]);
    let dir = run.stage("train-001/bc/seed0");
    assert!(dir.join("policy.ckpt").exists());
    assert!(!dir.join("discriminator.ckpt").exists());
    assert!(!dir.join("value.ckpt").exists());
}

#[test]
fn train_without_demos_is_missing_artifact() {
    let run = Run::new(TINY);
    let out = run.cmd(&["train"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn diverged_training_exits_2_with_iteration() {
    let run = Run::new(&format!("{TINY}\n").replace("minibatch = 100", "minibatch = 100\npolicy_lr = 1e200\ndisc_lr = 1e200"));
    run.ok(&["demos"]);
    let out = run.cmd(&["train"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(2), "{err}");
    assert!(err.contains("iteration"), "{err}");
}

#[test]
fn gail_pipeline_artifacts_and_identities() {
    let run = Run::new(TINY);
    run.ok(&["demos"]);
    run.ok(&["train"]);
    let dir = run.stage("train-001/irl/seed0");
    for f in ["policy.ckpt", "discriminator.ckpt", "value.ckpt"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    assert_eq!(
        lines(&dir.join("train_log.csv"))[0],
        "iteration, mean_return, disc_loss, mean_inferred_reward, policy_kl, value_loss"
    );

    // B=1, H=0 planning reproduces the sampled policy episode for episode.
    run.ok(&["eval"]);
    run.ok(&["eval", "--algorithm", "IMPLANT", "--horizon", "0", "--budget", "1"]);
    let returns = |stage: &str| -> Vec<String> {
        lines(&run.stage(stage).join("episodes.csv"))
            .iter()
            .skip(1)
            .map(|l| l.rsplit(", ").next().unwrap().to_string())
            .collect()
    };
    assert_eq!(returns("eval-001").len(), 2);
    assert_eq!(returns("eval-001"), returns("eval-002"));

    run.ok(&["eval", "--sweep", "motor_noise"]);
    let rows = lines(&run.stage("eval-003/results.csv"));
    let sigmas: Vec<f64> = rows[1..]
        .iter()
        .map(|l| l.split(", ").nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(sigmas, vec![0.0, 0.1, 0.2, 0.5, 1.0]);

    run.ok(&["eval", "--horizon-sweep"]);
    let curve = lines(&run.stage("eval-004/curve-PointMass2D.csv"));
    assert_eq!(curve[0], "H, mean_normalized, stderr");
    assert_eq!(curve.len(), 5);
    assert!(run.stage("eval-004/histogram-PointMass2D.csv").exists());

    run.ok(&["plot"]);
    run.ok(&["plot"]);
    for fig in ["curve-PointMass2D.svg", "histogram-PointMass2D.svg", "aggregates.svg"] {
        let a = std::fs::read(run.stage("plot-001").join(fig)).unwrap();
        let b = std::fs::read(run.stage("plot-002").join(fig)).unwrap();
        assert!(a.starts_with(b"<svg"));
        assert_eq!(a, b, "{fig}");
    }

    // IMPLANT needs a discriminator that a BC run does not produce.
    run.ok(&["train", "--algorithm", "BC"]);
    std::fs::rename(run.stage("train-002/bc"), run.stage("train-002/irl")).unwrap();
    let out = run.cmd(&["eval", "--algorithm", "IMPLANT"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("discriminator.ckpt"));
}

#[test]
fn plot_without_results_exits_4() {
    let run = Run::new(TINY);
    let empty = run.root.join("eval-001");
    std::fs::create_dir_all(&empty).unwrap();
    let out = run.cmd(&["plot"]);
    assert_eq!(out.status.code(), Some(4));
}
