//! The `implant` command line: demos, train, eval, plot and all.
//!
//! Every invocation writes into a fresh numbered stage directory under the
//! output root (`demos-001`, `train-001`, ...) together with a frozen copy
//! of the resolved config. Later stages read the newest earlier stage.

mod config;
pub mod plot;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

pub use config::{AlgorithmSection, DemosSection, EnvSection, EvalSection, IoSection, RunConfig};

use crate::envs::{collect_demos, DemoSet, Env};
use crate::error::{Error, Result};
use crate::harness::analysis::{
    curve_csv, expert_pairs, histogram_csv, horizon_sweep, policy_pairs, reward_histograms, CURVE_HEADER,
    HISTOGRAM_HEADER,
};
use crate::harness::report::{aggregate, aggregates_csv, results_csv, AggregateRow, ResultRow};
use crate::harness::{Algorithm, ExperimentSpec, Family, Lab, Trained};
use crate::imitation::{write_log, Discriminator, GaussianPolicy, IrlOutcome, PolicyMode, ValueFn};
use crate::net::{read_checkpoint, write_checkpoint};
use crate::perturb::{PerturbationKind, PerturbationSpec};
use crate::rng::Seed;

/// Horizons of the planning-horizon sweep.
pub const SWEEP_HORIZONS: [usize; 4] = [0, 10, 50, 100];
/// Candidate budget used by the horizon sweep.
pub const SWEEP_BUDGET: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "implant", version, about = "Imitation learning with test-time planning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record expert demonstrations.
    Demos(Common),
    /// Train the configured algorithm on the newest demos.
    Train(Common),
    /// Evaluate the newest checkpoints.
    Eval(EvalArgs),
    /// Render SVG figures from the newest evaluation.
    Plot(PlotArgs),
    /// demos, train, eval and plot in sequence.
    All(EvalArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run only this replicate seed instead of the configured list.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output root; defaults to $IMPLANT_OUT, then the config's io.out.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Evaluate over the noise grid of motor_noise or transition_noise.
    #[arg(long)]
    pub sweep: Option<PerturbationKind>,
    /// Also write the planning-horizon curve.
    #[arg(long)]
    pub horizon_sweep: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PlotArgs {
    /// Evaluation directory to plot; the newest under the output root by default.
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::TrainingDiverged { .. } => 2,
        Error::MissingArtifact(_) => 3,
        Error::NothingToPlot(_) => 4,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Demos(c) => cmd_demos(&resolve(&c)?).map(drop),
        Command::Train(c) => cmd_train(&resolve(&c)?).map(drop),
        Command::Eval(e) => {
            let (cfg, jobs) = resolve(&e.common)?;
            cmd_eval(&cfg, jobs, e.sweep, e.horizon_sweep).map(drop)
        }
        Command::Plot(p) => {
            let run = match p.run {
                Some(run) => run,
                None => {
                    let (cfg, _) = resolve(&Common {
                        config: p.config,
                        out: p.out,
                        ..Common::default()
                    })?;
                    latest_stage(&cfg.io.out, "eval")?
                }
            };
            cmd_plot(&run).map(drop)
        }
        Command::All(e) => {
            let resolved = resolve(&e.common)?;
            cmd_demos(&resolved)?;
            cmd_train(&resolved)?;
            let eval = cmd_eval(&resolved.0, resolved.1, e.sweep, e.horizon_sweep)?;
            cmd_plot(&eval).map(drop)
        }
    }
}

/// Config file plus flag and environment overrides, and the job count.
pub fn resolve(c: &Common) -> Result<(RunConfig, usize)> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &c.out {
        cfg.io.out = out.clone();
    } else if let Some(out) = std::env::var_os("IMPLANT_OUT").filter(|v| !v.is_empty()) {
        cfg.io.out = PathBuf::from(out);
    }
    if let Some(seed) = c.seed {
        cfg.eval.seeds = vec![seed];
    }
    if let Some(a) = c.algorithm {
        cfg.algorithm.name = a;
    }
    if let Some(s) = c.sigma {
        cfg.perturbation.sigma = s;
    }
    if let Some(h) = c.horizon {
        cfg.planner.horizon = h;
    }
    if let Some(b) = c.budget {
        cfg.planner.budget = b;
    }
    cfg.validate()?;
    let jobs = c.jobs.unwrap_or(1);
    if jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    Ok((cfg, jobs))
}

fn stage_index(name: &str, stage: &str) -> Option<u32> {
    name.strip_prefix(stage)?.strip_prefix('-')?.parse().ok()
}

/// Newest `<stage>-NNN` directory under `root`.
pub fn latest_stage(root: &Path, stage: &str) -> Result<PathBuf> {
    let mut best: Option<(u32, PathBuf)> = None;
    if root.is_dir() {
        for entry in std::fs::read_dir(root)? {
            let entry = entry?;
            if let Some(i) = entry.file_name().to_str().and_then(|n| stage_index(n, stage)) {
                if best.as_ref().is_none_or(|(b, _)| i > *b) {
                    best = Some((i, entry.path()));
                }
            }
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::MissingArtifact(root.join(format!("{stage}-*"))))
}

/// Creates the next `<stage>-NNN` directory and freezes `cfg` into it.
fn fresh_stage(root: &Path, stage: &str, cfg: &RunConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(root)?;
    let next = match latest_stage(root, stage) {
        Ok(p) => p.file_name().and_then(|n| n.to_str()).and_then(|n| stage_index(n, stage)).unwrap_or(0) + 1,
        Err(_) => 1,
    };
    let dir = root.join(format!("{stage}-{next:03}"));
    std::fs::create_dir(&dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    Ok(dir)
}

pub fn demo_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("demos-seed{seed}.csv"))
}

pub fn replicate_dir(train_dir: &Path, family: Family, seed: u64) -> PathBuf {
    train_dir.join(family.label()).join(format!("seed{seed}"))
}

pub fn cmd_demos((cfg, _): &(RunConfig, usize)) -> Result<PathBuf> {
    let spec = cfg.spec();
    let dir = fresh_stage(&cfg.io.out, "demos", cfg)?;
    for &seed in &spec.seeds {
        let mut env = Lab::train_env(&spec)?;
        let demos = collect_demos(env.as_mut(), spec.demos, Seed::new(seed))?;
        demos.write(&demo_path(&dir, seed))?;
        println!(
            "seed {seed}: {} pairs, expert mean return {:.3}",
            demos.len(),
            demos.mean_expert_return().unwrap_or(f64::NAN)
        );
    }
    Ok(dir)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn save_trained(dir: &Path, trained: &Trained) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_checkpoint(&dir.join("policy.ckpt"), &trained.policy().to_checkpoint())?;
    if let Trained::Irl(out) = trained {
        write_checkpoint(&dir.join("discriminator.ckpt"), &out.discriminator.to_checkpoint())?;
        write_checkpoint(&dir.join("value.ckpt"), &out.value.to_checkpoint())?;
        write_log(&out.log, &dir.join("train_log.csv"))?;
    }
    Ok(())
}

fn load_trained(dir: &Path, family: Family, env: &str) -> Result<Trained> {
    let bounds = crate::envs::make_env(env)?.action_bounds().clone();
    let policy = GaussianPolicy::from_checkpoint(read_checkpoint(&dir.join("policy.ckpt"))?, bounds)?;
    if !family.is_irl() {
        return Ok(Trained::Bc(policy));
    }
    let discriminator = Discriminator::from_checkpoint(read_checkpoint(&dir.join("discriminator.ckpt"))?)?;
    let value = ValueFn::from_checkpoint(read_checkpoint(&dir.join("value.ckpt"))?)?;
    Ok(Trained::Irl(IrlOutcome {
        policy,
        discriminator,
        value,
        log: Vec::new(),
    }))
}

pub fn cmd_train((cfg, jobs): &(RunConfig, usize)) -> Result<PathBuf> {
    let spec = cfg.spec();
    let demo_dir = latest_stage(&cfg.io.out, "demos")?;
    let demos: Vec<(u64, DemoSet)> = spec
        .seeds
        .iter()
        .map(|&s| Ok((s, DemoSet::read(&demo_path(&demo_dir, s))?)))
        .collect::<Result<_>>()?;
    let dir = fresh_stage(&cfg.io.out, "train", cfg)?;
    let lab = cfg.lab_config();
    let family = spec.algorithm.family();
    let train = |(seed, d): &(u64, DemoSet)| -> Result<()> {
        let trained = Lab::train_uncached(&lab, &spec, *seed, d).map_err(|e| e.within(format!("seed {seed}")))?;
        save_trained(&replicate_dir(&dir, family, *seed), &trained)?;
        println!("seed {seed}: trained {}", family.label());
        Ok(())
    };
    if *jobs > 1 {
        pool(*jobs)?.install(|| demos.par_iter().map(train).collect::<Result<Vec<()>>>())?;
    } else {
        demos.iter().map(train).collect::<Result<Vec<()>>>()?;
    }
    Ok(dir)
}

/// Specs evaluated by `eval`: the configured cell, or one per sweep sigma.
pub fn eval_specs(cfg: &RunConfig, sweep: Option<PerturbationKind>) -> Result<Vec<ExperimentSpec>> {
    let base = cfg.spec();
    match sweep {
        None => Ok(vec![base]),
        Some(kind) => {
            if !kind.is_noise() {
                return Err(Error::Config(format!("--sweep needs a noise kind, got {kind}")));
            }
            let grid = kind.sigma_grid();
            Ok(grid
                .iter()
                .map(|&sigma| {
                    let mut s = base.clone();
                    s.perturbation = PerturbationSpec::noise(kind, sigma);
                    s
                })
                .collect())
        }
    }
}

pub fn cmd_eval(cfg: &RunConfig, jobs: usize, sweep: Option<PerturbationKind>, curve: bool) -> Result<PathBuf> {
    let specs = eval_specs(cfg, sweep)?;
    let base = cfg.spec();
    let family = base.algorithm.family();
    let train_dir = latest_stage(&cfg.io.out, "train")?;
    let mut lab_cfg = cfg.lab_config();
    lab_cfg.jobs = jobs;
    let mut lab = Lab::new(lab_cfg)?;
    let mut first: Option<Trained> = None;
    for &seed in &base.seeds {
        let dir = replicate_dir(&train_dir, family, seed);
        for spec in &specs {
            lab.insert_trained(spec.train_key(seed), load_trained(&dir, family, &base.env)?);
        }
        if curve {
            let mut s = base.clone();
            s.algorithm = Algorithm::Implant;
            lab.insert_trained(s.train_key(seed), load_trained(&dir, family, &base.env)?);
        }
        if first.is_none() {
            first = Some(load_trained(&dir, family, &base.env)?);
        }
    }
    let rows = lab.run_matrix(&specs)?;
    let dir = fresh_stage(&cfg.io.out, "eval", cfg)?;
    std::fs::write(dir.join("results.csv"), results_csv(&rows))?;
    std::fs::write(dir.join("episodes.csv"), episodes_csv(&rows))?;
    let aggregates = aggregate(&rows);
    std::fs::write(dir.join("aggregates.csv"), aggregates_csv(&aggregates))?;
    print!("{}", aggregate_table(&aggregates));
    for row in rows.iter().filter(|r| !r.ok()) {
        eprintln!("seed {} {} {}: {}", row.seed, row.algorithm, row.perturbation, row.status);
    }
    if curve {
        if !family.is_irl() {
            return Err(Error::Config("--horizon-sweep needs an adversarial training run".into()));
        }
        let points = horizon_sweep(&mut lab, &base, SWEEP_BUDGET, &SWEEP_HORIZONS)?;
        std::fs::write(dir.join(format!("curve-{}.csv", base.env)), curve_csv(&points))?;
    }
    if let Some(Trained::Irl(out)) = &first {
        let seed = Seed::new(base.seeds[0]).derive("histogram");
        let mut env = Lab::train_env(&base)?;
        let policy = policy_pairs(env.as_mut(), &out.policy, PolicyMode::Sample, base.episodes, seed.derive("policy"))?;
        let expert = expert_pairs(env.as_mut(), base.episodes, seed.derive("expert"))?;
        let h = reward_histograms(&out.discriminator, &policy, &expert, cfg.eval.histogram_bins)?;
        std::fs::write(dir.join(format!("histogram-{}.csv", base.env)), histogram_csv(&h))?;
    }
    println!("results written to {}", dir.display());
    Ok(dir)
}

pub const EPISODES_HEADER: &str = "env, algorithm, perturbation, sigma, seed, episode, return";

/// One line per evaluation episode, with full precision returns.
pub fn episodes_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(EPISODES_HEADER);
    out.push('\n');
    for r in rows {
        for (e, ret) in r.returns.iter().enumerate() {
            out.push_str(&format!(
                "{}, {}, {}, {:.6}, {}, {e}, {ret:?}\n",
                r.env, r.algorithm, r.perturbation, r.sigma, r.seed
            ));
        }
    }
    out
}

pub fn aggregate_table(rows: &[AggregateRow]) -> String {
    let mut out = format!(
        "{:<14} {:<18} {:<22} {:>7} {:>12} {:>10} {:>6}\n",
        "env", "algorithm", "perturbation", "sigma", "normalized", "std", "seeds"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<14} {:<18} {:<22} {:>7.3} {:>12.4} {:>10.4} {:>6}\n",
            r.env, r.algorithm, r.perturbation, r.sigma, r.mean_normalized, r.std_normalized, r.n_seeds
        ));
    }
    out
}

/// Comma-separated data rows of a CSV with the given header.
fn read_table(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: "unexpected header".into(),
        });
    }
    Ok(lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|f| f.trim().to_string()).collect())
        .collect())
}

fn numbers(path: &Path, row: &[String], cols: &[usize]) -> Result<Vec<f64>> {
    cols.iter()
        .map(|&c| {
            row.get(c).and_then(|f| f.parse().ok()).ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                reason: format!("bad numeric field in column {c}"),
            })
        })
        .collect()
}

fn csv_files(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(prefix) && n.ends_with(".csv"))
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Renders every curve, histogram and aggregate table of an eval directory
/// into a fresh `plot-NNN` sibling. Returns the written figure paths.
pub fn cmd_plot(run: &Path) -> Result<Vec<PathBuf>> {
    if !run.is_dir() {
        return Err(Error::NothingToPlot(run.to_path_buf()));
    }
    let mut figures: Vec<(String, String)> = Vec::new();
    for path in csv_files(run, "curve-")? {
        let rows = read_table(&path, CURVE_HEADER)?;
        let pts = rows
            .iter()
            .map(|r| numbers(&path, r, &[0, 1, 2]).map(|v| (v[0], v[1], v[2])))
            .collect::<Result<Vec<_>>>()?;
        let pts: Vec<_> = pts.into_iter().filter(|p| p.1.is_finite()).collect();
        if pts.is_empty() {
            continue;
        }
        let env = stem(&path, "curve-");
        figures.push((format!("curve-{env}.svg"), plot::curve_svg(&format!("{env}: return vs horizon"), &pts)));
    }
    for path in csv_files(run, "histogram-")? {
        let rows = read_table(&path, HISTOGRAM_HEADER)?;
        if rows.is_empty() {
            continue;
        }
        let vals = rows.iter().map(|r| numbers(&path, r, &[0, 1, 2, 3])).collect::<Result<Vec<_>>>()?;
        let mut edges: Vec<f64> = vals.iter().map(|v| v[0]).collect();
        edges.push(vals[vals.len() - 1][1]);
        let p: Vec<f64> = vals.iter().map(|v| v[2]).collect();
        let e: Vec<f64> = vals.iter().map(|v| v[3]).collect();
        let env = stem(&path, "histogram-");
        figures.push((
            format!("histogram-{env}.svg"),
            plot::histogram_svg(&format!("{env}: inferred reward"), &edges, &p, &e),
        ));
    }
    let agg = run.join("aggregates.csv");
    if agg.exists() {
        let rows = read_table(&agg, crate::harness::report::AGGREGATE_HEADER)?;
        let bars = rows
            .iter()
            .map(|r| {
                let v = numbers(&agg, r, &[8, 9])?;
                Ok((format!("{} {}", r[1], r[2]), v[0], v[1]))
            })
            .collect::<Result<Vec<_>>>()?;
        let bars: Vec<_> = bars.into_iter().filter(|b| b.1.is_finite()).collect();
        if !bars.is_empty() {
            figures.push(("aggregates.svg".into(), plot::bars_svg("normalized return", &bars)));
        }
    }
    if figures.is_empty() {
        return Err(Error::NothingToPlot(run.to_path_buf()));
    }
    let root = run.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(root)?;
    let next = latest_stage(root, "plot")
        .ok()
        .and_then(|p| p.file_name()?.to_str().and_then(|n| stage_index(n, "plot")))
        .unwrap_or(0)
        + 1;
    let dir = root.join(format!("plot-{next:03}"));
    std::fs::create_dir(&dir)?;
    let mut written = Vec::new();
    for (name, svg) in figures {
        let path = dir.join(name);
        std::fs::write(&path, svg)?;
        println!("wrote {}", path.display());
        written.push(path);
    }
    Ok(written)
}

fn stem(path: &Path, prefix: &str) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix(prefix))
        .unwrap_or("run")
        .to_string()
}

/// Result rows of an eval directory, for tests and scripts.
pub fn read_results(run: &Path) -> Result<Vec<Vec<String>>> {
    read_table(&run.join("results.csv"), crate::harness::report::RESULT_HEADER)
}
