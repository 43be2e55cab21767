use std::fmt::Write as _;

use super::{mean_std, ExperimentSpec, References};
use crate::perturb::{Mode, PerturbationSpec};

pub const RESULT_HEADER: &str =
    "env, algorithm, perturbation, sigma, seed, mean_return, std_return, normalized, n_episodes, status";

pub const AGGREGATE_HEADER: &str =
    "env, algorithm, perturbation, sigma, n_seeds, n_failed, mean_return, std_return, mean_normalized, std_normalized";

/// Perturbation column: the kind, plus the mode for nuisances.
pub fn perturbation_label(p: &PerturbationSpec) -> String {
    if p.kind.is_nuisance() {
        let mode = match p.mode {
            Mode::Train => "train",
            Mode::Test => "test",
        };
        format!("{}-{mode}", p.kind)
    } else {
        p.kind.to_string()
    }
}

/// One (spec, seed) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub env: String,
    pub algorithm: String,
    pub perturbation: String,
    pub sigma: f64,
    pub seed: u64,
    pub returns: Vec<f64>,
    pub mean_return: f64,
    /// Sample standard deviation over episodes.
    pub std_return: f64,
    pub normalized: f64,
    pub n_episodes: usize,
    pub references: References,
    /// `ok` or `failed: <reason>`.
    pub status: String,
}

impl ResultRow {
    pub(crate) fn new(
        spec: &ExperimentSpec,
        seed: u64,
        refs: &References,
        outcome: std::result::Result<Vec<f64>, String>,
    ) -> Self {
        let (returns, status) = match outcome {
            Ok(r) => (r, "ok".to_string()),
            Err(msg) => (Vec::new(), format!("failed: {}", msg.replace([',', '\n'], ";"))),
        };
        let (mean, std) = if returns.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            mean_std(&returns)
        };
        ResultRow {
            env: spec.env.clone(),
            algorithm: spec.algorithm.to_string(),
            perturbation: perturbation_label(&spec.perturbation),
            sigma: spec.perturbation.effective_sigma(),
            seed,
            mean_return: mean,
            std_return: std,
            normalized: refs.normalize(mean),
            n_episodes: returns.len(),
            returns,
            references: *refs,
            status,
        }
    }

    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{}, {}, {}, {:.6}, {}, {:.6}, {:.6}, {:.6}, {}, {}",
            r.env,
            r.algorithm,
            r.perturbation,
            r.sigma,
            r.seed,
            r.mean_return,
            r.std_return,
            r.normalized,
            r.n_episodes,
            r.status
        )
        .unwrap();
    }
    out
}

/// Across-seed summary of rows sharing (env, algorithm, perturbation, sigma).
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub env: String,
    pub algorithm: String,
    pub perturbation: String,
    pub sigma: f64,
    pub n_seeds: usize,
    pub n_failed: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_normalized: f64,
    pub std_normalized: f64,
}

/// Groups rows in order of first appearance. Failed seeds are counted, not
/// averaged.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut groups: Vec<(AggregateRow, Vec<f64>, Vec<f64>)> = Vec::new();
    for r in rows {
        let idx = groups.iter().position(|(g, _, _)| {
            g.env == r.env
                && g.algorithm == r.algorithm
                && g.perturbation == r.perturbation
                && g.sigma.to_bits() == r.sigma.to_bits()
        });
        let idx = idx.unwrap_or_else(|| {
            groups.push((
                AggregateRow {
                    env: r.env.clone(),
                    algorithm: r.algorithm.clone(),
                    perturbation: r.perturbation.clone(),
                    sigma: r.sigma,
                    n_seeds: 0,
                    n_failed: 0,
                    mean_return: f64::NAN,
                    std_return: f64::NAN,
                    mean_normalized: f64::NAN,
                    std_normalized: f64::NAN,
                },
                Vec::new(),
                Vec::new(),
            ));
            groups.len() - 1
        });
        let (g, means, norms) = &mut groups[idx];
        g.n_seeds += 1;
        if r.ok() {
            means.push(r.mean_return);
            norms.push(r.normalized);
        } else {
            g.n_failed += 1;
        }
    }
    groups
        .into_iter()
        .map(|(mut g, means, norms)| {
            if !means.is_empty() {
                (g.mean_return, g.std_return) = mean_std(&means);
                (g.mean_normalized, g.std_normalized) = mean_std(&norms);
            }
            g
        })
        .collect()
}

pub fn aggregates_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{}, {}, {}, {:.6}, {}, {}, {:.6}, {:.6}, {:.6}, {:.6}",
            r.env,
            r.algorithm,
            r.perturbation,
            r.sigma,
            r.n_seeds,
            r.n_failed,
            r.mean_return,
            r.std_return,
            r.mean_normalized,
            r.std_normalized
        )
        .unwrap();
    }
    out
}
