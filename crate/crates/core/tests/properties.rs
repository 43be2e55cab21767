use implant::envs::{ActionBounds, DemoSet};
use implant::harness::{aggregate, mean_std, References, ResultRow};
use implant::imitation::discriminator::{reward_from_prob, D_MAX, D_MIN};
use implant::imitation::{bc_train, gae_advantages, normalize_advantages, BcConfig, GaussianPolicy};
use implant::net::Mlp;
use implant::planner::{argmax_lowest, estimate_return};
use implant::rng::Seed;
use proptest::prelude::*;

fn net(seed: u64, dims: &[usize]) -> Mlp {
    Mlp::new(dims, &mut Seed::new(seed).rng()).unwrap()
}

// O(n^2) reference: A_t = sum_l (gamma lambda)^l delta_{t+l}
fn brute_gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    (0..n)
        .map(|t| {
            (t..n)
                .map(|k| {
                    let delta = rewards[k] + gamma * values[k + 1] - values[k];
                    (gamma * lambda).powi((k - t) as i32) * delta
                })
                .sum()
        })
        .collect()
}

fn row(algorithm: &str, seed: u64, mean: f64, ok: bool) -> ResultRow {
    let refs = References { expert: 10.0, random: -5.0 };
    ResultRow {
        env: "PointMass2D".into(),
        algorithm: algorithm.into(),
        perturbation: "none".into(),
        sigma: 0.0,
        seed,
        returns: vec![mean],
        mean_return: mean,
        std_return: 0.0,
        normalized: refs.normalize(mean),
        n_episodes: 1,
        references: refs,
        status: if ok { "ok".into() } else { "failed: x".into() },
    }
}

proptest! {
    #[test]
    fn output_layer_scaling_is_homogeneous(
        seed in any::<u64>(),
        c in -5.0f64..5.0,
        x in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let base = net(seed, &[3, 8, 8, 2]);
        let mut scaled = base.clone();
        scaled.scale_output_layer(c);
        let y = base.forward(&x).unwrap();
        let z = scaled.forward(&x).unwrap();
        for (y, z) in y.iter().zip(&z) {
            prop_assert!((c * y - z).abs() <= 1e-12 * (1.0 + z.abs()));
        }
    }

    #[test]
    fn eval_forward_ignores_dropout_rate(
        seed in any::<u64>(),
        rate in 0.0f64..0.9,
        x in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let base = net(seed, &[4, 6, 1]);
        let dropped = base.clone().with_dropout(rate).unwrap();
        let a = dropped.forward(&x).unwrap();
        prop_assert_eq!(&base.forward(&x).unwrap(), &a);
        prop_assert_eq!(&dropped.forward(&x).unwrap(), &a);
    }

    #[test]
    fn reward_is_increasing_and_bounded(p in 0.0f64..1.0, q in 0.0f64..1.0, wild in -2.0f64..3.0) {
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        let (lo, hi) = (lo.clamp(D_MIN, D_MAX), hi.clamp(D_MIN, D_MAX));
        if lo < hi {
            prop_assert!(reward_from_prob(lo) < reward_from_prob(hi));
        }
        let r = reward_from_prob(wild);
        prop_assert!(r.is_finite());
        prop_assert!(r >= reward_from_prob(D_MIN) && r <= reward_from_prob(D_MAX));
    }

    #[test]
    fn gae_matches_double_sum(
        rewards in prop::collection::vec(-10.0f64..10.0, 1..40),
        extra in prop::collection::vec(-10.0f64..10.0, 41),
        gamma in 0.0f64..1.0,
        lambda in 0.0f64..1.0,
    ) {
        let values = &extra[..rewards.len() + 1];
        let (adv, targets) = gae_advantages(&rewards, values, gamma, lambda).unwrap();
        let reference = brute_gae(&rewards, values, gamma, lambda);
        for t in 0..rewards.len() {
            prop_assert!((adv[t] - reference[t]).abs() <= 1e-12 * (1.0 + reference[t].abs()));
            prop_assert_eq!(targets[t], adv[t] + values[t]);
        }
    }

    #[test]
    fn normalized_advantages_have_unit_moments(mut adv in prop::collection::vec(-100.0f64..100.0, 2..60)) {
        let spread = adv.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - adv.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-6);
        normalize_advantages(&mut adv);
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var.sqrt() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_discount_estimate_is_first_reward(
        rewards in prop::collection::vec(-50.0f64..50.0, 1..20),
        terminal in -1e3f64..1e3,
        terminated in any::<bool>(),
    ) {
        prop_assert_eq!(estimate_return(&rewards, terminal, 0.0, terminated).unwrap(), rewards[0]);
    }

    #[test]
    fn argmax_is_shift_invariant(
        scores in prop::collection::vec(-1000i32..1000, 1..30),
        c in -1_000_000i32..1_000_000,
    ) {
        // integer-valued scores keep the shifted comparison exact
        let base: Vec<f64> = scores.iter().map(|&s| f64::from(s)).collect();
        let shifted: Vec<f64> = base.iter().map(|s| s + f64::from(c)).collect();
        prop_assert_eq!(argmax_lowest(&base), argmax_lowest(&shifted));
    }

    #[test]
    fn policy_samples_stay_in_bounds(
        seed in any::<u64>(),
        obs in prop::collection::vec(-5.0f64..5.0, 2),
        log_std in -3.0f64..1.0,
    ) {
        let bounds = ActionBounds::symmetric(2, 1.0);
        let policy = GaussianPolicy::new(2, bounds.clone(), &[16], log_std, &mut Seed::new(seed).rng()).unwrap();
        let mut rng = Seed::new(seed).derive("sample").rng();
        let (raw, clipped) = policy.sample(&obs, &mut rng).unwrap();
        prop_assert_eq!(&clipped, &bounds.clip(&raw));
        prop_assert_eq!(policy.mean(&obs).unwrap(), policy.mean(&obs).unwrap());
        prop_assert!(policy.log_prob(&obs, &raw).unwrap().is_finite());
    }

    #[test]
    fn aggregates_recompute_from_rows(
        cells in prop::collection::vec((0usize..3, -100.0f64..100.0, prop::bool::weighted(0.85)), 1..25),
    ) {
        let names = ["BC", "GAIL", "IMPLANT"];
        let rows: Vec<ResultRow> = cells
            .iter()
            .enumerate()
            .map(|(i, &(a, m, ok))| row(names[a], i as u64, m, ok))
            .collect();
        for agg in aggregate(&rows) {
            let group: Vec<&ResultRow> = rows.iter().filter(|r| r.algorithm == agg.algorithm).collect();
            let good: Vec<f64> = group.iter().filter(|r| r.ok()).map(|r| r.mean_return).collect();
            prop_assert_eq!(agg.n_seeds, group.len());
            prop_assert_eq!(agg.n_failed, group.len() - good.len());
            if !good.is_empty() {
                let (m, s) = mean_std(&good);
                prop_assert_eq!(agg.mean_return, m);
                prop_assert_eq!(agg.std_return, s);
                let norms: Vec<f64> = group.iter().filter(|r| r.ok()).map(|r| r.normalized).collect();
                prop_assert_eq!(agg.mean_normalized, mean_std(&norms).0);
            }
        }
    }
}

#[test]
fn full_batch_bc_loss_never_increases() {
    let states: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let t = i as f64 / 40.0;
            vec![t * 2.0 - 1.0, (t * 6.0).sin()]
        })
        .collect();
    let actions = states.iter().map(|s| vec![(0.5 * s[0] - 0.3 * s[1]).tanh()]).collect();
    let demos = DemoSet {
        env: "fixture".into(),
        obs_dim: 2,
        act_dim: 1,
        states,
        actions,
        expert_returns: vec![],
    };
    let cfg = BcConfig {
        epochs: 200,
        learning_rate: 1e-4,
        batch_size: 40,
        ..BcConfig::default()
    };
    let (_, losses) = bc_train(&demos, ActionBounds::symmetric(1, 1.0), &cfg, Seed::new(3)).unwrap();
    for w in losses.windows(2) {
        assert!(w[1] <= w[0], "loss rose from {} to {}", w[0], w[1]);
    }
    assert!(losses.last().unwrap() < &losses[0]);
}
