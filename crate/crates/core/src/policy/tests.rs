use super::*;
use crate::camera::Frame;
use crate::sim::{observe, sym_action_permutation, sym_obs_permutation, ConstraintGroup, ConstraintValues, RobotConfig};
use crate::sim::{ACTION_LEN, CONSTRAINT_COUNT, OBS_LEN};
use crate::skill::Skill;
use crate::tensor::{cast_vec, lr_at, AdamHyper, OptState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn small_policy(seed: u64) -> Policy {
    let cfg = PolicyConfig {
        hidden: vec![16, 12],
        ..PolicyConfig::default()
    };
    Policy::init(&cfg, &RobotConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn random_obs(rng: &mut ChaCha8Rng) -> [f32; OBS_LEN] {
    let mut o: [f32; OBS_LEN] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let skill = Skill::ALL[rng.random_range(0..4)];
    o[27..].copy_from_slice(&skill.one_hot());
    o
}

/// Output layer scaled up so the actor is far from symmetric.
fn loud_policy(seed: u64) -> Policy {
    let mut p = small_policy(seed);
    let last = p.actor().layer_params(p.actor().layers().len() - 1);
    for v in &mut p.params[last] {
        *v *= 100.0;
    }
    p
}

#[test]
fn tiny_std_samples_stay_at_the_mean() {
    let mut p = small_policy(1);
    let r = p.log_std_range();
    p.params[r].fill(-4.0);
    let obs = observe(&crate::sim::stand(&RobotConfig::default(), RobotConfig::default().q_default), Skill::Walk);
    let mean = p.mean_action(&obs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 2000;
    let close = (0..n)
        .filter(|_| {
            let s = p.sample_action(&obs, &mut rng).unwrap();
            s.raw.iter().zip(&mean).all(|(a, m)| (a - m).abs() < 0.1)
        })
        .count();
    assert!(close as f64 / n as f64 > 0.99);
}

#[test]
fn log_prob_matches_density() {
    let p = small_policy(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let obs = random_obs(&mut rng);
        let s = p.sample_action(&obs, &mut rng).unwrap();
        let mean = p.mean_action(&obs).unwrap();
        let sigma = p.log_std().map(f64::exp);
        let density: f64 = (0..ACTION_LEN)
            .map(|k| (-(s.raw[k] - mean[k]).powi(2) / (2.0 * sigma[k] * sigma[k])).exp() / (sigma[k] * (2.0 * PI).sqrt()))
            .product();
        assert!((s.log_prob - density.ln()).abs() < 1e-9 * density.ln().abs().max(1.0));
        for k in 0..ACTION_LEN {
            assert!((p.q_min[k]..=p.q_max[k]).contains(&s.target[k]));
        }
    }
}

#[test]
fn seeds_change_samples_not_means() {
    let p = small_policy(5);
    let obs = random_obs(&mut ChaCha8Rng::seed_from_u64(0));
    let a = p.sample_action(&obs, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let b = p.sample_action(&obs, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_ne!(a.raw, b.raw);
    assert_eq!(p.mean_action(&obs).unwrap(), p.mean_action(&obs).unwrap());
}

#[test]
fn initial_noise_and_clamp() {
    let p = small_policy(0);
    assert!(p.log_std().iter().all(|&l| (l - 0.1f64.ln()).abs() < 1e-6));
    let mut q = p.clone();
    let r = q.log_std_range();
    q.params[r.start] = 7.0;
    q.params[r.start + 1] = -9.0;
    assert_eq!(q.log_std()[0], LOG_STD_MAX);
    assert_eq!(q.log_std()[1], LOG_STD_MIN);
    q.clamp_log_std();
    assert_eq!(f64::from(q.params[r.start]), LOG_STD_MAX);
}

#[test]
fn policy_checkpoint_round_trip() {
    let p = small_policy(6);
    let back = Policy::from_checkpoint(&p.to_checkpoint()).unwrap();
    assert_eq!(back, p);
    let mut bad = p.to_checkpoint();
    bad.manifest.pop();
    assert!(Policy::from_checkpoint(&bad).is_err());
}

fn cv_with(i: usize, v: f64) -> ConstraintValues {
    let mut cv = ConstraintValues([-1.0; CONSTRAINT_COUNT]);
    cv.0[i] = v;
    cv
}

#[test]
fn cat_rules() {
    let cat = CatState::new(&CatConfig::default()).unwrap();
    assert_eq!(cat.delta(&ConstraintValues([-0.5; CONSTRAINT_COUNT])), 0.0);
    assert_eq!(cat.delta(&ConstraintValues::default()), 0.0);
    for g in ConstraintGroup::ALL.into_iter().filter(|g| g.is_hard()) {
        assert_eq!(cat.delta(&cv_with(g.offset(), 1e-9)), 1.0);
    }
    let air = ConstraintGroup::FootAirTime.offset();
    assert_eq!(cat.delta(&cv_with(air, cat.scale[air])), 0.5);
    let pitch = ConstraintGroup::Pitch.offset();
    assert_eq!(cat.delta(&cv_with(pitch, 10.0)), 0.25);
    assert_eq!(cat.delta(&cv_with(pitch, 0.5)), 0.125);

    let disabled = CatState::new(&CatConfig {
        disabled: vec![ConstraintGroup::FootAirTime],
        ..CatConfig::default()
    })
    .unwrap();
    assert_eq!(disabled.delta(&cv_with(air, 1.0)), 0.0);
}

#[test]
fn cat_scale_tracks_violations() {
    let cat = CatState::new(&CatConfig::default()).unwrap();
    let pitch = ConstraintGroup::Pitch.offset();
    let (_, next) = cat_termination(&cv_with(pitch, 3.0), &cat);
    assert!((next.scale[pitch] - (0.995 + 0.005 * 3.0)).abs() < 1e-12);
    let mut quiet = cat.clone();
    for _ in 0..100_000 {
        quiet.update(&[0.0; CONSTRAINT_COUNT]);
    }
    assert!(quiet.scale.iter().all(|&s| s >= SCALE_FLOOR));
    assert!(CatState::new(&CatConfig {
        soft_delta_max: 0.0,
        ..CatConfig::default()
    })
    .is_err());
}

proptest! {
    #[test]
    fn cat_is_monotone(values in proptest::collection::vec(-1.0f64..1.0, CONSTRAINT_COUNT), i in 0..CONSTRAINT_COUNT, bump in 0.0f64..2.0) {
        let cat = CatState::new(&CatConfig::default()).unwrap();
        let cv = ConstraintValues(values.clone().try_into().unwrap());
        let mut more = cv.clone();
        more.0[i] += bump;
        let (a, b) = (cat.delta(&cv), cat.delta(&more));
        prop_assert!(b >= a);
        prop_assert!((0.0..=1.0).contains(&a));
    }
}

#[test]
fn reward_normalisation_endpoints() {
    let mut n = RewardNorm::new(0.99);
    n.min[1] = 0.2;
    n.max[1] = 0.7;
    assert!((n.normalize(Skill::Walk, 0.7) - 0.5 / (0.5 + RANGE_EPS)).abs() < 1e-12);
    assert!(n.normalize(Skill::Walk, 0.7) > 0.99);
    assert_eq!(n.normalize(Skill::Walk, 0.2), 0.0);
    assert_eq!(n.normalize(Skill::Walk, 0.0), 0.0);
    assert_eq!(n.normalize(Skill::Walk, 2.0), 1.0);

    let mut flat = RewardNorm::new(0.0);
    flat.update(Skill::Run, 0.4, 0.4);
    let r = flat.normalize(Skill::Run, 0.4);
    assert!(r.is_finite() && r.abs() < 1e-9);
    assert!(flat.max[2] >= flat.min[2]);
}

#[test]
fn reward_normalisation_is_affine_invariant() {
    // with extrema converged, a·f + b maps to the same normalised reward
    let scores = [0.1, 0.35, 0.6, 0.9];
    let (a, b) = (2.5, -0.3);
    let mut n1 = RewardNorm::new(0.0);
    let mut n2 = RewardNorm::new(0.0);
    n1.update(Skill::Jump, 0.1, 0.9);
    n2.update(Skill::Jump, a * 0.1 + b, a * 0.9 + b);
    for s in scores {
        let r1 = n1.normalize(Skill::Jump, s);
        let r2 = n2.normalize(Skill::Jump, a * s + b);
        assert!((r1 - r2).abs() < 2e-3, "{r1} vs {r2}");
    }
}

fn random_traj(rng: &mut ChaCha8Rng, n: usize) -> Trajectory {
    Trajectory {
        rewards: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        values: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        survival: vec![1.0; n],
        done: vec![false; n],
        terminal_value: vec![0.0; n],
        bootstrap: 0.0,
    }
}

#[test]
fn gae_lambda_one_gives_discounted_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let t = random_traj(&mut rng, 30);
        let (_, ret) = compute_gae(&t, 0.99, 1.0).unwrap();
        for s in 0..30 {
            let direct: f64 = (s..30).map(|k| 0.99f64.powi((k - s) as i32) * t.rewards[k]).sum();
            assert!((ret[s] - direct).abs() < 1e-6);
        }
    }
}

#[test]
fn gae_survival_zero_truncates() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut t = random_traj(&mut rng, 10);
    t.survival[4] = 0.0;
    let (adv, _) = compute_gae(&t, 0.99, 0.95).unwrap();
    assert!((adv[4] - (t.rewards[4] - t.values[4])).abs() < 1e-12);

    let zero = Trajectory {
        rewards: vec![0.0; 5],
        values: vec![0.0; 5],
        survival: vec![0.7; 5],
        done: vec![false, true, false, false, false],
        terminal_value: vec![0.0; 5],
        bootstrap: 0.0,
    };
    let (adv, ret) = compute_gae(&zero, 0.99, 0.95).unwrap();
    assert!(adv.iter().chain(&ret).all(|&v| v == 0.0));
}

#[test]
fn gae_done_cuts_the_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut t = random_traj(&mut rng, 8);
    t.done[3] = true;
    t.terminal_value[3] = 0.5;
    let (adv, _) = compute_gae(&t, 0.9, 0.8).unwrap();
    assert!((adv[3] - (t.rewards[3] + 0.9 * 0.5 - t.values[3])).abs() < 1e-12);
    let mut bad = t.clone();
    bad.values.pop();
    assert!(compute_gae(&bad, 0.9, 0.8).is_err());

    let mut a = vec![1.0, 2.0, 3.0, 4.0];
    normalize_advantages(&mut a);
    assert!(a.iter().sum::<f64>().abs() < 1e-12);
    assert!((a.iter().map(|x| x * x).sum::<f64>() / 4.0 - 1.0).abs() < 1e-12);
}

/// Ties the actor so that its hidden features ignore the left/right swap
/// and its outputs are equal across mirrored joints.
fn tie(p: &mut Policy) {
    let actor = p.actor().clone();
    let first = actor.layer_params(0);
    let w = &mut p.params[first];
    let perm = sym_obs_permutation();
    for row in w[..OBS_LEN * 16].chunks_exact_mut(OBS_LEN) {
        let orig = row.to_vec();
        for i in 0..OBS_LEN {
            row[i] = 0.5 * (orig[i] + orig[perm[i]]);
        }
    }
    let last = actor.layer_params(actor.layers().len() - 1);
    let inputs = 12;
    let apar = sym_action_permutation();
    let block = p.params[last.clone()].to_vec();
    let (wts, bias) = block.split_at(ACTION_LEN * inputs);
    let out = &mut p.params[last];
    for k in 0..ACTION_LEN {
        let j = apar[k];
        for c in 0..inputs {
            out[k * inputs + c] = 0.5 * (wts[k * inputs + c] + wts[j * inputs + c]);
        }
        out[ACTION_LEN * inputs + k] = 0.5 * (bias[k] + bias[j]);
    }
}

#[test]
fn tied_policy_has_zero_symmetry_loss() {
    let mut p = loud_policy(11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let obs: Vec<Vec<f32>> = (0..200).map(|_| random_obs(&mut rng).to_vec()).collect();
    assert!(symmetry_loss(&p, &obs).unwrap() > 1e-3);
    tie(&mut p);
    assert_eq!(symmetry_loss(&p, &obs).unwrap(), 0.0);
}

#[test]
fn symmetry_gradient_matches_finite_difference() {
    let p = loud_policy(13);
    let params: Vec<f64> = cast_vec(p.actor_params());
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..5 {
        let obs: Vec<f64> = cast_vec(&random_obs(&mut rng));
        let mut g = vec![0.0f64; params.len()];
        let loss = symmetry_term(p.actor(), &params, &obs, 1.0, Some(&mut g)).unwrap();
        assert!(loss >= 0.0);
        let dir: Vec<f64> = (0..params.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let analytic: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let at = |s: f64| {
            let q: Vec<f64> = params.iter().zip(&dir).map(|(p, d)| p + s * d).collect();
            symmetry_term(p.actor(), &q, &obs, 1.0, None).unwrap()
        };
        let eps = 1e-6;
        let numeric = (at(eps) - at(-eps)) / (2.0 * eps);
        assert!((numeric - analytic).abs() <= 1e-4 * analytic.abs().max(1e-8), "{numeric} vs {analytic}");
    }
}

#[test]
fn symmetry_loss_is_minimisable() {
    let mut p = loud_policy(15);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let obs: Vec<Vec<f32>> = (0..64).map(|_| random_obs(&mut rng).to_vec()).collect();
    let na = p.actor_len();
    let mut opt = OptState::new(na, AdamHyper::default());
    let before = symmetry_loss(&p, &obs).unwrap();
    for step in 0..200 {
        let mut g = vec![0.0f32; na];
        for o in &obs {
            symmetry_term(p.actor(), p.actor_params(), o, 1.0 / obs.len() as f32, Some(&mut g)).unwrap();
        }
        opt.step(&mut p.params[..na], &g, lr_at(step, 200, 0, 2e-2)).unwrap();
    }
    let after = symmetry_loss(&p, &obs).unwrap();
    assert!(after < 1e-3, "{before} -> {after}");
}

#[test]
fn surrogate_clip_rules() {
    assert_eq!(clipped_surrogate(2.0, 1.0, 0.2).0, 1.2);
    assert_eq!(clipped_surrogate(2.0, -1.0, 0.2).0, -2.0);
    assert_eq!(clipped_surrogate(0.5, -1.0, 0.2).0, -0.8);
    assert_eq!(clipped_surrogate(1.0, 0.7, 0.2), (0.7, true));
}

fn on_policy_samples(p: &Policy, n: usize, seed: u64) -> Vec<PpoSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adv: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize_advantages(&mut adv);
    (0..n)
        .map(|i| {
            let obs = random_obs(&mut rng);
            let a = p.sample_action(&obs, &mut rng).unwrap();
            PpoSample {
                obs,
                action: a.raw,
                log_prob: a.log_prob,
                advantage: adv[i],
                ret: rng.random_range(-2.0..2.0),
            }
        })
        .collect()
}

#[test]
fn on_policy_surrogate_is_mean_advantage() {
    let p = small_policy(17);
    let samples = on_policy_samples(&p, 256, 18);
    let t = evaluate_terms(&p, &samples, &PpoConfig::default()).unwrap();
    assert!(t.surrogate.abs() < 1e-6, "{}", t.surrogate);
    assert!(t.kl.abs() < 1e-9);
}

#[test]
fn update_reduces_value_error() {
    let mut p = small_policy(19);
    let samples = on_policy_samples(&p, 512, 20);
    let cfg = PpoConfig {
        lr: 1e-3,
        ..PpoConfig::default()
    };
    let before = evaluate_terms(&p, &samples, &cfg).unwrap().value_se;
    let mut opt = OptState::new(p.params.len(), AdamHyper::default());
    let stats = ppo_update(&mut p, &mut opt, &samples, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let after = evaluate_terms(&p, &samples, &cfg).unwrap().value_se;
    assert!(after < before, "{before} -> {after}");
    assert!(stats.steps > 0 && stats.grad_norm.is_finite());
}

#[test]
fn grad_norm_clipping() {
    let mut g = vec![3.0f32, 4.0];
    assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
    assert!((g[0] - 0.6).abs() < 1e-6 && (g[1] - 0.8).abs() < 1e-6);
    let mut small = vec![0.1f32];
    clip_grad_norm(&mut small, 1.0);
    assert_eq!(small, vec![0.1]);
}

fn small_rl(envs: usize, horizon: usize) -> RlConfig {
    RlConfig {
        envs,
        iterations: 1,
        rollout: RolloutConfig {
            horizon,
            ..RolloutConfig::default()
        },
        policy: PolicyConfig {
            hidden: vec![16, 12],
            ..PolicyConfig::default()
        },
        ppo: PpoConfig {
            minibatches: 2,
            epochs: 2,
            ..PpoConfig::default()
        },
        seed: 3,
        ..RlConfig::default()
    }
}

#[test]
fn rewards_follow_the_render_schedule() {
    let mut t = Trainer::new(small_rl(8, 96)).unwrap();
    let scorer = ConstantScorer([0.3, 0.5, 0.7, 0.9]);
    let batch = t.collect(&scorer, None).unwrap();
    assert_eq!(batch.diverged, 0);
    let skills: std::collections::BTreeSet<_> = batch.envs.iter().filter_map(|e| e.skill).collect();
    assert_eq!(skills.len(), 4);
    for e in &batch.envs {
        let nonzero = e.traj.rewards.iter().filter(|&&r| r != 0.0).count();
        assert!(nonzero <= 19);
        for (i, &r) in e.traj.rewards.iter().enumerate() {
            if r != 0.0 {
                assert!(e.render[i] && (i + 1) % 5 == 0);
            }
        }
        assert!(e.raw_scores[..39].iter().all(Option::is_none));
        if !e.traj.done[..40].contains(&true) {
            assert!(e.raw_scores[39].is_some());
        }
        assert!(e.traj.survival.iter().all(|s| (0.0..=1.0).contains(s)));
    }
    // the initial norm state maps each constant score to itself (up to ε)
    let rewards: Vec<f64> = batch.envs.iter().flat_map(|e| e.traj.rewards.iter().copied()).filter(|&r| r != 0.0).collect();
    assert!(!rewards.is_empty());
    for e in &batch.envs {
        let want = t.norm.normalize(e.skill.unwrap(), f64::from(scorer.0[e.skill.unwrap().index()]));
        assert!(e.raw_scores.iter().flatten().count() > 0);
        for (r, s) in e.traj.rewards.iter().zip(&e.raw_scores) {
            if s.is_some() {
                assert_eq!(*r, want);
            }
        }
    }
}

#[test]
fn constant_scores_give_equal_rewards() {
    let mut t = Trainer::new(small_rl(8, 60)).unwrap();
    let batch = t.collect(&ConstantScorer([0.6; 4]), None).unwrap();
    let r: Vec<f64> = batch.envs.iter().flat_map(|e| e.traj.rewards.clone()).filter(|&r| r != 0.0).collect();
    assert!(r.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn policy_is_blind_to_frames() {
    let run = |hook: Option<&FrameHook>| {
        let mut t = Trainer::new(small_rl(4, 50)).unwrap();
        let b = t.collect(&ConstantScorer([0.5; 4]), hook).unwrap();
        b.envs.iter().map(|e| e.targets.clone()).collect::<Vec<_>>()
    };
    let corrupt = |f: &mut Frame| f.pixels.iter_mut().for_each(|p| *p = 1.0 - *p);
    assert_eq!(run(None), run(Some(&corrupt)));
}

#[test]
fn training_is_reproducible() {
    let run = || {
        let mut t = Trainer::new(small_rl(4, 45)).unwrap();
        let scorer = ConstantScorer([0.2, 0.4, 0.6, 0.8]);
        for _ in 0..2 {
            t.iterate(&scorer, None).unwrap();
        }
        (t.policy.to_checkpoint().to_bytes(), log_csv(&t.log))
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    assert_eq!(la.lines().count(), 3);
    assert_eq!(la.lines().next().unwrap().split(',').count(), la.lines().nth(1).unwrap().split(',').count());
}
