use super::cat::{CatConfig, CatState};
use super::net::{Policy, PolicyConfig};
use super::ppo::{ppo_update, prepare_samples, PpoConfig, UpdateStats};
use super::reward::RewardNorm;
use super::rollout::{collect_rollouts, make_envs, ClipScorer, Env, FrameHook, RolloutBatch, RolloutConfig, RolloutContext};
use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::sim::{ConstraintGroup, RobotConfig};
use crate::skill::Skill;
use crate::tensor::{AdamHyper, OptState};
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub struct RlConfig {
    pub envs: usize,
    pub iterations: usize,
    pub rollout: RolloutConfig,
    pub robot: RobotConfig,
    pub policy: PolicyConfig,
    pub ppo: PpoConfig,
    pub cat: CatConfig,
    pub reward_polyak: f64,
    pub seed: u64,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            envs: 256,
            iterations: 2000,
            rollout: RolloutConfig::default(),
            robot: RobotConfig::default(),
            policy: PolicyConfig::default(),
            ppo: PpoConfig::default(),
            cat: CatConfig::default(),
            reward_polyak: 0.99,
            seed: 0,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.envs == 0 || self.iterations == 0 {
            return Err(Error::Config("rl: envs and iterations must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.reward_polyak) {
            return Err(Error::Config("rl: reward polyak must lie in [0, 1)".into()));
        }
        self.robot.validate()?;
        self.rollout.camera.validate()?;
        self.policy.validate()?;
        self.ppo.validate()?;
        self.cat.validate()
    }
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct IterLog {
    pub iter: usize,
    pub raw_score: [f64; Skill::COUNT],
    pub reward: [f64; Skill::COUNT],
    pub mean_delta: f64,
    pub violation_rate: Vec<f64>,
    pub diverged: usize,
    pub update: UpdateStats,
}

impl IterLog {
    pub fn csv_header() -> String {
        let mut cols = vec!["iter".to_string()];
        cols.extend(Skill::ALL.map(|s| format!("raw_{}", s.name())));
        cols.extend(Skill::ALL.map(|s| format!("reward_{}", s.name())));
        cols.push("mean_delta".into());
        cols.extend(ConstraintGroup::ALL.map(|g| format!("viol_{}", g.name())));
        cols.extend(
            ["diverged", "surrogate", "value_loss", "entropy", "symmetry", "kl", "clip_fraction", "epochs", "early_stop"]
                .map(String::from),
        );
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut row = vec![self.iter.to_string()];
        row.extend(self.raw_score.iter().chain(&self.reward).map(|v| format!("{v:.6}")));
        row.push(format!("{:.6}", self.mean_delta));
        row.extend(self.violation_rate.iter().map(|v| format!("{v:.6}")));
        let u = &self.update;
        row.push(self.diverged.to_string());
        row.extend([u.surrogate, u.value_loss, u.entropy, u.symmetry, u.kl, u.clip_fraction].map(|v| format!("{v:.6}")));
        row.push(u.epochs_run.to_string());
        row.push(u8::from(u.early_stop).to_string());
        row.join(",")
    }
}

pub fn log_csv(log: &[IterLog]) -> String {
    let mut out = IterLog::csv_header();
    out.push('\n');
    for l in log {
        let _ = writeln!(out, "{}", l.csv_row());
    }
    out
}

/// Mutable state of a policy-training run.
pub struct Trainer {
    pub cfg: RlConfig,
    pub policy: Policy,
    pub opt: OptState,
    pub cat: CatState,
    pub norm: RewardNorm,
    pub envs: Vec<Env>,
    pub iter: usize,
    pub log: Vec<IterLog>,
}

impl Trainer {
    pub fn new(cfg: RlConfig) -> Result<Trainer> {
        cfg.validate()?;
        let policy = Policy::init(&cfg.policy, &cfg.robot, &mut stream_rng(cfg.seed, &[30]))?;
        let opt = OptState::new(
            policy.params.len(),
            AdamHyper {
                lr: cfg.ppo.lr,
                weight_decay: cfg.ppo.weight_decay,
                ..AdamHyper::default()
            },
        );
        Ok(Trainer {
            cat: CatState::new(&cfg.cat)?,
            norm: RewardNorm::new(cfg.reward_polyak),
            envs: make_envs(cfg.envs, &cfg.robot, cfg.seed),
            policy,
            opt,
            iter: 0,
            log: Vec::new(),
            cfg,
        })
    }

    pub fn collect(&mut self, scorer: &dyn ClipScorer, hook: Option<&FrameHook>) -> Result<RolloutBatch> {
        let ctx = RolloutContext {
            policy: &self.policy,
            scorer,
            robot: &self.cfg.robot,
            cat: &self.cat,
            norm: &self.norm,
            cfg: &self.cfg.rollout,
            frame_hook: hook,
        };
        collect_rollouts(&mut self.envs, &ctx)
    }

    /// Collects one batch, updates the running statistics and the networks.
    pub fn iterate(&mut self, scorer: &dyn ClipScorer, hook: Option<&FrameHook>) -> Result<(IterLog, RolloutBatch)> {
        let batch = self.collect(scorer, hook)?;
        let samples = prepare_samples(&batch, &self.cfg.ppo)?;
        let mut rng = stream_rng(self.cfg.seed, &[31, self.iter as u64]);
        let update = ppo_update(&mut self.policy, &mut self.opt, &samples, &self.cfg.ppo, &mut rng)?;
        self.cat.update(&batch.violations.max);
        batch.scores.apply(&mut self.norm);
        let steps = batch.violations.steps.max(1) as f64;
        let entry = IterLog {
            iter: self.iter,
            raw_score: Skill::ALL.map(|s| batch.scores.mean_raw(s)),
            reward: Skill::ALL.map(|s| batch.scores.mean_reward(s)),
            mean_delta: batch.mean_delta(),
            violation_rate: ConstraintGroup::ALL
                .iter()
                .map(|&g| batch.violations.violated[g.range()].iter().sum::<usize>() as f64 / steps)
                .collect(),
            diverged: batch.diverged,
            update,
        };
        self.log.push(entry.clone());
        self.iter += 1;
        Ok((entry, batch))
    }
}

#[derive(Clone, Debug)]
pub struct RlOutcome {
    pub policy: Policy,
    pub log: Vec<IterLog>,
}

/// Runs `cfg.iterations` iterations; `progress` sees every log row.
pub fn train_policy(cfg: &RlConfig, scorer: &dyn ClipScorer, mut progress: impl FnMut(&IterLog)) -> Result<RlOutcome> {
    let mut t = Trainer::new(cfg.clone())?;
    for _ in 0..cfg.iterations {
        let (entry, _) = t.iterate(scorer, None)?;
        progress(&entry);
    }
    Ok(RlOutcome {
        policy: t.policy,
        log: t.log,
    })
}
