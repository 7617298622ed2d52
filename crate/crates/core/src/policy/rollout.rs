use super::cat::{CatState, ViolationStats};
use super::gae::Trajectory;
use super::net::Policy;
use super::reward::{RewardNorm, ScoreStats};
use crate::camera::{render_frame, CameraConfig, Frame, CLIP_LEN};
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::sim::{self, observe, RobotConfig, RobotState, ACTION_LEN, OBS_LEN};
use crate::skill::Skill;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::VecDeque;

/// Turns rendered frames into per-skill clip scores. Frames are embedded
/// once when rendered; a clip is scored from its cached embeddings.
pub trait ClipScorer: Sync {
    fn embed(&self, frame: &Frame) -> Result<Vec<f32>>;
    fn scores(&self, embeddings: &[Vec<f32>]) -> Result<Vec<f32>>;
}

impl ClipScorer for Classifier {
    fn embed(&self, frame: &Frame) -> Result<Vec<f32>> {
        self.embed_frame(&frame.pixels)
    }

    fn scores(&self, embeddings: &[Vec<f32>]) -> Result<Vec<f32>> {
        self.scores_from_embeddings(embeddings)
    }
}

/// Returns the same scores for every clip.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantScorer(pub [f32; Skill::COUNT]);

impl ClipScorer for ConstantScorer {
    fn embed(&self, _: &Frame) -> Result<Vec<f32>> {
        Ok(Vec::new())
    }

    fn scores(&self, _: &[Vec<f32>]) -> Result<Vec<f32>> {
        Ok(self.0.to_vec())
    }
}

/// Applied to each rendered frame before it is embedded.
pub type FrameHook = dyn Fn(&mut Frame) + Send + Sync;

/// One simulated robot with its own random stream and clip cache.
#[derive(Clone, Debug)]
pub struct Env {
    pub id: usize,
    pub skill: Skill,
    pub state: RobotState,
    pub rng: ChaCha8Rng,
    /// Policy steps since the last reset.
    pub steps: u64,
    pub episodes: usize,
    embeddings: VecDeque<Vec<f32>>,
}

impl Env {
    pub fn new(id: usize, skill: Skill, robot: &RobotConfig, seed: u64) -> Env {
        let mut rng = stream_rng(seed, &[20, id as u64]);
        let state = sim::reset(robot, &mut rng);
        Env {
            id,
            skill,
            state,
            rng,
            steps: 0,
            episodes: 0,
            embeddings: VecDeque::with_capacity(CLIP_LEN),
        }
    }

    fn reset(&mut self, robot: &RobotConfig) {
        self.state = sim::reset(robot, &mut self.rng);
        self.steps = 0;
        self.episodes += 1;
        self.embeddings.clear();
    }
}

/// Skills assigned round-robin over environment ids.
pub fn make_envs(n: usize, robot: &RobotConfig, seed: u64) -> Vec<Env> {
    (0..n).map(|i| Env::new(i, Skill::ALL[i % Skill::COUNT], robot, seed)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutConfig {
    pub horizon: usize,
    pub render_interval: u64,
    pub camera: CameraConfig,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            horizon: 96,
            render_interval: 5,
            camera: CameraConfig::default(),
        }
    }
}

/// Everything recorded for one environment over one horizon.
#[derive(Clone, Debug, Default)]
pub struct EnvRollout {
    pub env: usize,
    pub skill: Option<Skill>,
    pub obs: Vec<[f32; OBS_LEN]>,
    /// Gaussian samples before clamping.
    pub actions: Vec<[f64; ACTION_LEN]>,
    /// Joint targets actually applied.
    pub targets: Vec<[f64; ACTION_LEN]>,
    pub log_probs: Vec<f64>,
    pub raw_scores: Vec<Option<f64>>,
    pub render: Vec<bool>,
    pub deltas: Vec<f64>,
    pub traj: Trajectory,
    pub violations: ViolationStats,
    pub scores: ScoreStats,
}

#[derive(Clone, Debug, Default)]
pub struct RolloutBatch {
    pub envs: Vec<EnvRollout>,
    /// Environments dropped from this batch after a non-finite state.
    pub diverged: usize,
    pub violations: ViolationStats,
    pub scores: ScoreStats,
}

impl RolloutBatch {
    pub fn steps(&self) -> usize {
        self.envs.iter().map(|e| e.obs.len()).sum()
    }

    pub fn mean_delta(&self) -> f64 {
        let n = self.steps();
        if n == 0 {
            return 0.0;
        }
        self.envs.iter().flat_map(|e| &e.deltas).sum::<f64>() / n as f64
    }
}

/// Shared read-only inputs of a rollout.
pub struct RolloutContext<'a> {
    pub policy: &'a Policy,
    pub scorer: &'a dyn ClipScorer,
    pub robot: &'a RobotConfig,
    pub cat: &'a CatState,
    pub norm: &'a RewardNorm,
    pub cfg: &'a RolloutConfig,
    pub frame_hook: Option<&'a FrameHook>,
}

fn run_env(env: &mut Env, ctx: &RolloutContext<'_>) -> Result<Option<EnvRollout>> {
    let h = ctx.cfg.horizon;
    let mut out = EnvRollout {
        env: env.id,
        skill: Some(env.skill),
        ..EnvRollout::default()
    };
    let policy = ctx.policy;
    for _ in 0..h {
        let obs = observe(&env.state, env.skill);
        let value = f64::from(policy.value(&obs)?);
        let sample = policy.sample_action(&obs, &mut env.rng)?;
        let cv = match sim::step(&mut env.state, &sample.target, ctx.robot) {
            Ok(cv) => cv,
            Err(sim::Diverged) => {
                env.reset(ctx.robot);
                return Ok(None);
            }
        };
        env.steps += 1;
        let delta = ctx.cat.delta(&cv);
        out.violations.record(&cv);

        let render = env.steps % ctx.cfg.render_interval == 0;
        let mut raw = None;
        let mut reward = 0.0;
        if render {
            let mut frame = render_frame(&env.state, ctx.robot, &ctx.cfg.camera);
            if let Some(hook) = ctx.frame_hook {
                hook(&mut frame);
            }
            if env.embeddings.len() == CLIP_LEN {
                env.embeddings.pop_front();
            }
            env.embeddings.push_back(ctx.scorer.embed(&frame)?);
            if env.embeddings.len() == CLIP_LEN {
                let window: Vec<Vec<f32>> = env.embeddings.iter().cloned().collect();
                let s = f64::from(ctx.scorer.scores(&window)?[env.skill.index()]);
                reward = ctx.norm.normalize(env.skill, s);
                out.scores.record(env.skill, s, reward);
                raw = Some(s);
            }
        }

        let terminated = delta >= 1.0;
        let timed_out = env.steps >= ctx.robot.episode_steps as u64;
        let terminal_value = if timed_out && !terminated {
            f64::from(policy.value(&observe(&env.state, env.skill))?)
        } else {
            0.0
        };
        out.obs.push(obs);
        out.actions.push(sample.raw);
        out.targets.push(sample.target);
        out.log_probs.push(sample.log_prob);
        out.raw_scores.push(raw);
        out.render.push(render);
        out.deltas.push(delta);
        let t = &mut out.traj;
        t.rewards.push(reward);
        t.values.push(value);
        t.survival.push(1.0 - delta);
        t.done.push(terminated || timed_out);
        t.terminal_value.push(terminal_value);
        if terminated || timed_out {
            env.reset(ctx.robot);
        }
    }
    out.traj.bootstrap = f64::from(policy.value(&observe(&env.state, env.skill))?);
    Ok(Some(out))
}

/// Steps every environment for one horizon. Each environment owns its
/// random stream, so the result does not depend on the thread count.
pub fn collect_rollouts(envs: &mut [Env], ctx: &RolloutContext<'_>) -> Result<RolloutBatch> {
    if ctx.cfg.render_interval == 0 || ctx.cfg.horizon == 0 {
        return Err(Error::Config("horizon and render interval must be positive".into()));
    }
    let results: Vec<Option<EnvRollout>> = envs.par_iter_mut().map(|e| run_env(e, ctx)).collect::<Result<_>>()?;
    let mut batch = RolloutBatch::default();
    for r in results {
        match r {
            Some(r) => {
                batch.violations.merge(&r.violations);
                batch.scores.merge(&r.scores);
                batch.envs.push(r);
            }
            None => batch.diverged += 1,
        }
    }
    Ok(batch)
}
