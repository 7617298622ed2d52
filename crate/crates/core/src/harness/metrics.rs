use super::gait::{Controller, ScriptedController};
use crate::camera::{render_frame, CameraConfig, Clip, Frame, CLIP_LEN};
use crate::classifier::{eval_classifier, Classifier, Evaluation};
use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::sim::{self, RobotConfig};
use crate::skill::Skill;
use rand::Rng;
use rayon::prelude::*;

/// Evaluation protocol sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub episodes: usize,
    pub steps: usize,
    /// Sliding window for the height metric, in steps (1 s at the default
    /// control period).
    pub window: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 10,
            steps: 1000,
            window: 50,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.steps == 0 || self.window < 2 || self.window > self.steps {
            return Err(Error::Config("eval: need episodes, steps > 0 and 2 <= window <= steps".into()));
        }
        Ok(())
    }
}

/// Per-skill behaviour measurements. Every field is computed for every
/// skill; [`SkillMetrics::primary`] picks the one that grades it.
#[derive(Clone, Debug, PartialEq)]
pub struct SkillMetrics {
    pub skill: Skill,
    pub mean_abs_vx: f64,
    pub mean_vx: f64,
    pub delta_z: f64,
    /// Fraction of steps with any soft constraint violated.
    pub violation_rate: f64,
    /// Fraction of steps with any hard constraint violated.
    pub hard_rate: f64,
    pub episodes: usize,
    pub steps: usize,
    pub diverged: usize,
}

impl SkillMetrics {
    pub fn primary(&self) -> (&'static str, f64) {
        match self.skill {
            Skill::KeepStill => ("mean_abs_vx", self.mean_abs_vx),
            Skill::Walk | Skill::Run => ("mean_vx", self.mean_vx),
            Skill::Jump => ("delta_z", self.delta_z),
        }
    }

    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("mean_abs_vx", self.mean_abs_vx),
            ("mean_vx", self.mean_vx),
            ("delta_z", self.delta_z),
            ("violation_rate", self.violation_rate),
            ("hard_rate", self.hard_rate),
            ("episodes", self.episodes as f64),
            ("diverged", self.diverged as f64),
        ]
    }
}

#[derive(Default)]
struct Episode {
    abs_vx: f64,
    vx: f64,
    dz: f64,
    windows: usize,
    soft: usize,
    hard: usize,
    steps: usize,
    diverged: bool,
}

fn run_episode(ctrl: &dyn Controller, robot: &RobotConfig, skill: Skill, cfg: &EvalConfig, seed: u64, ep: usize) -> Result<Episode> {
    let mut rng = stream_rng(seed, &[40, skill.index() as u64, ep as u64]);
    let mut state = sim::reset(robot, &mut rng);
    let mut out = Episode::default();
    let mut zs = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let action = ctrl.act(&state, skill)?;
        let Ok(cv) = sim::step(&mut state, &action, robot) else {
            out.diverged = true;
            break;
        };
        out.steps += 1;
        out.abs_vx += state.vx.abs();
        out.vx += state.vx;
        zs.push(state.z);
        if cv.any_soft_violation() {
            out.soft += 1;
        }
        if cv.any_hard_violation() {
            out.hard += 1;
        }
    }
    for w in zs.windows(cfg.window) {
        let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| (a.min(z), b.max(z)));
        out.dz += hi - lo;
        out.windows += 1;
    }
    Ok(out)
}

/// Runs `cfg.episodes` episodes of `skill` without early termination and
/// averages over all steps. A diverged episode contributes the steps it
/// completed.
pub fn eval_controller(
    ctrl: &dyn Controller,
    robot: &RobotConfig,
    skill: Skill,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<SkillMetrics> {
    cfg.validate()?;
    let eps: Vec<Episode> = (0..cfg.episodes)
        .into_par_iter()
        .map(|ep| run_episode(ctrl, robot, skill, cfg, seed, ep))
        .collect::<Result<_>>()?;
    let steps: usize = eps.iter().map(|e| e.steps).sum();
    let windows: usize = eps.iter().map(|e| e.windows).sum();
    let per_step = |f: fn(&Episode) -> f64| eps.iter().map(f).sum::<f64>() / steps.max(1) as f64;
    Ok(SkillMetrics {
        skill,
        mean_abs_vx: per_step(|e| e.abs_vx),
        mean_vx: per_step(|e| e.vx),
        delta_z: eps.iter().map(|e| e.dz).sum::<f64>() / windows.max(1) as f64,
        violation_rate: per_step(|e| e.soft as f64),
        hard_rate: per_step(|e| e.hard as f64),
        episodes: cfg.episodes,
        steps,
        diverged: eps.iter().filter(|e| e.diverged).count(),
    })
}

/// All four skills, in [`Skill::ALL`] order.
pub fn eval_all(ctrl: &dyn Controller, robot: &RobotConfig, cfg: &EvalConfig, seed: u64) -> Result<Vec<SkillMetrics>> {
    Skill::ALL.iter().map(|&s| eval_controller(ctrl, robot, s, cfg, seed)).collect()
}

/// Records one clip of `skill` after `warmup` steps, one frame every
/// `interval` steps.
pub fn record_clip(
    ctrl: &dyn Controller,
    robot: &RobotConfig,
    cam: &CameraConfig,
    skill: Skill,
    warmup: usize,
    interval: usize,
    rng: &mut impl Rng,
) -> Result<Clip> {
    if interval == 0 {
        return Err(Error::Invalid("render interval must be positive".into()));
    }
    let mut state = sim::reset(robot, rng);
    let mut frames: Vec<Frame> = Vec::with_capacity(CLIP_LEN);
    let total = warmup + interval * CLIP_LEN;
    for k in 1..=total {
        let action = ctrl.act(&state, skill)?;
        sim::step(&mut state, &action, robot).map_err(|_| Error::Invalid(format!("simulation diverged recording {skill}")))?;
        if k > warmup && (k - warmup) % interval == 0 {
            frames.push(render_frame(&state, robot, cam));
        }
    }
    Clip::new(frames)
}

/// Zero-shot check: the classifier scores clips of the scripted robot
/// gaits, labelled by the skill each gait imitates.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferConfig {
    pub clips_per_skill: usize,
    /// Warm-up before the first frame is drawn uniformly from this range.
    pub warmup: std::ops::Range<usize>,
    pub interval: usize,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            clips_per_skill: 25,
            warmup: 50..250,
            interval: 5,
        }
    }
}

pub fn robot_clips(robot: &RobotConfig, cam: &CameraConfig, cfg: &TransferConfig, seed: u64) -> Result<Vec<(Vec<f32>, u8)>> {
    if cfg.warmup.is_empty() {
        return Err(Error::Config("transfer warm-up range is empty".into()));
    }
    let ctrl = ScriptedController::new(robot);
    let jobs: Vec<(Skill, usize)> = Skill::ALL
        .iter()
        .flat_map(|&s| (0..cfg.clips_per_skill).map(move |i| (s, i)))
        .collect();
    jobs.par_iter()
        .map(|&(skill, i)| {
            let mut rng = stream_rng(seed, &[41, skill.index() as u64, i as u64]);
            let warmup = rng.random_range(cfg.warmup.clone());
            let clip = record_clip(&ctrl, robot, cam, skill, warmup, cfg.interval, &mut rng)?;
            let pixels = clip.frames().iter().flat_map(|f| f.pixels.iter().copied()).collect();
            Ok((pixels, skill.bit()))
        })
        .collect()
}

pub fn zero_shot(classifier: &Classifier, robot: &RobotConfig, cam: &CameraConfig, cfg: &TransferConfig, seed: u64) -> Result<Evaluation> {
    eval_classifier(classifier, &robot_clips(robot, cam, cfg, seed)?)
}
