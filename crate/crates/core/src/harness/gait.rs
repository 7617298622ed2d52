use crate::policy::Policy;
use crate::sim::{observe, RobotConfig, RobotState, ACTION_LEN};
use crate::error::Result;
use crate::skill::Skill;
use std::f64::consts::TAU;

/// Anything that maps robot state to joint targets for a commanded skill.
pub trait Controller: Sync {
    fn act(&self, state: &RobotState, skill: Skill) -> Result<[f64; ACTION_LEN]>;
}

impl Controller for Policy {
    fn act(&self, state: &RobotState, skill: Skill) -> Result<[f64; ACTION_LEN]> {
        self.act_deterministic(&observe(state, skill))
    }
}

/// Open-loop periodic joint targets around the default pose.
///
/// Per leg, with phase `θ = 2π(f t + φ_leg)`: hip `h0 + A sin θ`, knee
/// `k0 − L·max(0, cos θ)^p`, i.e. the foot lifts while the hip swings
/// forward.
#[derive(Clone, Debug, PartialEq)]
pub struct GaitParams {
    pub freq: f64,
    pub hip_amp: f64,
    pub knee_lift: f64,
    /// Shapes the lift pulse; larger is shorter.
    pub lift_power: f64,
    /// Phase offset of each leg, in cycles.
    pub phases: [f64; 4],
    /// Added to the default hip and knee angles.
    pub hip_bias: f64,
    pub knee_bias: f64,
    /// Front and rear hip amplitude multipliers.
    pub front_scale: f64,
    pub rear_scale: f64,
}

/// Pronk: all legs crouch, then extend together.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpParams {
    pub period: f64,
    /// Fraction of the period spent extending; the rest returns to the crouch.
    pub push: f64,
    pub crouch: f64,
    pub extend: f64,
    /// Extra knee flexion peaking mid-period.
    pub tuck: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScriptedGait {
    Still,
    Periodic(GaitParams),
    Pronk(JumpParams),
}

impl ScriptedGait {
    pub fn walk() -> ScriptedGait {
        ScriptedGait::Periodic(GaitParams {
            freq: 1.5,
            hip_amp: 0.18,
            knee_lift: 0.4,
            lift_power: 1.0,
            phases: [0.0, 0.5, 0.5, 0.0],
            hip_bias: 0.0,
            knee_bias: 0.0,
            front_scale: 1.0,
            rear_scale: 1.0,
        })
    }

    pub fn run() -> ScriptedGait {
        ScriptedGait::Periodic(GaitParams {
            freq: 2.0,
            hip_amp: 0.25,
            knee_lift: 0.5,
            lift_power: 0.5,
            phases: [0.0, 0.5, 0.5, 0.0],
            hip_bias: 0.0,
            knee_bias: 0.0,
            front_scale: 1.0,
            rear_scale: 1.0,
        })
    }

    pub fn jump() -> ScriptedGait {
        ScriptedGait::Pronk(JumpParams {
            period: 0.6,
            push: 0.2,
            crouch: 0.25,
            extend: 0.3,
            tuck: 0.0,
        })
    }

    /// The oracle for each skill.
    pub fn for_skill(skill: Skill) -> ScriptedGait {
        match skill {
            Skill::KeepStill => ScriptedGait::Still,
            Skill::Walk => ScriptedGait::walk(),
            Skill::Run => ScriptedGait::run(),
            Skill::Jump => ScriptedGait::jump(),
        }
    }

    pub fn targets(&self, cfg: &RobotConfig, t: f64) -> [f64; ACTION_LEN] {
        let mut q = cfg.q_default;
        match self {
            ScriptedGait::Still => {}
            ScriptedGait::Periodic(g) => {
                for leg in 0..4 {
                    let th = TAU * (g.freq * t + g.phases[leg]);
                    let scale = if leg < 2 { g.front_scale } else { g.rear_scale };
                    q[2 * leg] += g.hip_bias + scale * g.hip_amp * th.sin();
                    q[2 * leg + 1] += g.knee_bias - g.knee_lift * th.cos().max(0.0).powf(g.lift_power);
                }
            }
            ScriptedGait::Pronk(j) => {
                // leg extension: crouch slowly, push fast, keeping feet under the hips
                let u = (t / j.period).fract();
                let ext = if u < j.push {
                    -j.crouch + (j.crouch + j.extend) * smoothstep(u / j.push)
                } else {
                    j.extend - (j.crouch + j.extend) * smoothstep((u - j.push) / (1.0 - j.push))
                };
                let tuck = j.tuck * (std::f64::consts::PI * u).sin().powi(8);
                for leg in 0..4 {
                    q[2 * leg] += -0.5 * ext + 0.5 * tuck;
                    q[2 * leg + 1] += ext - tuck;
                }
            }
        }
        cfg.clamp_action(&q)
    }
}

/// A scripted gait driven by the robot's own clock.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptedController {
    pub robot: RobotConfig,
    /// Overrides the per-skill oracle when set.
    pub gait: Option<ScriptedGait>,
}

impl ScriptedController {
    pub fn new(robot: &RobotConfig) -> ScriptedController {
        ScriptedController {
            robot: robot.clone(),
            gait: None,
        }
    }
}

impl Controller for ScriptedController {
    fn act(&self, state: &RobotState, skill: Skill) -> Result<[f64; ACTION_LEN]> {
        let gait = self.gait.clone().unwrap_or_else(|| ScriptedGait::for_skill(skill));
        Ok(gait.targets(&self.robot, state.time))
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}
