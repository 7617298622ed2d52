use crate::error::{Error, Result};

/// Joint order: hip then knee for FL, FR, RL, RR.
pub const JOINT_NAMES: [&str; 8] = [
    "fl_hip", "fl_knee", "fr_hip", "fr_knee", "rl_hip", "rl_knee", "rr_hip", "rr_knee",
];
pub const LEG_NAMES: [&str; 4] = ["fl", "fr", "rl", "rr"];

/// Geometry, actuation, contact and constraint limits of the planar robot.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotConfig {
    /// Distance between front and rear hips (m).
    pub body_length: f64,
    /// Thickness of the base box, used for collision and rendering (m).
    pub body_height: f64,
    pub body_mass: f64,
    pub thigh_length: f64,
    pub shank_length: f64,
    pub thigh_mass: f64,
    pub shank_mass: f64,
    /// Reflected rotor inertia added to each joint (kg m^2).
    pub armature: f64,
    pub joint_damping: f64,
    pub gravity: f64,

    pub q_default: [f64; 8],
    pub q_min: [f64; 8],
    pub q_max: [f64; 8],
    pub kp: f64,
    pub kd: f64,
    /// When false the PD output is applied unclamped.
    pub clamp_torque: bool,

    pub torque_limit: f64,
    pub velocity_limit: f64,
    pub acceleration_limit: f64,
    pub action_rate_limit: f64,
    pub foot_force_limit: f64,
    pub air_time_target: f64,
    pub pitch_limit: f64,

    pub ground_stiffness: f64,
    pub ground_damping: f64,
    pub friction_stiffness: f64,
    pub friction_damping: f64,
    pub friction_coef: f64,

    /// Policy period (s).
    pub dt: f64,
    pub substeps: usize,
    pub reset_noise: f64,
    pub episode_steps: usize,
}

impl Default for RobotConfig {
    fn default() -> Self {
        let leg = |hip: f64, knee: f64| [hip, knee];
        let [h, k] = leg(0.7, -1.4);
        Self {
            body_length: 0.4,
            body_height: 0.08,
            body_mass: 1.6,
            thigh_length: 0.16,
            shank_length: 0.16,
            thigh_mass: 0.2,
            shank_mass: 0.1,
            armature: 0.002,
            joint_damping: 0.005,
            gravity: 9.81,
            q_default: [h, k, h, k, h, k, h, k],
            q_min: [-1.2, -2.7, -1.2, -2.7, -1.2, -2.7, -1.2, -2.7],
            q_max: [1.8, -0.1, 1.8, -0.1, 1.8, -0.1, 1.8, -0.1],
            kp: 8.0,
            kd: 0.15,
            clamp_torque: true,
            torque_limit: 3.0,
            velocity_limit: 20.0,
            acceleration_limit: 1500.0,
            action_rate_limit: 40.0,
            foot_force_limit: 80.0,
            air_time_target: 0.2,
            pitch_limit: 0.35,
            ground_stiffness: 3000.0,
            ground_damping: 40.0,
            friction_stiffness: 3000.0,
            friction_damping: 30.0,
            friction_coef: 0.8,
            dt: 0.02,
            substeps: 4,
            reset_noise: 0.05,
            episode_steps: 1000,
        }
    }
}

impl RobotConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("body_length", self.body_length),
            ("body_height", self.body_height),
            ("body_mass", self.body_mass),
            ("thigh_length", self.thigh_length),
            ("shank_length", self.shank_length),
            ("thigh_mass", self.thigh_mass),
            ("shank_mass", self.shank_mass),
            ("torque_limit", self.torque_limit),
            ("velocity_limit", self.velocity_limit),
            ("acceleration_limit", self.acceleration_limit),
            ("action_rate_limit", self.action_rate_limit),
            ("foot_force_limit", self.foot_force_limit),
            ("air_time_target", self.air_time_target),
            ("pitch_limit", self.pitch_limit),
            ("ground_stiffness", self.ground_stiffness),
            ("friction_stiffness", self.friction_stiffness),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("robot.{name} must be positive, got {v}")));
            }
        }
        if self.substeps == 0 {
            return Err(Error::Config("robot.substeps must be at least 1".into()));
        }
        for k in 0..8 {
            if self.q_min[k] >= self.q_max[k] {
                return Err(Error::Config(format!(
                    "joint {} has q_min {} >= q_max {}",
                    JOINT_NAMES[k], self.q_min[k], self.q_max[k]
                )));
            }
            if self.q_default[k] < self.q_min[k] || self.q_default[k] > self.q_max[k] {
                return Err(Error::Config(format!("default pose of {} outside limits", JOINT_NAMES[k])));
            }
        }
        Ok(())
    }

    pub fn substep_dt(&self) -> f64 {
        self.dt / self.substeps as f64
    }

    /// Hip offset along the body axis for leg `leg` (front legs positive).
    pub fn hip_offset(&self, leg: usize) -> f64 {
        if leg < 2 {
            0.5 * self.body_length
        } else {
            -0.5 * self.body_length
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.body_mass + 4.0 * (self.thigh_mass + self.shank_mass)
    }

    pub fn clamp_action(&self, action: &[f64; 8]) -> [f64; 8] {
        let mut a = *action;
        for k in 0..8 {
            a[k] = a[k].clamp(self.q_min[k], self.q_max[k]);
        }
        a
    }
}
