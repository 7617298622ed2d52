use super::{RobotConfig, RobotState};

/// Families of constraint expressions; each expands to one value per
/// foot or joint where applicable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintGroup {
    KneeCollision,
    BaseCollision,
    FootContactForce,
    FootAirTime,
    JointMin,
    JointMax,
    JointVelocity,
    JointAcceleration,
    Torque,
    ActionRate,
    Pitch,
}

impl ConstraintGroup {
    pub const ALL: [ConstraintGroup; 11] = [
        ConstraintGroup::KneeCollision,
        ConstraintGroup::BaseCollision,
        ConstraintGroup::FootContactForce,
        ConstraintGroup::FootAirTime,
        ConstraintGroup::JointMin,
        ConstraintGroup::JointMax,
        ConstraintGroup::JointVelocity,
        ConstraintGroup::JointAcceleration,
        ConstraintGroup::Torque,
        ConstraintGroup::ActionRate,
        ConstraintGroup::Pitch,
    ];

    pub fn len(self) -> usize {
        match self {
            ConstraintGroup::KneeCollision | ConstraintGroup::BaseCollision | ConstraintGroup::Pitch => 1,
            ConstraintGroup::FootContactForce | ConstraintGroup::FootAirTime => 4,
            _ => 8,
        }
    }

    /// Collisions and contact force terminate outright; the rest are soft.
    pub fn is_hard(self) -> bool {
        matches!(
            self,
            ConstraintGroup::KneeCollision | ConstraintGroup::BaseCollision | ConstraintGroup::FootContactForce
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ConstraintGroup::KneeCollision => "knee_collision",
            ConstraintGroup::BaseCollision => "base_collision",
            ConstraintGroup::FootContactForce => "foot_contact_force",
            ConstraintGroup::FootAirTime => "foot_air_time",
            ConstraintGroup::JointMin => "joint_min",
            ConstraintGroup::JointMax => "joint_max",
            ConstraintGroup::JointVelocity => "joint_velocity",
            ConstraintGroup::JointAcceleration => "joint_acceleration",
            ConstraintGroup::Torque => "torque",
            ConstraintGroup::ActionRate => "action_rate",
            ConstraintGroup::Pitch => "pitch",
        }
    }

    /// Index of the first entry of this group in [`ConstraintValues`].
    pub fn offset(self) -> usize {
        let mut off = 0;
        for g in Self::ALL {
            if g == self {
                return off;
            }
            off += g.len();
        }
        unreachable!()
    }

    pub fn range(self) -> std::ops::Range<usize> {
        self.offset()..self.offset() + self.len()
    }

    pub fn of_index(index: usize) -> ConstraintGroup {
        let mut off = 0;
        for g in Self::ALL {
            off += g.len();
            if index < off {
                return g;
            }
        }
        panic!("constraint index {index} out of range")
    }
}

pub const CONSTRAINT_COUNT: usize = 59;

/// Signed constraint expressions for one step; positive means violated.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintValues(pub [f64; CONSTRAINT_COUNT]);

impl Default for ConstraintValues {
    fn default() -> Self {
        ConstraintValues([0.0; CONSTRAINT_COUNT])
    }
}

impl ConstraintValues {
    pub fn group(&self, g: ConstraintGroup) -> &[f64] {
        &self.0[g.range()]
    }

    fn group_mut(&mut self, g: ConstraintGroup) -> &mut [f64] {
        &mut self.0[g.range()]
    }

    pub fn violations(&self) -> usize {
        self.0.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn any_hard_violation(&self) -> bool {
        self.0
            .iter()
            .enumerate()
            .any(|(i, &v)| v > 0.0 && ConstraintGroup::of_index(i).is_hard())
    }

    pub fn any_soft_violation(&self) -> bool {
        self.0
            .iter()
            .enumerate()
            .any(|(i, &v)| v > 0.0 && !ConstraintGroup::of_index(i).is_hard())
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Evaluates every constraint for the transition `before -> after` under
/// `action` (already clamped to joint limits).
pub fn measure_constraints(before: &RobotState, after: &RobotState, action: &[f64; 8], cfg: &RobotConfig) -> ConstraintValues {
    use ConstraintGroup::*;
    let mut cv = ConstraintValues::default();
    let stats = &after.last;
    cv.group_mut(KneeCollision)[0] = indicator(stats.knee_collision);
    cv.group_mut(BaseCollision)[0] = indicator(stats.base_collision);
    for j in 0..4 {
        cv.group_mut(FootContactForce)[j] = stats.max_foot_force[j] - cfg.foot_force_limit;
        cv.group_mut(FootAirTime)[j] = match stats.touchdown_air_time[j] {
            Some(t) => cfg.air_time_target - t,
            None => 0.0,
        };
    }
    for k in 0..8 {
        cv.group_mut(JointMin)[k] = cfg.q_min[k] - after.q[k];
        cv.group_mut(JointMax)[k] = after.q[k] - cfg.q_max[k];
        cv.group_mut(JointVelocity)[k] = stats.max_abs_qd[k] - cfg.velocity_limit;
        cv.group_mut(JointAcceleration)[k] = (after.qd[k] - before.qd[k]).abs() / cfg.dt - cfg.acceleration_limit;
        cv.group_mut(Torque)[k] = stats.max_raw_torque[k] - cfg.torque_limit;
        cv.group_mut(ActionRate)[k] = (action[k] - before.prev_action[k]).abs() / cfg.dt - cfg.action_rate_limit;
    }
    cv.group_mut(Pitch)[0] = after.pitch.abs() - cfg.pitch_limit;
    cv
}
