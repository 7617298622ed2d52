//! Planar (x–z) quadruped: four coplanar two-link legs under PD control,
//! penalty ground contact with Coulomb-capped friction, constraint
//! measurement and the left-right mirror operator.

mod config;
mod constraints;
mod dynamics;
mod observe;
mod trajectory;

pub use config::{RobotConfig, JOINT_NAMES, LEG_NAMES};
pub use constraints::{measure_constraints, ConstraintGroup, ConstraintValues, CONSTRAINT_COUNT};
pub use dynamics::{
    mechanical_energy, pd_torque, reset, stand, standing_height, step, Diverged, RobotState, Skeleton, StepStats,
};
pub use observe::{
    observe, sym_action, sym_action_permutation, sym_obs, sym_obs_permutation, ACTION_LEN, OBS_LEN,
    PITCH_RATE_SCALE, QD_SCALE,
};
pub use trajectory::{TrajectoryRecorder, TrajectoryRow};
