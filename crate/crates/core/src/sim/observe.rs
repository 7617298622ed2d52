use super::RobotState;
use crate::skill::Skill;

pub const OBS_LEN: usize = 31;
pub const ACTION_LEN: usize = 8;

pub const QD_SCALE: f64 = 0.05;
pub const PITCH_RATE_SCALE: f64 = 0.25;

// observation layout
const Q: usize = 0;
const QD: usize = 8;
const PITCH_SIN: usize = 16;
const PITCH_COS: usize = 17;
const PITCH_RATE: usize = 18;
const PREV_ACTION: usize = 19;
const SKILL: usize = 27;

/// `[q, q̇·s, sin θ, cos θ, θ̇·s, a_prev, one-hot skill]`. No base position,
/// no camera frames.
pub fn observe(state: &RobotState, skill: Skill) -> [f32; OBS_LEN] {
    let mut o = [0.0f32; OBS_LEN];
    for k in 0..8 {
        o[Q + k] = state.q[k] as f32;
        o[QD + k] = (state.qd[k] * QD_SCALE) as f32;
        o[PREV_ACTION + k] = state.prev_action[k] as f32;
    }
    o[PITCH_SIN] = state.pitch.sin() as f32;
    o[PITCH_COS] = state.pitch.cos() as f32;
    o[PITCH_RATE] = (state.pitch_rate * PITCH_RATE_SCALE) as f32;
    o[SKILL..SKILL + 4].copy_from_slice(&skill.one_hot());
    o
}

/// Swaps the FL/FR and RL/RR joint pairs of an 8-joint block.
fn swap_legs<T: Copy>(block: &mut [T]) {
    for (a, b) in [(0, 2), (1, 3), (4, 6), (5, 7)] {
        block.swap(a, b);
    }
}

/// Index permutation applied by [`sym_obs`].
pub fn sym_obs_permutation() -> [usize; OBS_LEN] {
    let mut p: [usize; OBS_LEN] = std::array::from_fn(|i| i);
    for start in [Q, QD, PREV_ACTION] {
        swap_legs(&mut p[start..start + 8]);
    }
    p
}

/// Index permutation applied by [`sym_action`].
pub fn sym_action_permutation() -> [usize; ACTION_LEN] {
    let mut p: [usize; ACTION_LEN] = std::array::from_fn(|i| i);
    swap_legs(&mut p);
    p
}

/// Left-right mirror of an observation.
pub fn sym_obs<T: Copy>(obs: &[T]) -> Vec<T> {
    let mut o = obs.to_vec();
    for start in [Q, QD, PREV_ACTION] {
        swap_legs(&mut o[start..start + 8]);
    }
    o
}

/// Left-right mirror of a joint-space action.
pub fn sym_action<T: Copy>(action: &[T]) -> Vec<T> {
    let mut a = action.to_vec();
    swap_legs(&mut a);
    a
}
