//! Constrained PPO on the planar robot with sparse clip-score rewards.

mod cat;
mod gae;
mod net;
mod ppo;
mod reward;
mod rollout;
mod train;

pub use cat::{cat_termination, CatConfig, CatState, ViolationStats, SCALE_FLOOR};
pub use gae::{compute_gae, normalize_advantages, Trajectory};
pub use net::{
    gaussian_log_prob, symmetry_loss, symmetry_term, ActionSample, Policy, PolicyConfig, ACTION_SCALE, LOG_STD_MAX,
    LOG_STD_MIN,
};
pub use ppo::{
    clip_grad_norm, clipped_surrogate, evaluate_terms, ppo_update, prepare_samples, sample_terms, LossTerms, PpoConfig,
    PpoSample, UpdateStats,
};
pub use reward::{RewardNorm, ScoreStats, RANGE_EPS};
pub use rollout::{
    collect_rollouts, make_envs, ClipScorer, ConstantScorer, Env, EnvRollout, FrameHook, RolloutBatch, RolloutConfig,
    RolloutContext,
};
pub use train::{log_csv, train_policy, IterLog, RlConfig, RlOutcome, Trainer};

#[cfg(test)]
mod tests;
