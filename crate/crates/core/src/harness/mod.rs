//! Scripted gaits, evaluation metrics, experiment configs and presets.

mod config;
mod experiment;
mod gait;
mod metrics;

pub use config::{CorpusConfig, ExperimentConfig, Preset, KEYS};
pub use experiment::{
    classifier_stage, content_hash, corpus_stage, dump_frames, policy_stage, run_experiment, skill_table,
    ExperimentReport, ResultRow, RunOptions, CLASSIFIER_FILE, CONFIG_FILE, CORPUS_FILE, HASH_FILE, POLICY_FILE,
    RESULTS_FILE, TABLE_FILE,
};
pub use gait::{Controller, GaitParams, JumpParams, ScriptedController, ScriptedGait};
pub use metrics::{
    eval_all, eval_controller, record_clip, robot_clips, zero_shot, EvalConfig, SkillMetrics, TransferConfig,
};
