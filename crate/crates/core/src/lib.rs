//! Video-classifier rewards for constrained PPO on a planar legged robot.

pub mod error;
pub mod tensor;

pub use error::{Error, Result};
pub mod camera;
pub mod classifier;
pub mod corpus;
pub mod seeding;
pub mod sim;
pub mod harness;
pub mod policy;
pub mod skill;

pub use skill::Skill;
