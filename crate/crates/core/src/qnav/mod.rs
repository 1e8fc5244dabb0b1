//! Q-learning exploration workload.
//!
//! A robot in a walled grid senses three depth rays, evaluates a quantized
//! 3→16→4 rectifier network on the modeled MAC hardware, and learns by
//! semi-gradient Q-learning from a bounded replay scratchpad. Reward is +1
//! per newly visited cell and −5 per collision, so learning progress shows up
//! as covered cells per episode.

mod arena;
mod network;
mod train;

pub use arena::{
    apply_action, sense, Action, Arena, Cell, DepthReading, RobotState, StepOutcome, HEADINGS, MAX_RANGE,
    REWARD_COLLISION, REWARD_NEW_CELL,
};
pub use network::{argmax, q_forward, ForwardPass, Hardware, MaskPair, NetScales, QNetwork, NET_BITS};
pub use train::{
    bellman_target, evaluate_policy, run_training, select_action, train_step, Experience, Scratchpad,
    StepUpdate, TrainConfig, TraceRow, TrainingTrace,
};

use crate::macmodel::MacError;
use crate::stochsyn::StochError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QnavError {
    #[error("invalid arena: {0}")]
    Arena(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error(transparent)]
    Stoch(#[from] StochError),
}
