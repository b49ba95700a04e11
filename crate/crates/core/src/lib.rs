//! Reward shaping, answer-anchored GRPO, hard-sample mining and reasoning
//! analytics for remote-sensing vision-language training.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod embed;
pub mod grpo;
pub mod instructfmt;
pub mod metrics;
pub mod mining;
pub mod reward;
pub mod sample;
pub mod textkit;
pub mod thinkscore;
pub mod toy;

pub use config::{ConfigError, RepoConfig};
pub use embed::{Backend, EmbeddingProvider};
pub use grpo::{GrpoConfig, Rollout, RolloutGroup};
pub use metrics::BBox;
pub use reward::{RewardBreakdown, RewardConfig, Scorer};
pub use sample::{Reference, Sample, Task};
pub use thinkscore::{ThinkBreakdown, ThinkConfig};
