//! Learning the human's score function online from noisy feedback.

pub mod features;
pub mod model;
pub mod replay;
pub mod train;

pub use features::{featurize, featurize_with_history};
pub use model::{Init, LinearProbe, Sample, ScoreModel, DEFAULT_HIDDEN};
pub use replay::{ReplayDataset, Transition};
pub use train::{
    epsilon_greedy_info, epsilon_schedule, train_loop, train_step, EpisodeRecord, Learner, LearningRun,
    PreferenceChange, TrainConfig,
};
