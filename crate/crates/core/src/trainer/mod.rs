//! Skip-gram negative-sampling training with per-sense input vectors.

mod model;
mod params;
mod sampler;
mod sgd;

pub use model::{SenseModel, DEFAULT_LEARNING_RATE};
pub use sampler::{NegativeSampler, UnigramTable, NOISE_EXPONENT};
pub use sgd::{
    occurrence_gradient, occurrence_loss, sgd_step, train_pass, EpochStats, OccurrenceGradient,
    StepLoss, TrainOptions,
};
