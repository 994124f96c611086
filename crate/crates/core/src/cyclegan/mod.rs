//! The PPG to ABP translator: two generators, two discriminators, their
//! losses, the alternating training loop and inference-time translation.

mod buffer;
mod checkpoint;
mod loss;
mod model;
mod pipeline;
mod train;

pub use buffer::ReplayBuffer;
pub use checkpoint::{
    format_loss_history, load_checkpoint, save_checkpoint, write_loss_history, CheckpointManifest,
    CHECKPOINT_FORMAT_VERSION, LOSS_HISTORY_HEADER,
};
pub use loss::{
    adversarial_loss, adversarial_loss_value, cycle_loss, cycle_loss_value, total_objective, total_objective_value,
    GanForm, ObjectiveParts, Side, DEFAULT_LAMBDA_CYC, LOG_EPS,
};
pub use model::{PatModel, TrainConfig};
pub use pipeline::{
    preprocess, preprocess_with, training_windows, translate, translate_with, IdentityMap, PreprocessConfig, Preprocessed,
    WindowMap, WindowSet,
};
pub use train::{train, train_step, StepMetrics};
