//! Loss, reverse-mode gradients, gradient checking and Adam training.

pub mod adam;
pub mod grad;
pub mod gradcheck;
pub mod loss;
pub mod presets;
pub mod train;

pub use adam::{adam_step, adam_update, AdamHyper, AdamState};
pub use grad::{backward, loss, Batch, GradientSet};
pub use gradcheck::{gradient_check, gradient_check_with, GradCheckOptions, GradCheckReport};
pub use loss::{relative_l2, relative_l2_per_sample, relative_l2_with_grad};
pub use presets::desk_config;
pub use train::{evaluate, split_point, train, EpochRecord, TrainConfig, TrainReport};
