//! Loss, the training loop, evaluation reports, the head-direction
//! baseline and the ablation suite.

mod ablation;
mod eval;
mod loss;
mod train;

pub use ablation::{run_ablation_suite, AblationRow, AblationVariant};
pub use eval::{
    evaluate, evaluate_with, head_direction_baseline, window_error_deg, ActivityError, EvalReport,
    WindowError,
};
pub use loss::{angular_loss, angular_loss_tape, ACOS_BOUND};
pub use train::{train, window_loss_and_grads, EpochRecord, TrainConfig, TrainHistory};
