//! Optimisation machinery: learning-rate schedules, AdamW, supervised
//! fine-tuning, and group relative policy optimisation.

pub mod grpo;
pub mod optim;
pub mod runner;
pub mod schedule;
pub mod sft;

pub use grpo::{
    completion_validity_mask, group_normalised_advantages, grpo_loss, grpo_outer_step,
    kl_estimate, score_completion, select_checkpoint, sequence_logp, GRPOConfig,
    GRPODiagnostics, GroupSample,
};
pub use optim::{fingerprint, zero_grads, AdamW};
pub use runner::{
    load_model_into, run_grpo, run_sft, save_model, validation_points, GrpoOutcome, SftOutcome,
};
pub use schedule::lr_schedule;
pub use sft::{sft_step, teacher_forced_accuracy, validation_reward, SFTConfig};
