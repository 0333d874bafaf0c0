//! Desk-scale radiology report generation: a self-contained stack covering
//! a differentiable array substrate, a compact multimodal decoder with
//! latent-query visual compression, synthetic corpus generation, lexical
//! rewards, SFT + GRPO training, and the evaluation statistics used for
//! rater-preference studies.

pub mod corpus;
pub mod error;
pub mod model;
pub mod numkit;
pub mod rewards;
pub mod stats;
pub mod train;

pub use error::{CoreError, Result};
pub use numkit::{Array, Parameter, Var};
