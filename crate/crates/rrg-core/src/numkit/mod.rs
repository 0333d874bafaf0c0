//! Differentiable dense-array substrate: shapes, kernels, reverse-mode
//! gradients, a finite-difference gradient checker, and the binary parameter
//! snapshot container.

mod array;
pub mod gradcheck;
pub mod ops;
pub mod snapshot;
mod var;

pub use array::Array;
pub use gradcheck::{grad_check, GradCheckReport};
pub use var::{Parameter, Var};
