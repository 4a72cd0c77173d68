//! Dense `f64` arrays and a reverse-mode tape for training recurrent nets.

mod array;
mod tape;

pub use array::{sigmoid, Array2, ElementwiseOp};
pub use tape::{GradTape, Gradients, NodeId};
