//! Dense 2-D tensors, the forward primitives of the model and a small tape
//! for reverse-mode gradients.

mod gradcheck;
pub mod ops;
mod tape;
mod tensor;

pub use gradcheck::{finite_diff_check, GradCheck, FD_STEP};
pub use ops::{
    mean_rows, minmax_invert_rows, pairwise_distance, row_normalize, softmax_rows, sum_rows,
    DistanceKind, DISTANCE_EPS,
};
pub use tape::{Gradients, Primitive, Tape, Var};
pub use tensor::{argmax, argmin, Tensor2};
