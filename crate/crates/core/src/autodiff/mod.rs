//! Small reverse-mode differentiation engine with the closed operator set the
//! translation networks need: 1D convolution and its transpose, reflection
//! padding, instance normalization, pointwise activations and the reductions
//! used by the losses.

mod checkpoint;
mod graph;
mod kernels;
mod optim;
mod params;
mod tensor;

pub use checkpoint::{decode_params, encode_params, read_params, write_params, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use graph::{Activation, Gradients, Graph, Var};
pub use kernels::{conv1d_out_len, conv1d_transposed_out_len};
pub use optim::{optimizer_step, Adam, AdamState};
pub use params::ParamSet;
pub use tensor::Tensor;
