//! Trainable building blocks: tensors, parameters, a reverse-mode tape,
//! dense and recurrent layers, and the Adam optimizer.

mod adam;
mod graph;
mod layers;
mod param;
mod tensor;

pub use adam::Adam;
pub use graph::{cosine_similarity, sigmoid, Graph, Var};
pub use layers::{Activation, BiEncoder, DenseLayer, LstmCell};
pub use param::{glorot_uniform, uniform, Gradients, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
