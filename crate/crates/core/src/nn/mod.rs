//! Small neural-network stack with hand-written backpropagation.
//!
//! All arithmetic is `f64`. Dense layers process a whole mini-batch at once;
//! the convolutional encoder runs per image.

pub mod layers;
pub mod model;
pub mod train;

pub use layers::{Activation, Conv2d, Dense};
pub use model::{
    Architecture, CnnEncoder, Example, ForwardCache, ImageTensor, LayerDesc, MlpRegressor, MultiModalModel,
    Regressor, Section,
};
pub use train::{train, train_with, Adam, BatchGradient, Dataset, Sequential, TrainConfig, TrainReport};

#[cfg(test)]
mod tests;
