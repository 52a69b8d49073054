//! Molecular property regression: descriptors, kernel and tree baselines,
//! neural networks with a small autodiff engine, and a transfer-learning
//! pipeline.

pub mod chemdata;
pub mod descriptors;
pub mod gboost;
pub mod krr;
pub mod nets;
pub mod rng;
pub mod tensor;
pub mod trainer;
pub mod transfer;
