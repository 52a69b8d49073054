//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] is rebuilt for every forward pass. Parameters live in a
//! [`ParamStore`] and are copied onto the tape by name; gradients flow back
//! into the store through [`Gradients::accumulate_into`].

mod adam;
pub mod gradcheck;
mod layers;
mod params;
mod tape;

pub use adam::{adam_step, AdamState};
pub use layers::{batch_norm, batch_norm_init, dropout, mse, BN_EPS, BN_MOMENTUM};
pub use params::{Param, ParamStore};
pub use tape::{concat, sigmoid, Gradients, Tape, Tensor, TensorError, Var};
