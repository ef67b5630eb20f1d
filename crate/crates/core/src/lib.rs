//! Singular-layer eigenchannel model for multicarrier continuous-variable QKD.
//!
//! The physical link is `n` Gaussian sub-channels with complex transmittances.
//! Their Fourier-domain coefficients form a transfer matrix `F(T)` whose SVD
//! splits transmission into independent eigenchannels. On top of that the
//! crate provides modulation-variance allocation, partial-CSI capacity,
//! interference-avoiding precoding, the MMSE decoder and permutation
//! constellation codes, plus a small experiment harness.

pub mod allocation;
pub mod channel;
pub mod decoding;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod partial_csi;
pub mod permutation_code;
pub mod phase_space;
pub mod precoding;
pub mod rng;
pub mod singular_layer;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
