//! Holevo-bound evaluation for Kraus-represented quantum channels and
//! projected gradient ascent over the Kraus operators.
//!
//! The crate is organized bottom-up:
//!
//! - [`matfun`]: Hermitian eigendecomposition and spectral matrix functions.
//! - [`states`]: pure states, density matrices, ensembles and entropies.
//! - [`channel`]: Kraus channels, completeness projection, random channels.
//! - [`holevo`]: the Holevo quantity and its gradient in the Kraus operators.
//! - [`optimizer`]: channel and input-ensemble ascent loops.
//! - [`cli`]: experiment runners, serialization and reproducible RNG streams.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod error;
pub mod holevo;
pub mod matfun;
pub mod optimizer;
pub mod states;

pub use error::{Error, ErrorKind, Result};
