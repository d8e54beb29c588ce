//! Reed-Solomon sliding network coding (RS-SNC) over packet-erasure channels.
//!
//! - [`galois`]: GF(2^m) arithmetic and linear algebra.
//! - [`code`]: systematic MDP generators, encoder, window decoder, count rule.
//! - [`analytic`]: closed-form first-block success and latency of RS-SNC and RS block codes.
//! - [`modes`]: closed forms for the three retransmission modes.
//! - [`channel_sim`]: Bernoulli erasure channel and Monte Carlo estimators.

pub mod analytic;
pub mod channel_sim;
pub mod code;
pub mod galois;
pub mod modes;

pub use analytic::{ErasureProb, LatencyDistribution, WindowSuccessTerms};
pub use code::{CodeParams, GeneratorSet, Recovery};
pub use galois::{FieldElem, GaloisField, Matrix};
pub use modes::{Mode, ModeConfig};
