//! The deep mixture density network.
//!
//! A dense ReLU trunk maps the normalized distance to `3 · m_c` raw outputs,
//! laid out as `[alpha logits | mu | sigma raw]`. The head turns those into
//! a Gaussian mixture over the log-scaled received power.

mod loss;
mod meta;
mod mixture;
mod network;

pub use loss::{grad, loss_and_grad, nll_loss};
pub use meta::ModelMeta;
pub use mixture::{
    mixture_cdf, mixture_pdf, sample_mixture, to_mixture, MixtureParams, RawOutput, SIGMA_FLOOR,
};
pub use network::{
    forward, init_weights, mixture_at, Architecture, Dense, NetworkWeights, OutputScale, SigmaActivation,
};
