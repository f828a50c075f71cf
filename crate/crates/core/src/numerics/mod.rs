//! Dense tensors with reverse-mode differentiation, the variational and
//! contrastive losses, Adam, gradient clipping, checkpoints and the seeded
//! generator used everywhere for reproducibility.

mod checkpoint;
mod losses;
mod optim;
mod rng;
mod tape;
mod tensor;

use thiserror::Error;

pub use checkpoint::ParamStore;
pub use losses::{
    beta_schedule, elbo, info_nce, info_nce_value, kl_to_standard_normal, kl_value, reparameterize, GaussianPosterior,
    LogitScale,
};
pub use optim::{clip_grad_norm, global_norm, Adam};
pub use rng::{mix64, SplitMix64};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("non-finite value")]
    NonFinite,
    #[error("row {0} has zero norm")]
    ZeroNormRow(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Standard normal matrix from `rng`.
pub fn standard_normal(rng: &mut SplitMix64, rows: usize, cols: usize) -> Tensor {
    use rand_distr::{Distribution, StandardNormal};
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches")
}
