use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::NumericsError;

/// Diagonal Gaussian posterior, one row per batch item.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub mu: Tensor,
    pub log_var: Tensor,
}

impl GaussianPosterior {
    pub fn new(mu: Tensor, log_var: Tensor) -> Result<Self, NumericsError> {
        if mu.shape() != log_var.shape() || mu.shape().len() != 2 {
            return Err(NumericsError::ShapeMismatch {
                op: "posterior",
                left: mu.shape().to_vec(),
                right: log_var.shape().to_vec(),
            });
        }
        Ok(GaussianPosterior { mu, log_var })
    }

    pub fn latent_dim(&self) -> usize {
        self.mu.cols()
    }
}

/// Learnable inverse temperature. The multiplier is `exp(min(raw, ln 100))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitScale {
    pub raw: f64,
}

impl LogitScale {
    pub const MAX_MULTIPLIER: f64 = 100.0;

    /// CLIP's initialization, multiplier 1/0.07.
    pub fn clip_default() -> Self {
        LogitScale {
            raw: (1.0f64 / 0.07).ln(),
        }
    }

    pub fn from_multiplier(m: f64) -> Self {
        LogitScale { raw: m.ln() }
    }

    pub fn cap() -> f64 {
        Self::MAX_MULTIPLIER.ln()
    }

    pub fn multiplier(&self) -> f64 {
        self.raw.min(Self::cap()).exp()
    }
}

/// `mean_b 0.5 Σ_j (μ² + exp(logvar) − 1 − logvar)` on the tape.
pub fn kl_to_standard_normal(tape: &mut Tape, mu: Var, log_var: Var) -> Result<Var, NumericsError> {
    let batch = tape.value(mu).rows() as f64;
    let mu2 = tape.square(mu);
    let var = tape.exp(log_var);
    let s = tape.add(mu2, var)?;
    let s = tape.sub(s, log_var)?;
    let s = tape.add_scalar(s, -1.0);
    let total = tape.sum(s);
    Ok(tape.scale(total, 0.5 / batch))
}

/// Closed-form KL value without a tape.
pub fn kl_value(q: &GaussianPosterior) -> Result<f64, NumericsError> {
    if !q.mu.is_finite() || !q.log_var.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let total: f64 = q
        .mu
        .data()
        .iter()
        .zip(q.log_var.data())
        .map(|(m, lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
        .sum();
    let kl = total / q.mu.rows() as f64;
    if kl.is_finite() {
        Ok(kl)
    } else {
        Err(NumericsError::NonFinite)
    }
}

/// `z = μ + exp(0.5·logvar) ⊙ noise`, differentiable in μ and logvar.
pub fn reparameterize(tape: &mut Tape, mu: Var, log_var: Var, noise: &Tensor) -> Result<Var, NumericsError> {
    if tape.value(mu).shape() != noise.shape() {
        return Err(NumericsError::ShapeMismatch {
            op: "reparameterize",
            left: tape.value(mu).shape().to_vec(),
            right: noise.shape().to_vec(),
        });
    }
    let half = tape.scale(log_var, 0.5);
    let sigma = tape.exp(half);
    let eps = tape.leaf(noise.clone());
    let spread = tape.mul(sigma, eps)?;
    tape.add(mu, spread)
}

/// Negated ELBO with a β-weighted KL term.
pub fn elbo(tape: &mut Tape, recon_nll: Var, kl: Var, beta: f64) -> Result<Var, NumericsError> {
    let weighted = tape.scale(kl, beta);
    tape.add(recon_nll, weighted)
}

/// Linear KL warm-up: β ramps from 0 to `beta` over `warmup_epochs`.
pub fn beta_schedule(beta: f64, warmup_epochs: usize, epoch: usize) -> f64 {
    if warmup_epochs == 0 {
        beta
    } else {
        beta * ((epoch + 1) as f64 / warmup_epochs as f64).min(1.0)
    }
}

/// Symmetric InfoNCE over cosine similarities. `raw_scale` is a `[1, 1]`
/// node holding the unclamped logit scale; matched pairs sit on the diagonal.
pub fn info_nce(tape: &mut Tape, z_s: Var, z_p: Var, raw_scale: Var) -> Result<Var, NumericsError> {
    let (a, b) = (tape.value(z_s), tape.value(z_p));
    if a.shape() != b.shape() || a.shape().len() != 2 {
        return Err(NumericsError::ShapeMismatch {
            op: "info_nce",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let n = a.rows();
    if n < 2 {
        return Err(NumericsError::ShapeMismatch {
            op: "info_nce needs at least two pairs",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let s = tape.row_normalize(z_s)?;
    let p = tape.row_normalize(z_p)?;
    let pt = tape.transpose(p)?;
    let sim = tape.matmul(s, pt)?;
    let clamped = tape.clamp_max(raw_scale, LogitScale::cap());
    let mult = tape.exp(clamped);
    let logits = tape.scale_by(sim, mult)?;
    let targets: Vec<usize> = (0..n).collect();
    let rows = tape.cross_entropy(logits, &targets)?;
    let logits_t = tape.transpose(logits)?;
    let cols = tape.cross_entropy(logits_t, &targets)?;
    let both = tape.add(rows, cols)?;
    Ok(tape.scale(both, 0.5))
}

/// InfoNCE value for plain matrices.
pub fn info_nce_value(z_s: &Tensor, z_p: &Tensor, scale: LogitScale) -> Result<f64, NumericsError> {
    let mut tape = Tape::new();
    let a = tape.leaf(z_s.clone());
    let b = tape.leaf(z_p.clone());
    let s = tape.leaf(Tensor::scalar(scale.raw));
    let loss = info_nce(&mut tape, a, b, s)?;
    Ok(tape.value(loss).item())
}
