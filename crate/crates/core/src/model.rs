//! A small conditional sequence VAE over SMILES tokens.
//!
//! The encoder mean-pools token embeddings, appends the condition, and maps
//! linearly to `(μ, logvar)`. The decoder predicts each next token from the
//! embeddings of the previous `window` tokens, `z` and the condition, through
//! a two-layer tanh MLP. Conditions enter as `(value, present)` pairs, so a
//! model sees `2K` condition inputs. In unconditional mode they are zero.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{TokenSequence, PAD_ID};
use crate::descriptors::PropertyVector;
use crate::numerics::{
    beta_schedule, clip_grad_norm, kl_to_standard_normal, reparameterize, standard_normal, Adam,
    GaussianPosterior, NumericsError, ParamStore, SplitMix64, Tape, Tensor, Var,
};

pub const DEFAULT_HARD_THRESHOLD: f64 = 0.25;

const PARAM_NAMES: [&str; 9] = [
    "embedding",
    "encoder.mu.weight",
    "encoder.mu.bias",
    "encoder.logvar.weight",
    "encoder.logvar.bias",
    "decoder.hidden.weight",
    "decoder.hidden.bias",
    "decoder.out.weight",
    "decoder.out.bias",
];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("token id {id} outside vocabulary of size {vocab}")]
    VocabMismatch { id: u32, vocab: usize },
    #[error("condition has {got} dimensions, model expects {expected}")]
    ConditionMismatch { expected: usize, got: usize },
    #[error("sequence needs at least two tokens")]
    SequenceTooShort,
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub latent_dim: usize,
    pub condition_dim: usize,
    pub window: usize,
    pub hidden_dim: usize,
    pub conditional: bool,
    pub seed: u64,
}

impl ModelConfig {
    /// Reference transformer size.
    pub const REFERENCE_HIDDEN: usize = 384;
    pub const REFERENCE_BLOCKS: usize = 8;
    pub const REFERENCE_HEADS: usize = 8;
    pub const REFERENCE_FFN: usize = 1024;

    /// Desk defaults: embed 32, latent 16, hidden 64, window 4.
    pub fn desk(vocab_size: usize, condition_dim: usize, conditional: bool, seed: u64) -> Self {
        ModelConfig {
            vocab_size,
            embed_dim: 32,
            latent_dim: 16,
            condition_dim,
            window: 4,
            hidden_dim: 64,
            conditional,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("latent_dim", self.latent_dim),
            ("window", self.window),
            ("hidden_dim", self.hidden_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        if self.vocab_size <= PAD_ID as usize + 2 {
            return Err(ModelError::Config("vocabulary has no tokens besides sentinels".into()));
        }
        Ok(())
    }

    fn decoder_input(&self) -> usize {
        self.window * self.embed_dim + self.latent_dim + 2 * self.condition_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_grad_norm: f64,
    pub beta: f64,
    pub warmup_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Desk defaults. The reference learning rate is `Adam::DEFAULT_LR`.
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            lr: 3e-3,
            weight_decay: Adam::DEFAULT_WEIGHT_DECAY,
            max_grad_norm: 5.0,
            beta: 1.0,
            warmup_epochs: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub recon: f64,
    pub kl: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochStats>,
}

impl TrainingTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// `epoch<TAB>loss` lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.epochs {
            writeln!(w, "{}\t{}", e.epoch, e.loss)?;
        }
        Ok(())
    }
}

/// Trailing moving average with the given width (shorter at the start).
pub fn smooth(values: &[f64], width: usize) -> Vec<f64> {
    let width = width.max(1);
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(width);
            values[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// Condition input: `(value, present)` per dimension.
pub fn encode_condition(cond: &PropertyVector) -> Vec<f64> {
    cond.values
        .iter()
        .zip(&cond.mask)
        .flat_map(|(&v, &m)| if m { [v, 1.0] } else { [0.0, 0.0] })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    config: ModelConfig,
    params: ParamStore,
}

struct Batch<'a> {
    seqs: Vec<&'a [u32]>,
    conds: Tensor,
}

struct Forward {
    recon: Var,
    kl: Var,
}

impl SequenceModel {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = SplitMix64::derive(config.seed, "init");
        let (v, e, l, h) = (config.vocab_size, config.embed_dim, config.latent_dim, config.hidden_dim);
        let enc_in = e + 2 * config.condition_dim;
        let dec_in = config.decoder_input();
        let mut scaled = |rows: usize, cols: usize, scale: f64| standard_normal(&mut rng, rows, cols).map(|x| x * scale);
        let mut params = ParamStore::new();
        params.insert(PARAM_NAMES[0], scaled(v, e, 1.0));
        params.insert(PARAM_NAMES[1], scaled(enc_in, l, 1.0 / (enc_in as f64).sqrt()));
        params.insert(PARAM_NAMES[2], Tensor::zeros(&[1, l]));
        params.insert(PARAM_NAMES[3], scaled(enc_in, l, 0.1 / (enc_in as f64).sqrt()));
        params.insert(PARAM_NAMES[4], Tensor::zeros(&[1, l]));
        params.insert(PARAM_NAMES[5], scaled(dec_in, h, 1.0 / (dec_in as f64).sqrt()));
        params.insert(PARAM_NAMES[6], Tensor::zeros(&[1, h]));
        params.insert(PARAM_NAMES[7], Tensor::zeros(&[h, v]));
        params.insert(PARAM_NAMES[8], Tensor::zeros(&[1, v]));
        Ok(SequenceModel { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn p(&self, i: usize) -> &Tensor {
        &self.params.tensors()[i]
    }

    fn check_seq(&self, seq: &[u32]) -> Result<(), ModelError> {
        if let Some(&id) = seq.iter().find(|&&id| id as usize >= self.config.vocab_size) {
            return Err(ModelError::VocabMismatch {
                id,
                vocab: self.config.vocab_size,
            });
        }
        Ok(())
    }

    /// Condition input row, zeroed in unconditional mode.
    pub fn condition_input(&self, cond: &PropertyVector) -> Result<Vec<f64>, ModelError> {
        if cond.len() != self.config.condition_dim {
            return Err(ModelError::ConditionMismatch {
                expected: self.config.condition_dim,
                got: cond.len(),
            });
        }
        Ok(if self.config.conditional {
            encode_condition(cond)
        } else {
            vec![0.0; 2 * self.config.condition_dim]
        })
    }

    fn batch<'a>(&self, seqs: &[&'a TokenSequence], conds: &[&PropertyVector]) -> Result<Batch<'a>, ModelError> {
        let mut rows = Vec::with_capacity(seqs.len());
        for (s, c) in seqs.iter().zip(conds) {
            self.check_seq(&s.ids)?;
            if s.ids.len() < 2 {
                return Err(ModelError::SequenceTooShort);
            }
            rows.push(self.condition_input(c)?);
        }
        let conds = if rows.is_empty() || self.config.condition_dim == 0 {
            Tensor::zeros(&[seqs.len(), 2 * self.config.condition_dim])
        } else {
            Tensor::from_rows(&rows)?
        };
        Ok(Batch {
            seqs: seqs.iter().map(|s| s.ids.as_slice()).collect(),
            conds,
        })
    }

    /// Builds the loss graph. `noise` selects sampled `z`; `None` uses `μ`.
    fn forward(&self, tape: &mut Tape, vars: &[Var], batch: &Batch, noise: Option<&Tensor>) -> Result<Forward, ModelError> {
        let cfg = &self.config;
        let b = batch.seqs.len();
        let cond = tape.leaf(batch.conds.clone());

        let all_ids: Vec<usize> = batch.seqs.iter().flat_map(|s| s.iter().map(|&t| t as usize)).collect();
        let mut pool = Tensor::zeros(&[b, all_ids.len()]);
        let mut offset = 0;
        for (i, s) in batch.seqs.iter().enumerate() {
            let w = 1.0 / s.len() as f64;
            let cols = all_ids.len();
            pool.data_mut()[i * cols + offset..i * cols + offset + s.len()].fill(w);
            offset += s.len();
        }
        let pool = tape.leaf(pool);
        let tokens = tape.embedding(vars[0], &all_ids)?;
        let pooled = tape.matmul(pool, tokens)?;
        let enc_in = tape.concat(&[pooled, cond])?;
        let mu = tape.matmul(enc_in, vars[1])?;
        let mu = tape.add_row(mu, vars[2])?;
        let log_var = tape.matmul(enc_in, vars[3])?;
        let log_var = tape.add_row(log_var, vars[4])?;
        let z = match noise {
            Some(eps) => reparameterize(tape, mu, log_var, eps)?,
            None => mu,
        };

        let mut slots: Vec<Vec<usize>> = vec![Vec::new(); cfg.window];
        let mut owner = Vec::new();
        let mut targets = Vec::new();
        for (i, s) in batch.seqs.iter().enumerate() {
            for t in 1..s.len() {
                for (j, slot) in slots.iter_mut().enumerate() {
                    let pos = t as isize - cfg.window as isize + j as isize;
                    slot.push(if pos < 0 { PAD_ID as usize } else { s[pos as usize] as usize });
                }
                owner.push(i);
                targets.push(s[t] as usize);
            }
        }
        let mut parts = Vec::with_capacity(cfg.window + 2);
        for slot in &slots {
            parts.push(tape.embedding(vars[0], slot)?);
        }
        parts.push(tape.embedding(z, &owner)?);
        parts.push(tape.embedding(cond, &owner)?);
        let x = tape.concat(&parts)?;
        let hidden = tape.matmul(x, vars[5])?;
        let hidden = tape.add_row(hidden, vars[6])?;
        let hidden = tape.tanh(hidden);
        let logits = tape.matmul(hidden, vars[7])?;
        let logits = tape.add_row(logits, vars[8])?;
        let recon = tape.cross_entropy(logits, &targets)?;
        let kl = kl_to_standard_normal(tape, mu, log_var)?;
        Ok(Forward { recon, kl })
    }

    fn leaves(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.tensors().iter().map(|t| tape.leaf(t.clone())).collect()
    }

    pub fn encode(&self, seq: &TokenSequence, cond: &PropertyVector) -> Result<GaussianPosterior, ModelError> {
        self.encode_batch(&[seq], &[cond])
    }

    /// Posterior for a batch; one row per sequence.
    pub fn encode_batch(&self, seqs: &[&TokenSequence], conds: &[&PropertyVector]) -> Result<GaussianPosterior, ModelError> {
        let mut rows_mu = Vec::with_capacity(seqs.len());
        let mut rows_lv = Vec::with_capacity(seqs.len());
        let e = self.config.embed_dim;
        for (s, c) in seqs.iter().zip(conds) {
            self.check_seq(&s.ids)?;
            let mut input = vec![0.0; e];
            let emb = self.p(0);
            for &t in &s.ids {
                for (a, v) in input.iter_mut().zip(emb.row_slice(t as usize)) {
                    *a += v;
                }
            }
            let n = s.ids.len().max(1) as f64;
            input.iter_mut().for_each(|a| *a /= n);
            input.extend(self.condition_input(c)?);
            let x = Tensor::row(&input);
            let mu = x.matmul(self.p(1))?;
            let lv = x.matmul(self.p(3))?;
            rows_mu.push(mu.data().iter().zip(self.p(2).data()).map(|(a, b)| a + b).collect());
            rows_lv.push(lv.data().iter().zip(self.p(4).data()).map(|(a, b)| a + b).collect());
        }
        let l = self.config.latent_dim;
        let shape = |rows: Vec<Vec<f64>>| -> Result<Tensor, ModelError> {
            if rows.is_empty() {
                Ok(Tensor::zeros(&[0, l]))
            } else {
                Ok(Tensor::from_rows(&rows)?)
            }
        };
        Ok(GaussianPosterior::new(shape(rows_mu)?, shape(rows_lv)?)?)
    }

    /// Posterior mean as a plain vector.
    pub fn embed(&self, seq: &TokenSequence, cond: &PropertyVector) -> Result<Vec<f64>, ModelError> {
        Ok(self.encode(seq, cond)?.mu.into_data())
    }

    /// Next-token logits from the last `window` tokens of `prefix`, `z` and
    /// the raw condition input (`2K` values, see `condition_input`).
    pub fn decode_logits_raw(&self, prefix: &[u32], z: &[f64], cond_input: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_seq(prefix)?;
        let cfg = &self.config;
        if z.len() != cfg.latent_dim {
            return Err(NumericsError::ShapeMismatch {
                op: "decode z",
                left: vec![cfg.latent_dim],
                right: vec![z.len()],
            }
            .into());
        }
        if cond_input.len() != 2 * cfg.condition_dim {
            return Err(ModelError::ConditionMismatch {
                expected: cfg.condition_dim,
                got: cond_input.len() / 2,
            });
        }
        let mut x = Vec::with_capacity(cfg.decoder_input());
        let emb = self.p(0);
        for j in 0..cfg.window {
            let pos = prefix.len() as isize - cfg.window as isize + j as isize;
            let id = if pos < 0 { PAD_ID } else { prefix[pos as usize] };
            x.extend_from_slice(emb.row_slice(id as usize));
        }
        x.extend_from_slice(z);
        x.extend_from_slice(cond_input);
        let h = Tensor::row(&x).matmul(self.p(5))?;
        let h: Vec<f64> = h.data().iter().zip(self.p(6).data()).map(|(a, b)| (a + b).tanh()).collect();
        let out = Tensor::row(&h).matmul(self.p(7))?;
        Ok(out.data().iter().zip(self.p(8).data()).map(|(a, b)| a + b).collect())
    }

    pub fn decode_logits(&self, prefix: &[u32], z: &[f64], cond: &PropertyVector) -> Result<Vec<f64>, ModelError> {
        let c = self.condition_input(cond)?;
        self.decode_logits_raw(prefix, z, &c)
    }

    /// Mean next-token cross-entropy with `z = μ`.
    pub fn lm_loss(&self, seq: &TokenSequence, cond: &PropertyVector) -> Result<f64, ModelError> {
        let batch = self.batch(&[seq], &[cond])?;
        let mut tape = Tape::new();
        let vars = self.leaves(&mut tape);
        let f = self.forward(&mut tape, &vars, &batch, None)?;
        Ok(tape.value(f.recon).item())
    }

    /// `lm_loss` for every sequence, in parallel.
    pub fn lm_losses(&self, seqs: &[TokenSequence], conds: &[PropertyVector]) -> Result<Vec<f64>, ModelError> {
        seqs.par_iter().zip(conds).map(|(s, c)| self.lm_loss(s, c)).collect()
    }

    /// Negated ELBO of a batch: `recon + β·KL` with `z` drawn using `noise`
    /// (or `z = μ` when `noise` is `None`). Returns the loss and parameter
    /// gradients in parameter order.
    pub fn loss_and_grads(
        &self,
        seqs: &[&TokenSequence],
        conds: &[&PropertyVector],
        noise: Option<&Tensor>,
        beta: f64,
    ) -> Result<(f64, f64, f64, Vec<Tensor>), ModelError> {
        let batch = self.batch(seqs, conds)?;
        let mut tape = Tape::new();
        let vars = self.leaves(&mut tape);
        let f = self.forward(&mut tape, &vars, &batch, noise)?;
        let weighted = tape.scale(f.kl, beta);
        let loss = tape.add(f.recon, weighted)?;
        let grads = tape.backward(loss);
        let g = vars
            .iter()
            .zip(self.params.tensors())
            .map(|(&v, t)| grads.get_or_zeros(v, t.shape()))
            .collect();
        Ok((tape.value(loss).item(), tape.value(f.recon).item(), tape.value(f.kl).item(), g))
    }

    /// Minibatch Adam on the negated ELBO with gradient clipping. Batch order
    /// and reparameterization noise come from streams derived from
    /// `train.seed`, so equal seeds give identical weights.
    pub fn train(&mut self, seqs: &[TokenSequence], conds: &[PropertyVector], train: &TrainConfig) -> Result<TrainingTrace, ModelError> {
        if seqs.len() != conds.len() {
            return Err(ModelError::ConditionMismatch {
                expected: seqs.len(),
                got: conds.len(),
            });
        }
        let mut adam = Adam::new(train.lr, train.weight_decay);
        let mut trace = TrainingTrace::default();
        let mut order: Vec<usize> = (0..seqs.len()).collect();
        let batch_size = train.batch_size.max(1);
        let mut step = 0u64;
        for epoch in 0..train.epochs {
            let beta = beta_schedule(train.beta, train.warmup_epochs, epoch);
            order.shuffle(&mut SplitMix64::stream(train.seed, epoch as u64));
            let (mut tot, mut rec, mut kl, mut n) = (0.0, 0.0, 0.0, 0usize);
            for chunk in order.chunks(batch_size) {
                let bs: Vec<&TokenSequence> = chunk.iter().map(|&i| &seqs[i]).collect();
                let bc: Vec<&PropertyVector> = chunk.iter().map(|&i| &conds[i]).collect();
                let mut noise_rng = SplitMix64::stream(train.seed ^ 0x9e37_79b9_7f4a_7c15, step);
                let noise = standard_normal(&mut noise_rng, chunk.len(), self.config.latent_dim);
                let (loss, r, k, mut grads) = self.loss_and_grads(&bs, &bc, Some(&noise), beta)?;
                if !loss.is_finite() {
                    return Err(NumericsError::NonFinite.into());
                }
                clip_grad_norm(&mut grads, train.max_grad_norm);
                adam.step(self.params.tensors_mut(), &grads);
                tot += loss;
                rec += r;
                kl += k;
                n += 1;
                step += 1;
            }
            let n = n.max(1) as f64;
            let stats = EpochStats {
                epoch,
                loss: tot / n,
                recon: rec / n,
                kl: kl / n,
                beta,
            };
            log::info!("epoch {epoch}: loss {:.4} recon {:.4} kl {:.4}", stats.loss, stats.recon, stats.kl);
            trace.epochs.push(stats);
        }
        Ok(trace)
    }

    /// Config as JSON followed by a blank line, then the parameter store.
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        let cfg = serde_json::to_string(&self.config).map_err(|e| ModelError::Format(e.to_string()))?;
        writeln!(w, "{cfg}")?;
        self.params.save(w)?;
        Ok(())
    }

    pub fn load<R: BufRead>(mut r: R) -> Result<Self, ModelError> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let config: ModelConfig = serde_json::from_str(line.trim()).map_err(|e| ModelError::Format(e.to_string()))?;
        config.validate()?;
        let params = ParamStore::load(r)?;
        let fresh = SequenceModel::new(config.clone())?;
        if params.names() != fresh.params.names()
            || params.tensors().iter().zip(fresh.params.tensors()).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(ModelError::Format("parameter layout does not match config".into()));
        }
        Ok(SequenceModel { config, params })
    }

    pub fn save_file(&self, path: &Path) -> Result<(), ModelError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Self, ModelError> {
        Self::load(BufReader::new(File::open(path)?))
    }
}

/// Per-sequence losses and the indices whose loss exceeds `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardExamples {
    pub losses: Vec<f64>,
    pub flagged: Vec<usize>,
    pub threshold: f64,
}

/// Scores every sequence with an unconditional model and flags those whose
/// LM loss is above `threshold`.
pub fn score_hard_examples(
    model: &SequenceModel,
    seqs: &[TokenSequence],
    threshold: f64,
) -> Result<HardExamples, ModelError> {
    if model.config.conditional {
        log::warn!("hard-example scoring with a conditional model");
    }
    let empty = PropertyVector::masked(model.config.condition_dim);
    let conds = vec![empty; seqs.len()];
    let losses = model.lm_losses(seqs, &conds)?;
    let flagged = (0..losses.len()).filter(|&i| losses[i] > threshold).collect();
    Ok(HardExamples {
        losses,
        flagged,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::Vocabulary;

    fn setup(conditional: bool) -> (Vocabulary, SequenceModel) {
        let vocab = Vocabulary::base();
        let cfg = ModelConfig::desk(vocab.len(), 2, conditional, 7);
        (vocab.clone(), SequenceModel::new(cfg).unwrap())
    }

    fn cond(a: f64, b: f64) -> PropertyVector {
        PropertyVector::full(vec![a, b])
    }

    #[test]
    fn untrained_loss_is_uniform() {
        let (vocab, m) = setup(true);
        let s = vocab.encode("CC(=O)O").unwrap();
        let loss = m.lm_loss(&s, &cond(0.1, -0.3)).unwrap();
        assert!((loss - (vocab.len() as f64).ln()).abs() < 0.05);
        assert_eq!(loss, m.lm_loss(&s, &cond(0.1, -0.3)).unwrap());
    }

    #[test]
    fn vae_ignores_condition() {
        let (vocab, m) = setup(false);
        let s = vocab.encode("c1ccccc1").unwrap();
        let a = m.encode(&s, &cond(1.0, 2.0)).unwrap();
        let b = m.encode(&s, &cond(-3.0, 0.5)).unwrap();
        assert_eq!(a, b);
        assert!(a.mu.is_finite() && a.log_var.is_finite());
    }

    #[test]
    fn window_property() {
        let (_, m) = setup(true);
        let z = vec![0.3; 16];
        let c = cond(0.0, 1.0);
        let a = m.decode_logits(&[1, 5, 6, 7, 8, 9], &z, &c).unwrap();
        let b = m.decode_logits(&[1, 10, 11, 6, 7, 8, 9], &z, &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vocab_mismatch() {
        let (vocab, m) = setup(true);
        let bad = TokenSequence { ids: vec![1, vocab.len() as u32 + 3, 2] };
        assert!(matches!(m.lm_loss(&bad, &cond(0.0, 0.0)), Err(ModelError::VocabMismatch { .. })));
    }

    #[test]
    fn zero_epochs_keep_weights() {
        let (vocab, mut m) = setup(true);
        let before = m.clone();
        let seqs = vec![vocab.encode("CCO").unwrap()];
        let trace = m
            .train(&seqs, &[cond(0.0, 0.0)], &TrainConfig { epochs: 0, ..TrainConfig::default() })
            .unwrap();
        assert!(trace.epochs.is_empty());
        assert_eq!(m, before);
    }

    #[test]
    fn thresholds() {
        let (vocab, m) = setup(false);
        let seqs: Vec<TokenSequence> = ["CCO", "CCN", "c1ccccc1"].iter().map(|s| vocab.encode(s).unwrap()).collect();
        assert!(score_hard_examples(&m, &seqs, f64::INFINITY).unwrap().flagged.is_empty());
        assert_eq!(score_hard_examples(&m, &seqs, f64::NEG_INFINITY).unwrap().flagged, vec![0, 1, 2]);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let (vocab, m) = setup(true);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = SequenceModel::load(&buf[..]).unwrap();
        let s = vocab.encode("CCN").unwrap();
        assert_eq!(m.lm_loss(&s, &cond(1.0, 0.0)).unwrap(), back.lm_loss(&s, &cond(1.0, 0.0)).unwrap());
    }

    #[test]
    fn smoothing() {
        assert_eq!(smooth(&[4.0, 2.0, 0.0], 2), vec![4.0, 3.0, 1.0]);
    }
}
