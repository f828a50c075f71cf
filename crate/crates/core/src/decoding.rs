//! Autoregressive sampling: top-k, top-p and greedy token selection,
//! condition perturbation and batch generation.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{validate, TokenSequence, Validity, Vocabulary, BOS_ID, EOS_ID, PAD_ID};
use crate::descriptors::PropertyVector;
use crate::model::{ModelError, SequenceModel};
use crate::numerics::{standard_normal, SplitMix64};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("distribution has no positive finite mass")]
    DegenerateDistribution,
    #[error("invalid decode policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Strategy {
    TopK(usize),
    TopP(f64),
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodePolicy {
    pub strategy: Strategy,
    pub temperature: f64,
    pub max_len: usize,
    pub seed: u64,
}

impl DecodePolicy {
    pub fn new(strategy: Strategy, max_len: usize, seed: u64) -> Self {
        DecodePolicy {
            strategy,
            temperature: 1.0,
            max_len,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        match self.strategy {
            Strategy::TopK(0) => return Err(DecodeError::InvalidPolicy("k must be at least 1".into())),
            Strategy::TopP(p) if !(p > 0.0 && p <= 1.0) => {
                return Err(DecodeError::InvalidPolicy(format!("p = {p} outside (0, 1]")))
            }
            _ => {}
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(DecodeError::InvalidPolicy("temperature must be positive".into()));
        }
        if self.max_len < 2 {
            return Err(DecodeError::InvalidPolicy("max_len must be at least 2".into()));
        }
        Ok(())
    }
}

/// `ceil(1.5 × longest sequence)`, counting sentinels.
pub fn default_max_len(seqs: &[TokenSequence]) -> usize {
    let longest = seqs.iter().map(TokenSequence::len).max().unwrap_or(2);
    (longest * 3).div_ceil(2).max(2)
}

/// Positive-probability tokens sorted by probability descending, ties by id
/// ascending.
fn ranked(probs: &[f64]) -> Vec<(usize, f64)> {
    let mut r: Vec<(usize, f64)> = probs.iter().copied().enumerate().filter(|&(_, p)| p > 0.0).collect();
    r.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    r
}

/// Truncated candidate set with renormalized probabilities, in rank order.
pub fn candidates(probs: &[f64], strategy: Strategy) -> Result<Vec<(usize, f64)>, DecodeError> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(DecodeError::DegenerateDistribution);
    }
    let mut r = ranked(probs);
    if r.is_empty() {
        return Err(DecodeError::DegenerateDistribution);
    }
    match strategy {
        Strategy::Greedy => r.truncate(1),
        Strategy::TopK(k) => r.truncate(k.max(1)),
        Strategy::TopP(p) => {
            let mut cum = 0.0;
            let mut keep = r.len();
            for (i, &(_, q)) in r.iter().enumerate() {
                cum += q;
                if cum >= p {
                    keep = i + 1;
                    break;
                }
            }
            r.truncate(keep);
        }
    }
    let total: f64 = r.iter().map(|c| c.1).sum();
    for c in &mut r {
        c.1 /= total;
    }
    Ok(r)
}

fn apply_temperature(probs: &[f64], temperature: f64) -> Vec<f64> {
    if temperature == 1.0 {
        return probs.to_vec();
    }
    let t: Vec<f64> = probs.iter().map(|&p| if p > 0.0 { p.powf(1.0 / temperature) } else { 0.0 }).collect();
    let s: f64 = t.iter().sum();
    t.iter().map(|v| v / s).collect()
}

/// Draws a token: temperature first, then truncation, then an inverse-CDF
/// draw over the renormalized candidates.
pub fn sample_token<R: Rng + ?Sized>(probs: &[f64], policy: &DecodePolicy, rng: &mut R) -> Result<usize, DecodeError> {
    let tempered = apply_temperature(probs, policy.temperature);
    let cands = candidates(&tempered, policy.strategy)?;
    if cands.len() == 1 {
        return Ok(cands[0].0);
    }
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for &(id, q) in &cands {
        cum += q;
        if u < cum {
            return Ok(id);
        }
    }
    Ok(cands[cands.len() - 1].0)
}

/// Softmax with the given token ids forced to zero probability.
pub fn masked_softmax(logits: &[f64], banned: &[usize]) -> Vec<f64> {
    let max = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| !banned.contains(i))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(i, &v)| if banned.contains(&i) { 0.0 } else { (v - max).exp() })
        .collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Keeps each present, unlocked dimension with probability `keep_ratio`.
pub fn perturb_condition<R: Rng + ?Sized>(cond: &PropertyVector, keep_ratio: f64, locked: &[bool], rng: &mut R) -> PropertyVector {
    let mut out = cond.clone();
    for k in 0..out.len() {
        if !out.mask[k] || locked.get(k).copied().unwrap_or(false) {
            continue;
        }
        let u: f64 = rng.random();
        if u >= keep_ratio {
            out.mask[k] = false;
            out.values[k] = 0.0;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub cond: PropertyVector,
    pub keep_ratio: f64,
    pub locked: Vec<bool>,
    pub count: usize,
}

impl GenerationRequest {
    pub fn new(cond: PropertyVector, count: usize) -> Self {
        let locked = vec![false; cond.len()];
        GenerationRequest {
            cond,
            keep_ratio: 1.0,
            locked,
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSample {
    pub id: usize,
    pub smiles: String,
    pub tokens: Vec<u32>,
    pub validity: Validity,
    pub truncated: bool,
    pub condition: PropertyVector,
}

impl GeneratedSample {
    pub fn is_valid(&self) -> bool {
        self.validity.is_valid()
    }
}

fn generate_one(
    model: &SequenceModel,
    vocab: &Vocabulary,
    req: &GenerationRequest,
    policy: &DecodePolicy,
    id: usize,
) -> Result<GeneratedSample, DecodeError> {
    let mut rng = SplitMix64::stream(policy.seed, id as u64);
    let z = standard_normal(&mut rng, 1, model.config().latent_dim).into_data();
    let cond = if req.keep_ratio < 1.0 {
        perturb_condition(&req.cond, req.keep_ratio, &req.locked, &mut rng)
    } else {
        req.cond.clone()
    };
    let cond_input = model.condition_input(&cond)?;
    let banned = [PAD_ID as usize, BOS_ID as usize];
    let mut ids = vec![BOS_ID];
    while ids.len() < policy.max_len {
        let logits = model.decode_logits_raw(&ids, &z, &cond_input)?;
        let probs = masked_softmax(&logits, &banned);
        let next = sample_token(&probs, policy, &mut rng)? as u32;
        ids.push(next);
        if next == EOS_ID {
            break;
        }
    }
    let truncated = *ids.last().unwrap() != EOS_ID;
    let smiles = vocab.decode_ids(&ids);
    let validity = if smiles.is_empty() {
        Validity::ParseFailure("empty output".into())
    } else {
        validate(&smiles).0
    };
    Ok(GeneratedSample {
        id,
        smiles,
        tokens: ids,
        validity,
        truncated,
        condition: cond,
    })
}

/// Samples `req.count` sequences with `z ~ N(0, I)`. Sample `i` draws all of
/// its randomness from stream `(policy.seed, i)`, so the output does not
/// depend on thread scheduling.
pub fn generate(
    model: &SequenceModel,
    vocab: &Vocabulary,
    req: &GenerationRequest,
    policy: &DecodePolicy,
) -> Result<Vec<GeneratedSample>, DecodeError> {
    policy.validate()?;
    if !(0.0..=1.0).contains(&req.keep_ratio) {
        return Err(DecodeError::InvalidPolicy(format!("keep_ratio {} outside [0, 1]", req.keep_ratio)));
    }
    if vocab.len() != model.config().vocab_size {
        return Err(ModelError::Config(format!(
            "vocabulary has {} tokens, model {}",
            vocab.len(),
            model.config().vocab_size
        ))
        .into());
    }
    (0..req.count)
        .into_par_iter()
        .map(|i| generate_one(model, vocab, req, policy, i))
        .collect()
}

/// `sample_id<TAB>valid<TAB>truncated` lines.
pub fn write_sidecar<W: Write>(mut w: W, samples: &[GeneratedSample]) -> std::io::Result<()> {
    for s in samples {
        writeln!(w, "{}\t{}\t{}", s.id, u8::from(s.is_valid()), u8::from(s.truncated))?;
    }
    Ok(())
}
