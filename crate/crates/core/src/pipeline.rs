//! Glue between stages: dataset loading with a scaffold split, condition
//! preparation, training on curated records and evaluation of samples.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{parse, SmilesError, TokenSequence, Vocabulary};
use crate::curation::{CurationError, Dataset, MoleculeRecord};
use crate::decoding::GeneratedSample;
use crate::descriptors::{DescriptorError, PropertyTable, PropertyVector, StandardizationStats};
use crate::metrics::{evaluate, native_properties_for, ConditionInput, EvaluationOptions, GenerationReport};
use crate::model::{ModelConfig, ModelError, SequenceModel, TrainConfig, TrainingTrace};
use crate::numerics::SplitMix64;
use crate::scaffolds::{murcko_scaffold, scaffold_split, ScaffoldError};

use rand::RngCore;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("line {line}: {source}")]
    Smiles { line: usize, source: SmilesError },
    #[error(transparent)]
    Scaffold(#[from] ScaffoldError),
    #[error(transparent)]
    Curation(#[from] CurationError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no training records")]
    EmptyTraining,
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

fn file_error(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Parses `smiles`, attaches rows of `table` over `schema` and assigns a
/// scaffold split with `valid_n` and `test_n` molecules.
pub fn load_dataset(
    smiles: &[String],
    table: &PropertyTable,
    schema: &[String],
    valid_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<Dataset, PipelineError> {
    let mols = smiles
        .iter()
        .enumerate()
        .map(|(line, s)| parse(s).map_err(|source| PipelineError::Smiles { line: line + 1, source }))
        .collect::<Result<Vec<_>, _>>()?;
    let keys: Vec<String> = mols.iter().map(murcko_scaffold).collect();
    let split_seed = SplitMix64::derive(seed, "split").next_u64();
    let assignment = scaffold_split(&keys, valid_n, test_n, split_seed)?;
    let (_, props) = table.lookup(smiles, schema, false);
    Ok(Dataset::new(schema.to_vec(), smiles, props, assignment.labels)?)
}

/// Standardization fitted on training records; maps raw property vectors to
/// model conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditioner {
    pub schema: Vec<String>,
    pub stats: StandardizationStats,
}

impl Conditioner {
    pub fn fit(schema: &[String], records: &[MoleculeRecord]) -> Self {
        let raw: Vec<PropertyVector> = records.iter().map(|r| r.properties.clone()).collect();
        let (stats, _) = StandardizationStats::fit(schema, &raw);
        Conditioner {
            schema: schema.to_vec(),
            stats,
        }
    }

    pub fn dim(&self) -> usize {
        self.stats.len()
    }

    pub fn conditions(&self, records: &[MoleculeRecord]) -> Result<Vec<PropertyVector>, DescriptorError> {
        let raw: Vec<PropertyVector> = records.iter().map(|r| r.properties.clone()).collect();
        self.stats.standardize(&self.schema, &raw)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: SequenceModel,
    pub vocab: Vocabulary,
    pub conditioner: Conditioner,
    pub trace: TrainingTrace,
}

impl TrainedModel {
    pub const MODEL_FILE: &'static str = "model.ckpt";
    pub const VOCAB_FILE: &'static str = "vocab.tsv";
    pub const CONDITIONER_FILE: &'static str = "conditioner.json";
    pub const TRACE_FILE: &'static str = "loss.tsv";

    /// Writes the checkpoint, vocabulary, conditioner and loss trace into
    /// `dir`, returning the written paths.
    pub fn save_dir(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>, PipelineError> {
        let paths: Vec<_> = [Self::MODEL_FILE, Self::VOCAB_FILE, Self::CONDITIONER_FILE, Self::TRACE_FILE]
            .iter()
            .map(|f| dir.join(f))
            .collect();
        self.model.save_file(&paths[0])?;
        let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| file_error(p, e));
        let mut w = create(&paths[1])?;
        self.vocab.write_tsv(&mut w).and_then(|_| w.flush()).map_err(|e| file_error(&paths[1], e))?;
        let json = serde_json::to_string_pretty(&self.conditioner).map_err(|e| file_error(&paths[2], e))?;
        std::fs::write(&paths[2], json + "\n").map_err(|e| file_error(&paths[2], e))?;
        let mut w = create(&paths[3])?;
        self.trace.write_tsv(&mut w).and_then(|_| w.flush()).map_err(|e| file_error(&paths[3], e))?;
        Ok(paths)
    }

    /// Loads what [`TrainedModel::save_dir`] wrote. The loss trace is
    /// not read back.
    pub fn load_dir(dir: &Path) -> Result<Self, PipelineError> {
        let model = SequenceModel::load_file(&dir.join(Self::MODEL_FILE))?;
        let vocab_path = dir.join(Self::VOCAB_FILE);
        let f = File::open(&vocab_path).map_err(|e| file_error(&vocab_path, e))?;
        let vocab = Vocabulary::read_tsv(BufReader::new(f)).map_err(|e| file_error(&vocab_path, e))?;
        let cond_path = dir.join(Self::CONDITIONER_FILE);
        let text = std::fs::read_to_string(&cond_path).map_err(|e| file_error(&cond_path, e))?;
        let conditioner: Conditioner = serde_json::from_str(&text).map_err(|e| file_error(&cond_path, e))?;
        if vocab.len() != model.config().vocab_size || conditioner.dim() != model.config().condition_dim {
            return Err(file_error(dir, "checkpoint, vocabulary and conditioner do not match"));
        }
        Ok(TrainedModel {
            model,
            vocab,
            conditioner,
            trace: TrainingTrace::default(),
        })
    }
}

/// Builds a vocabulary over `records`, fits the conditioner and trains a
/// desk-sized model. `shape` may adjust the desk configuration.
pub fn train_on(
    records: &[MoleculeRecord],
    schema: &[String],
    conditional: bool,
    shape: impl FnOnce(&mut ModelConfig),
    train: &TrainConfig,
) -> Result<TrainedModel, PipelineError> {
    if records.is_empty() {
        return Err(PipelineError::EmptyTraining);
    }
    let vocab = Vocabulary::build(records.iter().map(|r| r.smiles.as_str())).map_err(|source| PipelineError::Smiles { line: 0, source })?;
    let conditioner = Conditioner::fit(schema, records);
    let mut config = ModelConfig::desk(vocab.len(), conditioner.dim(), conditional, train.seed);
    shape(&mut config);
    let mut model = SequenceModel::new(config)?;
    let seqs = encode_records(&vocab, records)?;
    let conds = conditioner.conditions(records)?;
    let trace = model.train(&seqs, &conds, train)?;
    Ok(TrainedModel {
        model,
        vocab,
        conditioner,
        trace,
    })
}

pub fn encode_records(vocab: &Vocabulary, records: &[MoleculeRecord]) -> Result<Vec<TokenSequence>, PipelineError> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| vocab.encode(&r.smiles).map_err(|source| PipelineError::Smiles { line: i + 1, source }))
        .collect()
}

/// Full metric report for `samples` against the training SMILES. When the
/// samples were conditioned, nRMSE is computed over the conditioner's
/// native properties.
pub fn evaluate_samples(
    samples: &[GeneratedSample],
    training: &[String],
    conditioner: Option<&Conditioner>,
    options: &EvaluationOptions,
) -> GenerationReport {
    let smiles: Vec<&str> = samples.iter().map(|s| s.smiles.as_str()).collect();
    let conds: Vec<PropertyVector> = samples.iter().map(|s| s.condition.clone()).collect();
    let conditioned = conds.iter().any(|c| !c.is_fully_masked());
    match conditioner {
        Some(c) if conditioned => evaluate(
            &smiles,
            training,
            Some(ConditionInput {
                conditions: &conds,
                stats: &c.stats,
            }),
            options,
        ),
        _ => evaluate(&smiles, training, None, options),
    }
}

/// Native property vectors of valid samples over `names`; `None` for
/// invalid samples.
pub fn sample_properties(samples: &[GeneratedSample], names: &[String]) -> Vec<Option<PropertyVector>> {
    samples
        .iter()
        .map(|s| {
            if !s.is_valid() {
                return None;
            }
            parse(&s.smiles).ok().map(|m| native_properties_for(&m, names))
        })
        .collect()
}
