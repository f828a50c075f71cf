//! Dataset construction: the scaffold-diverse example set, the hard-example
//! challenging set, and property distribution reports.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{canonicalize, parse, Molecule, SmilesError, Vocabulary};
use crate::descriptors::{compute_native, Histogram, PropertyVector};
use crate::model::{score_hard_examples, ModelError, SequenceModel, DEFAULT_HARD_THRESHOLD};
use crate::numerics::SplitMix64;
use crate::scaffolds::{dedup_scaffolds, group_by_key, murcko_scaffold, sample_per_scaffold, Split, DEFAULT_MIN_DIST};

/// Properties shown in distribution reports.
pub const REPORT_PROPERTIES: [&str; 5] = ["HeavyAtomNum", "QED", "SA_Score", "MolWt", "SMILES_Length"];

pub const REPORT_BINS: usize = 20;

/// Molecules sampled per scaffold group.
pub const SAMPLE_RANGE: (usize, usize) = (1, 2);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurationOptions {
    /// Scaffold keys closer than this edit distance are merged.
    pub min_dist: usize,
    /// Inclusive range of molecules sampled per scaffold.
    pub sample_range: (usize, usize),
    pub hard_threshold: f64,
}

impl Default for CurationOptions {
    fn default() -> Self {
        CurationOptions {
            min_dist: DEFAULT_MIN_DIST,
            sample_range: SAMPLE_RANGE,
            hard_threshold: DEFAULT_HARD_THRESHOLD,
        }
    }
}

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("record {index}: {source}")]
    Smiles { index: usize, source: SmilesError },
    #[error("{0} smiles, {1} property rows and {2} split labels do not line up")]
    LengthMismatch(usize, usize, usize),
    #[error("property vector of length {got} for a schema of {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct MoleculeRecord {
    /// Canonical SMILES.
    pub smiles: String,
    pub molecule: Molecule,
    pub scaffold: String,
    pub properties: PropertyVector,
    pub split: Split,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub schema: Vec<String>,
    pub records: Vec<MoleculeRecord>,
}

impl Dataset {
    /// Parses and canonicalizes every SMILES. Any unparsable entry is an
    /// error carrying its index.
    pub fn new(
        schema: Vec<String>,
        smiles: &[String],
        properties: Vec<PropertyVector>,
        splits: Vec<Split>,
    ) -> Result<Self, CurationError> {
        if smiles.len() != properties.len() || smiles.len() != splits.len() {
            return Err(CurationError::LengthMismatch(smiles.len(), properties.len(), splits.len()));
        }
        let mut records = Vec::with_capacity(smiles.len());
        for (index, ((s, p), split)) in smiles.iter().zip(properties).zip(splits).enumerate() {
            if p.len() != schema.len() {
                return Err(CurationError::SchemaMismatch {
                    expected: schema.len(),
                    got: p.len(),
                });
            }
            let mol = parse(s).map_err(|source| CurationError::Smiles { index, source })?;
            records.push(MoleculeRecord {
                smiles: canonicalize(&mol),
                scaffold: murcko_scaffold(&mol),
                molecule: mol,
                properties: p,
                split,
            });
        }
        Ok(Dataset { schema, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyDistribution {
    pub set: String,
    pub property: String,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub input: usize,
    /// Challenging set only: molecules above the loss threshold.
    pub hard_flagged: usize,
    pub overlap_removed: usize,
    pub scaffolds_found: usize,
    pub scaffolds_retained: usize,
    pub sampled: usize,
    pub dropped_missing: usize,
    /// Example set only: molecules from valid/test or sharing their scaffolds.
    pub dropped_held_out: usize,
    pub final_size: usize,
    pub distributions: Vec<PropertyDistribution>,
}

impl CurationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One `set<TAB>property<TAB>bin_lo<TAB>bin_hi<TAB>count` line per bin.
    pub fn write_histograms<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "set\tproperty\tbin_lo\tbin_hi\tcount")?;
        for d in &self.distributions {
            let h = &d.histogram;
            for (i, c) in h.counts.iter().enumerate() {
                writeln!(w, "{}\t{}\t{}\t{}\t{}", d.set, d.property, h.edges[i], h.edges[i + 1], c)?;
            }
        }
        Ok(())
    }
}

fn stage_seed(seed: u64, label: &str) -> u64 {
    SplitMix64::derive(seed, label).next_u64()
}

fn group_and_sample(
    records: Vec<MoleculeRecord>,
    dedup: Option<usize>,
    range: (usize, usize),
    seed: u64,
    report: &mut CurationReport,
) -> Vec<MoleculeRecord> {
    let groups = group_by_key(&records.iter().map(|r| r.scaffold.as_str()).collect::<Vec<_>>());
    report.scaffolds_found = groups.len();
    let keys: Vec<&String> = groups.keys().collect();
    let kept: Vec<usize> = match dedup {
        Some(min_dist) => dedup_scaffolds(&keys, min_dist),
        None => (0..keys.len()).collect(),
    };
    report.scaffolds_retained = kept.len();
    let retained: BTreeMap<String, Vec<usize>> = kept.iter().map(|&i| (keys[i].clone(), groups[keys[i]].clone())).collect();
    let picked = sample_per_scaffold(&retained, range.0, range.1, seed);
    report.sampled = picked.len();
    let mut slots: Vec<Option<MoleculeRecord>> = records.into_iter().map(Some).collect();
    picked.into_iter().map(|i| slots[i].take().expect("sampled once")).collect()
}

fn drop_missing(records: Vec<MoleculeRecord>, report: &mut CurationReport) -> Vec<MoleculeRecord> {
    let before = records.len();
    let out: Vec<_> = records.into_iter().filter(|r| !r.properties.is_fully_masked()).collect();
    report.dropped_missing = before - out.len();
    out
}

/// Scaffold-diverse training examples: group by Murcko scaffold, drop
/// scaffolds within `min_dist` edits of an earlier one (keys in sorted
/// order), sample per scaffold, drop molecules without any property, then
/// drop valid/test molecules and anything sharing a valid/test scaffold.
pub fn build_example_set(dataset: &Dataset, options: &CurationOptions, seed: u64) -> (Vec<MoleculeRecord>, CurationReport) {
    let mut report = CurationReport {
        input: dataset.len(),
        ..Default::default()
    };
    let sampled = group_and_sample(
        dataset.records.clone(),
        Some(options.min_dist),
        options.sample_range,
        stage_seed(seed, "example.sample"),
        &mut report,
    );
    let present = drop_missing(sampled, &mut report);
    let held_out: HashSet<&str> = dataset
        .records
        .iter()
        .filter(|r| r.split != Split::Train)
        .map(|r| r.scaffold.as_str())
        .collect();
    let before = present.len();
    let out: Vec<_> = present
        .into_iter()
        .filter(|r| r.split == Split::Train && !held_out.contains(r.scaffold.as_str()))
        .collect();
    report.dropped_held_out = before - out.len();
    report.final_size = out.len();
    (out, report)
}

/// Molecules the unconditional model finds hard: LM loss above the
/// threshold, or a token outside the model's vocabulary. Anything already in
/// the example set or in valid/test (canonical SMILES identity) is removed,
/// then molecules are sampled per scaffold and the property filter applied.
pub fn build_challenging_set(
    dataset: &Dataset,
    example_set: &[MoleculeRecord],
    model: &SequenceModel,
    vocab: &Vocabulary,
    options: &CurationOptions,
    seed: u64,
) -> Result<(Vec<MoleculeRecord>, CurationReport), CurationError> {
    let mut report = CurationReport {
        input: dataset.len(),
        ..Default::default()
    };
    let mut scored = Vec::new();
    let mut seqs = Vec::new();
    let mut flagged = Vec::new();
    for (i, r) in dataset.records.iter().enumerate() {
        match vocab.encode(&r.smiles) {
            Ok(seq) => {
                scored.push(i);
                seqs.push(seq);
            }
            Err(_) => flagged.push(i),
        }
    }
    let hard = score_hard_examples(model, &seqs, options.hard_threshold)?;
    flagged.extend(hard.flagged.iter().map(|&j| scored[j]));
    flagged.sort_unstable();
    report.hard_flagged = flagged.len();
    let excluded: HashSet<&str> = example_set
        .iter()
        .map(|r| r.smiles.as_str())
        .chain(dataset.records.iter().filter(|r| r.split != Split::Train).map(|r| r.smiles.as_str()))
        .collect();
    let candidates: Vec<MoleculeRecord> = flagged
        .iter()
        .map(|&i| &dataset.records[i])
        .filter(|r| !excluded.contains(r.smiles.as_str()))
        .cloned()
        .collect();
    report.overlap_removed = report.hard_flagged - candidates.len();
    let sampled = group_and_sample(
        candidates,
        None,
        options.sample_range,
        stage_seed(seed, "challenging.sample"),
        &mut report,
    );
    let out = drop_missing(sampled, &mut report);
    report.final_size = out.len();
    Ok((out, report))
}

fn report_value(schema: &[String], r: &MoleculeRecord, property: &str) -> Option<f64> {
    if let Some(j) = schema.iter().position(|s| s == property) {
        return r.properties.get(j);
    }
    let d = compute_native(&r.molecule);
    match property {
        "HeavyAtomNum" => Some(d.heavy_atoms as f64),
        "MolWt" => Some(d.mol_wt),
        "SMILES_Length" => Some(d.smiles_length as f64),
        "QED" => Some(d.qed),
        _ => None,
    }
}

/// Histograms of the report properties for each named set, with bin edges
/// shared across sets. Ingested columns take precedence over native
/// descriptors; a property available for no molecule is skipped.
pub fn distribution_report(schema: &[String], sets: &[(&str, &[MoleculeRecord])]) -> Vec<PropertyDistribution> {
    let mut out = Vec::new();
    for property in REPORT_PROPERTIES {
        let values: Vec<Vec<f64>> = sets
            .iter()
            .map(|(_, recs)| recs.iter().filter_map(|r| report_value(schema, r, property)).collect())
            .collect();
        if values.iter().all(|v| v.is_empty()) {
            log::warn!("no values for {property}; omitted from the distribution report");
            continue;
        }
        let refs: Vec<&[f64]> = values.iter().map(|v| v.as_slice()).collect();
        let edges = Histogram::shared_edges(&refs, REPORT_BINS);
        for ((name, _), v) in sets.iter().zip(&values) {
            out.push(PropertyDistribution {
                set: name.to_string(),
                property: property.to_string(),
                histogram: Histogram::with_edges(v, &edges),
            });
        }
    }
    out
}
