//! Property editing: edit conditions with correlation-threshold and random
//! masking, and evaluation of edited molecules.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{match_substructure, pattern_from_molecule, SubstructurePattern};
use crate::chem::{parse, validate, Molecule};
use crate::descriptors::{Histogram, PropertyVector, StandardizationStats};
use crate::fingerprints::{morgan_fingerprint, tanimoto, DEFAULT_RADIUS, DEFAULT_WIDTH};

/// Reference edit targets in raw units: LogP 6.5, MW 500, QED 0.6.
pub const REFERENCE_TARGETS: [(&str, f64); 3] = [("LogP_approx", 6.5), ("MolWt", 500.0), ("QED_approx", 0.6)];

/// Default tolerance as a fraction of the training σ of the target.
pub const DEFAULT_TOLERANCE_SIGMAS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EditError {
    #[error("target index {0} outside the schema")]
    BadTarget(usize),
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("required fragment {0:?} is not a valid connected structure")]
    BadFragment(String),
    #[error("mask counts increase with the threshold at grid point {0}")]
    NotMonotone(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSpec {
    /// Index into the standardization schema.
    pub target: usize,
    /// Raw units.
    pub target_value: f64,
    pub mu: f64,
    pub random_mask_rate: f64,
    pub required_fragments: Vec<String>,
    /// Raw units.
    pub tolerance: f64,
}

impl EditSpec {
    pub fn new(target: usize, target_value: f64, mu: f64, stats: &StandardizationStats) -> Self {
        EditSpec {
            target,
            target_value,
            mu,
            random_mask_rate: 0.0,
            required_fragments: Vec::new(),
            tolerance: DEFAULT_TOLERANCE_SIGMAS * stats.std[target],
        }
    }

    pub fn validate(&self, k: usize) -> Result<(), EditError> {
        if self.target >= k {
            return Err(EditError::BadTarget(self.target));
        }
        if !(self.tolerance > 0.0) {
            return Err(EditError::BadTolerance);
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(EditError::BadThreshold(self.mu));
        }
        if !(0.0..=1.0).contains(&self.random_mask_rate) {
            return Err(EditError::BadThreshold(self.random_mask_rate));
        }
        Ok(())
    }
}

/// Non-target dimensions masked at threshold `mu`: those with
/// `|corr[target][j]| > mu`. At `mu = 0` every non-target dimension is
/// masked, including uncorrelated ones.
pub fn correlation_mask(corr: &[Vec<f64>], target: usize, mu: f64) -> Vec<bool> {
    (0..corr.len())
        .map(|j| j != target && (mu <= 0.0 || !(corr[target][j].abs() <= mu)))
        .collect()
}

/// Edit condition in standardized units and the matching lock vector
/// (only the target is locked).
pub fn build_edit_condition<R: Rng + ?Sized>(
    source: &PropertyVector,
    spec: &EditSpec,
    corr: &[Vec<f64>],
    stats: &StandardizationStats,
    rng: &mut R,
) -> Result<(PropertyVector, Vec<bool>), EditError> {
    spec.validate(source.len())?;
    let mut out = source.clone();
    out.values[spec.target] = stats.standardize_value(spec.target, spec.target_value);
    out.mask[spec.target] = true;
    let masked = correlation_mask(corr, spec.target, spec.mu);
    for j in 0..out.len() {
        if j == spec.target {
            continue;
        }
        let drop = masked[j] || (out.mask[j] && spec.random_mask_rate > 0.0 && rng.random::<f64>() < spec.random_mask_rate);
        if drop {
            out.mask[j] = false;
            out.values[j] = 0.0;
        }
    }
    let mut locked = vec![false; out.len()];
    locked[spec.target] = true;
    Ok((out, locked))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskAudit {
    pub mu: Vec<f64>,
    pub masked: Vec<usize>,
}

/// Masked-dimension count for each threshold of an ascending grid.
/// Fails if the count ever increases.
pub fn mask_monotonicity_audit(corr: &[Vec<f64>], target: usize, grid: &[f64]) -> Result<MaskAudit, EditError> {
    let masked: Vec<usize> = grid
        .iter()
        .map(|&mu| correlation_mask(corr, target, mu).iter().filter(|&&m| m).count())
        .collect();
    if let Some(i) = (1..masked.len()).find(|&i| masked[i] > masked[i - 1]) {
        return Err(EditError::NotMonotone(i));
    }
    Ok(MaskAudit { mu: grid.to_vec(), masked })
}

/// Evenly spaced thresholds `0, 1/(n−1), …, 1`.
pub fn mu_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditVerdict {
    pub id: usize,
    pub valid: bool,
    pub value: Option<f64>,
    pub aligned: bool,
    pub retained: bool,
    pub success: bool,
    /// Tanimoto similarity to the source molecule.
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSummary {
    pub n: usize,
    pub alignment_rate: f64,
    pub retention_rate: f64,
    pub success_rate: f64,
    pub mean_similarity: Option<f64>,
    pub histogram: Histogram,
}

fn fragment_patterns(spec: &EditSpec) -> Result<Vec<SubstructurePattern>, EditError> {
    spec.required_fragments
        .iter()
        .map(|f| {
            let mol = parse(f).map_err(|_| EditError::BadFragment(f.clone()))?;
            pattern_from_molecule(f, &mol).ok_or_else(|| EditError::BadFragment(f.clone()))
        })
        .collect()
}

/// Rates use every generated item as the denominator, so invalid outputs
/// count as failures. `property` computes the target property in raw units.
pub fn evaluate_edit<F>(
    source: &Molecule,
    generated: &[String],
    spec: &EditSpec,
    property: F,
) -> Result<(Vec<EditVerdict>, EditSummary), EditError>
where
    F: Fn(&Molecule) -> Option<f64> + Sync,
{
    let patterns = fragment_patterns(spec)?;
    let source_fp = morgan_fingerprint(source, DEFAULT_RADIUS, DEFAULT_WIDTH);
    let verdicts: Vec<EditVerdict> = generated
        .par_iter()
        .enumerate()
        .map(|(id, s)| match validate(s).1 {
            None => EditVerdict {
                id,
                valid: false,
                value: None,
                aligned: false,
                retained: false,
                success: false,
                similarity: None,
            },
            Some(mol) => {
                let value = property(&mol);
                let aligned = value.is_some_and(|v| (v - spec.target_value).abs() <= spec.tolerance);
                let retained = patterns.iter().all(|p| match_substructure(&mol, p) > 0);
                let fp = morgan_fingerprint(&mol, DEFAULT_RADIUS, DEFAULT_WIDTH);
                EditVerdict {
                    id,
                    valid: true,
                    value,
                    aligned,
                    retained,
                    success: aligned && retained,
                    similarity: tanimoto(&fp, &source_fp).ok(),
                }
            }
        })
        .collect();
    let n = verdicts.len();
    let rate = |f: &dyn Fn(&EditVerdict) -> bool| {
        if n == 0 {
            0.0
        } else {
            verdicts.iter().filter(|v| f(v)).count() as f64 / n as f64
        }
    };
    let sims: Vec<f64> = verdicts.iter().filter_map(|v| v.similarity).collect();
    let values: Vec<f64> = verdicts.iter().filter_map(|v| v.value).collect();
    let edges = Histogram::shared_edges(&[&values, &[spec.target_value]], 20);
    let summary = EditSummary {
        n,
        alignment_rate: rate(&|v| v.aligned),
        retention_rate: rate(&|v| v.retained),
        success_rate: rate(&|v| v.success),
        mean_similarity: (!sims.is_empty()).then(|| sims.iter().sum::<f64>() / sims.len() as f64),
        histogram: Histogram::with_edges(&values, &edges),
    };
    Ok((verdicts, summary))
}

/// `sample_id<TAB>aligned<TAB>retained<TAB>success` lines.
pub fn write_verdicts<W: Write>(mut w: W, verdicts: &[EditVerdict]) -> std::io::Result<()> {
    for v in verdicts {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            v.id,
            u8::from(v.aligned),
            u8::from(v.retained),
            u8::from(v.success)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::compute_native;
    use crate::numerics::SplitMix64;

    fn stats(k: usize) -> StandardizationStats {
        StandardizationStats {
            names: (0..k).map(|i| format!("p{i}")).collect(),
            mean: vec![0.0; k],
            std: vec![1.0; k],
        }
    }

    fn corr() -> Vec<Vec<f64>> {
        vec![
            vec![1.0, 0.2, 0.6, 0.9],
            vec![0.2, 1.0, 0.0, 0.0],
            vec![0.6, 0.0, 1.0, 0.0],
            vec![0.9, 0.0, 0.0, 1.0],
        ]
    }

    #[test]
    fn threshold_count() {
        let m = correlation_mask(&corr(), 0, 0.5);
        assert_eq!(m, vec![false, false, true, true]);
        assert_eq!(correlation_mask(&corr(), 0, 0.0), vec![false, true, true, true]);
        assert_eq!(correlation_mask(&corr(), 1, 0.0), vec![true, false, true, true]);
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let audit = mask_monotonicity_audit(&id, 0, &[0.25, 0.5, 1.0]).unwrap();
        assert_eq!(audit.masked, vec![0, 0, 0]);
    }

    #[test]
    fn build_condition() {
        let s = stats(4);
        let mut spec = EditSpec::new(0, 2.0, 1.0, &s);
        let src = PropertyVector::full(vec![0.1, 0.2, 0.3, 0.4]);
        let mut rng = SplitMix64::new(0);
        let (c, locked) = build_edit_condition(&src, &spec, &corr(), &s, &mut rng).unwrap();
        assert_eq!(c.values, vec![2.0, 0.2, 0.3, 0.4]);
        assert_eq!(locked, vec![true, false, false, false]);
        spec.mu = 0.0;
        let (c, _) = build_edit_condition(&src, &spec, &corr(), &s, &mut rng).unwrap();
        assert_eq!(c.mask, vec![true, false, false, false]);
        spec.mu = 1.0;
        spec.random_mask_rate = 1.0;
        let (c, _) = build_edit_condition(&src, &spec, &corr(), &s, &mut rng).unwrap();
        assert_eq!(c.mask, vec![true, false, false, false]);
    }

    #[test]
    fn evaluation_rates() {
        let source = parse("CC(=O)Nc1ccc(O)cc1").unwrap();
        let heavy = |m: &Molecule| Some(compute_native(m).heavy_atoms as f64);
        let mut spec = EditSpec {
            target: 0,
            target_value: 11.0,
            mu: 0.5,
            random_mask_rate: 0.0,
            required_fragments: vec!["c1ccccc1".into()],
            tolerance: 0.5,
        };
        let gen: Vec<String> = ["CC(=O)Nc1ccc(O)cc1", "CCCCCCCCCCC", "C(", "CC(=O)Nc1ccccc1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (v, s) = evaluate_edit(&source, &gen, &spec, heavy).unwrap();
        assert!(v[0].success);
        assert!(v[1].aligned && !v[1].retained && !v[1].success);
        assert!(!v[2].valid);
        assert!(!v[3].aligned && v[3].retained);
        assert_eq!((s.alignment_rate, s.retention_rate, s.success_rate), (0.5, 0.5, 0.25));
        assert!(s.success_rate <= s.alignment_rate.min(s.retention_rate));
        spec.required_fragments.clear();
        let (v, _) = evaluate_edit(&source, &gen, &spec, heavy).unwrap();
        assert!(v[1].success);
    }
}
