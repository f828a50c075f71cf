//! Generation metrics: validity, uniqueness, novelty, availability, SNN,
//! fragment similarity, Fréchet distance, internal diversity, scaffold
//! count, property nRMSE and edge-property success.
//!
//! The Fréchet distance here is computed over pluggable embeddings (native
//! descriptor vectors by default), so values are not comparable to
//! literature FCD numbers.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{canonicalize, validate, Molecule};
use crate::descriptors::{compute_native, PropertyVector, StandardizationStats, NATIVE_PROPERTIES};
use crate::fingerprints::{brics_fragment, morgan_fingerprint, tanimoto, Fingerprint, FragmentDistribution};
use crate::scaffolds::murcko_scaffold;

pub const FCD_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("reference set is empty")]
    EmptyReference,
    #[error("both fragment distributions are empty")]
    BothEmpty,
    #[error("need at least two items, got {0}")]
    TooFew(usize),
    #[error("no present property dimensions")]
    NoPresentDims,
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Per-item outcome of validity checking and canonicalization.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub molecule: Option<Molecule>,
    pub canonical: Option<String>,
}

pub fn parse_all<S: AsRef<str> + Sync>(texts: &[S]) -> Vec<Parsed> {
    texts
        .par_iter()
        .map(|t| {
            let (_, mol) = validate(t.as_ref());
            let canonical = mol.as_ref().map(canonicalize);
            Parsed { molecule: mol, canonical }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n_generated: usize,
    pub n_valid: usize,
    pub n_unique: usize,
    pub n_novel: usize,
}

impl Counts {
    pub fn validity(&self) -> f64 {
        ratio(self.n_valid, self.n_generated)
    }

    /// 0 when nothing is valid.
    pub fn uniqueness(&self) -> f64 {
        ratio(self.n_unique, self.n_valid)
    }

    pub fn novelty(&self) -> f64 {
        ratio(self.n_novel, self.n_unique)
    }

    pub fn availability(&self) -> f64 {
        ratio(self.n_novel, self.n_generated)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Counts against a set of canonical training strings.
pub fn count(parsed: &[Parsed], training: &HashSet<String>) -> Counts {
    let mut seen = HashSet::new();
    let mut c = Counts {
        n_generated: parsed.len(),
        ..Counts::default()
    };
    for p in parsed {
        if let Some(can) = &p.canonical {
            c.n_valid += 1;
            if seen.insert(can.clone()) {
                c.n_unique += 1;
                if !training.contains(can) {
                    c.n_novel += 1;
                }
            }
        }
    }
    c
}

pub fn canonical_set<S: AsRef<str> + Sync>(smiles: &[S]) -> HashSet<String> {
    parse_all(smiles).into_iter().filter_map(|p| p.canonical).collect()
}

pub fn validity<S: AsRef<str> + Sync>(generated: &[S]) -> f64 {
    count(&parse_all(generated), &HashSet::new()).validity()
}

pub fn uniqueness<S: AsRef<str> + Sync>(generated: &[S]) -> f64 {
    count(&parse_all(generated), &HashSet::new()).uniqueness()
}

pub fn novelty<S: AsRef<str> + Sync, T: AsRef<str> + Sync>(generated: &[S], training: &[T]) -> f64 {
    count(&parse_all(generated), &canonical_set(training)).novelty()
}

pub fn availability<S: AsRef<str> + Sync, T: AsRef<str> + Sync>(generated: &[S], training: &[T]) -> f64 {
    count(&parse_all(generated), &canonical_set(training)).availability()
}

/// Mean over `generated` of the best Tanimoto similarity in `reference`.
pub fn snn(generated: &[Fingerprint], reference: &[Fingerprint]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if generated.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = generated
        .par_iter()
        .map(|g| {
            reference
                .iter()
                .map(|r| tanimoto(g, r).expect("fingerprints share a width"))
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total / generated.len() as f64)
}

/// Cosine similarity of fragment count vectors over the union vocabulary.
pub fn frag(a: &FragmentDistribution, b: &FragmentDistribution) -> Result<f64, MetricError> {
    if a.is_empty() && b.is_empty() {
        return Err(MetricError::BothEmpty);
    }
    let dot: f64 = a
        .counts
        .iter()
        .filter_map(|(k, &x)| b.counts.get(k).map(|&y| x as f64 * y as f64))
        .sum();
    let na = a.counts.values().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb = b.counts.values().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    Ok(if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na * nb) })
}

pub fn fragment_distribution(mols: &[&Molecule]) -> FragmentDistribution {
    mols.par_iter()
        .map(|m| brics_fragment(m))
        .reduce(FragmentDistribution::default, |mut a, b| {
            a.merge(&b);
            a
        })
}

/// `1 − mean pairwise Tanimoto`.
pub fn intdiv(fps: &[Fingerprint]) -> Result<f64, MetricError> {
    let n = fps.len();
    if n < 2 {
        return Err(MetricError::TooFew(n));
    }
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| tanimoto(&fps[i], &fps[j]).expect("fingerprints share a width"))
                .sum::<f64>()
        })
        .sum();
    Ok(1.0 - 2.0 * total / (n * (n - 1)) as f64)
}

/// Distinct non-empty scaffolds, plus the number of acyclic molecules.
pub fn scaffold_count(mols: &[&Molecule]) -> (usize, usize) {
    let keys: Vec<String> = mols.par_iter().map(|m| murcko_scaffold(m)).collect();
    let acyclic = keys.iter().filter(|k| k.is_empty()).count();
    let distinct: HashSet<&String> = keys.iter().filter(|k| !k.is_empty()).collect();
    (distinct.len(), acyclic)
}

fn gaussian_fit(xs: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>), MetricError> {
    let n = xs.len();
    if n < 2 {
        return Err(MetricError::TooFew(n));
    }
    let d = xs[0].len();
    if let Some(bad) = xs.iter().find(|x| x.len() != d) {
        return Err(MetricError::DimensionMismatch(d, bad.len()));
    }
    let m = DMatrix::from_fn(n, d, |i, j| xs[i][j]);
    let mean = DVector::from_fn(d, |j, _| m.column(j).mean());
    let mut centered = m;
    for j in 0..d {
        let mu = mean[j];
        centered.column_mut(j).add_scalar_mut(-mu);
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    Ok((mean, cov))
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussians fitted to two embedding sets, with
/// `FCD_RIDGE` added to both covariance diagonals.
pub fn fcd(generated: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64, MetricError> {
    let (mg, mut cg) = gaussian_fit(generated)?;
    let (mr, mut cr) = gaussian_fit(reference)?;
    if mg.len() != mr.len() {
        return Err(MetricError::DimensionMismatch(mg.len(), mr.len()));
    }
    for i in 0..mg.len() {
        cg[(i, i)] += FCD_RIDGE;
        cr[(i, i)] += FCD_RIDGE;
    }
    let sr = sym_sqrt(&cr);
    let inner = &sr * &cg * &sr;
    let inner = (&inner + inner.transpose()) * 0.5;
    let tr_sqrt: f64 = SymmetricEigen::new(inner).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let diff = (&mr - &mg).norm_squared();
    let value = diff + cr.trace() + cg.trace() - 2.0 * tr_sqrt;
    Ok(value.max(0.0))
}

/// Native descriptors z-scored with the given per-dimension mean and std.
/// Dimensions with zero std are dropped.
pub fn descriptor_embeddings(mols: &[&Molecule], mean: &[f64], std: &[f64]) -> Vec<Vec<f64>> {
    mols.par_iter()
        .map(|m| {
            compute_native(m)
                .to_vec()
                .iter()
                .zip(mean.iter().zip(std))
                .filter(|(_, (_, &s))| s > 0.0)
                .map(|(&x, (&mu, &s))| (x - mu) / s)
                .collect()
        })
        .collect()
}

/// Column means and population standard deviations.
pub fn column_moments(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len().max(1) as f64;
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let std = (0..d)
        .map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    (mean, std)
}

/// `sqrt(Σ ((standardize(p̂) − c)²) / count)` over dimensions present in
/// both the condition (already standardized) and the raw property vector.
/// `None` entries in `properties` are invalid molecules and are skipped.
pub fn nrmse(conditions: &[PropertyVector], properties: &[Option<PropertyVector>], stats: &StandardizationStats) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (c, p) in conditions.iter().zip(properties) {
        let Some(p) = p else { continue };
        for k in 0..c.len().min(p.len()) {
            if let (Some(target), Some(raw)) = (c.get(k), p.get(k)) {
                sum += (stats.standardize_value(k, raw) - target).powi(2);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(MetricError::NoPresentDims);
    }
    Ok((sum / n as f64).sqrt())
}

/// Native property vector in `stats.names` order; names without a native
/// descriptor are masked.
pub fn native_properties_for(mol: &Molecule, names: &[String]) -> PropertyVector {
    let native = compute_native(mol).to_vec();
    let mut v = PropertyVector::masked(names.len());
    for (k, name) in names.iter().enumerate() {
        if let Some(i) = NATIVE_PROPERTIES.iter().position(|n| n == name) {
            v.values[k] = native[i];
            v.mask[k] = true;
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTarget {
    pub property: String,
    pub lo: f64,
    pub hi: f64,
}

/// Fraction of valid molecules whose property lies in `[lo, hi]`, and the
/// internal diversity of those in range (`None` when fewer than two).
pub fn edge_success_and_diversity(values: &[f64], fps: &[Fingerprint], lo: f64, hi: f64) -> (f64, Option<f64>) {
    if values.is_empty() {
        return (0.0, None);
    }
    let hits: Vec<Fingerprint> = values
        .iter()
        .zip(fps)
        .filter(|(&v, _)| v >= lo && v <= hi)
        .map(|(_, f)| f.clone())
        .collect();
    (hits.len() as f64 / values.len() as f64, intdiv(&hits).ok())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub counts: Counts,
    pub validity: f64,
    pub uniqueness: f64,
    pub novelty: f64,
    pub availability: f64,
    /// True when no generated item was valid, so uniqueness is reported as 0.
    pub uniqueness_degenerate: bool,
    pub snn: Option<f64>,
    pub frag: Option<f64>,
    pub intdiv: Option<f64>,
    pub fcd: Option<f64>,
    pub scaffold_count: usize,
    pub acyclic_count: usize,
    pub nrmse: Option<f64>,
    pub nrmse_excluded_invalid: usize,
    pub success_rate: Option<f64>,
    pub edge_diversity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOptions {
    pub radius: usize,
    pub width: usize,
    pub edge: Option<EdgeTarget>,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        EvaluationOptions {
            radius: crate::fingerprints::DEFAULT_RADIUS,
            width: crate::fingerprints::DEFAULT_WIDTH,
            edge: None,
        }
    }
}

/// Conditions for nRMSE: one standardized vector per generated item.
pub struct ConditionInput<'a> {
    pub conditions: &'a [PropertyVector],
    pub stats: &'a StandardizationStats,
}

/// Every metric for `generated` against `training`. Distribution metrics
/// use the valid generated molecules (with repeats).
pub fn evaluate<S: AsRef<str> + Sync, T: AsRef<str> + Sync>(
    generated: &[S],
    training: &[T],
    conditions: Option<ConditionInput<'_>>,
    options: &EvaluationOptions,
) -> GenerationReport {
    let parsed = parse_all(generated);
    let train_parsed = parse_all(training);
    let train_set: HashSet<String> = train_parsed.iter().filter_map(|p| p.canonical.clone()).collect();
    let counts = count(&parsed, &train_set);
    assert!(counts.n_novel <= counts.n_unique && counts.n_unique <= counts.n_valid && counts.n_valid <= counts.n_generated);

    let gen_mols: Vec<&Molecule> = parsed.iter().filter_map(|p| p.molecule.as_ref()).collect();
    let ref_mols: Vec<&Molecule> = train_parsed.iter().filter_map(|p| p.molecule.as_ref()).collect();
    let fp = |ms: &[&Molecule]| -> Vec<Fingerprint> {
        ms.par_iter().map(|m| morgan_fingerprint(m, options.radius, options.width)).collect()
    };
    let gen_fps = fp(&gen_mols);
    let ref_fps = fp(&ref_mols);

    let snn_v = if gen_fps.is_empty() { None } else { snn(&gen_fps, &ref_fps).ok() };
    let frag_v = if gen_mols.is_empty() {
        None
    } else {
        frag(&fragment_distribution(&gen_mols), &fragment_distribution(&ref_mols)).ok()
    };
    let fcd_v = {
        let ref_native: Vec<Vec<f64>> = ref_mols.par_iter().map(|m| compute_native(m).to_vec()).collect();
        let (mean, std) = column_moments(&ref_native);
        let g = descriptor_embeddings(&gen_mols, &mean, &std);
        let r = descriptor_embeddings(&ref_mols, &mean, &std);
        fcd(&g, &r).ok()
    };
    let (scaffolds, acyclic) = scaffold_count(&gen_mols);

    let (nrmse_v, excluded) = match conditions {
        Some(ci) => {
            let props: Vec<Option<PropertyVector>> = parsed
                .iter()
                .map(|p| p.molecule.as_ref().map(|m| native_properties_for(m, &ci.stats.names)))
                .collect();
            let excluded = props.iter().filter(|p| p.is_none()).count();
            (nrmse(ci.conditions, &props, ci.stats).ok(), excluded)
        }
        None => (None, 0),
    };

    let (success, edge_div) = match &options.edge {
        Some(t) => match NATIVE_PROPERTIES.iter().position(|n| *n == t.property) {
            Some(i) => {
                let values: Vec<f64> = gen_mols.iter().map(|m| compute_native(m).to_vec()[i]).collect();
                let (s, d) = edge_success_and_diversity(&values, &gen_fps, t.lo, t.hi);
                (Some(s), d)
            }
            None => {
                log::warn!("edge property {} has no native descriptor", t.property);
                (None, None)
            }
        },
        None => (None, None),
    };

    GenerationReport {
        validity: counts.validity(),
        uniqueness: counts.uniqueness(),
        novelty: counts.novelty(),
        availability: counts.availability(),
        uniqueness_degenerate: counts.n_valid == 0,
        snn: snn_v,
        frag: frag_v,
        intdiv: intdiv(&gen_fps).ok(),
        fcd: fcd_v,
        scaffold_count: scaffolds,
        acyclic_count: acyclic,
        nrmse: nrmse_v,
        nrmse_excluded_invalid: excluded,
        success_rate: success,
        edge_diversity: edge_div,
        counts,
    }
}

impl GenerationReport {
    fn columns(&self) -> BTreeMap<&'static str, String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into());
        BTreeMap::from([
            ("n_generated", self.counts.n_generated.to_string()),
            ("n_valid", self.counts.n_valid.to_string()),
            ("n_unique", self.counts.n_unique.to_string()),
            ("n_novel", self.counts.n_novel.to_string()),
            ("validity", self.validity.to_string()),
            ("uniqueness", self.uniqueness.to_string()),
            ("novelty", self.novelty.to_string()),
            ("availability", self.availability.to_string()),
            ("snn", opt(self.snn)),
            ("frag", opt(self.frag)),
            ("intdiv", opt(self.intdiv)),
            ("fcd", opt(self.fcd)),
            ("scaffold_count", self.scaffold_count.to_string()),
            ("acyclic_count", self.acyclic_count.to_string()),
            ("nrmse", opt(self.nrmse)),
            ("nrmse_excluded_invalid", self.nrmse_excluded_invalid.to_string()),
            ("success_rate", opt(self.success_rate)),
            ("edge_diversity", opt(self.edge_diversity)),
        ])
    }

    /// Header line plus one value line.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let cols = self.columns();
        let keys: Vec<&str> = cols.keys().copied().collect();
        let vals: Vec<&str> = cols.values().map(String::as_str).collect();
        writeln!(w, "{}", keys.join("\t"))?;
        writeln!(w, "{}", vals.join("\t"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
