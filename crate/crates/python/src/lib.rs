//! Python bindings: chemistry helpers, metrics, scaffold splitting and a
//! handle on trained models written by the `molgen` command line tool.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use molgen::analysis::{default_patterns, match_substructure};
use molgen::chem::{self, Validity};
use molgen::decoding::{generate, DecodePolicy, GenerationRequest, Strategy};
use molgen::descriptors::{compute_native, PropertyVector, NATIVE_PROPERTIES};
use molgen::fingerprints::{morgan_fingerprint, tanimoto as tanimoto_fp, DEFAULT_RADIUS, DEFAULT_WIDTH};
use molgen::metrics::{evaluate as evaluate_metrics, EvaluationOptions};
use molgen::pipeline::TrainedModel;
use molgen::scaffolds;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse(smiles: &str) -> PyResult<chem::Molecule> {
    chem::parse(smiles).map_err(value_error)
}

/// Canonical SMILES; raises ValueError when the input does not parse.
#[pyfunction]
fn canonicalize(smiles: &str) -> PyResult<String> {
    Ok(chem::canonicalize(&parse(smiles)?))
}

/// `None` for a valid molecule, otherwise the reason it is invalid.
#[pyfunction]
fn validity_error(smiles: &str) -> Option<String> {
    match chem::validate(smiles).0 {
        Validity::Valid => None,
        Validity::ParseFailure(e) => Some(format!("parse: {e}")),
        Validity::ValenceFailure(e) => Some(format!("valence: {e}")),
    }
}

#[pyfunction]
fn is_valid(smiles: &str) -> bool {
    chem::validate(smiles).0.is_valid()
}

#[pyfunction]
fn murcko_scaffold(smiles: &str) -> PyResult<String> {
    Ok(scaffolds::murcko_scaffold(&parse(smiles)?))
}

#[pyfunction]
fn descriptors(smiles: &str) -> PyResult<BTreeMap<String, f64>> {
    let values = compute_native(&parse(smiles)?).to_vec();
    Ok(NATIVE_PROPERTIES.iter().map(|n| n.to_string()).zip(values).collect())
}

#[pyfunction]
#[pyo3(signature = (a, b, radius = DEFAULT_RADIUS, width = DEFAULT_WIDTH))]
fn tanimoto(a: &str, b: &str, radius: usize, width: usize) -> PyResult<f64> {
    let fa = morgan_fingerprint(&parse(a)?, radius, width);
    let fb = morgan_fingerprint(&parse(b)?, radius, width);
    tanimoto_fp(&fa, &fb).map_err(value_error)
}

/// Counts of each built-in substructure pattern.
#[pyfunction]
fn substructure_counts(smiles: &str) -> PyResult<BTreeMap<String, usize>> {
    let mol = parse(smiles)?;
    Ok(default_patterns().iter().map(|p| (p.name.clone(), match_substructure(&mol, p))).collect())
}

#[pyfunction]
fn levenshtein(a: &str, b: &str) -> usize {
    scaffolds::levenshtein(a, b)
}

/// Split labels (`"train"`, `"valid"`, `"test"`) with whole scaffold groups
/// kept together.
#[pyfunction]
fn scaffold_split(smiles: Vec<String>, valid_size: usize, test_size: usize, seed: u64) -> PyResult<Vec<String>> {
    let mols = smiles.iter().map(|s| parse(s)).collect::<PyResult<Vec<_>>>()?;
    let keys = scaffolds::scaffold_keys(&mols);
    let split = scaffolds::scaffold_split(&keys, valid_size, test_size, seed).map_err(value_error)?;
    Ok(split.labels.iter().map(|l| l.as_str().to_string()).collect())
}

#[pyfunction]
fn synthetic_corpus(n: usize, seed: u64) -> Vec<String> {
    molgen::synthetic::synthetic_corpus(n, seed)
}

/// Generation metrics as a JSON string.
#[pyfunction]
fn evaluate(generated: Vec<String>, training: Vec<String>) -> String {
    evaluate_metrics(&generated, &training, None, &EvaluationOptions::default()).to_json()
}

/// A trained model loaded from the output directory of `molgen train`.
#[pyclass(name = "Model", module = "molgen")]
struct PyModel {
    inner: TrainedModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: TrainedModel::load_dir(&dir).map_err(value_error)?,
        })
    }

    /// Condition property names, in model order.
    #[getter]
    fn properties(&self) -> Vec<String> {
        self.inner.conditioner.stats.names.clone()
    }

    #[getter]
    fn conditional(&self) -> bool {
        self.inner.model.config().conditional
    }

    /// Samples `count` SMILES. `condition` maps property names to raw
    /// values; absent properties are masked.
    #[pyo3(signature = (count, seed = 0, condition = None, strategy = "top_p", k = 3, p = 0.9, temperature = 1.0, max_len = 100))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        &self,
        count: usize,
        seed: u64,
        condition: Option<BTreeMap<String, f64>>,
        strategy: &str,
        k: usize,
        p: f64,
        temperature: f64,
        max_len: usize,
    ) -> PyResult<Vec<String>> {
        let stats = &self.inner.conditioner.stats;
        let mut cond = PropertyVector::masked(stats.len());
        for (name, value) in condition.unwrap_or_default() {
            let k = stats
                .names
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| value_error(format!("unknown property {name}")))?;
            cond.values[k] = stats.standardize_value(k, value);
            cond.mask[k] = true;
        }
        let strategy = match strategy {
            "top_k" => Strategy::TopK(k),
            "top_p" => Strategy::TopP(p),
            other => return Err(value_error(format!("strategy must be top_k or top_p, not {other}"))),
        };
        let mut policy = DecodePolicy::new(strategy, max_len, seed);
        policy.temperature = temperature;
        let samples = generate(&self.inner.model, &self.inner.vocab, &GenerationRequest::new(cond, count), &policy)
            .map_err(value_error)?;
        Ok(samples.into_iter().map(|s| s.smiles).collect())
    }

    /// Per-token language-model loss of `smiles` with no condition.
    fn lm_loss(&self, smiles: &str) -> PyResult<f64> {
        let seq = self.inner.vocab.encode(smiles).map_err(value_error)?;
        let cond = PropertyVector::masked(self.inner.conditioner.dim());
        self.inner.model.lm_loss(&seq, &cond).map_err(value_error)
    }
}

#[pymodule]
#[pyo3(name = "molgen")]
fn molgen_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(validity_error, m)?)?;
    m.add_function(wrap_pyfunction!(is_valid, m)?)?;
    m.add_function(wrap_pyfunction!(murcko_scaffold, m)?)?;
    m.add_function(wrap_pyfunction!(descriptors, m)?)?;
    m.add_function(wrap_pyfunction!(tanimoto, m)?)?;
    m.add_function(wrap_pyfunction!(substructure_counts, m)?)?;
    m.add_function(wrap_pyfunction!(levenshtein, m)?)?;
    m.add_function(wrap_pyfunction!(scaffold_split, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}
