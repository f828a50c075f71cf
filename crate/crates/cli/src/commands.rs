use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::info;
use molgen::analysis::{
    associations, default_patterns, parse_patterns, property_bins, separability_by_pattern, substructure_counts,
    write_association_tsv, SubstructurePattern,
};
use molgen::chem::{canonical_smiles, parse, read_smiles, Molecule};
use molgen::curation::{build_challenging_set, build_example_set, distribution_report, Dataset, MoleculeRecord};
use molgen::decoding::{default_max_len, generate, write_sidecar, DecodePolicy, GeneratedSample, GenerationRequest};
use molgen::descriptors::{correlation_matrix, ingest_properties, PropertyVector};
use molgen::editing::{build_edit_condition, evaluate_edit, mask_monotonicity_audit, mu_grid, write_verdicts, EditSpec};
use molgen::metrics::{evaluate, native_properties_for, ConditionInput, EdgeTarget, EvaluationOptions};
use molgen::numerics::SplitMix64;
use molgen::pipeline::{load_dataset, train_on, Conditioner, TrainedModel};
use molgen::scaffolds::Split;
use rand::RngCore;

use crate::config::{Config, LoadedConfig, TrainingSet};
use crate::manifest::Manifest;

pub const SPLIT_FILE: &str = "split.tsv";
pub const EXAMPLE_FILE: &str = "example_set.smi";
pub const CHALLENGING_FILE: &str = "challenging_set.smi";
pub const TRAINING_FILE: &str = "training_set.smi";
pub const CURATION_REPORT: &str = "curation_report.json";
pub const HISTOGRAMS: &str = "histograms.tsv";
pub const SAMPLES: &str = "samples.smi";
pub const SAMPLE_SIDECAR: &str = "samples.sidecar.tsv";
pub const SAMPLE_CONDITIONS: &str = "samples.conditions.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TSV: &str = "report.tsv";
pub const ASSOCIATIONS: &str = "associations.tsv";
pub const SEPARABILITY: &str = "separability.tsv";
pub const EDIT_SAMPLES: &str = "edit_samples.smi";
pub const EDIT_VERDICTS: &str = "edit_verdicts.tsv";
pub const EDIT_SUMMARY: &str = "edit_summary.json";

pub struct Run {
    pub loaded: LoadedConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub manifest: Manifest,
}

impl Run {
    fn config(&self) -> &Config {
        &self.loaded.config
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn stage_seed(&self, label: &str) -> u64 {
        SplitMix64::derive(self.seed, label).next_u64()
    }

    fn dataset(&mut self) -> Result<Dataset> {
        let data = self.config().data.clone();
        let smiles = read_smiles(BufReader::new(open(&data.smiles)?))?;
        let table = ingest_properties(BufReader::new(open(&data.properties)?))?;
        self.manifest.input(&data.smiles)?;
        self.manifest.input(&data.properties)?;
        let ds = load_dataset(&smiles, &table, &data.schema, data.valid_size, data.test_size, self.seed)?;
        info!("dataset: {} molecules", ds.len());
        Ok(ds)
    }

    fn model(&mut self) -> Result<TrainedModel> {
        let m = TrainedModel::load_dir(&self.out).context("loading the trained model; run `train` first")?;
        for f in [TrainedModel::MODEL_FILE, TrainedModel::VOCAB_FILE, TrainedModel::CONDITIONER_FILE] {
            self.manifest.input(&self.path(f))?;
        }
        Ok(m)
    }

    fn written(&mut self, path: &Path) -> Result<()> {
        self.manifest.output(path)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        self.written(&p)?;
        Ok(p)
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<PathBuf> {
        let p = self.path(name);
        let mut w = BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?);
        f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", p.display()))?;
        self.written(&p)?;
        Ok(p)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn smiles_lines(records: &[MoleculeRecord]) -> String {
    records.iter().map(|r| format!("{}\n", r.smiles)).collect()
}

/// One sample per line, verbatim; `#` lines are comments. Empty lines are
/// kept as empty (invalid) samples.
pub fn read_samples(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in BufReader::new(open(path)?).lines() {
        let line = line?;
        if !line.starts_with('#') {
            out.push(line.trim().to_string());
        }
    }
    Ok(out)
}

fn records_by_smiles<'a>(ds: &'a Dataset, smiles: &[String]) -> Result<Vec<MoleculeRecord>> {
    let index: HashMap<&str, &'a MoleculeRecord> = ds.records.iter().map(|r| (r.smiles.as_str(), r)).collect();
    smiles
        .iter()
        .map(|s| {
            let c = canonical_smiles(s).ok_or_else(|| anyhow!("{s} is not a valid molecule"))?;
            index
                .get(c.as_str())
                .map(|r| (*r).clone())
                .ok_or_else(|| anyhow!("{s} is not in the dataset"))
        })
        .collect()
}

pub fn curate(run: &mut Run) -> Result<()> {
    let ds = run.dataset()?;
    let cfg = run.config().clone();
    let options = cfg.curation.options();
    run.write_with(SPLIT_FILE, |w| {
        writeln!(w, "smiles\tscaffold\tsplit")?;
        for r in &ds.records {
            writeln!(w, "{}\t{}\t{}", r.smiles, r.scaffold, r.split.as_str())?;
        }
        Ok(())
    })?;
    let (example, mut example_report) = build_example_set(&ds, &options, run.stage_seed("curate.example"));
    info!("example set: {} molecules", example.len());
    let scoring = cfg.train.config(run.stage_seed("curate.scorer"));
    let scorer = train_on(&example, &cfg.data.schema, false, |c| cfg.model.apply(c), &molgen::model::TrainConfig {
        epochs: cfg.curation.scoring_epochs,
        ..scoring
    })?;
    let (challenging, challenging_report) =
        build_challenging_set(&ds, &example, &scorer.model, &scorer.vocab, &options, run.stage_seed("curate.challenging"))?;
    info!("challenging set: {} molecules", challenging.len());

    let mut seen = HashSet::new();
    let training: Vec<MoleculeRecord> = example
        .iter()
        .chain(&challenging)
        .filter(|r| seen.insert(r.smiles.clone()))
        .cloned()
        .collect();
    run.write_text(EXAMPLE_FILE, &smiles_lines(&example))?;
    run.write_text(CHALLENGING_FILE, &smiles_lines(&challenging))?;
    run.write_text(TRAINING_FILE, &smiles_lines(&training))?;

    let test: Vec<MoleculeRecord> = ds.records.iter().filter(|r| r.split == Split::Test).cloned().collect();
    example_report.distributions = distribution_report(
        &cfg.data.schema,
        &[("example", &example), ("challenging", &challenging), ("test", &test)],
    );
    run.write_with(HISTOGRAMS, |w| example_report.write_histograms(w))?;
    let report = serde_json::json!({ "example": example_report, "challenging": challenging_report });
    run.write_text(CURATION_REPORT, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(())
}

pub fn train(run: &mut Run) -> Result<()> {
    let ds = run.dataset()?;
    let cfg = run.config().clone();
    let records = match cfg.train.set {
        TrainingSet::Curated => {
            let path = run.path(TRAINING_FILE);
            let smiles = read_smiles(BufReader::new(open(&path).context("run `curate` first")?))?;
            run.manifest.input(&path)?;
            records_by_smiles(&ds, &smiles)?
        }
        TrainingSet::TrainSplit => ds
            .records
            .iter()
            .filter(|r| r.split == Split::Train && !r.properties.is_fully_masked())
            .cloned()
            .collect(),
    };
    info!("training on {} molecules", records.len());
    let trained = train_on(&records, &cfg.data.schema, cfg.model.conditional, |c| cfg.model.apply(c), &cfg.train.config(run.seed))?;
    for p in trained.save_dir(&run.out)? {
        run.written(&p)?;
    }
    Ok(())
}

fn test_conditions(ds: &Dataset, trained: &TrainedModel) -> Result<Vec<PropertyVector>> {
    let dim = trained.conditioner.dim();
    if !trained.model.config().conditional {
        return Ok(vec![PropertyVector::masked(dim)]);
    }
    let test: Vec<MoleculeRecord> = ds.records.iter().filter(|r| r.split == Split::Test).cloned().collect();
    let conds = trained.conditioner.conditions(&test)?;
    let conds: Vec<PropertyVector> = conds.into_iter().filter(|c| !c.is_fully_masked()).collect();
    if conds.is_empty() {
        bail!("no test molecule has a property to condition on");
    }
    Ok(conds)
}

fn max_len(cfg: &Config, ds: &Dataset, trained: &TrainedModel) -> usize {
    cfg.decode.max_len.unwrap_or_else(|| {
        let seqs: Vec<_> = ds.records.iter().filter_map(|r| trained.vocab.encode(&r.smiles).ok()).collect();
        default_max_len(&seqs)
    })
}

pub fn generate_cmd(run: &mut Run) -> Result<()> {
    let ds = run.dataset()?;
    let trained = run.model()?;
    let cfg = run.config().clone();
    let conds = test_conditions(&ds, &trained)?;
    let max_len = max_len(&cfg, &ds, &trained);
    let base = run.stage_seed("generate");
    let mut samples: Vec<GeneratedSample> = Vec::with_capacity(cfg.decode.count);
    let mut batch = 0u64;
    while samples.len() < cfg.decode.count {
        let cond = conds[batch as usize % conds.len()].clone();
        let n = cfg.decode.per_condition.min(cfg.decode.count - samples.len());
        let mut policy = DecodePolicy::new(cfg.decode.strategy(), max_len, SplitMix64::stream(base, batch).next_u64());
        policy.temperature = cfg.decode.temperature;
        let mut request = GenerationRequest::new(cond, n);
        request.keep_ratio = cfg.decode.keep_ratio;
        for mut s in generate(&trained.model, &trained.vocab, &request, &policy)? {
            s.id = samples.len();
            samples.push(s);
        }
        batch += 1;
    }
    info!("generated {} samples", samples.len());
    run.write_text(SAMPLES, &samples.iter().map(|s| format!("{}\n", s.smiles)).collect::<String>())?;
    run.write_with(SAMPLE_SIDECAR, |w| write_sidecar(w, &samples))?;
    let conditions: Vec<&PropertyVector> = samples.iter().map(|s| &s.condition).collect();
    run.write_text(SAMPLE_CONDITIONS, &(serde_json::to_string(&conditions)? + "\n"))?;
    Ok(())
}

pub fn evaluate_cmd(run: &mut Run, samples: Option<PathBuf>, reference: Option<PathBuf>) -> Result<()> {
    let cfg = run.config().clone();
    let default_samples = samples.is_none();
    let samples_path = samples.unwrap_or_else(|| run.path(SAMPLES));
    let reference_path = reference.unwrap_or_else(|| run.path(TRAINING_FILE));
    let generated = read_samples(&samples_path)?;
    let reference = read_smiles(BufReader::new(open(&reference_path)?))?;
    run.manifest.input(&samples_path)?;
    run.manifest.input(&reference_path)?;

    let mut conditioned: Option<(Vec<PropertyVector>, Conditioner)> = None;
    let cond_path = run.path(SAMPLE_CONDITIONS);
    let conditioner_path = run.path(TrainedModel::CONDITIONER_FILE);
    if default_samples && cond_path.is_file() && conditioner_path.is_file() {
        let conds: Vec<PropertyVector> = serde_json::from_str(&std::fs::read_to_string(&cond_path)?)?;
        let conditioner: Conditioner = serde_json::from_str(&std::fs::read_to_string(&conditioner_path)?)?;
        if conds.len() == generated.len() && conds.iter().any(|c| !c.is_fully_masked()) {
            run.manifest.input(&cond_path)?;
            run.manifest.input(&conditioner_path)?;
            conditioned = Some((conds, conditioner));
        }
    }
    let options = EvaluationOptions {
        radius: cfg.metrics.radius,
        width: cfg.metrics.width,
        edge: cfg.metrics.edge_property.clone().map(|property| EdgeTarget {
            property,
            lo: cfg.metrics.edge_lo,
            hi: cfg.metrics.edge_hi,
        }),
    };
    let report = match &conditioned {
        Some((conds, c)) => evaluate(
            &generated,
            &reference,
            Some(ConditionInput {
                conditions: conds,
                stats: &c.stats,
            }),
            &options,
        ),
        None => evaluate(&generated, &reference, None, &options),
    };
    info!(
        "validity {:.3} uniqueness {:.3} novelty {:.3}",
        report.validity, report.uniqueness, report.novelty
    );
    run.write_text(REPORT_JSON, &(report.to_json() + "\n"))?;
    run.write_with(REPORT_TSV, |w| report.write_tsv(w))?;
    Ok(())
}

fn property_of(schema: &[String], r: &MoleculeRecord, name: &str) -> Option<f64> {
    match schema.iter().position(|s| s == name) {
        Some(k) => r.properties.get(k),
        None => native_properties_for(&r.molecule, &[name.to_string()]).get(0),
    }
}

fn labelled(mols: Vec<(Molecule, f64)>, lo: f64, hi: f64) -> (Vec<Molecule>, Vec<usize>) {
    let (mols, values): (Vec<Molecule>, Vec<f64>) = mols.into_iter().unzip();
    let labels = property_bins(&values, lo, hi);
    (mols, labels)
}

pub fn analyze(run: &mut Run) -> Result<()> {
    let ds = run.dataset()?;
    let cfg = run.config().clone();
    let a = &cfg.analysis;
    let patterns: Vec<SubstructurePattern> = match &a.patterns {
        Some(p) => {
            run.manifest.input(p)?;
            parse_patterns(&std::fs::read_to_string(p)?)?
        }
        None => default_patterns(),
    };
    let schema = &cfg.data.schema;
    let data: Vec<(Molecule, f64)> = ds
        .records
        .iter()
        .filter_map(|r| property_of(schema, r, &a.property).map(|v| (r.molecule.clone(), v)))
        .collect();
    if data.is_empty() {
        bail!("no molecule has a value for {}", a.property);
    }
    let (mols, labels) = labelled(data, a.bin_low, a.bin_high);
    let counts = substructure_counts(&mols, &patterns);
    let mut tables = vec![("dataset", associations(&counts, &patterns, &labels, a.use_counts))];

    let samples_path = run.path(SAMPLES);
    if samples_path.is_file() {
        run.manifest.input(&samples_path)?;
        let name = [a.property.clone()];
        let generated: Vec<(Molecule, f64)> = read_samples(&samples_path)?
            .iter()
            .filter_map(|s| molgen::chem::validate(s).1)
            .filter_map(|m| native_properties_for(&m, &name).get(0).map(|v| (m, v)))
            .collect();
        if !generated.is_empty() {
            let (mols, labels) = labelled(generated, a.bin_low, a.bin_high);
            let counts = substructure_counts(&mols, &patterns);
            tables.push(("generated", associations(&counts, &patterns, &labels, a.use_counts)));
        }
    }
    run.write_with(ASSOCIATIONS, |w| {
        writeln!(w, "pattern\tdataset\tV")?;
        tables.iter().try_for_each(|(name, rows)| write_association_tsv(&mut *w, name, rows))
    })?;

    if run.path(TrainedModel::MODEL_FILE).is_file() {
        let trained = run.model()?;
        let test: Vec<MoleculeRecord> = ds
            .records
            .iter()
            .filter(|r| r.split == Split::Test && trained.vocab.encode(&r.smiles).is_ok())
            .cloned()
            .collect();
        let conds = trained.conditioner.conditions(&test)?;
        let embeddings = test
            .iter()
            .zip(&conds)
            .map(|(r, c)| trained.model.embed(&trained.vocab.encode(&r.smiles)?, c).map_err(anyhow::Error::from))
            .collect::<Result<Vec<_>>>()?;
        let mols: Vec<Molecule> = test.iter().map(|r| r.molecule.clone()).collect();
        let counts = substructure_counts(&mols, &patterns);
        let db: BTreeMap<String, Option<f64>> = separability_by_pattern(&embeddings, &counts, &patterns).into_iter().collect();
        run.write_with(SEPARABILITY, |w| {
            writeln!(w, "pattern\tdavies_bouldin")?;
            for (p, v) in &db {
                writeln!(w, "{p}\t{}", v.map_or_else(|| "NA".to_string(), |v| v.to_string()))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

/// Values of `names` taken from vectors over `schema`.
fn project(v: &PropertyVector, schema: &[String], names: &[String]) -> PropertyVector {
    let mut out = PropertyVector::masked(names.len());
    for (k, n) in names.iter().enumerate() {
        if let Some(j) = schema.iter().position(|s| s == n) {
            out.values[k] = v.values[j];
            out.mask[k] = v.mask[j];
        }
    }
    out
}

pub fn edit(run: &mut Run) -> Result<()> {
    let ds = run.dataset()?;
    let trained = run.model()?;
    let cfg = run.config().clone();
    let e = cfg.edit.clone().ok_or_else(|| anyhow!("the config has no [edit] section"))?;
    let schema = &cfg.data.schema;
    let stats = &trained.conditioner.stats;
    let target = stats
        .names
        .iter()
        .position(|n| *n == e.target)
        .ok_or_else(|| anyhow!("{} was dropped during standardization", e.target))?;
    let source = parse(&e.source).with_context(|| format!("edit.source {}", e.source))?;
    let canonical = molgen::chem::canonicalize(&source);
    let raw = match ds.records.iter().find(|r| r.smiles == canonical) {
        Some(r) => r.properties.clone(),
        None => native_properties_for(&source, schema),
    };
    let source_cond = stats.standardize(schema, &[raw])?.remove(0);

    let vectors: Vec<PropertyVector> = ds.records.iter().map(|r| project(&r.properties, schema, &stats.names)).collect();
    let corr = correlation_matrix(&vectors, stats.names.len())?;
    let audit = mask_monotonicity_audit(&corr, target, &mu_grid(21))?;

    let mut spec = EditSpec::new(target, e.target_value, e.mu, stats);
    spec.tolerance = e.tolerance_sigmas * stats.std[target];
    spec.random_mask_rate = e.random_mask_rate;
    spec.required_fragments = e.required_fragments.clone();
    let mut rng = SplitMix64::derive(run.seed, "edit.mask");
    let (cond, locked) = build_edit_condition(&source_cond, &spec, &corr, stats, &mut rng)?;
    let mut policy = DecodePolicy::new(cfg.decode.strategy(), max_len(&cfg, &ds, &trained), run.stage_seed("edit.decode"));
    policy.temperature = cfg.decode.temperature;
    let mut request = GenerationRequest::new(cond.clone(), e.count);
    request.locked = locked;
    request.keep_ratio = cfg.decode.keep_ratio;
    let samples = generate(&trained.model, &trained.vocab, &request, &policy)?;
    let smiles: Vec<String> = samples.iter().map(|s| s.smiles.clone()).collect();
    let name = [e.target.clone()];
    let (verdicts, summary) = evaluate_edit(&source, &smiles, &spec, |m| native_properties_for(m, &name).get(0))?;
    info!(
        "alignment {:.3} retention {:.3} success {:.3}",
        summary.alignment_rate, summary.retention_rate, summary.success_rate
    );
    run.write_text(EDIT_SAMPLES, &smiles.iter().map(|s| format!("{s}\n")).collect::<String>())?;
    run.write_with(EDIT_VERDICTS, |w| {
        writeln!(w, "sample_id\taligned\tretained\tsuccess")?;
        write_verdicts(w, &verdicts)
    })?;
    let out = serde_json::json!({
        "spec": spec,
        "condition": cond,
        "mask_audit": audit,
        "summary": summary,
    });
    run.write_text(EDIT_SUMMARY, &(serde_json::to_string_pretty(&out)? + "\n"))?;
    Ok(())
}
