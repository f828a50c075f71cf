//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use molgen::analysis::{cramers_v, davies_bouldin, default_patterns, match_substructure, spearman, ContingencyTable};
use molgen::chem::{canonicalize, parse, read_smiles, validate, write, Molecule};
use molgen::curation::MoleculeRecord;
use molgen::decoding::{candidates, default_max_len, generate, sample_token, DecodePolicy, GenerationRequest, Strategy};
use molgen::descriptors::{correlation_matrix, ingest_properties, PropertyVector};
use molgen::editing::{build_edit_condition, correlation_mask, evaluate_edit, mask_monotonicity_audit, mu_grid, EditSpec};
use molgen::fingerprints::{morgan_fingerprint, DEFAULT_RADIUS, DEFAULT_WIDTH};
use molgen::metrics::{fcd, intdiv, EvaluationOptions};
use molgen::model::{smooth, TrainConfig};
use molgen::numerics::{info_nce, kl_value, GaussianPosterior, LogitScale, SplitMix64, Tape, Tensor};
use molgen::pipeline::{encode_records, evaluate_samples, load_dataset, train_on, TrainedModel};
use molgen::scaffolds::{dedup_scaffolds, levenshtein, levenshtein_bounded, scaffold_split, Split};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};

const CORPUS150: &str = include_str!("../data/corpus150.smi");
const SYNTHETIC: &str = include_str!("../data/synthetic.smi");
const SYNTHETIC_PROPS: &str = include_str!("../data/synthetic_properties.tsv");
const SCHEMA: [&str; 4] = ["MolWt", "LogP_approx", "QED_approx", "TPSA_approx"];

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus150() -> Vec<String> {
    read_smiles(CORPUS150.as_bytes()).unwrap()
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let mut worst_op: f64 = 0.0;
    let mut worst_elbo: f64 = 0.0;
    for seed in 0..100 {
        for (name, build, inputs) in common::op_cases(seed) {
            let err = common::check_gradients(build.as_ref(), &inputs);
            check(err < 1e-4, || format!("{name} instance {seed}: relative error {err:e}"))?;
            worst_op = worst_op.max(err);
        }
        let mut m = common::micro_instance(seed);
        let err = common::check_elbo_gradients(&mut m);
        check(err < 1e-4, || format!("ELBO instance {seed}: relative error {err:e}"))?;
        worst_elbo = worst_elbo.max(err);
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "100 instances, worst op error {worst_op:.1e}, worst ELBO error {worst_elbo:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn formula_oracles() -> Outcome {
    let mut rng = SplitMix64::new(2);
    for i in 0..10_000 {
        let d = rng.random_range(1..6);
        let scale = [1e-3, 0.1, 1.0, 5.0][i % 4];
        let mu = common::random_tensor(&mut rng, 1, d, scale);
        let lv = common::random_tensor(&mut rng, 1, d, scale);
        let kl = kl_value(&GaussianPosterior::new(mu, lv).unwrap()).unwrap();
        check(kl > 0.0, || format!("KL {kl} on a non-zero draw {i}"))?;
    }
    let zero = kl_value(&GaussianPosterior::new(Tensor::zeros(&[1, 4]), Tensor::zeros(&[1, 4])).unwrap()).unwrap();
    check(zero == 0.0, || format!("KL at the prior is {zero}"))?;

    let zs = common::random_tensor(&mut rng, 4, 3, 1.0);
    let zp = common::random_tensor(&mut rng, 4, 3, 1.0);
    let capped = molgen::numerics::info_nce_value(&zs, &zp, LogitScale::from_multiplier(100.0)).unwrap();
    let mut raw = 1e-3;
    while raw <= 1e6 {
        let m = LogitScale { raw }.multiplier();
        check(m <= 100.0 + 1e-9, || format!("multiplier {m} at raw {raw}"))?;
        if raw >= LogitScale::cap() {
            let mut tape = Tape::new();
            let a = tape.leaf(zs.clone());
            let b = tape.leaf(zp.clone());
            let s = tape.leaf(Tensor::scalar(raw));
            let loss = info_nce(&mut tape, a, b, s).unwrap();
            let g = tape.backward(loss).get_or_zeros(s, &[1, 1]).item();
            let v = tape.value(loss).item();
            check((v - capped).abs() < 1e-12 && g == 0.0, || format!("raw {raw}: loss {v} vs {capped}, grad {g}"))?;
        }
        raw *= 10.0;
    }

    let x: Vec<Vec<f64>> = (0..200).map(|_| (0..5).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let self_fcd = fcd(&x, &x).unwrap();
    check(self_fcd < 1e-6, || format!("FCD(X, X) = {self_fcd:e}"))?;
    let (m1, s1, m2, s2) = (0.0, 1.0, 1.0, 2.0);
    let n1 = Normal::new(m1, s1).unwrap();
    let n2 = Normal::new(m2, s2).unwrap();
    let a: Vec<Vec<f64>> = (0..20_000).map(|_| vec![n1.sample(&mut rng)]).collect();
    let b: Vec<Vec<f64>> = (0..20_000).map(|_| vec![n2.sample(&mut rng)]).collect();
    let closed = (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2);
    let est = fcd(&a, &b).unwrap();
    check((est - closed).abs() / closed < 0.05, || format!("1-D FCD {est} vs closed form {closed}"))?;

    let perfect = ContingencyTable {
        counts: vec![vec![13, 0, 0], vec![0, 7, 0], vec![0, 0, 21]],
    };
    let v1 = cramers_v(&perfect).unwrap();
    let (rows, cols) = ([3u64, 5, 2], [4u64, 1, 6, 2]);
    let independent = ContingencyTable {
        counts: rows.iter().map(|r| cols.iter().map(|c| r * c).collect()).collect(),
    };
    let v0 = cramers_v(&independent).unwrap();
    check((v1 - 1.0).abs() <= 1e-9 && v0.abs() <= 1e-9, || format!("V perfect {v1}, independent {v0}"))?;

    let groups: Vec<usize> = (0..60).map(|i| i % 4).collect();
    let emb: Vec<Vec<f64>> = groups
        .iter()
        .map(|&g| (0..3).map(|d| (g * 3 + d) as f64 + rng.random_range(-0.8..0.8)).collect())
        .collect();
    let base = davies_bouldin(&emb, &groups).unwrap();
    for s in [1e-3, 0.37, 7.5, 1e4] {
        let scaled: Vec<Vec<f64>> = emb.iter().map(|r| r.iter().map(|x| x * s).collect()).collect();
        let db = davies_bouldin(&scaled, &groups).unwrap();
        check((db - base).abs() <= 1e-9, || format!("DB {db} at scale {s} vs {base}"))?;
    }
    Ok(format!("KL, InfoNCE clamp, FCD self {self_fcd:.1e}, 1-D FCD {est:.4} vs {closed}, V and DB exact"))
}

fn parser_canonicalizer() -> Outcome {
    let smiles = corpus150();
    check(smiles.len() == 150, || format!("corpus has {} molecules", smiles.len()))?;
    let mut rng = SplitMix64::new(3);
    for s in &smiles {
        let mol = parse(s).map_err(|e| format!("{s}: {e}"))?;
        let canon = canonicalize(&mol);
        let order: Vec<usize> = (0..mol.atom_count()).collect();
        let written = write(&mol, &order);
        let back = parse(&written).map_err(|e| format!("{s} -> {written}: {e}"))?;
        check(canonicalize(&back) == canon, || format!("round trip of {s} via {written}"))?;
        let again = canonicalize(&parse(&canon).map_err(|e| format!("{canon}: {e}"))?);
        check(again == canon, || format!("not idempotent: {canon} -> {again}"))?;
        let mut perm = order.clone();
        for _ in 0..100 {
            perm.shuffle(&mut rng);
            let c = canonicalize(&mol.permuted(&perm));
            check(c == canon, || format!("{s}: permutation gave {c}, expected {canon}"))?;
        }
    }
    Ok("150 molecules, 100 permutations each".into())
}

fn small_molecules() -> Vec<Molecule> {
    let extra = ["CN=NC", "C=CC", "CC1OC1", "NC(=O)NC(=O)C", "c1ccoc1Cl", "O=C1CCC(=O)N1", "CON", "NC(=N)NC"];
    corpus150()
        .iter()
        .map(|s| s.as_str())
        .chain(extra)
        .map(|s| parse(s).unwrap())
        .filter(|m| m.heavy_atom_count() <= 12)
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = SplitMix64::new(4);
    let alphabet: Vec<char> = "cC1()=NOn2".chars().collect();
    for i in 0..1000 {
        let a = common::random_word(&mut rng, &alphabet, 14);
        let b = common::random_word(&mut rng, &alphabet, 14);
        let want = common::levenshtein_oracle(&a, &b);
        let got = levenshtein(&a, &b);
        check(got == want, || format!("pair {i} {a:?} {b:?}: {got} vs {want}"))?;
        let max = rng.random_range(0..6);
        let bounded = levenshtein_bounded(&a, &b, max);
        check(bounded == (want <= max).then_some(want), || format!("bounded {a:?} {b:?} max {max}: {bounded:?}"))?;
    }

    for i in 0..1000 {
        let n = rng.random_range(1..12);
        let probs = common::random_distribution(&mut rng, n);
        let p = if i % 10 == 0 { 1.0 } else { rng.random_range(0.01..1.0) };
        let got: Vec<usize> = candidates(&probs, Strategy::TopP(p)).unwrap().iter().map(|c| c.0).collect();
        let want = common::top_p_oracle(&probs, p);
        check(got == want, || format!("distribution {i} p {p}: {got:?} vs {want:?}"))?;
    }

    let patterns = default_patterns();
    check(patterns.len() == 23, || format!("{} patterns", patterns.len()))?;
    let mols = small_molecules();
    let mut hit = vec![false; patterns.len()];
    for mol in &mols {
        for (k, pat) in patterns.iter().enumerate() {
            let want = common::match_sets_oracle(mol, pat).len();
            let got = match_substructure(mol, pat);
            check(got == want, || format!("{} in {mol}: {got} vs {want}", pat.name))?;
            hit[k] |= got > 0;
        }
    }
    let missing: Vec<&str> = patterns.iter().zip(&hit).filter(|(_, h)| !**h).map(|(p, _)| p.name.as_str()).collect();
    check(missing.is_empty(), || format!("patterns never matched: {missing:?}"))?;

    let fps: Vec<_> = corpus150()
        .iter()
        .map(|s| morgan_fingerprint(&parse(s).unwrap(), DEFAULT_RADIUS, DEFAULT_WIDTH))
        .collect();
    for trial in 0..60 {
        let n = rng.random_range(2..=50);
        let set: Vec<_> = fps.choose_multiple(&mut rng, n).cloned().collect();
        let got = intdiv(&set).unwrap();
        let want = common::intdiv_oracle(&set);
        check((got - want).abs() <= 1e-12, || format!("trial {trial} n {n}: {got} vs {want}"))?;
    }
    Ok(format!("1000 edit distances, 1000 top-p sets, 23 patterns on {} molecules, 60 IntDiv sets", mols.len()))
}

fn sampler_statistics() -> Outcome {
    const DRAWS: usize = 100_000;
    let mut worst: f64 = 1.0;
    let mut tests = 0;
    for k in [1usize, 2, 3] {
        for p in [0.7, 0.8, 0.9] {
            let mut rng = SplitMix64::stream(5, (k as u64) * 10 + (p * 10.0) as u64);
            let probs = common::random_distribution(&mut rng, 8);
            for strategy in [Strategy::TopK(k), Strategy::TopP(p)] {
                let cands = candidates(&probs, strategy).unwrap();
                let policy = DecodePolicy::new(strategy, 10, 0);
                let mut counts = vec![0u64; probs.len()];
                for _ in 0..DRAWS {
                    counts[sample_token(&probs, &policy, &mut rng).unwrap()] += 1;
                }
                let allowed: HashSet<usize> = cands.iter().map(|c| c.0).collect();
                let stray: u64 = (0..probs.len()).filter(|i| !allowed.contains(i)).map(|i| counts[i]).sum();
                check(stray == 0, || format!("{strategy:?}: {stray} draws outside the candidate set"))?;
                let observed: Vec<u64> = cands.iter().map(|c| counts[c.0]).collect();
                let expected: Vec<f64> = cands.iter().map(|c| c.1).collect();
                let (stat, pv) = common::chi_square(&observed, &expected);
                check(pv > 0.001, || format!("{strategy:?}: chi-square {stat:.2}, p {pv:.2e}"))?;
                worst = worst.min(pv);
                tests += 1;
            }
        }
    }
    Ok(format!("{tests} goodness-of-fit tests at {DRAWS} draws, smallest p {worst:.3}"))
}

fn split_integrity() -> Outcome {
    for seed in 0..10u64 {
        let mut rng = SplitMix64::stream(6, seed);
        let n_groups = rng.random_range(40..80);
        let mut keys = Vec::new();
        for g in 0..n_groups {
            let size = if rng.random_bool(0.4) { 1 } else { rng.random_range(2..15) };
            keys.extend(std::iter::repeat_n(format!("S{g}"), size));
        }
        keys.shuffle(&mut rng);
        let valid_n = keys.len() / 10;
        let test_n = keys.len() / 8;
        let split = scaffold_split(&keys, valid_n, test_n, seed).map_err(|e| format!("dataset {seed}: {e}"))?;
        check(split.count(Split::Valid) == valid_n && split.count(Split::Test) == test_n, || {
            format!("dataset {seed}: valid {} test {}", split.count(Split::Valid), split.count(Split::Test))
        })?;
        for s in [Split::Train, Split::Valid, Split::Test] {
            let mine: BTreeSet<&String> = split.indices(s).into_iter().map(|i| &keys[i]).collect();
            let others: BTreeSet<&String> = (0..keys.len()).filter(|&i| split.labels[i] != s).map(|i| &keys[i]).collect();
            check(mine.is_disjoint(&others), || format!("dataset {seed}: {s:?} shares scaffolds"))?;
        }

        let alphabet: Vec<char> = "cC1N(O)".chars().collect();
        let words: Vec<String> = (0..120).map(|_| common::random_word(&mut rng, &alphabet, 8)).collect();
        let min_dist = rng.random_range(1..5);
        let kept = dedup_scaffolds(&words, min_dist);
        for (x, &i) in kept.iter().enumerate() {
            for &j in &kept[x + 1..] {
                let d = common::levenshtein_oracle(&words[i], &words[j]);
                check(d >= min_dist, || format!("kept {:?} and {:?} at distance {d}", words[i], words[j]))?;
            }
        }
        for i in 0..words.len() {
            if !kept.contains(&i) {
                let near = kept.iter().any(|&j| j < i && common::levenshtein_oracle(&words[i], &words[j]) < min_dist);
                check(near, || format!("{:?} dropped without a close earlier key", words[i]))?;
            }
        }
    }
    Ok("10 datasets: exact sizes, disjoint scaffolds, dedup verified pairwise".into())
}

struct Desk {
    schema: Vec<String>,
    records: Vec<MoleculeRecord>,
    test: Vec<MoleculeRecord>,
    all: Vec<MoleculeRecord>,
    cvae: TrainedModel,
    train_time: Duration,
}

fn desk_train_config() -> TrainConfig {
    TrainConfig {
        epochs: 100,
        batch_size: 64,
        lr: 3e-3,
        seed: 7,
        ..TrainConfig::default()
    }
}

fn desk_shape(c: &mut molgen::model::ModelConfig) {
    c.window = 12;
    c.hidden_dim = 128;
}

fn desk_setup() -> Result<Desk, String> {
    let smiles = read_smiles(SYNTHETIC.as_bytes()).unwrap();
    let table = ingest_properties(SYNTHETIC_PROPS.as_bytes()).map_err(|e| e.to_string())?;
    let schema: Vec<String> = SCHEMA.iter().map(|s| s.to_string()).collect();
    let ds = load_dataset(&smiles, &table, &schema, 50, 50, 0).map_err(|e| e.to_string())?;
    let records: Vec<MoleculeRecord> = ds.records.iter().filter(|r| r.split == Split::Train).cloned().collect();
    let start = Instant::now();
    let cvae = train_on(&records, &schema, true, desk_shape, &desk_train_config()).map_err(|e| e.to_string())?;
    let train_time = start.elapsed();
    let test = ds.records.iter().filter(|r| r.split == Split::Test).cloned().collect();
    Ok(Desk {
        schema,
        records,
        test,
        all: ds.records,
        cvae,
        train_time,
    })
}

fn end_to_end(desk: &Desk) -> Outcome {
    check(desk.train_time < Duration::from_secs(120), || format!("training took {:?}", desk.train_time))?;
    let losses = desk.cvae.trace.losses();
    let smoothed = smooth(&losses, 5);
    if let Some(i) = (1..smoothed.len()).find(|&i| smoothed[i] > smoothed[i - 1]) {
        return Err(format!("smoothed loss rises at epoch {i}: {} -> {}", smoothed[i - 1], smoothed[i]));
    }
    let seqs = encode_records(&desk.cvae.vocab, &desk.records).map_err(|e| e.to_string())?;
    let conds = desk.cvae.conditioner.conditions(&desk.test).map_err(|e| e.to_string())?;
    let max_len = default_max_len(&seqs);
    let mut samples = Vec::new();
    for (i, cond) in conds.into_iter().cycle().take(50).enumerate() {
        let policy = DecodePolicy::new(Strategy::TopP(0.9), max_len, 11 + i as u64);
        let batch = generate(&desk.cvae.model, &desk.cvae.vocab, &GenerationRequest::new(cond, 10), &policy).map_err(|e| e.to_string())?;
        samples.extend(batch);
    }
    check(samples.len() == 500, || format!("{} samples", samples.len()))?;
    let training: Vec<String> = desk.records.iter().map(|r| r.smiles.clone()).collect();
    let report = evaluate_samples(&samples, &training, Some(&desk.cvae.conditioner), &EvaluationOptions::default());
    check(report.validity >= 0.5, || format!("validity {}", report.validity))?;
    let c = &report.counts;
    check(c.n_novel <= c.n_unique && c.n_unique <= c.n_valid, || format!("counts {c:?}"))?;

    let train_set: HashSet<String> = training.iter().cloned().collect();
    let valid: Vec<String> = samples
        .iter()
        .filter_map(|s| validate(&s.smiles).1.map(|m| canonicalize(&m)))
        .collect();
    let unique: HashSet<&String> = valid.iter().collect();
    let novel = unique.iter().filter(|s| !train_set.contains(s.as_str())).count();
    check(
        (valid.len(), unique.len(), novel) == (c.n_valid, c.n_unique, c.n_novel),
        || format!("direct count {:?} vs report {c:?}", (valid.len(), unique.len(), novel)),
    )?;
    let direct = novel as f64 / samples.len() as f64;
    let product = report.validity * report.uniqueness * report.novelty;
    check((report.availability - direct).abs() < 1e-12 && (product - direct).abs() < 1e-12, || {
        format!("availability {} product {product} direct {direct}", report.availability)
    })?;
    Ok(format!(
        "{} training molecules, trained in {:.1}s, loss {:.3} -> {:.3}, validity {:.3}, uniqueness {:.3}, novelty {:.3}, availability {:.3}",
        desk.records.len(),
        desk.train_time.as_secs_f64(),
        losses[0],
        losses[losses.len() - 1],
        report.validity,
        report.uniqueness,
        report.novelty,
        report.availability
    ))
}

fn hard_mining_proxy(desk: &Desk) -> Outcome {
    let vae = train_on(&desk.records, &desk.schema, false, desk_shape, &desk_train_config()).map_err(|e| e.to_string())?;
    let scored: Vec<MoleculeRecord> = desk.all.iter().filter(|r| desk.cvae.vocab.encode(&r.smiles).is_ok()).cloned().collect();
    let seqs = encode_records(&desk.cvae.vocab, &scored).map_err(|e| e.to_string())?;
    let conds = desk.cvae.conditioner.conditions(&scored).map_err(|e| e.to_string())?;
    let cvae_losses = desk.cvae.model.lm_losses(&seqs, &conds).map_err(|e| e.to_string())?;
    let vae_losses = vae.model.lm_losses(&seqs, &conds).map_err(|e| e.to_string())?;
    let rho = spearman(&cvae_losses, &vae_losses).map_err(|e| e.to_string())?;
    check(rho > 0.5, || format!("Spearman {rho}"))?;
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    Ok(format!(
        "Spearman {rho:.3} over {} molecules, mean LM loss CVAE {:.3}, VAE {:.3}",
        scored.len(),
        mean(&cvae_losses),
        mean(&vae_losses)
    ))
}

fn editing_mechanics(desk: &Desk) -> Outcome {
    let raw: Vec<PropertyVector> = desk.all.iter().map(|r| r.properties.clone()).collect();
    let k = desk.schema.len();
    let corr = correlation_matrix(&raw, k).map_err(|e| e.to_string())?;
    let grid = mu_grid(21);
    for t in 0..k {
        let audit = mask_monotonicity_audit(&corr, t, &grid).map_err(|e| format!("target {t}: {e}"))?;
        check(audit.masked.windows(2).all(|w| w[1] <= w[0]), || format!("target {t}: {:?}", audit.masked))?;
        for &mu in &grid {
            check(!correlation_mask(&corr, t, mu)[t], || format!("target {t} masked at mu {mu}"))?;
        }
        let at_zero = correlation_mask(&corr, t, 0.0);
        check((0..k).all(|j| at_zero[j] == (j != t)), || format!("target {t} at mu 0: {at_zero:?}"))?;
    }

    let stats = &desk.cvae.conditioner.stats;
    let target = stats.names.iter().position(|n| n == "LogP_approx").ok_or("no LogP column")?;
    let frequency = |key: &str| desk.records.iter().filter(|r| r.scaffold == key).count();
    let source = desk
        .test
        .iter()
        .filter(|r| r.properties.get(1).is_some())
        .filter(|r| parse(&r.scaffold).is_ok_and(|m| molgen::descriptors::compute_native(&m).ring_count == 1))
        .max_by_key(|r| frequency(&r.scaffold))
        .ok_or("no ring source")?;
    let source_cond = desk.cvae.conditioner.conditions(std::slice::from_ref(source)).map_err(|e| e.to_string())?.remove(0);
    let mut spec = EditSpec::new(target, source.properties.get(1).unwrap() + 1.0, 0.5, stats);
    spec.tolerance = 0.5 * stats.std[target];
    spec.required_fragments = vec![source.scaffold.clone()];
    let mut rng = SplitMix64::new(9);
    let (cond, locked) = build_edit_condition(&source_cond, &spec, &corr_for(&corr, stats, &desk.schema), stats, &mut rng).map_err(|e| e.to_string())?;
    check(cond.mask[target] && locked[target], || "target not set and locked".into())?;
    let seqs = encode_records(&desk.cvae.vocab, &desk.records).map_err(|e| e.to_string())?;
    let policy = DecodePolicy::new(Strategy::TopP(0.9), default_max_len(&seqs), 13);
    let mut req = GenerationRequest::new(cond, 200);
    req.locked = locked;
    let samples = generate(&desk.cvae.model, &desk.cvae.vocab, &req, &policy).map_err(|e| e.to_string())?;
    let smiles: Vec<String> = samples.iter().map(|s| s.smiles.clone()).collect();
    let logp = |m: &Molecule| Some(molgen::descriptors::compute_native(m).logp);
    let (verdicts, summary) = evaluate_edit(&source.molecule, &smiles, &spec, logp).map_err(|e| e.to_string())?;
    let n = verdicts.len() as f64;
    let rate = |f: fn(&molgen::editing::EditVerdict) -> bool| verdicts.iter().filter(|v| f(v)).count() as f64 / n;
    check(
        summary.alignment_rate == rate(|v| v.aligned)
            && summary.retention_rate == rate(|v| v.retained)
            && summary.success_rate == rate(|v| v.success),
        || "summary rates differ from the verdicts".into(),
    )?;
    check(verdicts.iter().all(|v| v.success == (v.aligned && v.retained)), || "success is not aligned and retained".into())?;
    check(summary.success_rate <= summary.alignment_rate.min(summary.retention_rate), || format!("{summary:?}"))?;
    Ok(format!(
        "21-point grids on {k} targets; edit of {}: alignment {:.3}, retention {:.3}, success {:.3}",
        source.smiles, summary.alignment_rate, summary.retention_rate, summary.success_rate
    ))
}

/// Correlations restricted to the standardized dimensions, in their order.
fn corr_for(corr: &[Vec<f64>], stats: &molgen::descriptors::StandardizationStats, schema: &[String]) -> Vec<Vec<f64>> {
    let idx: Vec<usize> = stats.names.iter().map(|n| schema.iter().position(|s| s == n).unwrap()).collect();
    idx.iter().map(|&i| idx.iter().map(|&j| corr[i][j]).collect()).collect()
}

fn report(n: usize, name: &str, outcome: Outcome, failed: &mut usize) {
    match outcome {
        Ok(detail) => println!("criterion {n} PASS  {name}: {detail}"),
        Err(why) => {
            *failed += 1;
            println!("criterion {n} FAIL  {name}: {why}");
        }
    }
}

fn main() -> ExitCode {
    let mut failed = 0;
    report(1, "gradient fidelity", gradient_fidelity(), &mut failed);
    report(2, "formula oracles", formula_oracles(), &mut failed);
    report(3, "parser and canonicalizer", parser_canonicalizer(), &mut failed);
    report(4, "oracle equivalence", oracle_equivalence(), &mut failed);
    report(5, "sampler statistics", sampler_statistics(), &mut failed);
    report(6, "split integrity", split_integrity(), &mut failed);
    match desk_setup() {
        Ok(desk) => {
            report(7, "end-to-end desk run", end_to_end(&desk), &mut failed);
            report(8, "hard-mining proxy", hard_mining_proxy(&desk), &mut failed);
            report(9, "editing mechanics", editing_mechanics(&desk), &mut failed);
        }
        Err(e) => {
            for (n, name) in [(7, "end-to-end desk run"), (8, "hard-mining proxy"), (9, "editing mechanics")] {
                report(n, name, Err(format!("setup failed: {e}")), &mut failed);
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all 9 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 9 criteria fail");
        ExitCode::FAILURE
    }
}
