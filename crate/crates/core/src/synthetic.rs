//! Seeded generator for a small grammar of short valid SMILES and a
//! matching property table, used for desk-scale end-to-end runs.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::chem::{canonicalize, parse};
use crate::descriptors::compute_native;
use crate::numerics::SplitMix64;

const CORES: &[&str] = &[
    "c1ccccc1",
    "c1ccncc1",
    "c1ccoc1",
    "c1ccsc1",
    "C1CCCCC1",
    "C1CCNCC1",
    "C1CCOCC1",
    "C1CCCC1",
    "C1CC1",
];

/// Groups written to the left of a core (bonded to the core's first atom).
const HEADS: &[&str] = &["", "C", "CC", "CCC", "O", "CO", "N", "CN", "CC(C)", "OC", "NC(=O)", "CC(=O)", "FC", "ClC", "C=C"];

/// Groups written to the right of a core (bonded to its last atom).
const TAILS: &[&str] = &["", "C", "CC", "O", "N", "F", "Cl", "Br", "C(=O)O", "C(=O)N", "CO", "OC", "C#N", "CCO", "NC"];

/// Links between the two cores of a two-ring molecule.
const LINKERS: &[&str] = &["", "C", "CC", "O", "N", "C(=O)N", "CO"];

/// Acyclic molecules: a backbone with optional branches.
const CHAIN_ATOMS: &[&str] = &["C", "C", "C", "N", "O"];

pub const SCHEMA: [&str; 6] = ["MolWt", "LogP_approx", "QED_approx", "TPSA_approx", "SA_Score", "pActivity"];

/// Fraction of synthetic property cells left empty.
pub const MISSING_RATE: f64 = 0.05;

fn chain<R: Rng + ?Sized>(rng: &mut R) -> String {
    let n = rng.random_range(3..=7);
    let mut s = String::new();
    for i in 0..n {
        s.push_str(CHAIN_ATOMS.choose(rng).expect("non-empty"));
        if i > 0 && i + 1 < n && rng.random_bool(0.25) {
            s.push_str(["(C)", "(O)", "(=O)"].choose(rng).expect("non-empty"));
        }
    }
    s
}

fn ring_molecule<R: Rng + ?Sized>(rng: &mut R) -> String {
    let head = HEADS.choose(rng).expect("non-empty");
    let core = CORES.choose(rng).expect("non-empty");
    let tail = TAILS.choose(rng).expect("non-empty");
    if rng.random_bool(0.4) {
        let link = LINKERS.choose(rng).expect("non-empty");
        let second = CORES.choose(rng).expect("non-empty");
        format!("{head}{core}{link}{second}{tail}")
    } else {
        format!("{head}{core}{tail}")
    }
}

/// `n` distinct canonical SMILES. About one in six is acyclic.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = SplitMix64::derive(seed, "synthetic.corpus");
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        assert!(attempts < 100 * n + 1000, "grammar exhausted before {n} distinct molecules");
        let raw = if rng.random_bool(1.0 / 6.0) { chain(&mut rng) } else { ring_molecule(&mut rng) };
        let Ok(mol) = parse(&raw) else { continue };
        if !crate::chem::check_valence(&mol).is_valid() {
            continue;
        }
        let c = canonicalize(&mol);
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    out
}

/// Property rows for `smiles` over [`SCHEMA`]: native descriptors plus two
/// noisy synthetic targets. Cells are `None` at rate [`MISSING_RATE`].
pub fn synthetic_properties(smiles: &[String], seed: u64) -> Vec<Vec<Option<f64>>> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    smiles
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = SplitMix64::stream(seed, i as u64);
            let mol = parse(s).expect("corpus molecules parse");
            let d = compute_native(&mol);
            let sa = (1.0 + 0.15 * d.heavy_atoms as f64 + 0.5 * d.ring_count as f64 + 0.2 * noise.sample(&mut rng)).clamp(1.0, 10.0);
            let activity = 4.0 + 0.4 * d.logp + 0.01 * d.tpsa + 0.3 * noise.sample(&mut rng);
            [d.mol_wt, d.logp, d.qed, d.tpsa, sa, activity]
                .into_iter()
                .map(|v| (!rng.random_bool(MISSING_RATE)).then_some(v))
                .collect()
        })
        .collect()
}

/// Writes a property table with a `smiles` key column and [`SCHEMA`].
pub fn write_property_table<W: Write>(mut w: W, smiles: &[String], rows: &[Vec<Option<f64>>]) -> std::io::Result<()> {
    writeln!(w, "smiles\t{}", SCHEMA.join("\t"))?;
    for (s, row) in smiles.iter().zip(rows) {
        let cells: Vec<String> = row
            .iter()
            .map(|v| v.map_or_else(String::new, |x| format!("{x:.4}")))
            .collect();
        writeln!(w, "{s}\t{}", cells.join("\t"))?;
    }
    Ok(())
}
