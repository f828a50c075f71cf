//! Circular fingerprints, Tanimoto similarity and a two-rule BRICS-style
//! fragmenter.
//!
//! The fragmenter is deliberately small: it cuts acyclic single bonds that
//! join a ring atom to a non-ring atom, and single bonds from N/O/S to a
//! carbonyl carbon. It is not the full BRICS rule table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::chem::{canonicalize, BondOrder, Element, Molecule};
use crate::numerics::mix64;

pub const DEFAULT_RADIUS: usize = 2;
pub const DEFAULT_WIDTH: usize = 2048;

/// Fixed seed for environment hashing.
const HASH_SEED: u64 = 0x6d6f_6c67_656e_2d66;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprint widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("bad fingerprint hex: {0}")]
    BadHex(String),
    #[error("malformed fragment table line {0}")]
    MalformedRow(usize),
}

/// Fixed-width bitset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    width: usize,
    radius: usize,
    words: Vec<u64>,
}

impl Fingerprint {
    pub fn empty(width: usize, radius: usize) -> Self {
        assert!(width > 0, "fingerprint width must be positive");
        Fingerprint {
            width,
            radius,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn from_bits(width: usize, bits: &[usize]) -> Self {
        let mut fp = Fingerprint::empty(width, 0);
        for &b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn set(&mut self, bit: usize) {
        let bit = bit % self.width;
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] & (1 << (bit % 64)) != 0
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> Vec<usize> {
        (0..self.width).filter(|&b| self.get(b)).collect()
    }

    /// Lowercase hex, most significant nibble first, `width / 4` digits
    /// (rounded up).
    pub fn to_hex(&self) -> String {
        let digits = self.width.div_ceil(4);
        let mut s = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let mut nibble = 0u8;
            for k in 0..4 {
                if self.get(d * 4 + k) {
                    nibble |= 1 << k;
                }
            }
            let _ = write!(s, "{nibble:x}");
        }
        s
    }

    pub fn from_hex(hex: &str, width: usize) -> Result<Self, FingerprintError> {
        if hex.len() != width.div_ceil(4) {
            return Err(FingerprintError::BadHex(format!(
                "expected {} digits, got {}",
                width.div_ceil(4),
                hex.len()
            )));
        }
        let mut fp = Fingerprint::empty(width, 0);
        for (i, c) in hex.chars().rev().enumerate() {
            let nibble = c.to_digit(16).ok_or_else(|| FingerprintError::BadHex(hex.to_string()))?;
            for k in 0..4 {
                if nibble & (1 << k) != 0 {
                    let bit = i * 4 + k;
                    if bit >= width {
                        return Err(FingerprintError::BadHex("bit beyond width".into()));
                    }
                    fp.set(bit);
                }
            }
        }
        Ok(fp)
    }
}

/// `|a ∧ b| / |a ∨ b|`, and 1 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.width != b.width {
        return Err(FingerprintError::WidthMismatch(a.width, b.width));
    }
    let mut inter = 0u32;
    let mut union = 0u32;
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

fn hash_seq(values: impl IntoIterator<Item = u64>) -> u64 {
    let mut h = HASH_SEED;
    for v in values {
        h = mix64(h ^ mix64(v));
    }
    h
}

fn atom_invariant(mol: &Molecule, i: usize) -> u64 {
    let a = mol.atom(i);
    let heavy_degree = mol
        .neighbors(i)
        .iter()
        .filter(|&&(nb, _)| mol.atom(nb).element != Element::H)
        .count();
    hash_seq([
        a.element.code() as u64,
        a.aromatic as u64,
        heavy_degree as u64,
        mol.hydrogen_count(i) as u64,
        (a.charge as i64 + 128) as u64,
        mol.is_ring_atom(i) as u64,
    ])
}

/// Morgan-style fingerprint: every atom environment for radius 0..=radius
/// sets bit `hash mod width`. Hash inputs are atom invariants and sorted
/// neighbor environments, never atom indices.
pub fn morgan_fingerprint(mol: &Molecule, radius: usize, width: usize) -> Fingerprint {
    let mut fp = Fingerprint::empty(width, radius);
    let mut env: Vec<u64> = (0..mol.atom_count()).map(|i| atom_invariant(mol, i)).collect();
    for &h in &env {
        fp.set((h % width as u64) as usize);
    }
    for r in 1..=radius {
        let next: Vec<u64> = (0..mol.atom_count())
            .map(|i| {
                let mut nbrs: Vec<(u64, u64)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(nb, b)| (mol.bond(b).order.code() as u64, env[nb]))
                    .collect();
                nbrs.sort_unstable();
                hash_seq(
                    [r as u64, env[i]]
                        .into_iter()
                        .chain(nbrs.into_iter().flat_map(|(o, h)| [o, h])),
                )
            })
            .collect();
        for &h in &next {
            fp.set((h % width as u64) as usize);
        }
        env = next;
    }
    fp
}

/// Fingerprints for many molecules in parallel; output order follows input.
pub fn fingerprints(mols: &[Molecule], radius: usize, width: usize) -> Vec<Fingerprint> {
    mols.par_iter().map(|m| morgan_fingerprint(m, radius, width)).collect()
}

/// Canonical fragment string → count.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FragmentDistribution {
    pub counts: BTreeMap<String, usize>,
}

impl FragmentDistribution {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn merge(&mut self, other: &FragmentDistribution) {
        for (k, v) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += v;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `fragment<TAB>count` lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (k, v) in &self.counts {
            writeln!(w, "{k}\t{v}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, FingerprintError> {
        let mut counts = BTreeMap::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|_| FingerprintError::MalformedRow(i + 1))?;
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('\t').ok_or(FingerprintError::MalformedRow(i + 1))?;
            let v: usize = v.parse().map_err(|_| FingerprintError::MalformedRow(i + 1))?;
            *counts.entry(k.to_string()).or_insert(0) += v;
        }
        Ok(FragmentDistribution { counts })
    }
}

fn is_carbonyl_carbon(mol: &Molecule, c: usize) -> bool {
    mol.atom(c).element == Element::C
        && mol.neighbors(c).iter().any(|&(nb, b)| {
            mol.bond(b).order == BondOrder::Double && mol.atom(nb).element == Element::O
        })
}

/// Bonds cut by the two fragmentation rules.
pub fn cleavable_bonds(mol: &Molecule) -> Vec<usize> {
    (0..mol.bonds().len())
        .filter(|&idx| {
            let bond = mol.bond(idx);
            if bond.order != BondOrder::Single || mol.is_ring_bond(idx) {
                return false;
            }
            let (a, b) = (bond.a, bond.b);
            if mol.atom(a).element == Element::H || mol.atom(b).element == Element::H {
                return false;
            }
            let ring_edge = mol.is_ring_atom(a) != mol.is_ring_atom(b);
            let hetero = |x: usize| matches!(mol.atom(x).element, Element::N | Element::O | Element::S);
            let amide_like = (hetero(a) && is_carbonyl_carbon(mol, b)) || (hetero(b) && is_carbonyl_carbon(mol, a));
            ring_edge || amide_like
        })
        .collect()
}

/// Cuts every cleavable bond, caps each cut end with an attachment marker
/// `*`, and counts canonical fragments. A molecule with nothing to cut
/// contributes itself.
pub fn brics_fragment(mol: &Molecule) -> FragmentDistribution {
    let cut = cleavable_bonds(mol);
    let mut is_cut = vec![false; mol.bonds().len()];
    for &c in &cut {
        is_cut[c] = true;
    }
    let n = mol.atom_count();
    let mut comp = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &(v, b) in mol.neighbors(u) {
                if !is_cut[b] && comp[v] == usize::MAX {
                    comp[v] = id;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    let mut dist = FragmentDistribution::default();
    for (id, members) in groups.iter().enumerate() {
        let stubs: Vec<(usize, BondOrder)> = cut
            .iter()
            .filter_map(|&b| {
                let bond = mol.bond(b);
                if comp[bond.a] == id {
                    Some((bond.a, bond.order))
                } else if comp[bond.b] == id {
                    Some((bond.b, bond.order))
                } else {
                    None
                }
            })
            .collect();
        let frag = mol
            .subgraph(members, &stubs)
            .expect("fragment of a valid molecule is a valid graph");
        *dist.counts.entry(canonicalize(&frag)).or_insert(0) += 1;
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse;

    fn fp(s: &str, r: usize) -> Fingerprint {
        morgan_fingerprint(&parse(s).unwrap(), r, DEFAULT_WIDTH)
    }

    #[test]
    fn tanimoto_set_counting() {
        let a = Fingerprint::from_bits(16, &[1, 2, 3]);
        let b = Fingerprint::from_bits(16, &[2, 3, 4]);
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        let c = Fingerprint::from_bits(16, &[7, 8]);
        assert_eq!(tanimoto(&a, &c).unwrap(), 0.0);
        let e = Fingerprint::empty(16, 0);
        assert_eq!(tanimoto(&e, &e).unwrap(), 1.0);
        assert_eq!(
            tanimoto(&a, &Fingerprint::empty(32, 0)).unwrap_err(),
            FingerprintError::WidthMismatch(16, 32)
        );
    }

    #[test]
    fn relabeling_invariant() {
        let m = parse("CC(=O)Nc1ccc(O)cc1").unwrap();
        let perm: Vec<usize> = (0..m.atom_count()).rev().collect();
        let p = m.permuted(&perm);
        assert_eq!(morgan_fingerprint(&m, 2, 2048), morgan_fingerprint(&p, 2, 2048));
    }

    #[test]
    fn methane_vs_ethane() {
        assert_ne!(fp("C", 2), fp("CC", 2));
    }

    #[test]
    fn radius_zero_ethanol() {
        // Environments: C(deg 1, 3 H), C(deg 2, 2 H), O(deg 1, 1 H).
        let f = fp("CCO", 0);
        assert!(f.count_ones() <= 3 && f.count_ones() >= 1);
        let m = parse("CCO").unwrap();
        let expected: std::collections::BTreeSet<usize> = (0..3)
            .map(|i| (atom_invariant(&m, i) % DEFAULT_WIDTH as u64) as usize)
            .collect();
        assert_eq!(f.ones(), expected.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn hex_roundtrip() {
        let f = fp("c1ccccc1O", 2);
        let h = f.to_hex();
        assert_eq!(h.len(), 512);
        let back = Fingerprint::from_hex(&h, 2048).unwrap();
        assert_eq!(back.ones(), f.ones());
        assert_eq!(Fingerprint::from_bits(8, &[0, 5]).to_hex(), "21");
    }

    fn frags(s: &str) -> BTreeMap<String, usize> {
        brics_fragment(&parse(s).unwrap()).counts
    }

    #[test]
    fn methane_is_its_own_fragment() {
        assert_eq!(frags("C"), BTreeMap::from([("C".to_string(), 1)]));
    }

    #[test]
    fn toluene_ring_edge() {
        let f = frags("Cc1ccccc1");
        assert_eq!(f.values().sum::<usize>(), 2);
        assert!(f.contains_key("C*"));
        assert!(f.contains_key("c1ccc(cc1)*"));
    }

    #[test]
    fn acetamide_amide_rule() {
        let f = frags("CC(=O)N");
        assert_eq!(f.values().sum::<usize>(), 2);
        assert!(f.contains_key("N*"));
    }

    #[test]
    fn fragments_conserve_atoms() {
        for s in ["CC(=O)Nc1ccc(O)cc1", "CCOC(=O)c1ccccc1N", "c1ccccc1Cc1ccncc1", "CCCC"] {
            let m = parse(s).unwrap();
            let d = brics_fragment(&m);
            let heavy: usize = d
                .counts
                .iter()
                .map(|(k, &c)| {
                    let f = parse(&k.replace('*', "[H]")).unwrap();
                    c * f.heavy_atom_count()
                })
                .sum();
            assert_eq!(heavy, m.heavy_atom_count(), "{s}");
        }
    }

    #[test]
    fn distribution_tsv() {
        let d = brics_fragment(&parse("CC(=O)Nc1ccccc1").unwrap());
        let mut buf = Vec::new();
        d.write_tsv(&mut buf).unwrap();
        assert_eq!(FragmentDistribution::read_tsv(&buf[..]).unwrap(), d);
    }
}
