//! Structure–property analysis: substructure matching, Cramér's V,
//! Davies–Bouldin separability, nearest-neighbour retrieval, Spearman
//! correlation and activity screening.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{BondOrder, Element, Molecule};
use crate::numerics::SplitMix64;

/// The bundled pattern set.
pub const DEFAULT_PATTERNS: &str = include_str!("../data/substructures.txt");
pub const RELEVANCE_THRESHOLD: f64 = 0.1;
pub const ACTIVITY_THRESHOLD: f64 = 7.0;
pub const SCREEN_TOP_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("pattern file line {line}: {reason}")]
    PatternSyntax { line: usize, reason: String },
    #[error("degenerate contingency table: {0}")]
    DegenerateTable(String),
    #[error("cluster centroids {0} and {1} coincide")]
    CoincidentCentroids(usize, usize),
    #[error("cluster {0} is empty")]
    EmptyGroup(usize),
    #[error("empty retrieval pool")]
    EmptyPool,
    #[error("constant input")]
    ConstantInput,
    #[error("need equal lengths of at least {min}, got {left} and {right}")]
    BadLength { min: usize, left: usize, right: usize },
    #[error("no actives at or above the threshold")]
    NoActives,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementClass {
    Is(Element),
    Halogen,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aromaticity {
    Aliphatic,
    Aromatic,
    Either,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RingConstraint {
    None,
    Ring,
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomQuery {
    pub class: ElementClass,
    pub aromaticity: Aromaticity,
    pub ring: RingConstraint,
}

impl AtomQuery {
    fn matches(&self, mol: &Molecule, i: usize) -> bool {
        let a = mol.atom(i);
        if matches!(a.element, Element::H | Element::Dummy) {
            return false;
        }
        let element_ok = match self.class {
            ElementClass::Is(e) => a.element == e,
            ElementClass::Halogen => a.element.is_halogen(),
            ElementClass::Any => true,
        };
        let arom_ok = match self.aromaticity {
            Aromaticity::Aliphatic => !a.aromatic,
            Aromaticity::Aromatic => a.aromatic,
            Aromaticity::Either => true,
        };
        let ring_ok = match self.ring {
            RingConstraint::None => true,
            RingConstraint::Ring => mol.is_ring_atom(i),
            RingConstraint::Chain => !mol.is_ring_atom(i),
        };
        element_ok && arom_ok && ring_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BondQuery {
    pub a: usize,
    pub b: usize,
    /// `None` matches any order.
    pub order: Option<BondOrder>,
    pub ring: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstructurePattern {
    pub name: String,
    pub atoms: Vec<AtomQuery>,
    pub bonds: Vec<BondQuery>,
}

fn parse_atom(tok: &str) -> Option<(ElementClass, Aromaticity)> {
    match tok {
        "X" => return Some((ElementClass::Halogen, Aromaticity::Either)),
        "*" => return Some((ElementClass::Any, Aromaticity::Either)),
        _ => {}
    }
    if let Some(rest) = tok.strip_prefix('~') {
        let e = Element::from_symbol(rest)?;
        return Some((ElementClass::Is(e), Aromaticity::Either));
    }
    if let Some(e) = Element::from_aromatic_symbol(tok) {
        return Some((ElementClass::Is(e), Aromaticity::Aromatic));
    }
    Element::from_symbol(tok).map(|e| (ElementClass::Is(e), Aromaticity::Aliphatic))
}

/// Parses the block format documented in `data/substructures.txt`.
pub fn parse_patterns(text: &str) -> Result<Vec<SubstructurePattern>, AnalysisError> {
    let mut out: Vec<SubstructurePattern> = Vec::new();
    let mut current: Option<SubstructurePattern> = None;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let err = |reason: &str| AnalysisError::PatternSyntax {
            line: line_no,
            reason: reason.to_string(),
        };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match (parts[0], current.as_mut()) {
            ("pattern", None) => {
                let name = parts.get(1).ok_or_else(|| err("missing name"))?;
                if out.iter().any(|p| p.name == *name) {
                    return Err(err("duplicate pattern name"));
                }
                current = Some(SubstructurePattern {
                    name: name.to_string(),
                    atoms: Vec::new(),
                    bonds: Vec::new(),
                });
            }
            ("atom", Some(p)) => {
                let sym = parts.get(1).ok_or_else(|| err("missing atom symbol"))?;
                let (class, aromaticity) = parse_atom(sym).ok_or_else(|| err("unknown atom symbol"))?;
                let ring = match parts.get(2).copied() {
                    None => RingConstraint::None,
                    Some("ring") => RingConstraint::Ring,
                    Some("chain") => RingConstraint::Chain,
                    Some(_) => return Err(err("unknown atom flag")),
                };
                p.atoms.push(AtomQuery { class, aromaticity, ring });
            }
            ("bond", Some(p)) => {
                if parts.len() < 4 {
                    return Err(err("bond needs two indices and an order"));
                }
                let a: usize = parts[1].parse().map_err(|_| err("bad bond index"))?;
                let b: usize = parts[2].parse().map_err(|_| err("bad bond index"))?;
                if a >= p.atoms.len() || b >= p.atoms.len() || a == b {
                    return Err(err("bond index out of range"));
                }
                let order = match parts[3] {
                    "-" => Some(BondOrder::Single),
                    "=" => Some(BondOrder::Double),
                    "#" => Some(BondOrder::Triple),
                    ":" => Some(BondOrder::Aromatic),
                    "~" => None,
                    _ => return Err(err("unknown bond order")),
                };
                let ring = match parts.get(4).copied() {
                    None => false,
                    Some("ring") => true,
                    Some(_) => return Err(err("unknown bond flag")),
                };
                p.bonds.push(BondQuery { a, b, order, ring });
            }
            ("end", Some(_)) => {
                let p = current.take().expect("inside a pattern");
                if p.atoms.is_empty() {
                    return Err(err("empty pattern"));
                }
                if !pattern_connected(&p) {
                    return Err(err("pattern is not connected"));
                }
                out.push(p);
            }
            _ => return Err(err("unexpected line")),
        }
    }
    if current.is_some() {
        return Err(AnalysisError::PatternSyntax {
            line: text.lines().count(),
            reason: "unterminated pattern".into(),
        });
    }
    Ok(out)
}

fn pattern_connected(p: &SubstructurePattern) -> bool {
    let n = p.atoms.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for b in &p.bonds {
            let v = if b.a == u {
                b.b
            } else if b.b == u {
                b.a
            } else {
                continue;
            };
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.iter().all(|&s| s)
}

pub fn default_patterns() -> Vec<SubstructurePattern> {
    parse_patterns(DEFAULT_PATTERNS).expect("bundled patterns parse")
}

impl SubstructurePattern {
    fn bond_ok(&self, q: &BondQuery, mol: &Molecule, x: usize, y: usize) -> bool {
        mol.neighbors(x).iter().any(|&(nb, b)| {
            nb == y && q.order.is_none_or(|o| mol.bond(b).order == o) && (!q.ring || mol.is_ring_bond(b))
        })
    }

    /// Pattern atoms in an order where each atom after the first has an
    /// already placed neighbour.
    fn search_order(&self) -> Vec<usize> {
        let mut order = vec![0];
        let mut placed = vec![false; self.atoms.len()];
        placed[0] = true;
        while order.len() < self.atoms.len() {
            let next = self
                .bonds
                .iter()
                .find_map(|b| match (placed[b.a], placed[b.b]) {
                    (true, false) => Some(b.b),
                    (false, true) => Some(b.a),
                    _ => None,
                })
                .expect("pattern is connected");
            placed[next] = true;
            order.push(next);
        }
        order
    }

    /// Distinct atom sets onto which the pattern embeds.
    pub fn match_sets(&self, mol: &Molecule) -> HashSet<Vec<usize>> {
        let order = self.search_order();
        let mut mapping = vec![usize::MAX; self.atoms.len()];
        let mut used = vec![false; mol.atom_count()];
        let mut found = HashSet::new();
        self.extend(mol, &order, 0, &mut mapping, &mut used, &mut found);
        found
    }

    fn extend(
        &self,
        mol: &Molecule,
        order: &[usize],
        depth: usize,
        mapping: &mut [usize],
        used: &mut [bool],
        found: &mut HashSet<Vec<usize>>,
    ) {
        if depth == order.len() {
            let mut set = mapping.to_vec();
            set.sort_unstable();
            found.insert(set);
            return;
        }
        let p = order[depth];
        let anchor = self.bonds.iter().find_map(|b| {
            if b.a == p && mapping[b.b] != usize::MAX {
                Some(mapping[b.b])
            } else if b.b == p && mapping[b.a] != usize::MAX {
                Some(mapping[b.a])
            } else {
                None
            }
        });
        let candidates: Vec<usize> = match anchor {
            Some(x) => mol.neighbors(x).iter().map(|&(nb, _)| nb).collect(),
            None => (0..mol.atom_count()).collect(),
        };
        for c in candidates {
            if used[c] || !self.atoms[p].matches(mol, c) {
                continue;
            }
            let consistent = self.bonds.iter().all(|b| {
                let other = if b.a == p {
                    b.b
                } else if b.b == p {
                    b.a
                } else {
                    return true;
                };
                mapping[other] == usize::MAX || self.bond_ok(b, mol, c, mapping[other])
            });
            if !consistent {
                continue;
            }
            mapping[p] = c;
            used[c] = true;
            self.extend(mol, order, depth + 1, mapping, used, found);
            used[c] = false;
            mapping[p] = usize::MAX;
        }
    }
}

/// Exact-element pattern built from a molecule, for fragment retention
/// checks. Attachment markers `*` match any heavy atom; explicit hydrogens
/// are left out.
pub fn pattern_from_molecule(name: &str, mol: &Molecule) -> Option<SubstructurePattern> {
    let keep: Vec<usize> = (0..mol.atom_count()).filter(|&i| mol.atom(i).element != Element::H).collect();
    if keep.is_empty() {
        return None;
    }
    let mut index = vec![usize::MAX; mol.atom_count()];
    for (n, &i) in keep.iter().enumerate() {
        index[i] = n;
    }
    let atoms = keep
        .iter()
        .map(|&i| {
            let a = mol.atom(i);
            match a.element {
                Element::Dummy => AtomQuery {
                    class: ElementClass::Any,
                    aromaticity: Aromaticity::Either,
                    ring: RingConstraint::None,
                },
                e => AtomQuery {
                    class: ElementClass::Is(e),
                    aromaticity: if a.aromatic { Aromaticity::Aromatic } else { Aromaticity::Aliphatic },
                    ring: RingConstraint::None,
                },
            }
        })
        .collect();
    let bonds = mol
        .bonds()
        .iter()
        .filter(|b| index[b.a] != usize::MAX && index[b.b] != usize::MAX)
        .map(|b| BondQuery {
            a: index[b.a],
            b: index[b.b],
            order: Some(b.order),
            ring: false,
        })
        .collect();
    let p = SubstructurePattern {
        name: name.to_string(),
        atoms,
        bonds,
    };
    pattern_connected(&p).then_some(p)
}

/// Number of distinct atom sets matched by `pat` in `mol`.
pub fn match_substructure(mol: &Molecule, pat: &SubstructurePattern) -> usize {
    pat.match_sets(mol).len()
}

/// Count matrix: one row per molecule, one column per pattern.
pub fn substructure_counts(mols: &[Molecule], patterns: &[SubstructurePattern]) -> Vec<Vec<usize>> {
    mols.par_iter()
        .map(|m| patterns.iter().map(|p| match_substructure(m, p)).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    /// Rows are the distinct values of `rows`, columns those of `cols`, both
    /// in ascending order.
    pub fn from_labels(rows: &[usize], cols: &[usize]) -> Self {
        let rk: Vec<usize> = rows.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let ck: Vec<usize> = cols.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let mut counts = vec![vec![0u64; ck.len()]; rk.len()];
        for (&r, &c) in rows.iter().zip(cols) {
            let i = rk.binary_search(&r).unwrap();
            let j = ck.binary_search(&c).unwrap();
            counts[i][j] += 1;
        }
        ContingencyTable { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// `sqrt(χ² / (n · min(k − 1, r − 1)))`, clipped to `[0, 1]`. Rows and
/// columns with zero marginals are dropped first.
pub fn cramers_v(table: &ContingencyTable) -> Result<f64, AnalysisError> {
    let rows: Vec<&Vec<u64>> = table.counts.iter().filter(|r| r.iter().sum::<u64>() > 0).collect();
    if rows.len() != table.counts.len() {
        log::warn!("dropping {} empty contingency rows", table.counts.len() - rows.len());
    }
    let ncols = rows.first().map_or(0, |r| r.len());
    let keep_cols: Vec<usize> = (0..ncols).filter(|&j| rows.iter().map(|r| r[j]).sum::<u64>() > 0).collect();
    if keep_cols.len() != ncols {
        log::warn!("dropping {} empty contingency columns", ncols - keep_cols.len());
    }
    let (r, k) = (rows.len(), keep_cols.len());
    if r < 2 || k < 2 {
        return Err(AnalysisError::DegenerateTable(format!("{r}×{k} after dropping empty marginals")));
    }
    let row_tot: Vec<f64> = rows.iter().map(|row| keep_cols.iter().map(|&j| row[j] as f64).sum()).collect();
    let col_tot: Vec<f64> = keep_cols.iter().map(|&j| rows.iter().map(|row| row[j] as f64).sum()).collect();
    let n: f64 = row_tot.iter().sum();
    let mut chi2 = 0.0;
    for (i, row) in rows.iter().enumerate() {
        for (jj, &j) in keep_cols.iter().enumerate() {
            let e = row_tot[i] * col_tot[jj] / n;
            chi2 += (row[j] as f64 - e).powi(2) / e;
        }
    }
    let v = (chi2 / (n * (r.min(k) - 1) as f64)).sqrt();
    Ok(v.clamp(0.0, 1.0))
}

/// 0 = low (`≤ lo`), 1 = medium, 2 = high (`≥ hi`).
pub fn property_bins(values: &[f64], lo: f64, hi: f64) -> Vec<usize> {
    values
        .iter()
        .map(|&v| {
            if v <= lo {
                0
            } else if v >= hi {
                2
            } else {
                1
            }
        })
        .collect()
}

/// Default cut points for solubility- and lipophilicity-style labels.
pub const BIN_LOW: f64 = -3.0;
pub const BIN_HIGH: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub pattern: String,
    /// `None` when the table is degenerate, e.g. the pattern is everywhere.
    pub v: Option<f64>,
}

/// Cramér's V between each pattern and `labels`. Presence (count ≥ 1) is
/// used unless `use_counts` is set, in which case each distinct count is
/// its own category.
pub fn associations(counts: &[Vec<usize>], patterns: &[SubstructurePattern], labels: &[usize], use_counts: bool) -> Vec<Association> {
    patterns
        .iter()
        .enumerate()
        .map(|(p, pat)| {
            let rows: Vec<usize> = counts
                .iter()
                .map(|c| if use_counts { c[p] } else { usize::from(c[p] > 0) })
                .collect();
            let v = cramers_v(&ContingencyTable::from_labels(&rows, labels)).ok();
            Association {
                pattern: pat.name.clone(),
                v,
            }
        })
        .collect()
}

/// Patterns whose association with `labels` exceeds `threshold`.
pub fn relevant_substructures(
    mols: &[Molecule],
    patterns: &[SubstructurePattern],
    labels: &[usize],
    threshold: f64,
) -> Vec<Association> {
    let counts = substructure_counts(mols, patterns);
    associations(&counts, patterns, labels, false)
        .into_iter()
        .filter(|a| a.v.is_some_and(|v| v > threshold))
        .collect()
}

/// `pattern<TAB>dataset<TAB>V` lines; degenerate entries are `NA`.
pub fn write_association_tsv<W: Write>(mut w: W, dataset: &str, rows: &[Association]) -> std::io::Result<()> {
    for a in rows {
        let v = a.v.map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
        writeln!(w, "{}\t{dataset}\t{v}", a.pattern)?;
    }
    Ok(())
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `(1/K) Σ_i max_{j≠i} (σ_i + σ_j) / d(c_i, c_j)` with σ the mean distance
/// to the centroid. `groups[i]` is the cluster of row `i`, in `0..K`.
pub fn davies_bouldin(embeddings: &[Vec<f64>], groups: &[usize]) -> Result<f64, AnalysisError> {
    let k = groups.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(AnalysisError::EmptyGroup(1));
    }
    let d = embeddings.first().map_or(0, Vec::len);
    let mut centroids = vec![vec![0.0; d]; k];
    let mut sizes = vec![0usize; k];
    for (e, &g) in embeddings.iter().zip(groups) {
        sizes[g] += 1;
        for (c, x) in centroids[g].iter_mut().zip(e) {
            *c += x;
        }
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(AnalysisError::EmptyGroup(empty));
    }
    for (c, &s) in centroids.iter_mut().zip(&sizes) {
        c.iter_mut().for_each(|x| *x /= s as f64);
    }
    let mut sigma = vec![0.0; k];
    for (e, &g) in embeddings.iter().zip(groups) {
        sigma[g] += euclid(e, &centroids[g]);
    }
    for (s, &n) in sigma.iter_mut().zip(&sizes) {
        *s /= n as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..k {
            if i == j {
                continue;
            }
            let dist = euclid(&centroids[i], &centroids[j]);
            if dist == 0.0 {
                return Err(AnalysisError::CoincidentCentroids(i.min(j), i.max(j)));
            }
            worst = worst.max((sigma[i] + sigma[j]) / dist);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Top `top_k` pool entries by cosine similarity for each query, most
/// similar first, ties by pool index. `self_index[q]` names the pool entry
/// that is the query itself, which is skipped.
pub fn nn_retrieval(
    queries: &[Vec<f64>],
    self_index: &[Option<usize>],
    pool: &[Vec<f64>],
    top_k: usize,
) -> Result<Vec<Vec<(usize, f64)>>, AnalysisError> {
    if pool.is_empty() {
        return Err(AnalysisError::EmptyPool);
    }
    Ok(queries
        .par_iter()
        .enumerate()
        .map(|(q, e)| {
            let skip = self_index.get(q).copied().flatten();
            let mut sims: Vec<(usize, f64)> = pool
                .iter()
                .enumerate()
                .filter(|&(i, _)| Some(i) != skip)
                .map(|(i, p)| (i, cosine(e, p)))
                .collect();
            sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            sims.truncate(top_k);
            sims
        })
        .collect())
}

/// Up to `n` indices with pairwise distinct scaffold keys, chosen in a
/// seeded random order.
pub fn distinct_scaffold_queries<S: AsRef<str>>(keys: &[S], n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.shuffle(&mut SplitMix64::new(seed));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for i in order {
        if out.len() == n {
            break;
        }
        if seen.insert(keys[i].as_ref()) {
            out.push(i);
        }
    }
    out
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(AnalysisError::BadLength {
            min: 3,
            left: x.len(),
            right: y.len(),
        });
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenHit {
    pub pool_index: usize,
    pub frequency: usize,
    pub mean_similarity: f64,
}

/// Retrieves the `top_k` pool neighbours of every active with activity at
/// or above `threshold`, then ranks pool entries by how often they were
/// retrieved and by mean similarity.
pub fn activity_screen(
    actives: &[Vec<f64>],
    activity: &[f64],
    pool: &[Vec<f64>],
    threshold: f64,
    top_k: usize,
) -> Result<Vec<ScreenHit>, AnalysisError> {
    let selected: Vec<Vec<f64>> = actives
        .iter()
        .zip(activity)
        .filter(|(_, &a)| a >= threshold)
        .map(|(e, _)| e.clone())
        .collect();
    if selected.is_empty() {
        return Err(AnalysisError::NoActives);
    }
    let lists = nn_retrieval(&selected, &vec![None; selected.len()], pool, top_k)?;
    let mut agg: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for list in lists {
        for (i, s) in list {
            let e = agg.entry(i).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += s;
        }
    }
    let mut hits: Vec<ScreenHit> = agg
        .into_iter()
        .map(|(pool_index, (frequency, total))| ScreenHit {
            pool_index,
            frequency,
            mean_similarity: total / frequency as f64,
        })
        .collect();
    hits.sort_by(|a, b| {
        b.frequency
            .cmp(&a.frequency)
            .then(b.mean_similarity.total_cmp(&a.mean_similarity))
            .then(a.pool_index.cmp(&b.pool_index))
    });
    Ok(hits)
}

/// Davies–Bouldin score per pattern, grouping molecules by presence.
/// Patterns that are everywhere or nowhere are reported as `None`.
pub fn separability_by_pattern(
    embeddings: &[Vec<f64>],
    counts: &[Vec<usize>],
    patterns: &[SubstructurePattern],
) -> HashMap<String, Option<f64>> {
    patterns
        .iter()
        .enumerate()
        .map(|(p, pat)| {
            let groups: Vec<usize> = counts.iter().map(|c| usize::from(c[p] > 0)).collect();
            (pat.name.clone(), davies_bouldin(embeddings, &groups).ok())
        })
        .collect()
}
