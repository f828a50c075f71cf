//! Murcko scaffolds, edit distance, scaffold deduplication and
//! scaffold-grouped dataset splits.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{canonicalize, BondOrder, Molecule};
use crate::numerics::SplitMix64;

pub const DEFAULT_MIN_DIST: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScaffoldError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("malformed split line {0}")]
    MalformedRow(usize),
    #[error("io: {0}")]
    Io(String),
}

/// Ring systems plus linkers, with ring-attached double/triple-bonded atoms
/// kept. Acyclic molecules give `""`.
pub fn murcko_scaffold(mol: &Molecule) -> String {
    let n = mol.atom_count();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| mol.degree(i)).collect();
    let anchored = |i: usize| {
        mol.neighbors(i).iter().any(|&(nb, b)| {
            mol.is_ring_atom(nb) && matches!(mol.bond(b).order, BondOrder::Double | BondOrder::Triple)
        })
    };
    let mut queue: Vec<usize> = (0..n)
        .filter(|&i| !mol.is_ring_atom(i) && degree[i] <= 1 && !anchored(i))
        .collect();
    while let Some(u) = queue.pop() {
        if !alive[u] {
            continue;
        }
        alive[u] = false;
        for &(v, _) in mol.neighbors(u) {
            if alive[v] {
                degree[v] -= 1;
                if !mol.is_ring_atom(v) && degree[v] <= 1 && !anchored(v) {
                    queue.push(v);
                }
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    if !keep.iter().any(|&i| mol.is_ring_atom(i)) {
        return String::new();
    }
    let core = mol.subgraph(&keep, &[]).expect("induced subgraph of a valid molecule");
    canonicalize(&core)
}

/// Unit-cost edit distance over characters.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = diag + usize::from(ca != cb);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

/// `Some(d)` if the edit distance is at most `max`, otherwise `None`.
/// Only a diagonal band of width `2·max + 1` is evaluated.
pub fn levenshtein_bounded(a: &str, b: &str, max: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.len().abs_diff(b.len()) > max {
        return None;
    }
    let inf = max + 1;
    let mut prev = vec![inf; b.len() + 1];
    let mut cur = vec![inf; b.len() + 1];
    for (j, p) in prev.iter_mut().enumerate().take(max.min(b.len()) + 1) {
        *p = j;
    }
    for i in 1..=a.len() {
        let lo = i.saturating_sub(max).max(1);
        let hi = (i + max).min(b.len());
        cur.fill(inf);
        if i <= max {
            cur[0] = i;
        }
        let mut best = cur[0];
        for j in lo..=hi {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let v = sub.min(prev[j] + 1).min(cur[j - 1] + 1).min(inf);
            cur[j] = v;
            best = best.min(v);
        }
        if best > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[b.len()];
    (d <= max).then_some(d)
}

/// Greedy pass in input order: a key is kept when it is at least
/// `min_dist` edits away from every key kept before it. Returns indices
/// into `keys`.
pub fn dedup_scaffolds<S: AsRef<str> + Sync>(keys: &[S], min_dist: usize) -> Vec<usize> {
    assert!(min_dist >= 1, "min_dist must be at least 1");
    let mut kept: Vec<usize> = Vec::new();
    for (i, key) in keys.iter().enumerate() {
        let key = key.as_ref();
        let close = kept
            .par_iter()
            .any(|&k| levenshtein_bounded(keys[k].as_ref(), key, min_dist - 1).is_some());
        if !close {
            kept.push(i);
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "valid" => Some(Split::Valid),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaffoldGroup {
    pub key: String,
    pub split: Split,
    pub members: Vec<usize>,
}

/// Split label per molecule index, plus the groups that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub labels: Vec<Split>,
    pub groups: Vec<ScaffoldGroup>,
}

impl SplitAssignment {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == split).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.labels.iter().filter(|&&s| s == split).count()
    }

    /// `molecule_id<TAB>split` lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, s) in self.labels.iter().enumerate() {
            writeln!(w, "{i}\t{s}")?;
        }
        Ok(())
    }

    /// Reads labels only; group information is not stored in the TSV.
    pub fn read_labels<R: BufRead>(r: R) -> Result<Vec<Split>, ScaffoldError> {
        let mut labels = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| ScaffoldError::Io(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (id, s) = line.split_once('\t').ok_or(ScaffoldError::MalformedRow(n + 1))?;
            let id: usize = id.parse().map_err(|_| ScaffoldError::MalformedRow(n + 1))?;
            let s = Split::parse(s).ok_or(ScaffoldError::MalformedRow(n + 1))?;
            if id != labels.len() {
                return Err(ScaffoldError::MalformedRow(n + 1));
            }
            labels.push(s);
        }
        Ok(labels)
    }
}

/// Scaffold key for every molecule, computed in parallel.
pub fn scaffold_keys(mols: &[Molecule]) -> Vec<String> {
    mols.par_iter().map(murcko_scaffold).collect()
}

/// `smiles<TAB>scaffold` lines.
pub fn write_scaffold_table<W: Write>(mut w: W, smiles: &[String], keys: &[String]) -> std::io::Result<()> {
    for (s, k) in smiles.iter().zip(keys) {
        writeln!(w, "{s}\t{k}")?;
    }
    Ok(())
}

/// Groups molecule indices by key, ordered by key.
pub fn group_by_key<S: AsRef<str>>(keys: &[S]) -> BTreeMap<String, Vec<usize>> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(k.as_ref().to_string()).or_default().push(i);
    }
    groups
}

/// Indices of `sizes` summing exactly to `target`, preferring earlier
/// entries, or `None` when no subset fits. Entries marked `taken` are
/// skipped.
fn exact_subset(sizes: &[usize], taken: &[bool], target: usize) -> Option<Vec<usize>> {
    let n = sizes.len();
    // reach[i][t]: some subset of entries i.. sums to t.
    let mut reach = vec![vec![false; target + 1]; n + 1];
    reach[n][0] = true;
    for i in (0..n).rev() {
        for t in 0..=target {
            reach[i][t] = reach[i + 1][t] || (!taken[i] && sizes[i] <= t && reach[i + 1][t - sizes[i]]);
        }
    }
    if !reach[0][target] {
        return None;
    }
    let mut out = Vec::new();
    let mut rem = target;
    for i in 0..n {
        if rem == 0 {
            break;
        }
        if !taken[i] && sizes[i] <= rem && reach[i + 1][rem - sizes[i]] {
            out.push(i);
            rem -= sizes[i];
        }
    }
    Some(out)
}

/// Shuffles scaffold groups with `seed` and picks whole groups for valid,
/// then test, so that each holds exactly the requested number of
/// molecules. Among exact choices, groups earlier in the shuffled order
/// win. Everything else is train.
pub fn scaffold_split<S: AsRef<str>>(
    keys: &[S],
    valid_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<SplitAssignment, ScaffoldError> {
    let mut groups: Vec<(String, Vec<usize>)> = group_by_key(keys).into_iter().collect();
    groups.shuffle(&mut SplitMix64::new(seed));
    let sizes: Vec<usize> = groups.iter().map(|g| g.1.len()).collect();
    let mut split = vec![Split::Train; groups.len()];
    let mut taken = vec![false; groups.len()];
    for (target, label) in [(valid_n, Split::Valid), (test_n, Split::Test)] {
        let picked = exact_subset(&sizes, &taken, target).ok_or_else(|| {
            ScaffoldError::InsufficientData(format!("no set of scaffold groups holds exactly {target} {} molecules", label.as_str()))
        })?;
        for g in picked {
            taken[g] = true;
            split[g] = label;
        }
    }
    if keys.len() == valid_n + test_n {
        return Err(ScaffoldError::InsufficientData("no molecules left for train".into()));
    }
    let mut labels = vec![Split::Train; keys.len()];
    let out: Vec<ScaffoldGroup> = groups
        .into_iter()
        .zip(split)
        .map(|((key, members), split)| {
            for &m in &members {
                labels[m] = split;
            }
            ScaffoldGroup { key, split, members }
        })
        .collect();
    log::debug!(
        "scaffold split: {} groups, valid {valid_n}, test {test_n}, train {}",
        out.len(),
        keys.len() - valid_n - test_n
    );
    Ok(SplitAssignment { labels, groups: out })
}

/// Draws between `lo` and `min(hi, |group|)` members of every group without
/// replacement. Each group uses its own random stream, so the draw for one
/// group does not depend on the others.
pub fn sample_per_scaffold<T: Clone>(groups: &BTreeMap<String, Vec<T>>, lo: usize, hi: usize, seed: u64) -> Vec<T> {
    assert!(1 <= lo && lo <= hi, "need 1 <= lo <= hi");
    let mut out = Vec::new();
    for (g, members) in groups.values().enumerate() {
        if members.is_empty() {
            continue;
        }
        let mut rng = SplitMix64::stream(seed, g as u64);
        let top = hi.min(members.len());
        let bottom = lo.min(top);
        let count = rng.random_range(bottom..=top);
        let mut picked = index::sample(&mut rng, members.len(), count).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| members[i].clone()));
    }
    out
}
