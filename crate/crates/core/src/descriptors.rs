//! Native structural descriptors, property-table ingestion, standardization
//! and correlation.
//!
//! `TPSA_approx`, `LogP_approx` and `QED_approx` are small native
//! approximations. They are internally consistent and order-preserving but
//! do not reproduce literature values.
//!
//! TPSA contributions (Å²), by polar atom environment:
//!
//! | environment                         | value |
//! |-------------------------------------|-------|
//! | aromatic n, no H                    | 12.89 |
//! | aromatic nH                         | 15.79 |
//! | N, three single bonds, no H         |  3.24 |
//! | NH with two heavy neighbours        | 12.03 |
//! | NH2                                 | 26.02 |
//! | NH3 / NH4+ (no heavy neighbour)     | 26.02 |
//! | N with a double bond                | 12.36 |
//! | N with a triple bond                | 23.79 |
//! | positively charged N, no H          | 11.68 |
//! | OH                                  | 20.23 |
//! | O with two heavy neighbours         |  9.23 |
//! | O with a double bond                | 17.07 |
//! | aromatic o                          | 13.14 |
//! | negatively charged O                | 23.06 |
//!
//! LogP contributions per heavy atom (hydrogens folded in):
//!
//! | environment                              | value |
//! |------------------------------------------|-------|
//! | aliphatic C, no N/O neighbour            |  0.50 |
//! | aliphatic C bonded to N or O             | -0.10 |
//! | aromatic c, no N/O neighbour             |  0.30 |
//! | aromatic c bonded to N or O              |  0.10 |
//! | aromatic n                               | -0.50 |
//! | N bearing H                              | -1.00 |
//! | N without H                              | -0.70 |
//! | OH                                       | -0.60 |
//! | O with two heavy neighbours              | -0.30 |
//! | O with a double bond                     | -0.40 |
//! | aromatic o                               |  0.00 |
//! | S (aromatic or not), Se                  |  0.50 |
//! | F / Cl / Br / I                          | 0.40 / 0.70 / 0.90 / 1.10 |
//! | P, B                                     | -0.50 / -0.30 |
//! | Si                                       |  0.50 |
//! | any charged atom, additionally           | -1.00 |
//!
//! `QED_approx` is the geometric mean of six trapezoidal desirabilities
//! (each floored at 0.05). A desirability is 1 on `[lo, hi]` and falls
//! linearly to the floor at the outer breakpoints:
//!
//! | input       | floor at | 1 from | 1 until | floor at |
//! |-------------|----------|--------|---------|----------|
//! | MolWt       | 100      | 250    | 450     | 650      |
//! | LogP_approx | -1       | 1      | 3.5     | 5.5      |
//! | HBD         | 0        | 0      | 2       | 5        |
//! | HBA         | 0        | 2      | 6       | 10       |
//! | TPSA_approx | 0        | 40     | 100     | 160      |
//! | RingCount   | 0        | 1      | 3       | 6        |

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{canonical_smiles, canonicalize, BondOrder, Element, Molecule};

pub const NATIVE_PROPERTIES: [&str; 9] = [
    "MolWt",
    "HeavyAtomNum",
    "RingCount",
    "HBD",
    "HBA",
    "SMILES_Length",
    "TPSA_approx",
    "LogP_approx",
    "QED_approx",
];

const QED_FLOOR: f64 = 0.05;
const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescriptorError {
    #[error("malformed property table row at line {0}")]
    MalformedRow(usize),
    #[error("duplicate key {0:?} in property table")]
    DuplicateKey(String),
    #[error("standardization stats do not match the schema: {0}")]
    StatsSchemaMismatch(String),
    #[error("fewer than three jointly present samples for properties {0} and {1}")]
    InsufficientOverlap(usize, usize),
    #[error("zero variance over the joint samples of properties {0} and {1}")]
    ZeroVariance(usize, usize),
    #[error("io: {0}")]
    Io(String),
}

/// Values with a per-dimension presence mask. The schema lives with the
/// owning collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyVector {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl PropertyVector {
    pub fn full(values: Vec<f64>) -> Self {
        let mask = vec![true; values.len()];
        PropertyVector { values, mask }
    }

    pub fn masked(k: usize) -> Self {
        PropertyVector {
            values: vec![0.0; k],
            mask: vec![false; k],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        self.mask[k].then_some(self.values[k])
    }

    pub fn present(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_fully_masked(&self) -> bool {
        self.mask.iter().all(|&m| !m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NativeDescriptors {
    pub mol_wt: f64,
    pub heavy_atoms: usize,
    pub ring_count: usize,
    pub hbd: usize,
    pub hba: usize,
    pub smiles_length: usize,
    pub tpsa: f64,
    pub logp: f64,
    pub qed: f64,
}

impl NativeDescriptors {
    /// Values in `NATIVE_PROPERTIES` order.
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.mol_wt,
            self.heavy_atoms as f64,
            self.ring_count as f64,
            self.hbd as f64,
            self.hba as f64,
            self.smiles_length as f64,
            self.tpsa,
            self.logp,
            self.qed,
        ]
    }
}

fn heavy_neighbors(mol: &Molecule, i: usize) -> usize {
    mol.neighbors(i)
        .iter()
        .filter(|&&(nb, _)| !matches!(mol.atom(nb).element, Element::H | Element::Dummy))
        .count()
}

fn has_order(mol: &Molecule, i: usize, order: BondOrder) -> bool {
    mol.neighbors(i).iter().any(|&(_, b)| mol.bond(b).order == order)
}

fn attached_h(mol: &Molecule, i: usize) -> usize {
    mol.hydrogen_count(i) as usize
        + mol
            .neighbors(i)
            .iter()
            .filter(|&&(nb, _)| mol.atom(nb).element == Element::H)
            .count()
}

fn tpsa_contribution(mol: &Molecule, i: usize) -> f64 {
    let a = mol.atom(i);
    let h = attached_h(mol, i);
    let heavy = heavy_neighbors(mol, i);
    match a.element {
        Element::N if a.aromatic => {
            if h > 0 {
                15.79
            } else {
                12.89
            }
        }
        Element::N => {
            if has_order(mol, i, BondOrder::Triple) {
                23.79
            } else if a.charge > 0 && h == 0 {
                11.68
            } else if has_order(mol, i, BondOrder::Double) {
                12.36
            } else if heavy == 0 || h >= 2 {
                26.02
            } else if h == 1 {
                12.03
            } else {
                3.24
            }
        }
        Element::O if a.aromatic => 13.14,
        Element::O => {
            if a.charge < 0 {
                23.06
            } else if has_order(mol, i, BondOrder::Double) {
                17.07
            } else if h > 0 {
                20.23
            } else {
                9.23
            }
        }
        _ => 0.0,
    }
}

fn logp_contribution(mol: &Molecule, i: usize) -> f64 {
    let a = mol.atom(i);
    let polar_neighbor = mol
        .neighbors(i)
        .iter()
        .any(|&(nb, _)| matches!(mol.atom(nb).element, Element::N | Element::O));
    let base = match a.element {
        Element::C if a.aromatic => {
            if polar_neighbor {
                0.10
            } else {
                0.30
            }
        }
        Element::C => {
            if polar_neighbor {
                -0.10
            } else {
                0.50
            }
        }
        Element::N if a.aromatic => -0.50,
        Element::N => {
            if attached_h(mol, i) > 0 {
                -1.00
            } else {
                -0.70
            }
        }
        Element::O if a.aromatic => 0.0,
        Element::O => {
            if has_order(mol, i, BondOrder::Double) {
                -0.40
            } else if attached_h(mol, i) > 0 {
                -0.60
            } else {
                -0.30
            }
        }
        Element::S | Element::Se | Element::Si => 0.50,
        Element::F => 0.40,
        Element::Cl => 0.70,
        Element::Br => 0.90,
        Element::I => 1.10,
        Element::P => -0.50,
        Element::B => -0.30,
        Element::H | Element::Dummy => 0.0,
    };
    base + if a.charge != 0 { -1.0 } else { 0.0 }
}

/// Trapezoid: floor outside `[a, d]`, 1 on `[b, c]`, linear in between.
fn trapezoid(x: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    let v = if x < b {
        if b == a {
            if x < a {
                0.0
            } else {
                1.0
            }
        } else {
            ((x - a) / (b - a)).clamp(0.0, 1.0)
        }
    } else if x <= c {
        1.0
    } else if d == c {
        0.0
    } else {
        ((d - x) / (d - c)).clamp(0.0, 1.0)
    };
    QED_FLOOR + (1.0 - QED_FLOOR) * v
}

/// Drug-likeness proxy in `[QED_FLOOR, 1]`; see the module docs.
pub fn qed_approx(mol_wt: f64, logp: f64, hbd: f64, hba: f64, tpsa: f64, rings: f64) -> f64 {
    let ds = [
        trapezoid(mol_wt, 100.0, 250.0, 450.0, 650.0),
        trapezoid(logp, -1.0, 1.0, 3.5, 5.5),
        trapezoid(hbd, 0.0, 0.0, 2.0, 5.0),
        trapezoid(hba, 0.0, 2.0, 6.0, 10.0),
        trapezoid(tpsa, 0.0, 40.0, 100.0, 160.0),
        trapezoid(rings, 0.0, 1.0, 3.0, 6.0),
    ];
    (ds.iter().map(|d| d.ln()).sum::<f64>() / ds.len() as f64).exp()
}

pub fn compute_native(mol: &Molecule) -> NativeDescriptors {
    let n = mol.atom_count();
    let mut mol_wt = 0.0;
    let (mut hbd, mut hba, mut tpsa, mut logp) = (0, 0, 0.0, 0.0);
    for i in 0..n {
        let a = mol.atom(i);
        if a.element == Element::Dummy {
            continue;
        }
        mol_wt += a.element.mass() + mol.hydrogen_count(i) as f64 * Element::H.mass();
        if matches!(a.element, Element::N | Element::O) {
            hba += 1;
            if attached_h(mol, i) > 0 {
                hbd += 1;
            }
        }
        tpsa += tpsa_contribution(mol, i);
        logp += logp_contribution(mol, i);
    }
    let ring_count = mol.ring_count();
    let qed = qed_approx(mol_wt, logp, hbd as f64, hba as f64, tpsa, ring_count as f64);
    NativeDescriptors {
        mol_wt,
        heavy_atoms: mol.heavy_atom_count(),
        ring_count,
        hbd,
        hba,
        smiles_length: canonicalize(mol).chars().count(),
        tpsa,
        logp,
        qed,
    }
}

/// Native descriptors as a fully present vector in `NATIVE_PROPERTIES` order.
pub fn native_vector(mol: &Molecule) -> PropertyVector {
    PropertyVector::full(compute_native(mol).to_vec())
}

/// Property rows keyed by SMILES or id, with one schema for every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyTable {
    pub key_column: String,
    pub schema: Vec<String>,
    pub keys: Vec<String>,
    pub rows: Vec<PropertyVector>,
}

fn parse_cell(cell: &str) -> Option<Result<f64, ()>> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
        None
    } else {
        Some(cell.parse::<f64>().map_err(|_| ()).and_then(|v| if v.is_finite() { Ok(v) } else { Err(()) }))
    }
}

/// Reads a tab-separated table whose header is `smiles` or `id` followed by
/// property names. Empty, `NA` and `nan` cells are missing.
pub fn ingest_properties<R: BufRead>(r: R) -> Result<PropertyTable, DescriptorError> {
    let mut lines = r.lines().enumerate();
    let header = loop {
        match lines.next() {
            None => return Err(DescriptorError::MalformedRow(1)),
            Some((n, line)) => {
                let line = line.map_err(|e| DescriptorError::Io(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let cols: Vec<String> = line.split('\t').map(|c| c.trim().to_string()).collect();
                if !matches!(cols[0].as_str(), "smiles" | "id") || cols[1..].iter().any(String::is_empty) {
                    return Err(DescriptorError::MalformedRow(n + 1));
                }
                break cols;
            }
        }
    };
    let k = header.len() - 1;
    let mut keys = Vec::new();
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for (n, line) in lines {
        let line = line.map_err(|e| DescriptorError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != k + 1 || cells[0].trim().is_empty() {
            return Err(DescriptorError::MalformedRow(n + 1));
        }
        let key = cells[0].trim().to_string();
        if seen.insert(key.clone(), rows.len()).is_some() {
            return Err(DescriptorError::DuplicateKey(key));
        }
        let mut v = PropertyVector::masked(k);
        for (j, cell) in cells[1..].iter().enumerate() {
            if let Some(parsed) = parse_cell(cell) {
                v.values[j] = parsed.map_err(|_| DescriptorError::MalformedRow(n + 1))?;
                v.mask[j] = true;
            }
        }
        keys.push(key);
        rows.push(v);
    }
    Ok(PropertyTable {
        key_column: header[0].clone(),
        schema: header[1..].to_vec(),
        keys,
        rows,
    })
}

impl PropertyTable {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}\t{}", self.key_column, self.schema.join("\t"))?;
        for (key, row) in self.keys.iter().zip(&self.rows) {
            let cells: Vec<String> = (0..row.len())
                .map(|j| row.get(j).map(|v| v.to_string()).unwrap_or_default())
                .collect();
            writeln!(w, "{key}\t{}", cells.join("\t"))?;
        }
        Ok(())
    }

    /// Index from key to row. SMILES keys are also indexed by canonical form.
    fn index(&self) -> HashMap<String, usize> {
        let mut map = HashMap::new();
        for (i, key) in self.keys.iter().enumerate() {
            map.insert(key.clone(), i);
            if self.key_column == "smiles" {
                if let Some(c) = canonical_smiles(key) {
                    map.entry(c).or_insert(i);
                }
            }
        }
        map
    }

    /// Vectors for `keys` projected onto `schema`. Columns absent from the
    /// table and keys absent from the table are masked. With
    /// `drop_fully_masked`, entries with nothing present are left out.
    /// Returns the surviving input indices alongside their vectors.
    pub fn lookup(&self, keys: &[String], schema: &[String], drop_fully_masked: bool) -> (Vec<usize>, Vec<PropertyVector>) {
        let index = self.index();
        let col: Vec<Option<usize>> = schema.iter().map(|s| self.schema.iter().position(|t| t == s)).collect();
        let mut kept = Vec::new();
        let mut out = Vec::new();
        for (i, key) in keys.iter().enumerate() {
            let row = index.get(key).or_else(|| {
                if self.key_column == "smiles" {
                    canonical_smiles(key).and_then(|c| index.get(&c))
                } else {
                    None
                }
            });
            let mut v = PropertyVector::masked(schema.len());
            if let Some(&r) = row {
                for (j, c) in col.iter().enumerate() {
                    if let Some(x) = c.and_then(|c| self.rows[r].get(c)) {
                        v.values[j] = x;
                        v.mask[j] = true;
                    }
                }
            }
            if drop_fully_masked && v.is_fully_masked() {
                continue;
            }
            kept.push(i);
            out.push(v);
        }
        (kept, out)
    }
}

/// Per-property mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// Fits on present values. Properties with no present value or zero
    /// variance are dropped with a warning and reported in the second
    /// return value.
    pub fn fit(schema: &[String], vectors: &[PropertyVector]) -> (StandardizationStats, Vec<String>) {
        let mut stats = StandardizationStats {
            names: Vec::new(),
            mean: Vec::new(),
            std: Vec::new(),
        };
        let mut dropped = Vec::new();
        for (k, name) in schema.iter().enumerate() {
            let xs: Vec<f64> = vectors.iter().filter_map(|v| v.get(k)).collect();
            if xs.is_empty() {
                log::warn!("property {name} has no values; dropped");
                dropped.push(name.clone());
                continue;
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            if std <= MIN_STD {
                log::warn!("property {name} has zero variance; dropped");
                dropped.push(name.clone());
                continue;
            }
            stats.names.push(name.clone());
            stats.mean.push(mean);
            stats.std.push(std);
        }
        (stats, dropped)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn columns(&self, schema: &[String]) -> Result<Vec<usize>, DescriptorError> {
        self.names
            .iter()
            .map(|n| {
                schema
                    .iter()
                    .position(|s| s == n)
                    .ok_or_else(|| DescriptorError::StatsSchemaMismatch(format!("{n} not in schema")))
            })
            .collect()
    }

    /// `(x − mean)/σ` on present dimensions, 0 on masked ones. Output
    /// vectors follow `self.names`.
    pub fn standardize(&self, schema: &[String], vectors: &[PropertyVector]) -> Result<Vec<PropertyVector>, DescriptorError> {
        let cols = self.columns(schema)?;
        vectors
            .iter()
            .map(|v| {
                if v.len() != schema.len() {
                    return Err(DescriptorError::StatsSchemaMismatch(format!(
                        "vector has {} dims, schema {}",
                        v.len(),
                        schema.len()
                    )));
                }
                let mut out = PropertyVector::masked(cols.len());
                for (j, &c) in cols.iter().enumerate() {
                    if let Some(x) = v.get(c) {
                        out.values[j] = (x - self.mean[j]) / self.std[j];
                        out.mask[j] = true;
                    }
                }
                Ok(out)
            })
            .collect()
    }

    pub fn standardize_value(&self, k: usize, x: f64) -> f64 {
        (x - self.mean[k]) / self.std[k]
    }

    pub fn destandardize_value(&self, k: usize, z: f64) -> f64 {
        z * self.std[k] + self.mean[k]
    }

    /// Inverse of `standardize` on present dimensions; vectors follow
    /// `self.names`.
    pub fn destandardize(&self, vectors: &[PropertyVector]) -> Result<Vec<PropertyVector>, DescriptorError> {
        vectors
            .iter()
            .map(|v| {
                if v.len() != self.len() {
                    return Err(DescriptorError::StatsSchemaMismatch(format!(
                        "vector has {} dims, stats {}",
                        v.len(),
                        self.len()
                    )));
                }
                let mut out = v.clone();
                for k in 0..v.len() {
                    out.values[k] = if v.mask[k] { self.destandardize_value(k, v.values[k]) } else { 0.0 };
                }
                Ok(out)
            })
            .collect()
    }

    /// `property<TAB>mean<TAB>std` lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for k in 0..self.len() {
            writeln!(w, "{}\t{}\t{}", self.names[k], self.mean[k], self.std[k])?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, DescriptorError> {
        let mut stats = StandardizationStats {
            names: Vec::new(),
            mean: Vec::new(),
            std: Vec::new(),
        };
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| DescriptorError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let bad = || DescriptorError::MalformedRow(n + 1);
            if parts.len() != 3 {
                return Err(bad());
            }
            let mean: f64 = parts[1].parse().map_err(|_| bad())?;
            let std: f64 = parts[2].parse().map_err(|_| bad())?;
            if std <= MIN_STD || !std.is_finite() || !mean.is_finite() {
                return Err(bad());
            }
            stats.names.push(parts[0].to_string());
            stats.mean.push(mean);
            stats.std.push(std);
        }
        Ok(stats)
    }
}

/// Pearson correlation over pairwise-complete observations.
pub fn correlation_matrix(vectors: &[PropertyVector], k: usize) -> Result<Vec<Vec<f64>>, DescriptorError> {
    let mut r = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let pairs: Vec<(f64, f64)> = vectors
                .iter()
                .filter_map(|v| Some((v.get(i)?, v.get(j)?)))
                .collect();
            if pairs.len() < 3 {
                return Err(DescriptorError::InsufficientOverlap(i, j));
            }
            let value = pearson(&pairs).ok_or(DescriptorError::ZeroVariance(i, j))?;
            r[i][j] = if i == j { 1.0 } else { value };
            r[j][i] = r[i][j];
        }
    }
    Ok(r)
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Counts over fixed bin edges. Bin `i` is `[edges[i], edges[i+1])`; the
/// last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// `bins` equal-width bins spanning every value in `sets`.
    pub fn shared_edges(sets: &[&[f64]], bins: usize) -> Vec<f64> {
        let bins = bins.max(1);
        let finite = sets.iter().flat_map(|s| s.iter()).filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo > hi {
            (0.0, 1.0)
        } else if lo == hi {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        };
        (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
    }

    /// Values outside the edges are not counted.
    pub fn with_edges(values: &[f64], edges: &[f64]) -> Self {
        let nb = edges.len().saturating_sub(1);
        let mut counts = vec![0; nb];
        for &v in values {
            if nb == 0 || !(v >= edges[0] && v <= edges[nb]) {
                continue;
            }
            let i = edges[1..].partition_point(|&e| e <= v).min(nb - 1);
            counts[i] += 1;
        }
        Histogram {
            edges: edges.to_vec(),
            counts,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `Σ min(p_i, q_i)` of the normalized histograms.
    pub fn overlap(&self, other: &Histogram) -> f64 {
        let (a, b) = (self.total().max(1) as f64, other.total().max(1) as f64);
        self.counts
            .iter()
            .zip(&other.counts)
            .map(|(&x, &y)| (x as f64 / a).min(y as f64 / b))
            .sum()
    }

    /// `bin_lo<TAB>bin_hi<TAB>count` lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{}\t{}\t{c}", self.edges[i], self.edges[i + 1])?;
        }
        Ok(())
    }
}

/// Native descriptors for a batch, keyed by canonical SMILES.
pub fn native_table(mols: &[Molecule]) -> PropertyTable {
    let mut seen = BTreeMap::new();
    for m in mols {
        seen.entry(canonicalize(m)).or_insert_with(|| native_vector(m));
    }
    let (keys, rows) = seen.into_iter().unzip();
    PropertyTable {
        key_column: "smiles".into(),
        schema: NATIVE_PROPERTIES.iter().map(|s| s.to_string()).collect(),
        keys,
        rows,
    }
}
