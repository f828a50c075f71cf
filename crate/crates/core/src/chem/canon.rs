//! Canonical SMILES by invariant refinement.
//!
//! Atoms start in classes keyed by (element, aromatic, degree, charge,
//! hydrogens) and are refined by the sorted multiset of (bond order,
//! neighbor class) until the partition is stable. Remaining ties are broken
//! by individualizing each member of the first non-singleton class in turn
//! and refining again; every discrete partition gives a candidate string and
//! the smallest one wins. The candidate set does not depend on the input
//! atom numbering, so neither does the result.

use super::mol::Molecule;
use super::write::write;

/// Guard against pathological symmetry; ordinary molecules stay far below it.
const MAX_LEAVES: usize = 20_000;

/// Canonical SMILES text for `mol`.
pub fn canonicalize(mol: &Molecule) -> String {
    canonical_order(mol).1
}

/// Canonical atom order together with the string it produces.
pub fn canonical_order(mol: &Molecule) -> (Vec<usize>, String) {
    let n = mol.atom_count();
    if n == 0 {
        return (Vec::new(), String::new());
    }
    let classes = refine(mol, initial_classes(mol));
    let mut search = Search {
        mol,
        best: None,
        leaves: 0,
    };
    search.run(classes);
    let (order, text) = search.best.expect("at least one leaf is always visited");
    (order, text)
}

fn initial_classes(mol: &Molecule) -> Vec<usize> {
    let keys: Vec<_> = (0..mol.atom_count())
        .map(|i| {
            let a = mol.atom(i);
            (a.element.code(), a.aromatic, mol.degree(i), a.charge, mol.hydrogen_count(i))
        })
        .collect();
    rank_keys(&keys)
}

fn rank_keys<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

fn class_count(classes: &[usize]) -> usize {
    classes.iter().max().map_or(0, |&m| m + 1)
}

/// Refines until the number of classes stops growing.
fn refine(mol: &Molecule, mut classes: Vec<usize>) -> Vec<usize> {
    let mut count = class_count(&classes);
    loop {
        let keys: Vec<(usize, Vec<(u8, usize)>)> = (0..mol.atom_count())
            .map(|i| {
                let mut env: Vec<(u8, usize)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(nb, b)| (mol.bond(b).order.code(), classes[nb]))
                    .collect();
                env.sort_unstable();
                (classes[i], env)
            })
            .collect();
        let next = rank_keys(&keys);
        let next_count = class_count(&next);
        classes = next;
        if next_count == count {
            return classes;
        }
        count = next_count;
    }
}

struct Search<'a> {
    mol: &'a Molecule,
    best: Option<(Vec<usize>, String)>,
    leaves: usize,
}

impl Search<'_> {
    fn run(&mut self, classes: Vec<usize>) {
        let n = classes.len();
        if class_count(&classes) == n {
            self.leaves += 1;
            let mut order = vec![0; n];
            for (atom, &c) in classes.iter().enumerate() {
                order[c] = atom;
            }
            let text = write(self.mol, &order);
            if self.best.as_ref().is_none_or(|(_, b)| text < *b) {
                self.best = Some((order, text));
            }
            return;
        }
        // First class (lowest rank) with more than one member.
        let mut sizes = vec![0usize; n];
        for &c in &classes {
            sizes[c] += 1;
        }
        let target = sizes.iter().position(|&s| s > 1).expect("partition not discrete");
        let members: Vec<usize> = (0..n).filter(|&a| classes[a] == target).collect();
        let mut tried: Vec<usize> = Vec::new();
        for &x in &members {
            if self.leaves >= MAX_LEAVES && self.best.is_some() {
                log::warn!("canonical search truncated after {MAX_LEAVES} leaves");
                return;
            }
            if tried.iter().any(|&y| self.terminal_twins(x, y)) {
                continue;
            }
            tried.push(x);
            let split: Vec<usize> = classes
                .iter()
                .enumerate()
                .map(|(a, &c)| {
                    if c == target && a != x {
                        2 * c + 1
                    } else {
                        2 * c
                    }
                })
                .collect();
            let split = rank_keys(&split);
            self.run(refine(self.mol, split));
        }
    }

    /// Two degree-1 atoms of the same class on the same neighbor through
    /// the same bond order are interchangeable by an automorphism.
    fn terminal_twins(&self, x: usize, y: usize) -> bool {
        let m = self.mol;
        if m.degree(x) != 1 || m.degree(y) != 1 {
            return false;
        }
        let (nx, bx) = m.neighbors(x)[0];
        let (ny, by) = m.neighbors(y)[0];
        nx == ny && m.bond(bx).order == m.bond(by).order
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn canon(s: &str) -> String {
        canonicalize(&parse(s).unwrap())
    }

    #[test]
    fn two_spellings_agree() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_eq!(canon("C1=CC=CC=C1"), canon("C=1C=CC=CC=1"));
        assert_eq!(canon("c1ccccc1C"), canon("Cc1ccccc1"));
    }

    #[test]
    fn idempotent() {
        for s in ["CC(=O)Nc1ccc(O)cc1", "c1ccc2ccccc2c1", "C1CC2CCC1CC2", "CC.O", "[NH4+].[Cl-]"] {
            let c = canon(s);
            assert_eq!(canon(&c), c, "{s}");
        }
    }

    #[test]
    fn distinguishes_isomers() {
        assert_ne!(canon("CCO"), canon("COC"));
        assert_ne!(canon("Cc1ccccc1C"), canon("Cc1cccc(C)c1"));
    }

    #[test]
    fn symmetric_molecules_are_cheap() {
        // neopentane-like stars and cage-like rings must not explode
        let c = canon("CC(C)(C)C(C(C)(C)C)(C(C)(C)C)C(C)(C)C");
        assert_eq!(canon(&c), c);
        let cube = canon("C12C3C4C1C5C2C3C45");
        assert_eq!(canon(&cube), cube);
    }

    #[test]
    fn empty_molecule() {
        let m = Molecule::new(Vec::new(), Vec::new()).unwrap();
        assert_eq!(canonicalize(&m), "");
    }
}
