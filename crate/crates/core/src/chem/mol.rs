use std::fmt;

use super::element::Element;
use super::valence;
use super::SmilesError;

/// One atom of a molecular graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    /// Hydrogen count stated inside a bracket atom. `None` means the count
    /// is implied by the default valence table.
    pub explicit_h: Option<u8>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            aromatic: false,
            charge: 0,
            explicit_h: None,
        }
    }

    pub fn aromatic(element: Element) -> Self {
        Atom {
            aromatic: true,
            ..Atom::new(element)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum BondOrder {
    /// Only meaningful for adjacency-matrix encodings; never stored in a `Molecule`.
    None,
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub const ALL: [BondOrder; 5] = [
        BondOrder::None,
        BondOrder::Single,
        BondOrder::Double,
        BondOrder::Triple,
        BondOrder::Aromatic,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Integer contribution of a non-aromatic bond to its endpoints' valence.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::None | BondOrder::Aromatic => 0,
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Attributed molecular graph. Construction validates the graph and derives
/// adjacency, ring membership and implicit hydrogen counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    ring_atom: Vec<bool>,
    ring_bond: Vec<bool>,
    implicit_h: Vec<u8>,
}

impl Molecule {
    /// Builds a molecule. Bond endpoints are normalized so that `a < b`.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<(usize, usize, BondOrder)>) -> Result<Self, SmilesError> {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut stored = Vec::with_capacity(bonds.len());
        for (a, b, order) in bonds {
            if a >= n || b >= n {
                return Err(SmilesError::InvalidGraph(format!("bond ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(SmilesError::InvalidGraph(format!("self-loop on atom {a}")));
            }
            if order == BondOrder::None {
                return Err(SmilesError::InvalidGraph(format!("bond ({a}, {b}) has order none")));
            }
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            if adjacency[a].iter().any(|&(nb, _)| nb == b) {
                return Err(SmilesError::InvalidGraph(format!("duplicate bond ({a}, {b})")));
            }
            let idx = stored.len();
            stored.push(Bond { a, b, order });
            adjacency[a].push((b, idx));
            adjacency[b].push((a, idx));
        }
        let ring_bond = find_ring_bonds(n, &stored, &adjacency);
        let mut ring_atom = vec![false; n];
        for (bond, &in_ring) in stored.iter().zip(&ring_bond) {
            if in_ring {
                ring_atom[bond.a] = true;
                ring_atom[bond.b] = true;
            }
        }
        for (i, atom) in atoms.iter().enumerate() {
            if atom.aromatic && !atom.element.can_be_aromatic() {
                return Err(SmilesError::InvalidGraph(format!(
                    "element {} cannot be aromatic",
                    atom.element
                )));
            }
            if atom.aromatic && !ring_atom[i] {
                return Err(SmilesError::AromaticOutsideRing { atom: i });
            }
        }
        let mut mol = Molecule {
            atoms,
            bonds: stored,
            adjacency,
            ring_atom,
            ring_bond,
            implicit_h: Vec::new(),
        };
        mol.implicit_h = (0..n).map(|i| valence::implicit_hydrogens(&mol, i)).collect();
        Ok(mol)
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, idx: usize) -> &Bond {
        &self.bonds[idx]
    }

    /// Neighbors of `i` as `(neighbor, bond index)` pairs.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, idx)| &self.bonds[idx])
    }

    pub fn is_ring_atom(&self, i: usize) -> bool {
        self.ring_atom[i]
    }

    pub fn is_ring_bond(&self, idx: usize) -> bool {
        self.ring_bond[idx]
    }

    pub fn ring_membership(&self) -> &[bool] {
        &self.ring_atom
    }

    /// Total hydrogens on atom `i`: the bracket count when stated, otherwise
    /// the implicit fill.
    pub fn hydrogen_count(&self, i: usize) -> u8 {
        self.atoms[i].explicit_h.unwrap_or(self.implicit_h[i])
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms
            .iter()
            .filter(|a| a.element != Element::H && a.element != Element::Dummy)
            .count()
    }

    /// Number of connected components.
    pub fn fragment_count(&self) -> usize {
        self.components().len()
    }

    /// Atom indices of each connected component, each sorted ascending,
    /// components ordered by their smallest atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Cycle rank (independent ring count): bonds − atoms + components.
    pub fn ring_count(&self) -> usize {
        (self.bonds.len() + self.fragment_count()).saturating_sub(self.atoms.len())
    }

    /// Induced subgraph on `keep` (in the given order), with extra stub atoms
    /// attached where requested. Atom attributes are copied verbatim.
    pub fn subgraph(&self, keep: &[usize], stubs: &[(usize, BondOrder)]) -> Result<Molecule, SmilesError> {
        let mut index = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            index[old] = new;
        }
        let mut atoms: Vec<Atom> = keep.iter().map(|&i| self.atoms[i]).collect();
        let mut bonds = Vec::new();
        for bond in &self.bonds {
            let (a, b) = (index[bond.a], index[bond.b]);
            if a != usize::MAX && b != usize::MAX {
                bonds.push((a, b, bond.order));
            }
        }
        for &(old, order) in stubs {
            let anchor = index[old];
            debug_assert!(anchor != usize::MAX);
            atoms.push(Atom::new(Element::Dummy));
            bonds.push((anchor, atoms.len() - 1, order));
        }
        Molecule::new(atoms, bonds)
    }

    /// The same molecule with atoms renumbered so that new index `k` holds
    /// old atom `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let atoms = perm.iter().map(|&old| self.atoms[old]).collect();
        let bonds = self
            .bonds
            .iter()
            .map(|b| (inverse[b.a], inverse[b.b], b.order))
            .collect();
        Molecule::new(atoms, bonds).expect("permutation of a valid molecule is valid")
    }
}

impl fmt::Display for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::canonicalize(self))
    }
}

/// Marks bonds lying on at least one cycle (every non-bridge bond).
fn find_ring_bonds(n: usize, bonds: &[Bond], adjacency: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; bonds.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // Iterative DFS: (vertex, bond used to enter, next neighbor slot).
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(frame) = stack.last_mut() {
            let (u, parent_bond, slot) = *frame;
            if slot < adjacency[u].len() {
                frame.2 += 1;
                let (v, bidx) = adjacency[u][slot];
                if bidx == parent_bond {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, bidx, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        is_bridge[parent_bond] = true;
                    }
                }
            }
        }
    }
    is_bridge.iter().map(|&b| !b).collect()
}
