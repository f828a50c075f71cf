use std::fmt::Write as _;

use super::element::Element;
use super::mol::{Atom, BondOrder, Molecule};

/// Writes SMILES by depth-first traversal. Each fragment starts at its
/// lowest-ranked atom; neighbors are visited in rank order, where the rank
/// of an atom is its position in `atom_order`.
///
/// Panics if `atom_order` is not a permutation of the atom indices.
pub fn write(mol: &Molecule, atom_order: &[usize]) -> String {
    let n = mol.atom_count();
    assert_eq!(atom_order.len(), n, "atom_order must be a permutation");
    let mut rank = vec![usize::MAX; n];
    for (r, &a) in atom_order.iter().enumerate() {
        assert!(a < n && rank[a] == usize::MAX, "atom_order must be a permutation");
        rank[a] = r;
    }
    let plan = Plan::build(mol, &rank, atom_order);
    let mut out = String::new();
    let mut emitter = Emitter {
        mol,
        plan: &plan,
        out: &mut out,
        free_labels: Vec::new(),
        next_label: 1,
        open: vec![None; mol.bonds().len()],
    };
    for (k, &root) in plan.roots.iter().enumerate() {
        if k > 0 {
            emitter.out.push('.');
        }
        emitter.emit(root);
    }
    out
}

/// Result of the classification pass: spanning-forest children and ring
/// closure bonds, both in rank order.
struct Plan {
    roots: Vec<usize>,
    children: Vec<Vec<(usize, usize)>>,
    /// Ring-closure bonds touching each atom, in the order digits are written.
    closures: Vec<Vec<usize>>,
}

impl Plan {
    fn build(mol: &Molecule, rank: &[usize], atom_order: &[usize]) -> Plan {
        let n = mol.atom_count();
        let mut visited = vec![false; n];
        let mut tree_bond = vec![false; mol.bonds().len()];
        let mut closure = vec![false; mol.bonds().len()];
        let mut children = vec![Vec::new(); n];
        let mut closures: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut roots = Vec::new();
        let sorted_nbrs: Vec<Vec<(usize, usize)>> = (0..n)
            .map(|u| {
                let mut v = mol.neighbors(u).to_vec();
                v.sort_by_key(|&(nb, _)| rank[nb]);
                v
            })
            .collect();
        for &start in atom_order {
            if visited[start] {
                continue;
            }
            roots.push(start);
            visited[start] = true;
            let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
            while let Some(frame) = stack.last_mut() {
                let (u, slot) = *frame;
                if slot == sorted_nbrs[u].len() {
                    stack.pop();
                    continue;
                }
                frame.1 += 1;
                let (v, bidx) = sorted_nbrs[u][slot];
                if tree_bond[bidx] || closure[bidx] {
                    continue;
                }
                if visited[v] {
                    // v is an ancestor still on the stack: ring closure.
                    closure[bidx] = true;
                    closures[v].push(bidx);
                    closures[u].push(bidx);
                } else {
                    tree_bond[bidx] = true;
                    visited[v] = true;
                    children[u].push((v, bidx));
                    stack.push((v, 0));
                }
            }
        }
        Plan {
            roots,
            children,
            closures,
        }
    }
}

struct Emitter<'a> {
    mol: &'a Molecule,
    plan: &'a Plan,
    out: &'a mut String,
    free_labels: Vec<u32>,
    next_label: u32,
    /// Label currently assigned to each open ring-closure bond.
    open: Vec<Option<u32>>,
}

impl Emitter<'_> {
    fn emit(&mut self, root: usize) {
        enum Step {
            Atom(usize, Option<usize>),
            Open,
            Close,
        }
        // Explicit stack keeps deep chains off the call stack.
        let mut stack = vec![Step::Atom(root, None)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Close => self.out.push(')'),
                Step::Atom(u, via) => {
                    if let Some(bidx) = via {
                        self.bond_symbol(bidx);
                    }
                    self.atom_text(u);
                    self.ring_labels(u);
                    let kids = &self.plan.children[u];
                    // Pushed in reverse so the first child is written first;
                    // every child except the last goes in parentheses.
                    for (k, &(v, bidx)) in kids.iter().enumerate().rev() {
                        if k + 1 == kids.len() {
                            stack.push(Step::Atom(v, Some(bidx)));
                        } else {
                            stack.push(Step::Close);
                            stack.push(Step::Atom(v, Some(bidx)));
                            stack.push(Step::Open);
                        }
                    }
                }
                Step::Open => self.out.push('('),
            }
        }
    }

    fn ring_labels(&mut self, u: usize) {
        for &bidx in &self.plan.closures[u] {
            match self.open[bidx] {
                Some(label) => {
                    push_label(self.out, label);
                    self.open[bidx] = None;
                    self.free_labels.push(label);
                    self.free_labels.sort_unstable_by(|a, b| b.cmp(a));
                }
                None => {
                    self.bond_symbol(bidx);
                    let label = self.free_labels.pop().unwrap_or_else(|| {
                        let l = self.next_label;
                        self.next_label += 1;
                        l
                    });
                    push_label(self.out, label);
                    self.open[bidx] = Some(label);
                }
            }
        }
    }

    fn bond_symbol(&mut self, bidx: usize) {
        let bond = self.mol.bond(bidx);
        let both_aromatic = self.mol.atom(bond.a).aromatic && self.mol.atom(bond.b).aromatic;
        match bond.order {
            BondOrder::Single if both_aromatic => self.out.push('-'),
            BondOrder::Aromatic if !both_aromatic => self.out.push(':'),
            BondOrder::Double => self.out.push('='),
            BondOrder::Triple => self.out.push('#'),
            _ => {}
        }
    }

    fn atom_text(&mut self, u: usize) {
        let atom = self.mol.atom(u);
        atom_symbol(self.out, atom);
    }
}

fn push_label(out: &mut String, label: u32) {
    if label < 10 {
        out.push(char::from(b'0' + label as u8));
    } else {
        let _ = write!(out, "%{label:02}");
    }
}

/// Writes one atom, bracketed when the organic subset cannot express it.
pub(crate) fn atom_symbol(out: &mut String, atom: &Atom) {
    let symbol = if atom.aromatic {
        atom.element.aromatic_symbol().unwrap_or(atom.element.symbol())
    } else {
        atom.element.symbol()
    };
    let needs_bracket = atom.charge != 0
        || atom.explicit_h.is_some()
        || !(atom.element.is_organic_subset() || atom.element == Element::Dummy);
    if !needs_bracket {
        out.push_str(symbol);
        return;
    }
    out.push('[');
    out.push_str(symbol);
    match atom.explicit_h.unwrap_or(0) {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match atom.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    out.push(']');
}
