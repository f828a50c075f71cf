//! Native valence model.
//!
//! Allowed valences: C{4}, N{3}, O{2}, F/Cl/Br/I{1}, S{2,4,6}, P{3,5}, B{3},
//! Si{4}, Se{2,4,6}, H{1}. A charge of +q shifts the N and O sets up by q,
//! −q shifts them down.
//!
//! Aromatic bonds count 1.5 each; an atom's aromatic total is rounded half
//! down (two aromatic bonds give 3, three give 4). Aromatic O, S and Se
//! donate a lone pair and count one per aromatic bond. Aromatic N and P may
//! also be read in the lone-pair-donor form (one unit less), which is what
//! makes pyrrole-type `[nH]` valid; the same allowance covers aromatic atoms
//! with an exocyclic double bond.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::element::Element;
use super::mol::{BondOrder, Molecule};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValenceVerdict {
    Valid,
    Invalid { atom: usize, reason: String },
}

impl ValenceVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ValenceVerdict::Valid)
    }
}

impl fmt::Display for ValenceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValenceVerdict::Valid => f.write_str("valid"),
            ValenceVerdict::Invalid { atom, reason } => write!(f, "atom {atom}: {reason}"),
        }
    }
}

/// Allowed valences for `element` at formal `charge`, ascending.
pub fn allowed_valences(element: Element, charge: i8) -> Vec<u8> {
    let base = element.valences();
    match element {
        Element::N | Element::O if charge != 0 => base
            .iter()
            .filter_map(|&v| {
                let shifted = v as i16 + charge as i16;
                (shifted >= 0).then_some(shifted as u8)
            })
            .collect(),
        _ => base.to_vec(),
    }
}

/// Valence consumed by the bonds of atom `i`, hydrogens excluded.
pub fn bond_valence(mol: &Molecule, i: usize) -> u8 {
    let mut plain = 0u8;
    let mut aromatic = 0u8;
    for &(_, bidx) in mol.neighbors(i) {
        match mol.bond(bidx).order {
            BondOrder::Aromatic => aromatic += 1,
            other => plain += other.valence(),
        }
    }
    let element = mol.atom(i).element;
    let aromatic_part = if matches!(element, Element::O | Element::S | Element::Se) && mol.atom(i).aromatic {
        aromatic
    } else {
        (3 * aromatic) / 2
    };
    plain + aromatic_part
}

/// Aromatic N/P, and aromatic atoms carrying an exocyclic double bond
/// (pyridone-type carbonyls), may be read with one unit less.
fn donor_capable(mol: &Molecule, i: usize) -> bool {
    let atom = mol.atom(i);
    atom.aromatic
        && (matches!(atom.element, Element::N | Element::P)
            || mol
                .neighbors(i)
                .iter()
                .any(|&(_, b)| mol.bond(b).order == BondOrder::Double))
}

/// Hydrogens implied for atom `i` when the SMILES did not state them.
pub(crate) fn implicit_hydrogens(mol: &Molecule, i: usize) -> u8 {
    let atom = mol.atom(i);
    if atom.explicit_h.is_some() || atom.element == Element::Dummy || atom.element == Element::H {
        return 0;
    }
    let used = bond_valence(mol, i);
    let allowed = allowed_valences(atom.element, atom.charge);
    allowed
        .iter()
        .find(|&&v| v >= used)
        .map(|&v| v - used)
        .unwrap_or(0)
}

/// Checks every atom against the valence table.
pub fn check_valence(mol: &Molecule) -> ValenceVerdict {
    for i in 0..mol.atom_count() {
        let atom = mol.atom(i);
        let used = bond_valence(mol, i) as u16 + mol.hydrogen_count(i) as u16;
        let allowed = allowed_valences(atom.element, atom.charge);
        let Some(&max) = allowed.last() else {
            return ValenceVerdict::Invalid {
                atom: i,
                reason: format!("{} with charge {} has no allowed valence", atom.element, atom.charge),
            };
        };
        let max = max as u16;
        let fits = used <= max || (donor_capable(mol, i) && used - 1 <= max);
        if !fits {
            return ValenceVerdict::Invalid {
                atom: i,
                reason: format!("{} uses valence {used}, maximum {max}", atom.element),
            };
        }
    }
    ValenceVerdict::Valid
}
