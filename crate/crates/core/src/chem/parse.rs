use std::collections::BTreeMap;

use super::element::Element;
use super::mol::{Atom, BondOrder, Molecule};
use super::tokenize::{lex, Lexeme};
use super::SmilesError;

/// Parses SMILES text into a molecular graph. Stereo marks are accepted and
/// dropped; isotopes and wildcards are rejected.
pub fn parse(smiles: &str) -> Result<Molecule, SmilesError> {
    let lexemes = lex(smiles)?;
    let mut builder = Builder::default();
    for lexeme in &lexemes {
        builder.feed(lexeme)?;
    }
    builder.finish()
}

#[derive(Default)]
struct Builder {
    atoms: Vec<Atom>,
    bonds: Vec<(usize, usize, BondOrder)>,
    prev: Option<usize>,
    pending: Option<(BondOrder, usize)>,
    branches: Vec<(Option<usize>, usize)>,
    rings: BTreeMap<u32, RingOpen>,
    last_pos: usize,
}

struct RingOpen {
    atom: usize,
    order: Option<BondOrder>,
    pos: usize,
}

impl Builder {
    fn feed(&mut self, lexeme: &Lexeme<'_>) -> Result<(), SmilesError> {
        let pos = lexeme.pos;
        self.last_pos = pos;
        let text = lexeme.text;
        match text {
            "-" | "/" | "\\" => self.bond_symbol(BondOrder::Single, pos),
            "=" => self.bond_symbol(BondOrder::Double, pos),
            "#" => self.bond_symbol(BondOrder::Triple, pos),
            ":" => self.bond_symbol(BondOrder::Aromatic, pos),
            "(" => {
                if self.prev.is_none() {
                    return Err(SmilesError::UnbalancedParenthesis { position: pos });
                }
                if let Some((_, p)) = self.pending {
                    return Err(SmilesError::DanglingBondSymbol { position: p });
                }
                self.branches.push((self.prev, pos));
                Ok(())
            }
            ")" => {
                if let Some((_, p)) = self.pending {
                    return Err(SmilesError::DanglingBondSymbol { position: p });
                }
                let (atom, _) = self
                    .branches
                    .pop()
                    .ok_or(SmilesError::UnbalancedParenthesis { position: pos })?;
                self.prev = atom;
                Ok(())
            }
            "." => {
                if let Some((_, p)) = self.pending {
                    return Err(SmilesError::DanglingBondSymbol { position: p });
                }
                if self.prev.is_none() {
                    return Err(SmilesError::DanglingBondSymbol { position: pos });
                }
                self.prev = None;
                Ok(())
            }
            _ if text.starts_with('%') => self.ring_label(text[1..].parse().expect("lexer checked digits"), pos),
            _ if text.as_bytes()[0].is_ascii_digit() => self.ring_label((text.as_bytes()[0] - b'0') as u32, pos),
            _ => {
                let atom = if text.starts_with('[') {
                    parse_bracket(text, pos)?
                } else {
                    parse_organic(text, pos)?
                };
                self.add_atom(atom, pos)
            }
        }
    }

    fn bond_symbol(&mut self, order: BondOrder, pos: usize) -> Result<(), SmilesError> {
        if self.pending.is_some() || self.prev.is_none() {
            return Err(SmilesError::DanglingBondSymbol { position: pos });
        }
        self.pending = Some((order, pos));
        Ok(())
    }

    fn add_atom(&mut self, atom: Atom, pos: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        match (self.prev, self.pending.take()) {
            (Some(prev), pending) => {
                let order = pending
                    .map(|(o, _)| o)
                    .unwrap_or_else(|| self.default_order(prev, idx));
                self.bonds.push((prev, idx, order));
            }
            (None, Some((_, p))) => return Err(SmilesError::DanglingBondSymbol { position: p }),
            (None, None) => {}
        }
        let _ = pos;
        self.prev = Some(idx);
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn ring_label(&mut self, label: u32, pos: usize) -> Result<(), SmilesError> {
        let Some(current) = self.prev else {
            return Err(SmilesError::DanglingBondSymbol { position: pos });
        };
        let pending = self.pending.take().map(|(o, _)| o);
        match self.rings.remove(&label) {
            Some(open) => {
                if open.atom == current {
                    return Err(SmilesError::InvalidGraph(format!("ring label {label} closes on its own atom")));
                }
                let order = match (open.order, pending) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(SmilesError::RingBondMismatch { label, position: pos });
                    }
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => self.default_order(open.atom, current),
                };
                self.bonds.push((open.atom, current, order));
            }
            None => {
                self.rings.insert(
                    label,
                    RingOpen {
                        atom: current,
                        order: pending,
                        pos,
                    },
                );
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Molecule, SmilesError> {
        if let Some((_, p)) = self.pending {
            return Err(SmilesError::DanglingBondSymbol { position: p });
        }
        if let Some(&(_, p)) = self.branches.first() {
            return Err(SmilesError::UnbalancedParenthesis { position: p });
        }
        if let Some((&label, open)) = self.rings.iter().min_by_key(|(_, o)| o.pos) {
            return Err(SmilesError::UnclosedRingBond {
                label,
                position: open.pos,
            });
        }
        if self.prev.is_none() {
            // trailing '.'
            return Err(SmilesError::DanglingBondSymbol { position: self.last_pos });
        }
        Molecule::new(self.atoms, self.bonds)
    }
}

fn parse_organic(text: &str, pos: usize) -> Result<Atom, SmilesError> {
    if let Some(e) = Element::from_symbol(text) {
        if e == Element::H {
            return Err(SmilesError::UnknownElement { position: pos });
        }
        return Ok(Atom::new(e));
    }
    Element::from_aromatic_symbol(text)
        .map(Atom::aromatic)
        .ok_or(SmilesError::UnknownElement { position: pos })
}

/// `[` symbol [stereo] [H count] [charge] `]`
fn parse_bracket(text: &str, pos: usize) -> Result<Atom, SmilesError> {
    let inner = &text[1..text.len() - 1];
    let bytes = inner.as_bytes();
    if bytes.first().is_some_and(u8::is_ascii_digit) {
        return Err(SmilesError::InvalidBracketAtom {
            position: pos,
            reason: "isotopes are not supported".into(),
        });
    }
    if inner.starts_with('*') {
        return Err(SmilesError::InvalidBracketAtom {
            position: pos,
            reason: "wildcard atoms are not supported".into(),
        });
    }
    // Element symbol: longest match among two-letter, then one-letter.
    let mut i;
    let atom = if let Some(e) = inner.get(..2).and_then(|s| {
        Element::from_symbol(s)
            .map(|e| (e, false))
            .or_else(|| Element::from_aromatic_symbol(s).map(|e| (e, true)))
    }) {
        i = 2;
        e
    } else if let Some(e) = inner.get(..1).and_then(|s| {
        Element::from_symbol(s)
            .map(|e| (e, false))
            .or_else(|| Element::from_aromatic_symbol(s).map(|e| (e, true)))
    }) {
        i = 1;
        e
    } else {
        return Err(SmilesError::UnknownElement { position: pos });
    };
    // "Sc", "Sn" and friends would lex as S + aromatic; a two-letter match
    // followed by lowercase means an unsupported element such as "[Sn]".
    if bytes.get(i).is_some_and(u8::is_ascii_lowercase) {
        return Err(SmilesError::UnknownElement { position: pos });
    }
    let (element, aromatic) = atom;
    // stereo marks: @, @@, @TH1, @SP2, ...
    while bytes.get(i) == Some(&b'@') {
        i += 1;
    }
    if i > 0 && bytes[i - 1] == b'@' {
        while bytes.get(i).is_some_and(|b| b.is_ascii_uppercase() && *b != b'H') {
            i += 1;
        }
        while bytes.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
    }
    let mut h = 0u8;
    if bytes.get(i) == Some(&b'H') {
        i += 1;
        h = 1;
        let start = i;
        while bytes.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
        if i > start {
            h = inner[start..i].parse().map_err(|_| SmilesError::InvalidBracketAtom {
                position: pos,
                reason: "bad hydrogen count".into(),
            })?;
        }
    }
    let mut charge: i16 = 0;
    if let Some(&sign) = bytes.get(i).filter(|b| **b == b'+' || **b == b'-') {
        let unit: i16 = if sign == b'+' { 1 } else { -1 };
        i += 1;
        let start = i;
        while bytes.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
        if i > start {
            let n: i16 = inner[start..i].parse().unwrap_or(i16::MAX);
            charge = unit * n;
        } else {
            charge = unit;
            while bytes.get(i) == Some(&sign) {
                charge += unit;
                i += 1;
            }
        }
    }
    if i != bytes.len() {
        return Err(SmilesError::InvalidBracketAtom {
            position: pos,
            reason: format!("unexpected text {:?}", &inner[i..]),
        });
    }
    if !(-8..=8).contains(&charge) {
        return Err(SmilesError::InvalidBracketAtom {
            position: pos,
            reason: "charge out of range".into(),
        });
    }
    Ok(Atom {
        element,
        aromatic,
        charge: charge as i8,
        explicit_h: Some(h),
    })
}
