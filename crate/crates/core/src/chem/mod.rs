//! SMILES tokenization, parsing, writing, canonicalization and valence checks.

mod canon;
mod element;
mod mol;
mod parse;
mod tokenize;
mod valence;
mod write;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::{canonical_order, canonicalize};
pub use element::Element;
pub use mol::{Atom, Bond, BondOrder, Molecule};
pub use parse::parse;
pub use tokenize::{lex, Lexeme, TokenSequence, Vocabulary, BOS, BOS_ID, EOS, EOS_ID, PAD, PAD_ID};
pub use valence::{allowed_valences, bond_valence, check_valence, ValenceVerdict};
pub use write::write;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES")]
    EmptyInput,
    #[error("unknown token at position {position}")]
    UnknownToken { position: usize },
    #[error("unbalanced parenthesis at position {position}")]
    UnbalancedParenthesis { position: usize },
    #[error("ring bond {label} opened at position {position} is never closed")]
    UnclosedRingBond { label: u32, position: usize },
    #[error("conflicting bond symbols on ring bond {label} at position {position}")]
    RingBondMismatch { label: u32, position: usize },
    #[error("unknown element at position {position}")]
    UnknownElement { position: usize },
    #[error("invalid bracket atom at position {position}: {reason}")]
    InvalidBracketAtom { position: usize, reason: String },
    #[error("dangling bond symbol at position {position}")]
    DanglingBondSymbol { position: usize },
    #[error("aromatic atom {atom} is not in a ring")]
    AromaticOutsideRing { atom: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("vocabulary: {0}")]
    Vocabulary(String),
}

/// Why a piece of text failed to become a valid molecule. Parse failures and
/// valence failures are kept apart so reports can count them separately.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Validity {
    Valid,
    ParseFailure(String),
    ValenceFailure(String),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

/// Parses and valence-checks `smiles`, returning the molecule when both pass.
pub fn validate(smiles: &str) -> (Validity, Option<Molecule>) {
    match parse(smiles) {
        Err(e) => (Validity::ParseFailure(e.to_string()), None),
        Ok(mol) => match check_valence(&mol) {
            ValenceVerdict::Valid => (Validity::Valid, Some(mol)),
            v => (Validity::ValenceFailure(v.to_string()), None),
        },
    }
}

/// Canonical SMILES of `smiles` if it parses and passes the valence check.
pub fn canonical_smiles(smiles: &str) -> Option<String> {
    validate(smiles).1.map(|m| canonicalize(&m))
}

/// Reads one SMILES per line; blank lines and `#` comments are skipped.
/// Anything after the first whitespace on a line is ignored.
pub fn read_smiles<R: BufRead>(r: R) -> std::io::Result<Vec<String>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let first = trimmed.split_whitespace().next().unwrap_or_default();
        out.push(first.to_string());
    }
    Ok(out)
}

pub fn write_smiles<W: Write, S: AsRef<str>>(mut w: W, smiles: &[S]) -> std::io::Result<()> {
    for s in smiles {
        writeln!(w, "{}", s.as_ref())?;
    }
    Ok(())
}
