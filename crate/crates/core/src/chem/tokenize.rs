use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use super::SmilesError;

pub const PAD: &str = "<pad>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;

const TWO_CHAR_ATOMS: [&str; 4] = ["Cl", "Br", "Si", "Se"];
const ONE_CHAR: &str = "BCNOPSFIbcnops0123456789-=#:/\\.()";

/// A lexical token and its byte offset in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lexeme<'a> {
    pub text: &'a str,
    pub pos: usize,
}

/// Splits SMILES text into tokens by longest match. Bracket atoms, two-letter
/// element symbols and `%nn` ring labels are single tokens.
pub fn lex(smiles: &str) -> Result<Vec<Lexeme<'_>>, SmilesError> {
    if smiles.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    let bytes = smiles.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let rest = &smiles[i..];
        let len = if bytes[i] == b'[' {
            match rest.find(']') {
                Some(end) => end + 1,
                None => return Err(SmilesError::UnknownToken { position: i }),
            }
        } else if bytes[i] == b'%' {
            if rest.len() >= 3 && rest.as_bytes()[1].is_ascii_digit() && rest.as_bytes()[2].is_ascii_digit() {
                3
            } else {
                return Err(SmilesError::UnknownToken { position: i });
            }
        } else if TWO_CHAR_ATOMS.iter().any(|t| rest.starts_with(t)) {
            2
        } else if bytes[i].is_ascii() && ONE_CHAR.as_bytes().contains(&bytes[i]) {
            1
        } else {
            return Err(SmilesError::UnknownToken { position: i });
        };
        out.push(Lexeme {
            text: &rest[..len],
            pos: i,
        });
        i += len;
    }
    Ok(out)
}

/// Tokenized SMILES wrapped in BOS/EOS sentinels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Bijection between token strings and ids. Ids 0..3 are PAD, BOS, EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Sentinels plus every token the lexer can produce outside brackets.
    pub fn base() -> Self {
        let mut tokens: Vec<String> = vec![PAD.into(), BOS.into(), EOS.into()];
        tokens.extend(TWO_CHAR_ATOMS.iter().map(|s| s.to_string()));
        tokens.extend(ONE_CHAR.chars().map(|c| c.to_string()));
        Self::from_tokens(tokens).expect("base vocabulary is duplicate free")
    }

    /// Base vocabulary extended with every bracket atom and `%nn` label seen
    /// in `corpus`, in sorted order.
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(corpus: I) -> Result<Self, SmilesError> {
        let mut extra = BTreeSet::new();
        for smiles in corpus {
            for lexeme in lex(smiles)? {
                if lexeme.text.starts_with('[') || lexeme.text.starts_with('%') {
                    extra.insert(lexeme.text.to_string());
                }
            }
        }
        let mut vocab = Self::base();
        for tok in extra {
            let id = vocab.tokens.len() as u32;
            vocab.index.insert(tok.clone(), id);
            vocab.tokens.push(tok);
        }
        Ok(vocab)
    }

    fn from_tokens(tokens: Vec<String>) -> Result<Self, SmilesError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), id as u32).is_some() {
                return Err(SmilesError::Vocabulary(format!("duplicate token {tok:?}")));
            }
        }
        if tokens.len() < 3 || tokens[0] != PAD || tokens[1] != BOS || tokens[2] != EOS {
            return Err(SmilesError::Vocabulary("ids 0, 1, 2 must be <pad>, <bos>, <eos>".into()));
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Tokenizes `smiles` against this vocabulary.
    pub fn encode(&self, smiles: &str) -> Result<TokenSequence, SmilesError> {
        let lexemes = lex(smiles)?;
        let mut ids = Vec::with_capacity(lexemes.len() + 2);
        ids.push(BOS_ID);
        for lexeme in lexemes {
            let id = self
                .id(lexeme.text)
                .ok_or(SmilesError::UnknownToken { position: lexeme.pos })?;
            ids.push(id);
        }
        ids.push(EOS_ID);
        Ok(TokenSequence { ids })
    }

    /// Concatenates the non-sentinel tokens.
    pub fn decode(&self, seq: &TokenSequence) -> String {
        self.decode_ids(&seq.ids)
    }

    pub fn decode_ids(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| id > EOS_ID)
            .filter_map(|&id| self.token(id))
            .collect()
    }

    /// Pads every sequence with PAD after its EOS up to the longest length.
    pub fn pad_batch(&self, seqs: &[TokenSequence]) -> Vec<Vec<u32>> {
        let width = seqs.iter().map(TokenSequence::len).max().unwrap_or(0);
        seqs.iter()
            .map(|s| {
                let mut row = s.ids.clone();
                row.resize(width, PAD_ID);
                row
            })
            .collect()
    }

    /// `token<TAB>id` lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (id, tok) in self.tokens.iter().enumerate() {
            writeln!(w, "{tok}\t{id}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, SmilesError> {
        let mut pairs = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| SmilesError::Vocabulary(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (tok, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| SmilesError::Vocabulary(format!("line {}: missing tab", lineno + 1)))?;
            let id: usize = id
                .parse()
                .map_err(|_| SmilesError::Vocabulary(format!("line {}: bad id", lineno + 1)))?;
            pairs.push((id, tok.to_string()));
        }
        pairs.sort();
        if pairs.iter().enumerate().any(|(i, (id, _))| *id != i) {
            return Err(SmilesError::Vocabulary("ids must be contiguous from 0".into()));
        }
        Self::from_tokens(pairs.into_iter().map(|(_, t)| t).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<&str> {
        lex(s).unwrap().into_iter().map(|l| l.text).collect()
    }

    #[test]
    fn single_char_atoms() {
        let v = Vocabulary::base();
        let seq = v.encode("CCO").unwrap();
        let toks: Vec<_> = seq.ids.iter().map(|&i| v.token(i).unwrap()).collect();
        assert_eq!(toks, [BOS, "C", "C", "O", EOS]);
    }

    #[test]
    fn two_char_symbols() {
        assert_eq!(texts("CClBr"), ["C", "Cl", "Br"]);
        assert_eq!(texts("[Si](C)C[Se]"), ["[Si]", "(", "C", ")", "C", "[Se]"]);
    }

    #[test]
    fn aromatic_ring() {
        assert_eq!(texts("c1ccccc1"), ["c", "1", "c", "c", "c", "c", "c", "1"]);
    }

    #[test]
    fn bracket_and_percent() {
        assert_eq!(texts("C%12CC%12[nH+]"), ["C", "%12", "C", "C", "%12", "[nH+]"]);
    }

    #[test]
    fn unknown_token_position() {
        assert_eq!(lex("CCX").unwrap_err(), SmilesError::UnknownToken { position: 2 });
        assert_eq!(lex("C[C").unwrap_err(), SmilesError::UnknownToken { position: 1 });
        assert_eq!(lex("C*").unwrap_err(), SmilesError::UnknownToken { position: 1 });
    }

    #[test]
    fn bracket_outside_vocab() {
        let v = Vocabulary::base();
        assert_eq!(v.encode("C[NH4+]").unwrap_err(), SmilesError::UnknownToken { position: 1 });
        let v = Vocabulary::build(["C[NH4+]"]).unwrap();
        assert_eq!(v.decode(&v.encode("C[NH4+]").unwrap()), "C[NH4+]");
    }

    #[test]
    fn vocab_tsv_roundtrip() {
        let v = Vocabulary::build(["c1cc[nH]c1", "C%10CC%10"]).unwrap();
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        assert_eq!(Vocabulary::read_tsv(&buf[..]).unwrap(), v);
    }

    #[test]
    fn padding_after_eos() {
        let v = Vocabulary::base();
        let a = v.encode("C").unwrap();
        let b = v.encode("CCC").unwrap();
        let rows = v.pad_batch(&[a, b]);
        assert_eq!(rows[0], vec![BOS_ID, v.id("C").unwrap(), EOS_ID, PAD_ID, PAD_ID]);
        assert_eq!(rows[1].len(), 5);
    }
}
