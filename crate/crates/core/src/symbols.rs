//! Alphabets, encoded symbol sequences and sequence files.
//!
//! Symbols are stored as `u8` codes `0..m` assigned in declaration order.
//! Two file layouts are supported: `chars` (one character per symbol,
//! whitespace ignored) and `csv-int` (decimal codes separated by commas or
//! line breaks).

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest alphabet representable with `u8` codes.
pub const MAX_ALPHABET_SIZE: usize = 256;

#[derive(Debug, Error)]
pub enum SymbolError {
    #[error("alphabet needs at least 2 symbols, got {0}")]
    TooFewSymbols(usize),

    #[error("alphabet has more than {MAX_ALPHABET_SIZE} symbols")]
    TooManySymbols,

    #[error("duplicate symbol {0:?} in alphabet")]
    Duplicate(char),

    #[error("unknown symbol {symbol:?} at byte offset {offset}")]
    UnknownSymbol { symbol: char, offset: usize },

    #[error("code {code} out of range for alphabet of size {m} (token {index})")]
    CodeOutOfRange { code: u64, m: usize, index: usize },

    #[error("malformed integer {token:?} (token {index})")]
    BadInteger { token: String, index: usize },

    #[error("unknown sequence format {0:?} (expected chars or csv-int)")]
    UnknownFormat(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// An ordered set of distinct single-character symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn new(symbols: Vec<char>) -> Result<Self, SymbolError> {
        if symbols.len() < 2 {
            return Err(SymbolError::TooFewSymbols(symbols.len()));
        }
        if symbols.len() > MAX_ALPHABET_SIZE {
            return Err(SymbolError::TooManySymbols);
        }
        for (i, c) in symbols.iter().enumerate() {
            if symbols[..i].contains(c) {
                return Err(SymbolError::Duplicate(*c));
            }
        }
        Ok(Self { symbols })
    }

    /// The binary alphabet `01`.
    pub fn binary() -> Self {
        Self {
            symbols: vec!['0', '1'],
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn code_of(&self, c: char) -> Option<u8> {
        self.symbols.iter().position(|&s| s == c).map(|i| i as u8)
    }

    /// Panics if `code` is not below `len()`.
    pub fn symbol(&self, code: u8) -> char {
        self.symbols[code as usize]
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u8>, SymbolError> {
        let mut codes = Vec::with_capacity(text.len());
        for (offset, c) in text.char_indices() {
            if c.is_whitespace() {
                continue;
            }
            match self.code_of(c) {
                Some(code) => codes.push(code),
                None => return Err(SymbolError::UnknownSymbol { symbol: c, offset }),
            }
        }
        Ok(codes)
    }

    pub fn decode(&self, codes: &[u8]) -> String {
        codes.iter().map(|&c| self.symbol(c)).collect()
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.symbols {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Alphabet {
    type Err = SymbolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_alphabet(s)
    }
}

/// Parses an alphabet declaration such as `"01"` or `"acgt"`.
pub fn parse_alphabet(spec: &str) -> Result<Alphabet, SymbolError> {
    Alphabet::new(spec.chars().collect())
}

/// A sequence of symbol codes over a fixed alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    codes: Vec<u8>,
    alphabet: Alphabet,
}

impl Sequence {
    pub fn new(codes: Vec<u8>, alphabet: Alphabet) -> Result<Self, SymbolError> {
        let m = alphabet.len();
        if let Some((index, &code)) = codes.iter().enumerate().find(|(_, &c)| c as usize >= m) {
            return Err(SymbolError::CodeOutOfRange {
                code: code as u64,
                m,
                index,
            });
        }
        Ok(Self { codes, alphabet })
    }

    pub fn from_text(text: &str, alphabet: Alphabet) -> Result<Self, SymbolError> {
        let codes = alphabet.encode(text)?;
        Ok(Self { codes, alphabet })
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn to_text(&self) -> String {
        self.alphabet.decode(&self.codes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceFormat {
    #[default]
    Chars,
    CsvInt,
}

impl FromStr for SequenceFormat {
    type Err = SymbolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chars" => Ok(Self::Chars),
            "csv-int" => Ok(Self::CsvInt),
            other => Err(SymbolError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for SequenceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Chars => "chars",
            Self::CsvInt => "csv-int",
        })
    }
}

/// Decodes sequence text already read into memory.
pub fn parse_sequence(
    text: &str,
    alphabet: &Alphabet,
    format: SequenceFormat,
) -> Result<Sequence, SymbolError> {
    match format {
        SequenceFormat::Chars => Sequence::from_text(text, alphabet.clone()),
        SequenceFormat::CsvInt => {
            let m = alphabet.len();
            let mut codes = Vec::new();
            let tokens = text
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty());
            for (index, token) in tokens.enumerate() {
                let code: u64 = token.parse().map_err(|_| SymbolError::BadInteger {
                    token: token.to_string(),
                    index,
                })?;
                if code >= m as u64 {
                    return Err(SymbolError::CodeOutOfRange { code, m, index });
                }
                codes.push(code as u8);
            }
            Ok(Sequence {
                codes,
                alphabet: alphabet.clone(),
            })
        }
    }
}

pub fn load_sequence(
    path: &Path,
    alphabet: &Alphabet,
    format: SequenceFormat,
) -> Result<Sequence, SymbolError> {
    let text = fs::read_to_string(path).map_err(|source| SymbolError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_sequence(&text, alphabet, format)
}

/// Writes the sequence in `chars` layout with no trailing newline.
pub fn write_sequence(seq: &Sequence, path: &Path) -> Result<(), SymbolError> {
    fs::write(path, seq.to_text()).map_err(|source| SymbolError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_alphabet_is_identity() {
        let a = parse_alphabet("01").unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.code_of('0'), Some(0));
        assert_eq!(a.code_of('1'), Some(1));
    }

    #[test]
    fn codes_follow_declaration_order() {
        let a = parse_alphabet("acgt").unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a.code_of('g'), Some(2));
        assert_eq!(a.symbol(3), 't');
    }

    #[test]
    fn rejects_bad_alphabets() {
        assert!(matches!(parse_alphabet("00"), Err(SymbolError::Duplicate('0'))));
        assert!(matches!(parse_alphabet("a"), Err(SymbolError::TooFewSymbols(1))));
        assert!(matches!(parse_alphabet(""), Err(SymbolError::TooFewSymbols(0))));
    }

    #[test]
    fn load_chars_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.txt");
        fs::write(&p, "01011").unwrap();
        let s = load_sequence(&p, &Alphabet::binary(), SequenceFormat::Chars).unwrap();
        assert_eq!(s.codes(), &[0, 1, 0, 1, 1]);

        fs::write(&p, "0,1,2").unwrap();
        let abc = parse_alphabet("abc").unwrap();
        let s = load_sequence(&p, &abc, SequenceFormat::CsvInt).unwrap();
        assert_eq!(s.codes(), &[0, 1, 2]);
    }

    #[test]
    fn chars_mode_ignores_whitespace() {
        let s = parse_sequence("01\n 1 0\r\n", &Alphabet::binary(), SequenceFormat::Chars).unwrap();
        assert_eq!(s.codes(), &[0, 1, 1, 0]);
    }

    #[test]
    fn unknown_symbol_reports_offset() {
        let err = parse_sequence("012", &Alphabet::binary(), SequenceFormat::Chars).unwrap_err();
        match err {
            SymbolError::UnknownSymbol { symbol, offset } => {
                assert_eq!(symbol, '2');
                assert_eq!(offset, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_out_of_range() {
        let err = parse_sequence("0,1\n2", &Alphabet::binary(), SequenceFormat::CsvInt).unwrap_err();
        assert!(matches!(err, SymbolError::CodeOutOfRange { code: 2, index: 2, .. }));
        let err = parse_sequence("0,x", &Alphabet::binary(), SequenceFormat::CsvInt).unwrap_err();
        assert!(matches!(err, SymbolError::BadInteger { .. }));
    }

    #[test]
    fn write_small_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        let s = Sequence::new(vec![0, 1, 1], Alphabet::binary()).unwrap();
        write_sequence(&s, &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "011");

        let empty = Sequence::new(vec![], Alphabet::binary()).unwrap();
        write_sequence(&empty, &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "");
        let back = load_sequence(&p, &Alphabet::binary(), SequenceFormat::Chars).unwrap();
        assert!(back.is_empty());
    }

    proptest! {
        #[test]
        fn write_then_load_round_trips(codes in proptest::collection::vec(0u8..4, 0..1000)) {
            let alphabet = parse_alphabet("acgt").unwrap();
            let seq = Sequence::new(codes, alphabet.clone()).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.txt");
            write_sequence(&seq, &p).unwrap();
            let back = load_sequence(&p, &alphabet, SequenceFormat::Chars).unwrap();
            prop_assert_eq!(back, seq);
        }
    }
}
