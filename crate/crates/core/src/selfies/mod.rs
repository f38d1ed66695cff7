//! SELFIES tokens, valence-constrained decoding, encoding and STONED-style
//! mutation.

mod alphabet;
mod decode;
mod encode;
mod stoned;

pub use alphabet::{Alphabet, AlphabetError, BASELINE_TOKENS, END_ID, PAD_ID, START_ID};
pub use decode::decode;
pub use encode::encode;
pub use stoned::{mutate, stoned_expand, StonedOutcome};

use std::fmt;

use thiserror::Error;

use crate::molgraph::{bonding_capacity, Element};

pub const DEFAULT_MAX_LEN: usize = 96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Atom {
        /// bond order into this atom, 1..=3
        bond: u8,
        element: Element,
        charge: i8,
        /// `None` for organic-subset tokens such as `[C]`
        h: Option<u8>,
    },
    Branch {
        order: u8,
        /// number of index symbols that follow
        len: u8,
    },
    Ring {
        order: u8,
        len: u8,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SelfiesToken {
    text: String,
    kind: TokenKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelfiesError {
    #[error("malformed token at byte {offset}: {reason}")]
    MalformedToken { offset: usize, reason: String },
    #[error("no atom could be realised from the token sequence")]
    EmptyResult,
    #[error("graph must be a single connected component")]
    DisconnectedGraph,
    #[error("cannot encode an empty graph")]
    EmptyGraph,
    #[error("atom {atom} exceeds the SELFIES bonding capacity of its token")]
    CapacityExceeded { atom: usize },
    #[error("aromatic system has no Kekulé structure")]
    Kekulization,
}

fn bond_char(order: u8) -> &'static str {
    match order {
        2 => "=",
        3 => "#",
        _ => "",
    }
}

impl SelfiesToken {
    pub fn parse(text: &str) -> Result<SelfiesToken, String> {
        let kind = parse_kind(text)?;
        Ok(SelfiesToken {
            text: text.to_string(),
            kind,
        })
    }

    pub fn atom(bond: u8, element: Element, charge: i8, h: Option<u8>) -> SelfiesToken {
        let mut text = String::from("[");
        text.push_str(bond_char(bond));
        text.push_str(element.symbol());
        match (h, charge) {
            (None, 0) => {}
            (Some(0), 0) => text.push_str("H0"),
            (h, q) => {
                if let Some(h @ 1..) = h {
                    text.push_str(&format!("H{h}"));
                }
                if q != 0 {
                    text.push_str(&format!("{q:+}"));
                }
            }
        }
        text.push(']');
        SelfiesToken::parse(&text).expect("constructed atom token is well formed")
    }

    pub fn branch(order: u8, len: u8) -> SelfiesToken {
        SelfiesToken {
            text: format!("[{}Branch{}]", bond_char(order), len),
            kind: TokenKind::Branch { order, len },
        }
    }

    pub fn ring(order: u8, len: u8) -> SelfiesToken {
        SelfiesToken {
            text: format!("[{}Ring{}]", bond_char(order), len),
            kind: TokenKind::Ring { order, len },
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }

    /// Value of this token when read as a base-16 index digit.
    pub fn index_value(&self) -> usize {
        INDEX_ALPHABET
            .iter()
            .position(|&t| t == self.text)
            .unwrap_or(0)
    }

    /// Bond capacity of an atom token; 0 for branch and ring tokens.
    pub fn capacity(&self) -> i32 {
        match self.kind {
            TokenKind::Atom {
                element, charge, h, ..
            } => bonding_capacity(element, charge) as i32 - h.unwrap_or(0) as i32,
            _ => 0,
        }
    }
}

impl fmt::Display for SelfiesToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Index digits, in value order.
pub const INDEX_ALPHABET: [&str; 16] = [
    "[C]", "[Ring1]", "[Ring2]", "[Branch1]", "[=Branch1]", "[#Branch1]", "[Branch2]",
    "[=Branch2]", "[#Branch2]", "[O]", "[N]", "[=N]", "[=C]", "[#C]", "[S]", "[P]",
];

pub fn index_tokens(mut value: usize) -> Vec<SelfiesToken> {
    if value == 0 {
        return vec![SelfiesToken::parse(INDEX_ALPHABET[0]).expect("valid")];
    }
    let mut digits = Vec::new();
    while value > 0 {
        digits.push(value % 16);
        value /= 16;
    }
    digits
        .into_iter()
        .rev()
        .map(|d| SelfiesToken::parse(INDEX_ALPHABET[d]).expect("valid"))
        .collect()
}

fn parse_bond_prefix(body: &str) -> (u8, &str) {
    match body.as_bytes().first() {
        Some(b'=') => (2, &body[1..]),
        Some(b'#') => (3, &body[1..]),
        _ => (1, body),
    }
}

fn parse_kind(text: &str) -> Result<TokenKind, String> {
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| "token must be enclosed in brackets".to_string())?;
    if inner.contains('[') || inner.contains(']') {
        return Err("nested bracket".into());
    }
    let (order, rest) = parse_bond_prefix(inner);
    for (prefix, is_branch) in [("Branch", true), ("Ring", false)] {
        if let Some(n) = rest.strip_prefix(prefix) {
            let len = match n {
                "1" => 1,
                "2" => 2,
                "3" => 3,
                _ => return Err(format!("bad {prefix} length '{n}'")),
            };
            return Ok(if is_branch {
                TokenKind::Branch { order, len }
            } else {
                TokenKind::Ring { order, len }
            });
        }
    }
    let b = rest.as_bytes();
    if b.is_empty() || !b[0].is_ascii_uppercase() {
        return Err(format!("expected element symbol in '{text}'"));
    }
    let sym_len = if b.len() > 1 && b[1].is_ascii_lowercase() { 2 } else { 1 };
    let sym = &rest[..sym_len];
    let element = Element::from_symbol(sym).ok_or_else(|| format!("unknown element '{sym}'"))?;
    let mut tail = &rest[sym_len..];
    let mut h: Option<u8> = None;
    if let Some(t) = tail.strip_prefix('H') {
        let d = t.as_bytes().first().filter(|c| c.is_ascii_digit()).ok_or("H count needs a digit")?;
        h = Some(d - b'0');
        tail = &t[1..];
    }
    let mut charge: i8 = 0;
    if let Some(sign) = tail.chars().next().filter(|c| *c == '+' || *c == '-') {
        let digits = &tail[1..];
        let q: i8 = digits
            .parse()
            .ok()
            .filter(|&q: &i8| (1..=2).contains(&q))
            .ok_or_else(|| format!("bad charge '{tail}'"))?;
        charge = if sign == '+' { q } else { -q };
        tail = "";
    }
    if !tail.is_empty() {
        return Err(format!("unexpected '{tail}' in '{text}'"));
    }
    let h = if h.is_none() && charge == 0 { None } else { Some(h.unwrap_or(0)) };
    if (bonding_capacity(element, charge) as i32) < h.unwrap_or(0) as i32 {
        return Err(format!("too many hydrogens in '{text}'"));
    }
    Ok(TokenKind::Atom {
        bond: order,
        element,
        charge,
        h,
    })
}

/// Splits concatenated bracket tokens. Concatenating the token texts gives
/// back the input.
pub fn tokenize(text: &str) -> Result<Vec<SelfiesToken>, SelfiesError> {
    let mut out = Vec::new();
    let mut pos = 0;
    let bytes = text.as_bytes();
    while pos < bytes.len() {
        if bytes[pos] != b'[' {
            return Err(SelfiesError::MalformedToken {
                offset: pos,
                reason: "expected '['".into(),
            });
        }
        let end = text[pos..].find(']').map(|e| pos + e + 1).ok_or(SelfiesError::MalformedToken {
            offset: pos,
            reason: "unterminated token".into(),
        })?;
        let tok = SelfiesToken::parse(&text[pos..end])
            .map_err(|reason| SelfiesError::MalformedToken { offset: pos, reason })?;
        out.push(tok);
        pos = end;
    }
    Ok(out)
}

pub fn to_text(tokens: &[SelfiesToken]) -> String {
    tokens.iter().map(|t| t.text()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("[C][C]").unwrap().len(), 2);
        assert!(tokenize("").unwrap().is_empty());
        assert!(matches!(
            tokenize("[C][X]"),
            Err(SelfiesError::MalformedToken { offset: 3, .. })
        ));
        assert!(tokenize("[C]C").is_err());
        assert!(tokenize("[C").is_err());
        assert!(tokenize("[CH5]").is_err());
    }

    #[test]
    fn tokenize_is_lossless() {
        let s = "[C][=Branch1][C][=O][N+1][NH1+1][O-1][Ring1][Ring2][#C][Cl][Br]";
        assert_eq!(to_text(&tokenize(s).unwrap()), s);
    }

    #[test]
    fn token_kinds() {
        let t = SelfiesToken::parse("[=N+1]").unwrap();
        assert_eq!(
            t.kind(),
            TokenKind::Atom {
                bond: 2,
                element: Element::N,
                charge: 1,
                h: Some(0)
            }
        );
        assert_eq!(t.capacity(), 4);
        assert_eq!(SelfiesToken::parse("[N]").unwrap().capacity(), 3);
        assert_eq!(SelfiesToken::parse("[NH1]").unwrap().capacity(), 2);
        assert_eq!(
            SelfiesToken::parse("[#Branch2]").unwrap().kind(),
            TokenKind::Branch { order: 3, len: 2 }
        );
    }

    #[test]
    fn constructors_match_parse() {
        for (tok, text) in [
            (SelfiesToken::atom(1, Element::C, 0, None), "[C]"),
            (SelfiesToken::atom(2, Element::O, 0, None), "[=O]"),
            (SelfiesToken::atom(1, Element::N, 1, Some(1)), "[NH1+1]"),
            (SelfiesToken::atom(1, Element::O, -1, Some(0)), "[O-1]"),
            (SelfiesToken::atom(1, Element::C, 0, Some(1)), "[CH1]"),
            (SelfiesToken::branch(2, 1), "[=Branch1]"),
            (SelfiesToken::ring(1, 2), "[Ring2]"),
        ] {
            assert_eq!(tok.text(), text);
            assert_eq!(tok, SelfiesToken::parse(text).unwrap(), "{text}");
        }
    }

    #[test]
    fn index_round_trip() {
        for v in [0usize, 1, 15, 16, 17, 255, 256, 4095] {
            let toks = index_tokens(v);
            let back = toks.iter().fold(0, |acc, t| acc * 16 + t.index_value());
            assert_eq!(back, v);
        }
    }
}
