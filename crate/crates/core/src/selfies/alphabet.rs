use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::SelfiesToken;

pub const PAD_ID: usize = 0;
pub const START_ID: usize = 1;
pub const END_ID: usize = 2;
const RESERVED: [&str; 3] = ["<pad>", "<start>", "<end>"];

/// Tokens always present in a generation alphabet.
pub const BASELINE_TOKENS: [&str; 14] = [
    "[C]", "[=C]", "[N]", "[=N]", "[O]", "[=O]", "[F]", "[S]", "[Cl]", "[Br]", "[Branch1]",
    "[=Branch1]", "[Ring1]", "[Ring2]",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("token '{0}' is not in the alphabet")]
    UnknownToken(String),
    #[error("token id {0} is out of range")]
    UnknownId(usize),
    #[error("invalid alphabet entry '{0}': {1}")]
    InvalidEntry(String, String),
}

/// Dense token ids. Ids 0..3 are PAD, START and END; SELFIES tokens follow
/// in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    tokens: Vec<SelfiesToken>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    pub fn new<'a>(corpus: impl IntoIterator<Item = &'a SelfiesToken>) -> Alphabet {
        let mut set: BTreeSet<String> = BASELINE_TOKENS.iter().map(|s| s.to_string()).collect();
        set.extend(corpus.into_iter().map(|t| t.text().to_string()));
        let tokens: Vec<SelfiesToken> = set
            .iter()
            .map(|t| SelfiesToken::parse(t).expect("alphabet tokens are parsed tokens"))
            .collect();
        Self::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<SelfiesToken>) -> Alphabet {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.text().to_string(), i + RESERVED.len()))
            .collect();
        Alphabet { tokens, index }
    }

    /// Rebuilds an alphabet from its id-ordered listing (as produced by
    /// `listing`).
    pub fn from_listing(listing: &[String]) -> Result<Alphabet, AlphabetError> {
        if listing.len() < RESERVED.len()
            || listing[..RESERVED.len()].iter().zip(RESERVED).any(|(a, b)| a != b)
        {
            return Err(AlphabetError::InvalidEntry(
                listing.first().cloned().unwrap_or_default(),
                "reserved ids missing".into(),
            ));
        }
        let tokens = listing[RESERVED.len()..]
            .iter()
            .map(|t| SelfiesToken::parse(t).map_err(|e| AlphabetError::InvalidEntry(t.clone(), e)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_tokens(tokens))
    }

    pub fn listing(&self) -> Vec<String> {
        RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(self.tokens.iter().map(|t| t.text().to_string()))
            .collect()
    }

    /// Vocabulary size including the reserved ids.
    pub fn len(&self) -> usize {
        self.tokens.len() + RESERVED.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Generation tokens only.
    pub fn tokens(&self) -> &[SelfiesToken] {
        &self.tokens
    }

    pub fn id(&self, token: &SelfiesToken) -> Result<usize, AlphabetError> {
        self.index
            .get(token.text())
            .copied()
            .ok_or_else(|| AlphabetError::UnknownToken(token.text().to_string()))
    }

    pub fn token(&self, id: usize) -> Result<&SelfiesToken, AlphabetError> {
        id.checked_sub(RESERVED.len())
            .and_then(|k| self.tokens.get(k))
            .ok_or(AlphabetError::UnknownId(id))
    }

    pub fn encode_ids(&self, tokens: &[SelfiesToken]) -> Result<Vec<usize>, AlphabetError> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Maps ids back to tokens, skipping reserved ids.
    pub fn decode_ids(&self, ids: &[usize]) -> Vec<SelfiesToken> {
        ids.iter().filter_map(|&i| self.token(i).ok()).cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selfies::tokenize;

    #[test]
    fn ids_are_dense_with_reserved_prefix() {
        let corpus = tokenize("[C][#N][P]").unwrap();
        let a = Alphabet::new(&corpus);
        assert_eq!(a.len(), 3 + 16);
        let listing = a.listing();
        assert_eq!(listing[PAD_ID], "<pad>");
        assert_eq!(listing[START_ID], "<start>");
        assert_eq!(listing[END_ID], "<end>");
        for (id, t) in listing.iter().enumerate().skip(3) {
            assert_eq!(a.token(id).unwrap().text(), t);
            assert_eq!(a.id(a.token(id).unwrap()).unwrap(), id);
        }
        assert_eq!(Alphabet::from_listing(&listing).unwrap(), a);
        assert!(a.token(PAD_ID).is_err());
    }
}
