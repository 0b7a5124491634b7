use std::collections::HashMap;
use std::path::Path;

use super::corpus::{read_lines, write_lines};
use super::DataError;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

/// Surface forms of the reserved ids, in id order.
pub const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// Token/id mapping. Ids 0..4 are reserved; the rest are ordered by corpus
/// frequency (descending), ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Build from regular tokens in id order (reserved ids are prepended).
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, usize> = all.iter().cloned().zip(0..).collect();
        for tok in tokens {
            let tok = tok.into();
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(DataError::InvalidArgument(format!("invalid vocabulary entry {tok:?}")));
            }
            if index.contains_key(&tok) {
                return Err(DataError::InvalidArgument(format!("duplicate vocabulary entry {tok:?}")));
            }
            index.insert(tok.clone(), all.len());
            all.push(tok);
        }
        Ok(Self { tokens: all, index })
    }

    pub fn from_corpus<'a, I, S>(sentences: I) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for sent in sentences {
            for tok in sent {
                let tok = tok.as_ref();
                if !RESERVED.contains(&tok) {
                    *counts.entry(tok).or_default() += 1;
                }
            }
        }
        let mut entries: Vec<(&str, usize)> = counts.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Self::from_tokens(entries.into_iter().map(|(t, _)| t)).expect("corpus tokens are unique")
    }

    /// One token per line; line `k` (0-based) gets id `k + 4`.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        Self::from_tokens(read_lines(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        write_lines(path, self.tokens[RESERVED.len()..].iter())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == RESERVED.len()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Map ids back to tokens, stopping at the first end-of-sentence and
    /// dropping padding and begin-of-sentence markers.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .filter(|&&id| id != PAD && id != BOS)
            .map(|&id| self.token(id).unwrap_or(RESERVED[UNK]).to_string())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn frequency_then_lexicographic_order() {
        let corpus = [toks("b a c a"), toks("c d a")];
        let v = Vocabulary::from_corpus(corpus.iter().map(|s| s.as_slice()));
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("c"), 5);
        assert_eq!(v.id("b"), 6);
        assert_eq!(v.id("d"), 7);
        assert_eq!(v.id("zzz"), UNK);
        assert_eq!(v.len(), 8);
    }

    #[test]
    fn decode_stops_at_eos() {
        let v = Vocabulary::from_tokens(["x", "y"]).unwrap();
        assert_eq!(v.decode(&[BOS, 4, 5, EOS, 4]), vec!["x", "y"]);
        assert_eq!(v.decode(&[UNK]), vec!["<unk>"]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = Vocabulary::from_tokens(["hello", "wor@@", "ld"]).unwrap();
        v.save(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "hello\nwor@@\nld\n");
        assert_eq!(Vocabulary::load(&path).unwrap(), v);
    }

    #[test]
    fn rejects_duplicates() {
        assert!(Vocabulary::from_tokens(["a", "a"]).is_err());
        assert!(Vocabulary::from_tokens(["<s>"]).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(words in proptest::collection::vec("[a-e]{1,3}", 1..20)) {
            let v = Vocabulary::from_corpus(std::iter::once(words.as_slice()));
            let ids = v.encode(&words);
            prop_assert!(ids.iter().all(|&i| i != UNK));
            prop_assert_eq!(v.decode(&ids), words);
        }
    }
}
