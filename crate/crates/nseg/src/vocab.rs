//! Token vocabularies with stable, insertion-ordered ids.
//!
//! Ids double as embedding-table row indices, so iteration order must be
//! reproducible across runs: tokens live in a `Vec` and the map is only
//! used for lookup, never iterated.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Unknown-token symbol; always present at id 0 in vocabularies built here.
pub const UNK: &str = "<unk>";
/// Sentence-start padding symbol.
pub const BOS: &str = "<s>";
/// Sentence-end padding symbol.
pub const EOS: &str = "</s>";

/// An ordered token set with occurrence counts from the building corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Vocab::default()
    }

    /// A vocabulary seeded with `<unk>`, `<s>` and `</s>`.
    pub fn with_specials() -> Self {
        let mut v = Vocab::new();
        v.add(UNK);
        v.add(BOS);
        v.add(EOS);
        v
    }

    /// Inserts a token if absent; returns its id either way. Counts one
    /// occurrence.
    pub fn add(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            self.counts[id] += 1;
            return id;
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.counts.push(1);
        self.index.insert(token.to_string(), id);
        id
    }

    /// Rebuilds a vocabulary from a serialized token list. Counts are not
    /// persisted; they only matter while training.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), id).is_some() {
                return Err(Error::invalid_argument(format!(
                    "duplicate token `{t}` in vocabulary"
                )));
            }
        }
        let counts = vec![0; tokens.len()];
        Ok(Vocab {
            tokens,
            counts,
            index,
        })
    }

    /// Counts one occurrence of an already-known token; unknown tokens
    /// are left out. Restores singleton statistics over a new corpus
    /// after `from_tokens`.
    pub fn bump(&mut self, token: &str) -> Option<usize> {
        let id = self.get(token)?;
        self.counts[id] += 1;
        Some(id)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, falling back to the `<unk>` row.
    pub fn get_or_unk(&self, token: &str) -> usize {
        self.get(token)
            .or_else(|| self.get(UNK))
            .expect("vocabulary has no <unk> entry")
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Occurrence count recorded while building (0 for deserialized vocabs).
    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    /// True when the token was seen exactly once while building. Specials
    /// inserted via [`Vocab::with_specials`] count as seen once, so callers
    /// should not feed special ids here.
    pub fn is_singleton(&self, id: usize) -> bool {
        self.counts[id] == 1
    }
}

/// Character-bigram key: the two characters concatenated.
pub fn bigram_key(a: char, b: char) -> String {
    let mut s = String::with_capacity(8);
    s.push(a);
    s.push(b);
    s
}

/// Bigram key where either side may be a padding token.
pub fn bigram_key_str(a: &str, b: &str) -> String {
    format!("{a}{b}")
}
