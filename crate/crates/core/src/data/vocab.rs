use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::schema::{Dataset, GameInstance};
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Token/id bijection with ids 0..4 reserved for pad, unknown, begin and end.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_counts(&BTreeMap::new(), 1)
    }
}

impl Vocabulary {
    /// Keeps tokens seen at least `min_count` times; ids by (count desc, token asc).
    pub fn from_counts(counts: &BTreeMap<String, u64>, min_count: u64) -> Self {
        let mut kept: Vec<(&String, u64)> = counts
            .iter()
            .filter(|(t, &c)| c >= min_count && !RESERVED.contains(&t.as_str()))
            .map(|(t, &c)| (t, c))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut freq = vec![0; RESERVED.len()];
        for (t, c) in kept {
            tokens.push(t.clone());
            freq.push(c);
        }
        Self::from_parts(tokens, freq)
    }

    fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            tokens,
            counts,
            index,
        }
    }

    pub fn from_tokens<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>, min_count: u64) -> Self {
        let mut counts = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.as_ref().to_string()).or_insert(0) += 1;
        }
        Self::from_counts(&counts, min_count)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or the unknown id.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(RESERVED[UNK], String::as_str)
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, (t, c)) in self.tokens.iter().zip(&self.counts).enumerate() {
            let _ = writeln!(out, "{t}\t{i}\t{c}");
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let bad = || Error::Parse {
                index: line_no,
                message: format!("bad vocabulary row {line:?}"),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            let [token, id, count] = cols[..] else {
                return Err(bad());
            };
            let id: usize = id.parse().map_err(|_| bad())?;
            if id != tokens.len() {
                return Err(Error::Parse {
                    index: line_no,
                    message: format!("expected id {}, got {id}", tokens.len()),
                });
            }
            tokens.push(token.to_string());
            counts.push(count.parse().map_err(|_| bad())?);
        }
        if tokens.len() < RESERVED.len() || tokens.iter().zip(RESERVED).any(|(t, r)| t != r) {
            return Err(Error::Schema(
                "vocabulary must start with the reserved tokens".into(),
            ));
        }
        Ok(Self::from_parts(tokens, counts))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tsv(&std::fs::read_to_string(path)?)
    }
}

/// Output-word vocabulary plus one vocabulary per record feature role.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabularies {
    pub words: Vocabulary,
    pub features: Vec<Vocabulary>,
}

pub fn build_vocab_from(
    games: &[GameInstance],
    num_features: usize,
    min_count: u64,
) -> Vocabularies {
    let mut words = BTreeMap::new();
    let mut features = vec![BTreeMap::new(); num_features];
    for game in games {
        for t in &game.summary {
            *words.entry(t.clone()).or_insert(0u64) += 1;
        }
        for rec in &game.records {
            for (role, f) in rec.features.iter().enumerate().take(num_features) {
                *features[role].entry(f.clone()).or_insert(0u64) += 1;
            }
        }
    }
    Vocabularies {
        words: Vocabulary::from_counts(&words, min_count),
        // record features always keep singletons: they are looked up, not predicted
        features: features
            .iter()
            .map(|c| Vocabulary::from_counts(c, 1))
            .collect(),
    }
}

/// Builds vocabularies from the training split.
pub fn build_vocab(dataset: &Dataset, min_count: u64) -> Vocabularies {
    build_vocab_from(&dataset.train, dataset.schema.num_features(), min_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_corpus_min_count_one() {
        let v = Vocabulary::from_tokens(["a", "a", "b"], 1);
        assert_eq!(v.len(), 6);
        assert_eq!(v.get("a"), Some(4));
        assert_eq!(v.get("b"), Some(5));
    }

    #[test]
    fn threshold_maps_rare_to_unknown() {
        let v = Vocabulary::from_tokens(["a", "a", "b"], 2);
        assert_eq!(v.len(), 5);
        assert_eq!(v.id("b"), UNK);
        assert_eq!(v.token(UNK), "<unk>");
    }

    #[test]
    fn ties_broken_by_token() {
        let v = Vocabulary::from_tokens(["z", "y", "x", "x"], 1);
        assert_eq!(&v.tokens()[4..], ["x", "y", "z"]);
    }

    #[test]
    fn tsv_round_trip() {
        let v = Vocabulary::from_tokens(["a", "a", "b", "c"], 1);
        let back = Vocabulary::from_tsv(&v.to_tsv()).unwrap();
        assert_eq!(v, back);
        assert_eq!(back.count(back.id("a")), 2);
        assert!(Vocabulary::from_tsv("a\t0\t1\n").is_err());
    }
}
