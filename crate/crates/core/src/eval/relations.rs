//! Deterministic relation matcher: finds (entity, value, type) triples in a
//! summary by pairing numbers with nearby entity mentions.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::lexicon::lexicon;
use crate::data::tokenize::{sentences, tokenize_text};
use crate::data::{GameInstance, Record, NO_VALUE};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub entity: String,
    pub value: String,
    #[serde(rename = "type")]
    pub rtype: String,
}

impl Relation {
    pub fn new(
        entity: impl Into<String>,
        value: impl Into<String>,
        rtype: impl Into<String>,
    ) -> Self {
        Relation {
            entity: entity.into(),
            value: value.into(),
            rtype: rtype.into(),
        }
    }

    pub fn of_record(r: &Record) -> Self {
        Relation::new(r.entity(), r.value(), r.rtype())
    }
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.entity, self.value, self.rtype)
    }
}

/// Relations in order of first mention, without duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationSet(pub Vec<Relation>);

impl RelationSet {
    /// Keeps the first occurrence of each relation.
    pub fn from_mentions(relations: impl IntoIterator<Item = Relation>) -> Self {
        let mut seen = HashSet::new();
        RelationSet(
            relations
                .into_iter()
                .filter(|r| seen.insert(r.clone()))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Relation> {
        self.0.iter()
    }

    pub fn as_set(&self) -> HashSet<&Relation> {
        self.0.iter().collect()
    }
}

/// Integer or decimal literal, optionally negative.
pub fn is_number(token: &str) -> bool {
    let digits = token.strip_prefix('-').unwrap_or(token);
    let mut parts = digits.splitn(2, '.');
    let whole = parts.next().unwrap_or("");
    let frac_ok = parts
        .next()
        .is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()));
    !whole.is_empty() && whole.bytes().all(|b| b.is_ascii_digit()) && frac_ok
}

/// Table facts indexed for matching.
pub struct TableIndex {
    /// Mention patterns (token sequences) → entity, longest first.
    patterns: Vec<(Vec<String>, String)>,
    /// entity → value → types (sorted by lexicon rank, then name).
    values: HashMap<String, BTreeMap<String, Vec<String>>>,
    /// entity → all its types.
    types: HashMap<String, HashSet<String>>,
    facts: HashSet<Relation>,
}

impl TableIndex {
    pub fn new(records: &[Record]) -> Self {
        let lex = lexicon();
        let mut entities: Vec<String> = records.iter().map(|r| r.entity().to_string()).collect();
        entities.sort();
        entities.dedup();
        let tokenized: Vec<Vec<String>> = entities.iter().map(|e| tokenize_text(e)).collect();
        let mut surname_count: HashMap<&str, usize> = HashMap::new();
        for toks in tokenized.iter().filter(|t| t.len() > 1) {
            *surname_count
                .entry(toks.last().expect("non-empty").as_str())
                .or_default() += 1;
        }
        let full_names: HashSet<&[String]> = tokenized.iter().map(Vec::as_slice).collect();
        let mut patterns = Vec::new();
        for (entity, toks) in entities.iter().zip(&tokenized) {
            if toks.is_empty() {
                continue;
            }
            patterns.push((toks.clone(), entity.clone()));
            if toks.len() > 1 {
                let last = toks.last().expect("non-empty");
                let alone = std::slice::from_ref(last);
                if surname_count[last.as_str()] == 1 && !full_names.contains(alone) {
                    patterns.push((alone.to_vec(), entity.clone()));
                }
            }
        }
        patterns.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));

        let mut values: HashMap<String, BTreeMap<String, Vec<String>>> = HashMap::new();
        let mut types: HashMap<String, HashSet<String>> = HashMap::new();
        let mut facts = HashSet::new();
        for r in records {
            facts.insert(Relation::of_record(r));
            types
                .entry(r.entity().to_string())
                .or_default()
                .insert(r.rtype().to_string());
            values
                .entry(r.entity().to_string())
                .or_default()
                .entry(r.value().to_string())
                .or_default()
                .push(r.rtype().to_string());
        }
        for by_value in values.values_mut() {
            for ts in by_value.values_mut() {
                ts.sort_by(|a, b| {
                    lex.stat_rank(a)
                        .cmp(&lex.stat_rank(b))
                        .then_with(|| a.cmp(b))
                });
                ts.dedup();
            }
        }
        TableIndex {
            patterns,
            values,
            types,
            facts,
        }
    }

    pub fn contains(&self, relation: &Relation) -> bool {
        self.facts.contains(relation)
    }

    /// Longest mention starting at `i`: (entity, token length).
    fn mention_at(&self, tokens: &[String], i: usize) -> Option<(&str, usize)> {
        self.patterns
            .iter()
            .find(|(p, _)| tokens[i..].starts_with(p))
            .map(|(p, e)| (e.as_str(), p.len()))
    }

    fn has_type(&self, entity: &str, rtype: &str) -> bool {
        self.types.get(entity).is_some_and(|t| t.contains(rtype))
    }

    fn types_with_value(&self, entity: &str, value: &str) -> &[String] {
        self.values
            .get(entity)
            .and_then(|v| v.get(value))
            .map_or(&[], Vec::as_slice)
    }

    /// Type of `value` for `entity`, given the keyword after the number.
    fn resolve_type(&self, entity: &str, value: &str, keyword: Option<&str>) -> Option<String> {
        let lex = lexicon();
        let with_value = self.types_with_value(entity, value);
        match keyword.and_then(|k| lex.types_for_keyword(k)) {
            Some(candidates) => candidates
                .iter()
                .find(|t| with_value.contains(t))
                .or_else(|| candidates.iter().find(|t| self.has_type(entity, t)))
                .or_else(|| candidates.first())
                .cloned(),
            None => with_value.first().cloned(),
        }
    }
}

/// Relations mentioned in `summary`, matched against `table`.
///
/// Each number is paired with the nearest preceding entity mention in its
/// sentence, or failing that the nearest following one. The word after the
/// number picks the type: the first candidate type the entity has with this
/// value, else the first one it has at all, else the keyword's first type.
/// A number without a keyword is kept only if the entity has a record with
/// that value. An event keyword right after a mention yields
/// `(entity, -1, event type)`.
pub fn extract_relations(summary: &[String], table: &TableIndex) -> RelationSet {
    let lex = lexicon();
    let mut all = Vec::new();
    for sentence in sentences(summary) {
        let mut found: Vec<(usize, Relation)> = Vec::new();
        let mut mentions: Vec<(usize, &str)> = Vec::new();
        let mut numbers: Vec<usize> = Vec::new();
        let mut i = 0;
        while i < sentence.len() {
            if let Some((entity, len)) = table.mention_at(sentence, i) {
                mentions.push((i, entity));
                i += len;
                if let Some(event) = sentence.get(i).and_then(|t| lex.event_for_keyword(t)) {
                    found.push((i, Relation::new(entity, NO_VALUE, event)));
                }
                continue;
            }
            if is_number(&sentence[i]) {
                numbers.push(i);
            }
            i += 1;
        }
        for &n in &numbers {
            let owner = mentions
                .iter()
                .rev()
                .find(|(pos, _)| *pos < n)
                .or_else(|| mentions.iter().find(|(pos, _)| *pos > n));
            let Some(&(_, entity)) = owner else { continue };
            let value = &sentence[n];
            let keyword = sentence.get(n + 1).map(String::as_str);
            if let Some(rtype) = table.resolve_type(entity, value, keyword) {
                found.push((n, Relation::new(entity, value.clone(), rtype)));
            }
        }
        // events and numbers interleave by position
        found.sort_by_key(|(pos, _)| *pos);
        all.extend(found.into_iter().map(|(_, r)| r));
    }
    RelationSet::from_mentions(all)
}

/// Relations in a game's own summary.
pub fn gold_relations(game: &GameInstance) -> RelationSet {
    extract_relations(&game.summary, &TableIndex::new(&game.records))
}
