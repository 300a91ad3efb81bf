use std::collections::HashMap;
use std::sync::OnceLock;

/// Inning words used by the baseball grammar and templates.
pub const ORDINALS: [&str; 9] = [
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth",
];

pub fn ordinal(inning: usize) -> Option<&'static str> {
    inning.checked_sub(1).and_then(|i| ORDINALS.get(i)).copied()
}

const LEXICON_TSV: &str = include_str!("../../resources/lexicon.tsv");

/// Keyword tables mapping record types to the words that verbalise them.
#[derive(Debug)]
pub struct Lexicon {
    stat_order: Vec<String>,
    stat_words: HashMap<String, Vec<String>>,
    keyword_types: HashMap<String, Vec<String>>,
    event_words: HashMap<String, String>,
    event_types: HashMap<String, String>,
}

impl Lexicon {
    fn parse(text: &str) -> Lexicon {
        let mut lex = Lexicon {
            stat_order: Vec::new(),
            stat_words: HashMap::new(),
            keyword_types: HashMap::new(),
            event_words: HashMap::new(),
            event_types: HashMap::new(),
        };
        for line in text.lines() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            assert_eq!(cols.len(), 3, "bad lexicon line {line:?}");
            match cols[0] {
                "stat" => {
                    let words: Vec<String> = cols[2].split(',').map(str::to_string).collect();
                    for w in &words {
                        lex.keyword_types
                            .entry(w.to_lowercase())
                            .or_default()
                            .push(cols[1].to_string());
                    }
                    lex.stat_order.push(cols[1].to_string());
                    lex.stat_words.insert(cols[1].to_string(), words);
                }
                "event" => {
                    lex.event_words
                        .insert(cols[2].to_lowercase(), cols[1].to_string());
                    lex.event_types
                        .insert(cols[1].to_string(), cols[2].to_string());
                }
                other => panic!("unknown lexicon entry kind {other:?}"),
            }
        }
        lex
    }

    /// Candidate record types for a keyword, in lexicon order.
    pub fn types_for_keyword(&self, word: &str) -> Option<&[String]> {
        self.keyword_types
            .get(&word.to_lowercase())
            .map(Vec::as_slice)
    }

    /// The word generators use after a value of this type.
    pub fn stat_word(&self, rtype: &str) -> Option<&str> {
        self.stat_words
            .get(rtype)
            .and_then(|w| w.first())
            .map(String::as_str)
    }

    pub fn event_for_keyword(&self, word: &str) -> Option<&str> {
        self.event_words
            .get(&word.to_lowercase())
            .map(String::as_str)
    }

    pub fn event_word(&self, event_type: &str) -> Option<&str> {
        self.event_types.get(event_type).map(String::as_str)
    }

    pub fn is_event_type(&self, rtype: &str) -> bool {
        self.event_types.contains_key(rtype)
    }

    /// Position of a stat type in the lexicon; unknown types sort last.
    pub fn stat_rank(&self, rtype: &str) -> usize {
        self.stat_order
            .iter()
            .position(|t| t == rtype)
            .unwrap_or(usize::MAX)
    }
}

pub fn lexicon() -> &'static Lexicon {
    static LEXICON: OnceLock<Lexicon> = OnceLock::new();
    LEXICON.get_or_init(|| Lexicon::parse(LEXICON_TSV))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_keywords_list_every_type() {
        let lex = lexicon();
        assert_eq!(
            lex.types_for_keyword("hits").unwrap(),
            ["H", "P_H", "TEAM-H"]
        );
        assert_eq!(
            lex.types_for_keyword("Points").unwrap(),
            ["PTS", "TEAM-PTS"]
        );
        assert_eq!(lex.event_for_keyword("homered"), Some("home-run-batter"));
        assert_eq!(lex.stat_word("P_IP"), Some("innings"));
        assert!(lex.stat_rank("PTS") < lex.stat_rank("REB"));
    }
}
