//! Summary tokenizer.
//!
//! Whitespace split, then leading/trailing punctuation peeled off, possessive
//! `'s` split, and hyphen runs separated. Single-letter initials (`C.`) and
//! dotted abbreviations (`U.S.`) keep their periods; decimals stay intact.
//! Sentences containing a quotation mark are dropped, as is everything from a
//! trailing "Game notes" section on.

const LEADING: &[char] = &['(', '[', '{', '"', '\u{201c}', '\u{2018}'];
const TRAILING: &[char] = &[
    ',', ';', ':', '!', '?', ')', ']', '}', '"', '\u{201d}', '\u{2019}', '.',
];
const SENTENCE_END: &[&str] = &[".", "!", "?"];

fn is_abbreviation(s: &str) -> bool {
    // C.  U.S.  a.m.
    let b = s.as_bytes();
    !b.is_empty()
        && b.len().is_multiple_of(2)
        && b.chunks(2)
            .all(|p| p[0].is_ascii_alphabetic() && p[1] == b'.')
}

fn split_hyphens(core: &str, out: &mut Vec<String>) {
    let mut rest = core;
    // keep a leading minus sign on numbers such as -1
    if rest.len() > 1
        && rest.starts_with('-')
        && rest[1..].starts_with(|c: char| c.is_ascii_digit())
    {
        let end = rest[1..].find('-').map_or(rest.len(), |i| i + 1);
        out.push(rest[..end].to_string());
        rest = &rest[end..];
    }
    while !rest.is_empty() {
        let hyphens = rest.starts_with('-');
        let end = rest
            .find(|c: char| (c == '-') != hyphens)
            .unwrap_or(rest.len());
        out.push(rest[..end].to_string());
        rest = &rest[end..];
    }
}

fn tokenize_chunk(chunk: &str, out: &mut Vec<String>) {
    let mut core = chunk;
    while let Some(c) = core.chars().next().filter(|c| LEADING.contains(c)) {
        out.push(c.to_string());
        core = &core[c.len_utf8()..];
    }
    let mut trailing = Vec::new();
    while let Some(c) = core.chars().next_back().filter(|c| TRAILING.contains(c)) {
        if c == '.' && is_abbreviation(core) {
            break;
        }
        trailing.push(c.to_string());
        core = &core[..core.len() - c.len_utf8()];
    }
    let mut possessive = None;
    for suffix in ["'s", "\u{2019}s", "'"] {
        if core.len() > suffix.len() && core.ends_with(suffix) {
            possessive = Some(suffix);
            core = &core[..core.len() - suffix.len()];
            break;
        }
    }
    split_hyphens(core, out);
    out.extend(possessive.map(str::to_string));
    out.extend(trailing.into_iter().rev());
}

/// Tokenizes free text with no sentence filtering.
pub fn tokenize_text(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        tokenize_chunk(chunk, &mut out);
    }
    out
}

fn is_quote(token: &str) -> bool {
    token.contains("``") || token.contains("''") || token.contains(['"', '\u{201c}', '\u{201d}'])
}

/// Splits a token stream into sentences ending at `.`, `!` or `?`.
pub fn sentences(tokens: &[String]) -> Vec<&[String]> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if SENTENCE_END.contains(&t.as_str()) {
            out.push(&tokens[start..=i]);
            start = i + 1;
        }
    }
    if start < tokens.len() {
        out.push(&tokens[start..]);
    }
    out
}

pub fn tokenize_summary(text: &str) -> Vec<String> {
    let text = text.find("Game notes").map_or(text, |i| &text[..i]);
    let tokens = tokenize_text(text);
    sentences(&tokens)
        .into_iter()
        .filter(|s| !s.iter().any(|t| is_quote(t)))
        .flatten()
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize_summary(s)
    }

    #[test]
    fn hyphen_runs_are_separated() {
        assert_eq!(
            toks("went 7--for--9"),
            ["went", "7", "--", "for", "--", "9"]
        );
        assert_eq!(toks("a 3-1 lead"), ["a", "3", "-", "1", "lead"]);
        assert_eq!(tokenize_text("-1"), ["-1"]);
    }

    #[test]
    fn quoted_sentence_removed() {
        assert!(toks("He said \"we played hard\" after the game.").is_empty());
        assert!(toks("``We played hard , '' he said .").is_empty());
    }

    #[test]
    fn three_sentence_fixture() {
        let text = "The Hawks beat the Bulls 102-98. \u{201c}It was fun,\u{201d} Smith said. Jones scored 20 points!";
        assert_eq!(
            toks(text),
            [
                "The", "Hawks", "beat", "the", "Bulls", "102", "-", "98", ".", "Jones", "scored",
                "20", "points", "!"
            ]
        );
    }

    #[test]
    fn initials_decimals_and_possessives() {
        assert_eq!(
            toks("C. Mullins's line: 8.0 innings (2 hits)."),
            ["C.", "Mullins", "'s", "line", ":", "8.0", "innings", "(", "2", "hits", ")", "."]
        );
        assert_eq!(
            toks("Ryan O'Hearn homered."),
            ["Ryan", "O'Hearn", "homered", "."]
        );
        assert_eq!(toks("the U.S. team"), ["the", "U.S.", "team"]);
    }

    #[test]
    fn game_notes_section_dropped() {
        assert_eq!(toks("A won. Game notes: B was hurt."), ["A", "won", "."]);
    }

    #[test]
    fn already_tokenized_text_is_stable() {
        let once = toks("The Hawks ( 30 - 12 ) scored 102 points .");
        let twice = toks(&once.join(" "));
        assert_eq!(once, twice);
    }
}
