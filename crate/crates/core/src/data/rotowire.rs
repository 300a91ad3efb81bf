//! Reader for the RotoWire-style JSON layout: an array of games, each with a
//! column-major `box_score`, `home_line`/`vis_line` team rows and a summary.
//!
//! Player rows take `PLAYER_NAME` as the entity; the side comes from an `H/V`
//! column when present, otherwise from `TEAM_CITY` against `home_city`. Team
//! rows take `TEAM-NAME` as the entity. Empty and `N/A` cells are skipped.
//! With the `mlb6` layout box rows get `-1` for inning and play index, and an
//! optional `plays` array (`{inning, batter, event}` objects, time order)
//! becomes valueless event records.

use std::path::Path;

use serde_json::{Map, Value};

use super::schema::{Dataset, GameInstance, Record, RecordSchema, AWAY, HOME, NO_VALUE};
use super::tokenize::tokenize_summary;
use crate::error::{Error, Result};

const SKIP_COLUMNS: [&str; 3] = ["PLAYER_NAME", "TEAM_CITY", "H/V"];

fn is_empty_cell(v: &str) -> bool {
    let v = v.trim();
    v.is_empty() || v == "N/A"
}

fn cell_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn field<'a>(game: &'a Map<String, Value>, key: &str, index: usize) -> Result<&'a Value> {
    game.get(key)
        .ok_or_else(|| Error::Schema(format!("game {index}: missing required field {key:?}")))
}

fn object<'a>(v: &'a Value, what: &str, index: usize) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Schema(format!("game {index}: {what} is not an object")))
}

fn push_record(
    out: &mut Vec<Record>,
    schema: RecordSchema,
    value: String,
    entity: &str,
    rtype: &str,
    side: &str,
) {
    let mut f = vec![
        value,
        entity.to_string(),
        rtype.to_string(),
        side.to_string(),
    ];
    if schema == RecordSchema::Mlb6 {
        f.push(NO_VALUE.into());
        f.push(NO_VALUE.into());
    }
    out.push(Record { features: f });
}

struct PlayerRow {
    name: String,
    home: bool,
    cells: Vec<(String, String)>,
}

fn player_rows(game: &Map<String, Value>, index: usize) -> Result<Vec<PlayerRow>> {
    let box_score = object(field(game, "box_score", index)?, "box_score", index)?;
    let names = object(
        box_score.get("PLAYER_NAME").ok_or_else(|| {
            Error::Schema(format!("game {index}: box_score has no PLAYER_NAME column"))
        })?,
        "PLAYER_NAME",
        index,
    )?;
    let home_city = game.get("home_city").and_then(Value::as_str);
    let mut keys: Vec<&String> = names.keys().collect();
    keys.sort_by_key(|k| (k.parse::<u64>().unwrap_or(u64::MAX), k.to_string()));
    let column = |col: &str, key: &str| {
        box_score
            .get(col)
            .and_then(|c| c.get(key))
            .and_then(cell_string)
    };
    let mut rows = Vec::new();
    for key in keys {
        let Some(name) = names
            .get(key)
            .and_then(cell_string)
            .filter(|n| !is_empty_cell(n))
        else {
            continue;
        };
        let home = match (column("H/V", key), column("TEAM_CITY", key), home_city) {
            (Some(hv), _, _) => hv.trim() == "H",
            (None, Some(city), Some(home_city)) => city == home_city,
            _ => {
                return Err(Error::Schema(format!(
                    "game {index}: cannot tell the side of {name:?} (need H/V, or TEAM_CITY and home_city)"
                )))
            }
        };
        let mut cells = Vec::new();
        for (col, values) in box_score {
            if SKIP_COLUMNS.contains(&col.as_str()) {
                continue;
            }
            if let Some(v) = values
                .get(key.as_str())
                .and_then(cell_string)
                .filter(|v| !is_empty_cell(v))
            {
                cells.push((col.clone(), v));
            }
        }
        rows.push(PlayerRow { name, home, cells });
    }
    Ok(rows)
}

fn line_records(
    out: &mut Vec<Record>,
    schema: RecordSchema,
    game: &Map<String, Value>,
    key: &str,
    side: &str,
    index: usize,
) -> Result<()> {
    let line = object(field(game, key, index)?, key, index)?;
    let Some(team) = line
        .get("TEAM-NAME")
        .and_then(cell_string)
        .filter(|t| !is_empty_cell(t))
    else {
        return Err(Error::Schema(format!(
            "game {index}: {key} has no TEAM-NAME"
        )));
    };
    for (col, v) in line {
        if let Some(v) = cell_string(v).filter(|v| !is_empty_cell(v)) {
            push_record(out, schema, v, &team, col, side);
        }
    }
    Ok(())
}

fn parse_game(v: &Value, index: usize, schema: RecordSchema) -> Result<GameInstance> {
    let game = object(v, "game", index)?;
    let summary = match field(game, "summary", index)? {
        Value::String(s) => tokenize_summary(s),
        Value::Array(items) => {
            let words: Vec<&str> = items.iter().filter_map(Value::as_str).collect();
            tokenize_summary(&words.join(" "))
        }
        _ => {
            return Err(Error::Schema(format!(
                "game {index}: summary must be a string or token list"
            )))
        }
    };
    let rows = player_rows(game, index)?;
    let mut records = Vec::new();
    for (home, line_key, side) in [(true, "home_line", HOME), (false, "vis_line", AWAY)] {
        for row in rows.iter().filter(|r| r.home == home) {
            for (col, v) in &row.cells {
                push_record(&mut records, schema, v.clone(), &row.name, col, side);
            }
        }
        line_records(&mut records, schema, game, line_key, side, index)?;
    }
    if schema == RecordSchema::Mlb6 {
        if let Some(plays) = game.get("plays") {
            let plays = plays
                .as_array()
                .ok_or_else(|| Error::Schema(format!("game {index}: plays is not an array")))?;
            for (p, play) in plays.iter().enumerate() {
                let get = |k: &str| {
                    play.get(k)
                        .and_then(cell_string)
                        .ok_or_else(|| Error::Schema(format!("game {index}: play {p} lacks {k:?}")))
                };
                let batter = get("batter")?;
                let side = rows.iter().find(|r| r.name == batter).map_or(AWAY, |r| {
                    if r.home {
                        HOME
                    } else {
                        AWAY
                    }
                });
                records.push(Record::new([
                    NO_VALUE.to_string(),
                    batter,
                    get("event")?,
                    side.to_string(),
                    get("inning")?,
                    p.to_string(),
                ]));
            }
        }
    }
    let id = game
        .get("id")
        .and_then(cell_string)
        .unwrap_or_else(|| format!("game-{index:05}"));
    Ok(GameInstance {
        id,
        records,
        summary,
    })
}

/// Index of the top-level array element containing the 1-based `line`/`column`.
fn game_index_at(text: &str, line: usize, column: usize) -> usize {
    let offset: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + column.saturating_sub(1);
    let (mut depth, mut index, mut in_string, mut escaped) = (0usize, 0usize, false, false);
    for c in text.bytes().take(offset) {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            b'"' => in_string = true,
            b'[' | b'{' => depth += 1,
            b']' | b'}' => depth = depth.saturating_sub(1),
            b',' if depth == 1 => index += 1,
            _ => {}
        }
    }
    index
}

pub fn parse_rotowire(text: &str, schema: RecordSchema) -> Result<Vec<GameInstance>> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        index: game_index_at(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let games = root
        .as_array()
        .ok_or_else(|| Error::Schema("top level must be a JSON array of games".into()))?;
    games
        .iter()
        .enumerate()
        .map(|(i, g)| parse_game(g, i, schema))
        .collect()
}

/// Loads a RotoWire-style file into the training split of a dataset.
pub fn load_rotowire_json(path: &Path) -> Result<Dataset> {
    load_rotowire_json_as(path, RecordSchema::Rw4)
}

pub fn load_rotowire_json_as(path: &Path, schema: RecordSchema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut dataset = Dataset::new(schema);
    dataset.train = parse_rotowire(&text, schema)?;
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MULLINS: &str = r#"[{
        "home_city": "Baltimore", "vis_city": "Kansas City",
        "box_score": {
            "PLAYER_NAME": {"0": "C. Mullins"},
            "H/V": {"0": "H"},
            "AB": {"0": "4"}, "R": {"0": "2"}, "H": {"0": "2"}, "RBI": {"0": "1"}
        },
        "home_line": {"TEAM-NAME": "Orioles"},
        "vis_line": {"TEAM-NAME": "Royals"},
        "summary": "C. Mullins had 2 hits."
    }]"#;

    #[test]
    fn batter_row_becomes_one_record_per_cell() {
        let games = parse_rotowire(MULLINS, RecordSchema::Rw4).unwrap();
        let mullins: Vec<_> = games[0]
            .records
            .iter()
            .filter(|r| r.entity() == "C. Mullins")
            .collect();
        let cells: Vec<(&str, &str)> = mullins.iter().map(|r| (r.rtype(), r.value())).collect();
        assert_eq!(cells, [("AB", "4"), ("H", "2"), ("R", "2"), ("RBI", "1")]);
        assert!(mullins.iter().all(|r| r.side() == HOME));
        assert_eq!(games[0].summary, ["C.", "Mullins", "had", "2", "hits", "."]);
    }

    #[test]
    fn mlb_layout_pads_inning_and_play() {
        let games = parse_rotowire(MULLINS, RecordSchema::Mlb6).unwrap();
        assert!(games[0]
            .records
            .iter()
            .all(|r| r.features.len() == 6 && r.inning() == Some("-1")));
    }

    #[test]
    fn empty_array_is_empty_dataset() {
        assert!(parse_rotowire("[]", RecordSchema::Rw4).unwrap().is_empty());
    }

    #[test]
    fn missing_field_is_schema_error() {
        let err = parse_rotowire(r#"[{"box_score": {}}]"#, RecordSchema::Rw4).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn malformed_json_reports_game_index() {
        assert!(matches!(
            parse_rotowire("[{", RecordSchema::Rw4),
            Err(Error::Parse { index: 0, .. })
        ));
        let text = "[{\"a\": \"x,]\"},\n {\"b\": 1},\n {\"c\": tru}]";
        assert!(matches!(
            parse_rotowire(text, RecordSchema::Rw4),
            Err(Error::Parse { index: 2, .. })
        ));
    }
}
