//! Native dataset format: one `{"id", "records", "summary"}` object per line,
//! one file per split (`train.jsonl`, `dev.jsonl`, `test.jsonl`).

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::schema::{Dataset, GameInstance, RecordSchema};
use crate::error::{Error, Result};

pub const SPLITS: [&str; 3] = ["train", "dev", "test"];

pub fn parse_jsonl(text: &str) -> Result<Vec<GameInstance>> {
    read_games(text.as_bytes())
}

pub fn read_games(reader: impl std::io::Read) -> Result<Vec<GameInstance>> {
    let mut games = Vec::new();
    for (index, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let game: GameInstance = serde_json::from_str(&line).map_err(|e| Error::Parse {
            index,
            message: e.to_string(),
        })?;
        games.push(game);
    }
    Ok(games)
}

pub fn write_games(games: &[GameInstance], writer: impl Write) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for game in games {
        serde_json::to_writer(&mut w, game)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_jsonl(games: &[GameInstance]) -> String {
    let mut buf = Vec::new();
    write_games(games, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json writes utf-8")
}

fn infer_schema(games: &[&GameInstance]) -> Result<RecordSchema> {
    let width = games
        .iter()
        .flat_map(|g| g.records.first())
        .map(|r| r.features.len())
        .next();
    width.map_or(Ok(RecordSchema::Rw4), RecordSchema::from_features)
}

/// Loads `train/dev/test.jsonl` from `dir`; missing split files are empty.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let mut splits = Vec::new();
    for name in SPLITS {
        let path = dir.join(format!("{name}.jsonl"));
        splits.push(if path.exists() {
            read_games(std::fs::File::open(&path)?)?
        } else {
            Vec::new()
        });
    }
    if splits.iter().all(Vec::is_empty) && !dir.join("train.jsonl").exists() {
        return Err(Error::Schema(format!(
            "{} contains no train.jsonl",
            dir.display()
        )));
    }
    let all: Vec<&GameInstance> = splits.iter().flatten().collect();
    let schema = infer_schema(&all)?;
    let [train, dev, test] = <[Vec<GameInstance>; 3]>::try_from(splits).expect("three splits");
    let dataset = Dataset {
        schema,
        train,
        dev,
        test,
    };
    dataset.validate()?;
    Ok(dataset)
}

pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for name in SPLITS {
        let file = std::fs::File::create(dir.join(format!("{name}.jsonl")))?;
        write_games(dataset.split(name)?, file)?;
    }
    Ok(())
}
