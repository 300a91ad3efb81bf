//! Small deterministic tables and models for tests, gradient checks and
//! demonstrations.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{GameInstance, Record, RecordSchema, Vocabularies, Vocabulary};
use crate::error::Result;
use crate::model::{Model, ModelConfig, Variant};

pub const MICRO_HIDDEN: usize = 8;
pub const MICRO_MEMORY: usize = 6;

/// Two entities with three records each and a six-token summary. The value
/// "17" is left out of the word vocabulary by [`micro_vocabs`], so it can
/// only be copied.
pub fn micro_game(schema: RecordSchema) -> GameInstance {
    let rows = [
        ["17", "Smith", "PTS", "HOME"],
        ["5", "Smith", "REB", "HOME"],
        ["9", "Smith", "AST", "HOME"],
        ["9", "Jones", "PTS", "AWAY"],
        ["4", "Jones", "REB", "AWAY"],
        ["2", "Jones", "AST", "AWAY"],
    ];
    let records = rows
        .iter()
        .enumerate()
        .map(|(j, r)| match schema {
            RecordSchema::Rw4 => Record::new(r.iter().copied()),
            RecordSchema::Mlb6 => {
                let mut f: Vec<String> = r.iter().map(|s| s.to_string()).collect();
                f.push((j / 2 + 1).to_string());
                f.push(j.to_string());
                Record::new(f)
            }
        })
        .collect();
    GameInstance {
        id: "micro".into(),
        records,
        summary: ["Smith", "scored", "17", "and", "Jones", "9"]
            .map(String::from)
            .to_vec(),
    }
}

pub fn micro_vocabs(game: &GameInstance) -> Vocabularies {
    let words = Vocabulary::from_tokens(game.summary.iter().filter(|t| *t != "17"), 1);
    let num_features = game.records[0].features.len();
    let features = (0..num_features)
        .map(|role| {
            Vocabulary::from_tokens(game.records.iter().map(|r| r.features[role].as_str()), 1)
        })
        .collect();
    Vocabularies { words, features }
}

/// `n = 8`, `p = 6` model over [`micro_game`].
pub fn micro_model(
    schema: RecordSchema,
    variant: Variant,
    seed: u64,
) -> Result<(Model, GameInstance)> {
    let game = micro_game(schema);
    let mut config = ModelConfig::for_schema(schema, MICRO_HIDDEN, MICRO_MEMORY, variant);
    config.seed = seed;
    let model = Model::new(config, micro_vocabs(&game))?;
    Ok((model, game))
}

/// Random rw4 table with `entities` entities of 1..=`max_records` records
/// each, values drawn from a small pool so some repeat, and a summary mixing
/// values, entity names and filler words.
pub fn random_game<R: Rng>(
    rng: &mut R,
    entities: usize,
    max_records: usize,
    summary_len: usize,
) -> GameInstance {
    const TYPES: [&str; 6] = ["PTS", "REB", "AST", "STL", "BLK", "TOV"];
    const FILLER: [&str; 5] = ["the", "scored", "and", "with", "."];
    let mut records = Vec::new();
    for k in 0..entities {
        let name = format!("E{k}");
        let count = rng.gen_range(1..=max_records.max(1));
        for t in 0..count {
            let value = rng.gen_range(0..12).to_string();
            let side = if k % 2 == 0 { "HOME" } else { "AWAY" };
            records.push(Record::new([
                value.as_str(),
                &name,
                TYPES[t % TYPES.len()],
                side,
            ]));
        }
    }
    let summary = (0..summary_len)
        .map(|_| match rng.gen_range(0..3) {
            0 => records.choose(rng).expect("non-empty").value().to_string(),
            1 => records.choose(rng).expect("non-empty").entity().to_string(),
            _ => FILLER.choose(rng).expect("non-empty").to_string(),
        })
        .collect();
    GameInstance {
        id: "random".into(),
        records,
        summary,
    }
}

/// Vocabularies for `game` where every summary token is a word.
pub fn full_vocabs(game: &GameInstance) -> Vocabularies {
    crate::data::vocab::build_vocab_from(
        std::slice::from_ref(game),
        game.records[0].features.len(),
        1,
    )
}
