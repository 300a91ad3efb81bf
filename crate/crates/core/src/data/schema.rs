use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel for box-score rows' inning/play fields and valueless events.
pub const NO_VALUE: &str = "-1";
pub const HOME: &str = "HOME";
pub const AWAY: &str = "AWAY";

/// Record layout. Feature roles are fixed by position: value, entity, type,
/// home/away, then inning and play index for the baseball layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordSchema {
    Rw4,
    Mlb6,
}

impl RecordSchema {
    pub fn num_features(self) -> usize {
        match self {
            RecordSchema::Rw4 => 4,
            RecordSchema::Mlb6 => 6,
        }
    }

    pub fn role_names(self) -> &'static [&'static str] {
        const NAMES: [&str; 6] = ["value", "entity", "type", "side", "inning", "play"];
        &NAMES[..self.num_features()]
    }

    pub fn from_features(n: usize) -> Result<Self> {
        match n {
            4 => Ok(RecordSchema::Rw4),
            6 => Ok(RecordSchema::Mlb6),
            _ => Err(Error::Schema(format!(
                "records must have 4 or 6 features, got {n}"
            ))),
        }
    }
}

impl std::str::FromStr for RecordSchema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rw4" => Ok(RecordSchema::Rw4),
            "mlb6" => Ok(RecordSchema::Mlb6),
            _ => Err(Error::Usage(format!(
                "unknown schema {s:?} (expected rw4 or mlb6)"
            ))),
        }
    }
}

impl std::fmt::Display for RecordSchema {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RecordSchema::Rw4 => "rw4",
            RecordSchema::Mlb6 => "mlb6",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Record {
    pub features: Vec<String>,
}

impl Record {
    pub fn new<S: Into<String>>(features: impl IntoIterator<Item = S>) -> Self {
        Record {
            features: features.into_iter().map(Into::into).collect(),
        }
    }

    pub fn value(&self) -> &str {
        &self.features[0]
    }

    pub fn entity(&self) -> &str {
        &self.features[1]
    }

    pub fn rtype(&self) -> &str {
        &self.features[2]
    }

    pub fn side(&self) -> &str {
        &self.features[3]
    }

    pub fn inning(&self) -> Option<&str> {
        self.features.get(4).map(String::as_str)
    }

    pub fn play(&self) -> Option<&str> {
        self.features.get(5).map(String::as_str)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameInstance {
    pub id: String,
    pub records: Vec<Record>,
    pub summary: Vec<String>,
}

/// Records grouped by exact entity string, groups in order of first appearance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityGroups {
    pub names: Vec<String>,
    pub members: Vec<Vec<usize>>,
    pub group_of: Vec<usize>,
}

impl EntityGroups {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn max_group_size(&self) -> usize {
        self.members.iter().map(Vec::len).max().unwrap_or(0)
    }
}

impl GameInstance {
    pub fn entity_groups(&self) -> EntityGroups {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut groups = EntityGroups {
            names: Vec::new(),
            members: Vec::new(),
            group_of: Vec::new(),
        };
        for (j, rec) in self.records.iter().enumerate() {
            let k = *index.entry(rec.entity()).or_insert_with(|| {
                groups.names.push(rec.entity().to_string());
                groups.members.push(Vec::new());
                groups.names.len() - 1
            });
            groups.members[k].push(j);
            groups.group_of.push(k);
        }
        groups
    }

    pub fn validate(&self, schema: RecordSchema) -> Result<()> {
        let l = schema.num_features();
        for (j, rec) in self.records.iter().enumerate() {
            if rec.features.len() != l {
                return Err(Error::Schema(format!(
                    "game {}: record {j} has {} features, schema {schema} needs {l}",
                    self.id,
                    rec.features.len()
                )));
            }
            if rec.entity().is_empty() {
                return Err(Error::Schema(format!(
                    "game {}: record {j} has an empty entity",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: RecordSchema,
    pub train: Vec<GameInstance>,
    pub dev: Vec<GameInstance>,
    pub test: Vec<GameInstance>,
}

impl Dataset {
    pub fn new(schema: RecordSchema) -> Self {
        Dataset {
            schema,
            train: Vec::new(),
            dev: Vec::new(),
            test: Vec::new(),
        }
    }

    pub fn split(&self, name: &str) -> Result<&[GameInstance]> {
        match name {
            "train" => Ok(&self.train),
            "dev" => Ok(&self.dev),
            "test" => Ok(&self.test),
            _ => Err(Error::Usage(format!(
                "unknown split {name:?} (expected train, dev or test)"
            ))),
        }
    }

    pub fn games(&self) -> impl Iterator<Item = &GameInstance> {
        self.train.iter().chain(&self.dev).chain(&self.test)
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Moves the last `dev + test` training games into the dev and test splits.
    pub fn carve_splits(mut self, dev: usize, test: usize) -> Result<Self> {
        if dev + test > self.train.len() {
            return Err(Error::Usage(format!(
                "cannot carve {dev} dev + {test} test games out of {}",
                self.train.len()
            )));
        }
        let keep = self.train.len() - dev - test;
        let mut rest = self.train.split_off(keep);
        self.test.extend(rest.split_off(dev));
        self.dev.extend(rest);
        Ok(self)
    }

    /// Checks record arity, non-empty entities and id-disjoint splits.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for game in self.games() {
            game.validate(self.schema)?;
            if !seen.insert(game.id.as_str()) {
                return Err(Error::Schema(format!(
                    "game id {:?} appears more than once",
                    game.id
                )));
            }
        }
        Ok(())
    }
}
