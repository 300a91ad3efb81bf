use serde::{Deserialize, Serialize};

use crate::data::RecordSchema;
use crate::error::{Error, Result};

/// Ablation ladder: each step adds one mechanism to the previous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Flat attention with conditional copy.
    Edcc,
    /// Hierarchical attention over static entity memories.
    Hier,
    /// Dynamic memories, update gate fixed at one.
    Dyn,
    /// Dynamic memories with the learned update gate.
    Gate,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Edcc, Variant::Hier, Variant::Dyn, Variant::Gate];

    pub fn hierarchical(self) -> bool {
        self != Variant::Edcc
    }

    pub fn memory_mode(self) -> Option<MemoryMode> {
        match self {
            Variant::Edcc => None,
            Variant::Hier => Some(MemoryMode::Static),
            Variant::Dyn => Some(MemoryMode::Dynamic),
            Variant::Gate => Some(MemoryMode::Gated),
        }
    }

    /// Row label used in ablation reports.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Edcc => "ED+CC",
            Variant::Hier => "+Hier",
            Variant::Dyn => "+Dyn",
            Variant::Gate => "+Gate",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edcc" => Ok(Variant::Edcc),
            "hier" => Ok(Variant::Hier),
            "dyn" => Ok(Variant::Dyn),
            "gate" => Ok(Variant::Gate),
            _ => Err(Error::Usage(format!(
                "unknown mode {s:?} (expected edcc, hier, dyn or gate)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Edcc => "edcc",
            Variant::Hier => "hier",
            Variant::Dyn => "dyn",
            Variant::Gate => "gate",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MemoryMode {
    /// Memories stay at their initial value.
    Static,
    /// Updated every step with the update gate fixed at one.
    Dynamic,
    /// Updated every step through the learned update gate.
    Gated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderMode {
    /// Encoder outputs are the record embeddings.
    Flat,
    /// Bidirectional LSTM over the canonical record order.
    Sequential,
}

impl std::str::FromStr for EncoderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(EncoderMode::Flat),
            "sequential" => Ok(EncoderMode::Sequential),
            _ => Err(Error::Usage(format!(
                "unknown encoder {s:?} (expected flat or sequential)"
            ))),
        }
    }
}

impl std::fmt::Display for EncoderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EncoderMode::Flat => "flat",
            EncoderMode::Sequential => "sequential",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Encoder/decoder hidden size.
    pub hidden: usize,
    /// Entity memory size.
    pub memory: usize,
    /// Features per record.
    pub num_features: usize,
    /// Embedding size of each record feature.
    pub feature_embed: usize,
    pub word_embed: usize,
    pub layers: usize,
    pub dropout: f64,
    pub encoder: EncoderMode,
    pub variant: Variant,
    pub seed: u64,
}

impl ModelConfig {
    /// Defaults for a schema: feature embeddings are `hidden / L` wide,
    /// baseball tables use the sequential encoder.
    pub fn for_schema(
        schema: RecordSchema,
        hidden: usize,
        memory: usize,
        variant: Variant,
    ) -> Self {
        let l = schema.num_features();
        ModelConfig {
            hidden,
            memory,
            num_features: l,
            feature_embed: feature_embed_size(hidden, l),
            word_embed: hidden,
            layers: 1,
            dropout: 0.0,
            encoder: match schema {
                RecordSchema::Rw4 => EncoderMode::Flat,
                RecordSchema::Mlb6 => EncoderMode::Sequential,
            },
            variant,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("memory", self.memory),
            ("feature_embed", self.feature_embed),
            ("word_embed", self.word_embed),
            ("layers", self.layers),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Usage(format!("{name} must be positive")));
        }
        RecordSchema::from_features(self.num_features)?;
        if self.encoder == EncoderMode::Sequential && !self.hidden.is_multiple_of(2) {
            return Err(Error::Usage(
                "the sequential encoder needs an even hidden size".into(),
            ));
        }
        if self.num_features == 6 && self.encoder != EncoderMode::Sequential {
            return Err(Error::Usage(
                "play-by-play tables need the sequential encoder".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Usage(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

pub fn feature_embed_size(hidden: usize, num_features: usize) -> usize {
    ((hidden as f64 / num_features as f64).round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_order_and_labels() {
        let labels: Vec<&str> = Variant::ALL.iter().map(|v| v.label()).collect();
        assert_eq!(labels, ["ED+CC", "+Hier", "+Dyn", "+Gate"]);
        assert_eq!("gate".parse::<Variant>().unwrap(), Variant::Gate);
        assert_eq!(Variant::Hier.memory_mode(), Some(MemoryMode::Static));
    }

    #[test]
    fn schema_defaults() {
        let c = ModelConfig::for_schema(RecordSchema::Rw4, 600, 300, Variant::Gate);
        assert_eq!(c.feature_embed, 150);
        c.validate().unwrap();
        let c = ModelConfig::for_schema(RecordSchema::Mlb6, 600, 300, Variant::Gate);
        assert_eq!((c.feature_embed, c.encoder), (100, EncoderMode::Sequential));
        let mut bad = c.clone();
        bad.encoder = EncoderMode::Flat;
        assert!(bad.validate().is_err());
    }
}
