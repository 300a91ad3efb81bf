//! Trains and scores every model variant under shared settings.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{evaluate_corpus, EvalReport};
use crate::data::{build_vocab, Dataset, GameInstance};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, Variant};
use crate::training::{train, EpochMetrics, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSettings {
    pub hidden: usize,
    pub memory: usize,
    pub layers: usize,
    pub min_count: u64,
    pub beam: usize,
    pub max_len: usize,
    /// Split whose tables are decoded and scored.
    pub eval_split: String,
    pub train: TrainConfig,
}

impl Default for AblationSettings {
    fn default() -> Self {
        AblationSettings {
            hidden: 64,
            memory: 64,
            layers: 1,
            min_count: 1,
            beam: 5,
            max_len: 120,
            eval_split: "test".into(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub label: String,
    pub parameters: usize,
    pub final_train_perplexity: f64,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub settings: AblationSettings,
    /// ED+CC, +Hier, +Dyn, +Gate.
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}\n",
            "Model", "RG #", "RG P%", "CS P%", "CS R%", "CO", "BLEU"
        );
        for row in &self.rows {
            let r = &row.report;
            let _ = writeln!(
                out,
                "{:<8}{:>8.2}{:>8.2}{:>8.2}{:>8.2}{:>8.2}{:>8.2}",
                row.label,
                r.rg_count,
                100.0 * r.rg_precision,
                100.0 * r.cs_precision,
                100.0 * r.cs_recall,
                r.co_dld,
                r.bleu
            );
        }
        out
    }

    pub fn row(&self, variant: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }
}

/// Decodes every game (greedy when `beam == 1`).
pub fn generate_corpus(
    model: &Model,
    games: &[GameInstance],
    beam: usize,
    max_len: usize,
) -> Result<Vec<Vec<String>>> {
    games
        .par_iter()
        .map(|g| model.generate(g, beam, max_len))
        .collect()
}

/// Model configuration for one variant under shared settings.
pub fn variant_config(
    dataset: &Dataset,
    settings: &AblationSettings,
    variant: Variant,
) -> ModelConfig {
    let mut config =
        ModelConfig::for_schema(dataset.schema, settings.hidden, settings.memory, variant);
    config.layers = settings.layers;
    config.dropout = settings.train.dropout;
    config.seed = settings.train.seed;
    config
}

/// Trains each variant from the same seed on the training split, then
/// scores its generations on `settings.eval_split`.
pub fn run_ablation(
    dataset: &Dataset,
    settings: &AblationSettings,
    progress: &mut dyn FnMut(Variant, &EpochMetrics),
) -> Result<AblationReport> {
    let eval_games = dataset.split(&settings.eval_split)?;
    if eval_games.is_empty() {
        return Err(Error::Usage(format!(
            "split {} is empty",
            settings.eval_split
        )));
    }
    let vocabs = build_vocab(dataset, settings.min_count);
    let golds: Vec<&[String]> = eval_games.iter().map(|g| g.summary.as_slice()).collect();
    let mut rows = Vec::with_capacity(Variant::ALL.len());
    for variant in Variant::ALL {
        let mut model = Model::new(variant_config(dataset, settings, variant), vocabs.clone())?;
        let outcome = train(
            &mut model,
            &dataset.train,
            &dataset.dev,
            &settings.train,
            None,
            &mut |m| progress(variant, m),
        )?;
        let candidates = generate_corpus(&model, eval_games, settings.beam, settings.max_len)?;
        rows.push(AblationRow {
            variant,
            label: variant.label().to_string(),
            parameters: model.store.num_scalars(),
            final_train_perplexity: outcome
                .epochs
                .last()
                .map_or(f64::NAN, |m| m.train_perplexity),
            report: evaluate_corpus(eval_games, &golds, &candidates)?,
        });
    }
    Ok(AblationReport {
        settings: settings.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::data::synth_games;
    use crate::model::params::expected_shapes;

    fn names(config: &ModelConfig, dataset: &Dataset) -> BTreeSet<String> {
        expected_shapes(config, &build_vocab(dataset, 1))
            .into_iter()
            .map(|(n, _, _)| n)
            .collect()
    }

    #[test]
    fn variants_differ_only_in_memory_and_attention_parameters() {
        let data = synth_games(1, 2, 6, 3).unwrap();
        let s = AblationSettings {
            hidden: 8,
            memory: 6,
            ..Default::default()
        };
        let sets: Vec<_> = Variant::ALL
            .iter()
            .map(|&v| names(&variant_config(&data, &s, v), &data))
            .collect();
        let added =
            |a: usize, b: usize| -> Vec<String> { sets[b].difference(&sets[a]).cloned().collect() };
        assert_eq!(added(0, 1), ["memory.entity_score", "memory.init"]);
        assert_eq!(
            added(1, 2),
            [
                "memory.candidate",
                "memory.change_hidden",
                "memory.change_hidden_bias",
                "memory.change_memory",
                "memory.change_memory_bias"
            ]
        );
        assert_eq!(
            added(2, 3),
            ["memory.update_gate", "memory.update_gate_bias"]
        );
        for w in sets.windows(2) {
            assert!(w[0].is_subset(&w[1]));
        }
    }

    #[test]
    fn report_rows_follow_the_ladder() {
        let data = synth_games(2, 4, 6, 3).unwrap();
        let s = AblationSettings {
            hidden: 8,
            memory: 6,
            beam: 1,
            max_len: 20,
            eval_split: "train".into(),
            train: TrainConfig {
                epochs: 1,
                batch_size: 2,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut calls = 0;
        let report = run_ablation(&data, &s, &mut |_, _| calls += 1).unwrap();
        assert_eq!(calls, 4);
        let labels: Vec<&str> = report.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["ED+CC", "+Hier", "+Dyn", "+Gate"]);
        assert!(report
            .rows
            .windows(2)
            .all(|w| w[0].parameters < w[1].parameters));
        let table = report.to_table();
        assert_eq!(table.lines().count(), 5);
        assert!(table.lines().nth(1).unwrap().starts_with("ED+CC"));
    }
}
