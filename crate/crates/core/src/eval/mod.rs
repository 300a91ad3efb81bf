//! Relation extraction, the RG/CS/CO/BLEU metrics and the ablation harness.

pub mod ablation;
pub mod metrics;
pub mod relations;
pub mod report;

pub use ablation::{run_ablation, AblationReport, AblationRow, AblationSettings};
pub use metrics::{bleu, co_metric, cs_metric, dld, rg_metric, BleuStats, RgScore};
pub use relations::{extract_relations, gold_relations, Relation, RelationSet, TableIndex};
pub use report::{evaluate_corpus, EvalReport, InstanceScores};
