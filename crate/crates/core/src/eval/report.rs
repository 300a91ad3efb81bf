use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{co_metric, cs_metric, rg_metric, BleuStats};
use super::relations::{extract_relations, TableIndex};
use crate::data::GameInstance;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceScores {
    pub id: String,
    pub rg_count: usize,
    pub rg_supported: usize,
    pub cs_precision: f64,
    pub cs_recall: f64,
    pub co: f64,
}

/// Corpus-level scores. RG precision pools relations over the corpus; CS and
/// CO are means of per-summary scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub instances: usize,
    /// Mean relations extracted per candidate summary.
    pub rg_count: f64,
    pub rg_precision: f64,
    /// Candidates from which nothing was extracted.
    pub rg_empty: usize,
    pub cs_precision: f64,
    pub cs_recall: f64,
    /// Normalised ordering similarity in [0, 100].
    pub co_dld: f64,
    pub bleu: f64,
    pub per_instance: Vec<InstanceScores>,
}

impl EvalReport {
    /// One aligned row per metric.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let rows = [
            ("instances", self.instances.to_string()),
            ("RG #", format!("{:.2}", self.rg_count)),
            ("RG P%", format!("{:.2}", 100.0 * self.rg_precision)),
            ("CS P%", format!("{:.2}", 100.0 * self.cs_precision)),
            ("CS R%", format!("{:.2}", 100.0 * self.cs_recall)),
            ("CO DLD%", format!("{:.2}", self.co_dld)),
            ("BLEU", format!("{:.2}", self.bleu)),
        ];
        for (name, value) in rows {
            let _ = writeln!(out, "{name:<10}{value:>10}");
        }
        if self.rg_empty > 0 {
            let _ = writeln!(
                out,
                "({} candidates with no extracted relations)",
                self.rg_empty
            );
        }
        out
    }
}

/// Scores `candidates` against `golds`, with facts from `tables`.
pub fn evaluate_corpus<C, G>(
    tables: &[GameInstance],
    golds: &[G],
    candidates: &[C],
) -> Result<EvalReport>
where
    C: AsRef<[String]> + Sync,
    G: AsRef<[String]> + Sync,
{
    if tables.is_empty() {
        return Err(Error::Usage("nothing to evaluate".into()));
    }
    if tables.len() != golds.len() || tables.len() != candidates.len() {
        return Err(Error::Usage(format!(
            "{} tables, {} gold summaries and {} candidates",
            tables.len(),
            golds.len(),
            candidates.len()
        )));
    }
    let scored: Vec<(InstanceScores, BleuStats)> = (0..tables.len())
        .into_par_iter()
        .map(|i| {
            let index = TableIndex::new(&tables[i].records);
            let cand = extract_relations(candidates[i].as_ref(), &index);
            let gold = extract_relations(golds[i].as_ref(), &index);
            let rg = rg_metric(&cand, &index);
            let (cs_precision, cs_recall) = cs_metric(&cand, &gold);
            let scores = InstanceScores {
                id: tables[i].id.clone(),
                rg_count: rg.count,
                rg_supported: rg.supported,
                cs_precision,
                cs_recall,
                co: co_metric(&cand, &gold),
            };
            (
                scores,
                BleuStats::of(candidates[i].as_ref(), golds[i].as_ref()),
            )
        })
        .collect();
    let n = scored.len() as f64;
    let mut bleu = BleuStats::default();
    let (mut count, mut supported, mut empty) = (0, 0, 0);
    let (mut csp, mut csr, mut co) = (0.0, 0.0, 0.0);
    for (s, b) in &scored {
        bleu.add(b);
        count += s.rg_count;
        supported += s.rg_supported;
        empty += usize::from(s.rg_count == 0);
        csp += s.cs_precision;
        csr += s.cs_recall;
        co += s.co;
    }
    Ok(EvalReport {
        instances: scored.len(),
        rg_count: count as f64 / n,
        rg_precision: if count == 0 {
            1.0
        } else {
            supported as f64 / count as f64
        },
        rg_empty: empty,
        cs_precision: csp / n,
        cs_recall: csr / n,
        co_dld: co / n,
        bleu: bleu.score(),
        per_instance: scored.into_iter().map(|(s, _)| s).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_games;

    #[test]
    fn gold_against_itself_is_perfect() {
        let games = synth_games(2, 10, 8, 4).unwrap().train;
        let golds: Vec<_> = games.iter().map(|g| g.summary.clone()).collect();
        let r = evaluate_corpus(&games, &golds, &golds).unwrap();
        assert_eq!(r.instances, 10);
        assert_eq!(
            (r.rg_precision, r.cs_precision, r.cs_recall, r.co_dld),
            (1.0, 1.0, 1.0, 100.0)
        );
        assert!((r.bleu - 100.0).abs() < 1e-9);
        assert!(r.rg_count > 1.0);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), r);
        assert!(r.to_table().contains("RG P%"));
    }

    #[test]
    fn empty_candidates_score_zero_recall() {
        let games = synth_games(3, 4, 6, 3).unwrap().train;
        let golds: Vec<_> = games.iter().map(|g| g.summary.clone()).collect();
        let empty = vec![Vec::<String>::new(); 4];
        let r = evaluate_corpus(&games, &golds, &empty).unwrap();
        assert_eq!(
            (r.rg_precision, r.rg_empty, r.cs_recall, r.bleu),
            (1.0, 4, 0.0, 0.0)
        );
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let games = synth_games(3, 2, 6, 3).unwrap().train;
        let golds: Vec<_> = games.iter().map(|g| g.summary.clone()).collect();
        assert!(evaluate_corpus(&games, &golds, &golds[..1]).is_err());
    }
}
