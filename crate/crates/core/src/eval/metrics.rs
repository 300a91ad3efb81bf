//! RG, CS, CO and BLEU.

use std::collections::HashMap;

use super::relations::{RelationSet, TableIndex};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgScore {
    pub count: usize,
    pub supported: usize,
    /// `supported / count`; 1.0 when nothing was extracted.
    pub precision: f64,
    /// Set when nothing was extracted and the precision is the 1.0 default.
    pub empty: bool,
}

/// Share of extracted relations that are records of the table.
pub fn rg_metric(candidate: &RelationSet, table: &TableIndex) -> RgScore {
    let count = candidate.len();
    let supported = candidate.iter().filter(|r| table.contains(r)).count();
    RgScore {
        count,
        supported,
        precision: ratio(supported, count),
        empty: count == 0,
    }
}

/// `num / den`, with `0 / 0 = 1`.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Set precision and recall of candidate relations against gold ones.
pub fn cs_metric(candidate: &RelationSet, gold: &RelationSet) -> (f64, f64) {
    let c = candidate.as_set();
    let g = gold.as_set();
    let common = c.intersection(&g).count();
    (ratio(common, c.len()), ratio(common, g.len()))
}

/// Optimal-string-alignment edit distance: insertions, deletions,
/// substitutions and transpositions of adjacent items, each costing one.
pub fn dld<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut best = (d[i - 1][j] + 1)
                .min(d[i][j - 1] + 1)
                .min(d[i - 1][j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                best = best.min(d[i - 2][j - 2] + 1);
            }
            d[i][j] = best;
        }
    }
    d[n][m]
}

/// `100 · (1 − dld / max(|c|, |g|, 1))`.
pub fn co_metric(candidate: &RelationSet, gold: &RelationSet) -> f64 {
    let longest = candidate.len().max(gold.len()).max(1);
    100.0 * (1.0 - dld(&candidate.0, &gold.0) as f64 / longest as f64)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram matches and totals for orders 1..=4, plus lengths.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BleuStats {
    pub matches: [usize; 4],
    pub totals: [usize; 4],
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl BleuStats {
    pub fn of(candidate: &[String], reference: &[String]) -> Self {
        let mut s = BleuStats {
            candidate_len: candidate.len(),
            reference_len: reference.len(),
            ..Default::default()
        };
        for n in 1..=4 {
            let refs = ngram_counts(reference, n);
            for (g, c) in ngram_counts(candidate, n) {
                s.matches[n - 1] += c.min(refs.get(g).copied().unwrap_or(0));
            }
            s.totals[n - 1] = candidate.len().saturating_sub(n - 1);
        }
        s
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..4 {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    /// BLEU-4 in [0, 100]; zero when any order has no match.
    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 || self.matches.contains(&0) {
            return 0.0;
        }
        let log_precision: f64 = (0..4)
            .map(|n| (self.matches[n] as f64 / self.totals[n] as f64).ln())
            .sum::<f64>()
            / 4.0;
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        let brevity = if c < r { 1.0 - r / c } else { 0.0 };
        100.0 * (log_precision + brevity).exp()
    }
}

/// Corpus BLEU-4 with uniform weights and the standard brevity penalty.
pub fn bleu<C: AsRef<[String]>, R: AsRef<[String]>>(candidates: &[C], references: &[R]) -> f64 {
    let mut total = BleuStats::default();
    for (c, r) in candidates.iter().zip(references) {
        total.add(&BleuStats::of(c.as_ref(), r.as_ref()));
    }
    total.score()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::eval::relations::Relation;

    fn rels(names: &[&str]) -> RelationSet {
        RelationSet(
            names
                .iter()
                .map(|n| Relation::new(*n, "1", "PTS"))
                .collect(),
        )
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    /// Plain recursion over the same edit operations, no memo.
    fn dld_oracle(a: &[u8], b: &[u8]) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        let (i, j) = (a.len(), b.len());
        let cost = usize::from(a[i - 1] != b[j - 1]);
        let mut best = (dld_oracle(&a[..i - 1], b) + 1)
            .min(dld_oracle(a, &b[..j - 1]) + 1)
            .min(dld_oracle(&a[..i - 1], &b[..j - 1]) + cost);
        if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
            best = best.min(dld_oracle(&a[..i - 2], &b[..j - 2]) + 1);
        }
        best
    }

    fn all_sequences(max_len: usize) -> Vec<Vec<u8>> {
        let mut out = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for s in &frontier {
                for c in 0..3u8 {
                    let mut t: Vec<u8> = s.clone();
                    t.push(c);
                    next.push(t);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    #[test]
    fn dld_matches_recursive_oracle_up_to_length_four() {
        // the full length-6 sweep runs in the acceptance suite
        let seqs = all_sequences(4);
        for a in &seqs {
            for b in &seqs {
                assert_eq!(dld(a, b), dld_oracle(a, b), "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn co_examples() {
        assert_eq!(co_metric(&rels(&["a", "b"]), &rels(&["a", "b"])), 100.0);
        assert_eq!(co_metric(&rels(&["a", "b"]), &rels(&["b", "a"])), 50.0);
        assert_eq!(co_metric(&rels(&[]), &rels(&[])), 100.0);
        assert_eq!(co_metric(&rels(&["a"]), &rels(&[])), 0.0);
    }

    #[test]
    fn cs_examples() {
        assert_eq!(
            cs_metric(&rels(&["a", "b"]), &rels(&["a", "b"])),
            (1.0, 1.0)
        );
        assert_eq!(cs_metric(&rels(&["a"]), &rels(&["b"])), (0.0, 0.0));
        assert_eq!(
            cs_metric(&rels(&["a", "b"]), &rels(&["b", "c"])),
            (0.5, 0.5)
        );
        assert_eq!(
            cs_metric(&rels(&["a", "b", "c"]), &rels(&["b"])),
            (1.0 / 3.0, 1.0)
        );
        assert_eq!(cs_metric(&rels(&[]), &rels(&["b"])), (1.0, 0.0));
    }

    #[test]
    fn rg_examples() {
        let table = TableIndex::new(&[
            crate::data::Record::new(["1", "a", "PTS", "HOME"]),
            crate::data::Record::new(["1", "b", "PTS", "HOME"]),
        ]);
        let s = rg_metric(&rels(&["a", "b", "c"]), &table);
        assert_eq!((s.count, s.supported), (3, 2));
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-15);
        let e = rg_metric(&rels(&[]), &table);
        assert!(e.empty && e.precision == 1.0);
    }

    #[test]
    fn bleu_identity_and_disjoint() {
        let c = [
            toks("the cat sat on the mat"),
            toks("a dog ran in the park today"),
        ];
        assert!((bleu(&c, &c) - 100.0).abs() < 1e-12);
        assert_eq!(bleu(&[toks("x y z w")], &[toks("a b c d")]), 0.0);
        assert_eq!(bleu(&[Vec::<String>::new()], &[toks("a b c d")]), 0.0);
    }

    #[test]
    fn bleu_hand_computed_fixture() {
        // sentence 1: cand "the cat sat on the mat" vs ref "the cat is on the mat"
        //   1-grams 5/6 (sat unmatched), 2-grams 3/5 (the cat, on the, the mat),
        //   3-grams 1/4 (on the mat), 4-grams 0/3
        // sentence 2: cand "a b c d e" vs ref "a b c d e f g"
        //   1-grams 5/5, 2-grams 4/4, 3-grams 3/3, 4-grams 2/2
        // corpus: p1 = 10/11, p2 = 7/9, p3 = 4/7, p4 = 2/5; c = 11, r = 13
        let cands = [toks("the cat sat on the mat"), toks("a b c d e")];
        let refs = [toks("the cat is on the mat"), toks("a b c d e f g")];
        let p: f64 = [10.0 / 11.0, 7.0 / 9.0, 4.0 / 7.0, 2.0 / 5.0]
            .iter()
            .map(|x: &f64| x.ln())
            .sum::<f64>()
            / 4.0;
        let expected = 100.0 * (1.0f64 - 13.0 / 11.0).exp() * p.exp();
        assert!(
            (bleu(&cands, &refs) - expected).abs() < 1e-10,
            "{} vs {expected}",
            bleu(&cands, &refs)
        );
        assert!((expected - 52.8638).abs() < 1e-4, "{expected}");
    }

    #[test]
    fn bleu_clips_repeated_ngrams() {
        let s = BleuStats::of(&toks("the the the the"), &toks("the cat"));
        assert_eq!(s.matches[0], 1);
        assert_eq!(s.totals[0], 4);
    }

    proptest! {
        #[test]
        fn dld_is_metric_like(a in proptest::collection::vec(0u8..3, 0..8), b in proptest::collection::vec(0u8..3, 0..8)) {
            prop_assert_eq!(dld(&a, &a), 0);
            prop_assert_eq!(dld(&a, &b), dld(&b, &a));
            prop_assert!(dld(&a, &b) <= a.len().max(b.len()));
        }

        #[test]
        fn cs_swaps_precision_and_recall(a in proptest::collection::vec(0u8..5, 0..6), b in proptest::collection::vec(0u8..5, 0..6)) {
            let to_set = |v: &[u8]| RelationSet::from_mentions(v.iter().map(|x| Relation::new(x.to_string(), "1", "PTS")));
            let (sa, sb) = (to_set(&a), to_set(&b));
            let (p, r) = cs_metric(&sa, &sb);
            let (p2, r2) = cs_metric(&sb, &sa);
            prop_assert_eq!((p, r), (r2, p2));
        }
    }
}
