//! Greedy and beam search over any step-wise token model.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// A left-to-right model producing a distribution over output ids per step.
pub trait StepModel {
    type State: Clone;

    fn start(&self) -> Result<Self::State>;

    /// Token fed at the first step.
    fn start_token(&self) -> usize;

    fn end_token(&self) -> usize;

    /// Distribution over output ids after consuming `prev`, and the next state.
    fn next(&self, state: &Self::State, prev: usize) -> Result<(Vec<f64>, Self::State)>;
}

#[derive(Clone, Debug)]
pub struct Hypothesis<S> {
    pub tokens: Vec<usize>,
    /// Sum of per-step log probabilities.
    pub log_prob: f64,
    pub state: S,
}

/// Highest score first, then earlier completion, then smaller token ids.
fn rank<S>(a: &Hypothesis<S>, b: &Hypothesis<S>) -> Ordering {
    b.log_prob
        .total_cmp(&a.log_prob)
        .then_with(|| a.tokens.len().cmp(&b.tokens.len()))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

fn argmax(dist: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best
}

/// Most probable token at every step (lowest id on ties), until the end
/// token or `max_len` tokens.
pub fn greedy_decode<M: StepModel>(model: &M, max_len: usize) -> Result<Vec<usize>> {
    if max_len == 0 {
        return Err(Error::Usage("max_len must be at least 1".into()));
    }
    let mut state = model.start()?;
    let mut prev = model.start_token();
    let mut out = Vec::new();
    while out.len() < max_len {
        let (dist, next) = model.next(&state, prev)?;
        let y = argmax(&dist);
        out.push(y);
        if y == model.end_token() {
            break;
        }
        state = next;
        prev = y;
    }
    Ok(out)
}

/// Beam search scored by total log probability, without length
/// normalisation. A hypothesis is complete when it emits the end token or
/// reaches `max_len` tokens. Search stops once the best complete hypothesis
/// scores at least as high as every live one.
pub fn beam_search<M: StepModel>(
    model: &M,
    beam: usize,
    max_len: usize,
) -> Result<Hypothesis<M::State>> {
    if beam == 0 || max_len == 0 {
        return Err(Error::Usage("beam and max_len must be at least 1".into()));
    }
    let end = model.end_token();
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: model.start()?,
    }];
    let mut finished: Vec<Hypothesis<M::State>> = Vec::new();
    for t in 0..max_len {
        let mut candidates = Vec::new();
        for hyp in &live {
            let prev = hyp
                .tokens
                .last()
                .copied()
                .unwrap_or_else(|| model.start_token());
            let (dist, next) = model.next(&hyp.state, prev)?;
            for (y, &p) in dist.iter().enumerate() {
                if p > 0.0 {
                    let mut tokens = hyp.tokens.clone();
                    tokens.push(y);
                    candidates.push(Hypothesis {
                        tokens,
                        log_prob: hyp.log_prob + p.ln(),
                        state: next.clone(),
                    });
                }
            }
        }
        candidates.sort_by(rank);
        candidates.truncate(beam);
        live.clear();
        for c in candidates {
            if c.tokens.last() == Some(&end) || t + 1 == max_len {
                finished.push(c);
            } else {
                live.push(c);
            }
        }
        finished.sort_by(rank);
        let best_live = live
            .iter()
            .map(|h| h.log_prob)
            .fold(f64::NEG_INFINITY, f64::max);
        if live.is_empty() || finished.first().is_some_and(|f| f.log_prob >= best_live) {
            break;
        }
    }
    finished.into_iter().next().ok_or_else(|| {
        Error::Numeric("beam search found no hypothesis with non-zero probability".into())
    })
}
