//! Corpus-level multi-reference BLEU without smoothing.
//!
//! Clipped n-gram matches and hypothesis n-gram totals are summed over the
//! corpus before the geometric mean. The effective reference length of each
//! sentence is the reference length closest to the hypothesis length, the
//! shorter one on ties. Any order with zero matches (or zero hypothesis
//! n-grams) makes the score 0.

use std::collections::BTreeMap;

use super::tokenize::tokens;
use super::{CorpusStat, MetricError, MAX_NGRAM};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStat {
    pub matches: [u64; MAX_NGRAM],
    pub totals: [u64; MAX_NGRAM],
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn counts(tokens: &[String], n: usize) -> BTreeMap<&[String], u64> {
    let mut m = BTreeMap::new();
    for g in tokens.windows(n) {
        *m.entry(g).or_insert(0) += 1;
    }
    m
}

impl BleuStat {
    pub fn sentence(output: &str, refs: &[impl AsRef<str>]) -> Result<Self, MetricError> {
        if refs.is_empty() {
            return Err(MetricError::EmptyReferences);
        }
        let hyp = tokens(output).tokens;
        let ref_toks: Vec<Vec<String>> = refs.iter().map(|r| tokens(r.as_ref()).tokens).collect();
        let mut stat = BleuStat { hyp_len: hyp.len() as u64, ..Default::default() };
        for n in 1..=MAX_NGRAM {
            let hyp_counts = counts(&hyp, n);
            let mut max_ref: BTreeMap<&[String], u64> = BTreeMap::new();
            for r in &ref_toks {
                for (g, c) in counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            stat.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
            stat.matches[n - 1] = hyp_counts
                .iter()
                .map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stat.ref_len = ref_toks
            .iter()
            .map(|r| r.len() as u64)
            .min_by_key(|&len| (len.abs_diff(stat.hyp_len), len))
            .expect("non-empty refs");
        Ok(stat)
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        }
    }
}

impl CorpusStat for BleuStat {
    fn merge(&mut self, other: &Self) {
        for n in 0..MAX_NGRAM {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    fn score(&self) -> f64 {
        if self.hyp_len == 0 || self.matches.contains(&0) {
            return 0.0;
        }
        let log_mean: f64 = self
            .matches
            .iter()
            .zip(&self.totals)
            .map(|(&m, &t)| (m as f64 / t as f64).ln())
            .sum::<f64>()
            / MAX_NGRAM as f64;
        100.0 * self.brevity_penalty() * log_mean.exp()
    }
}
