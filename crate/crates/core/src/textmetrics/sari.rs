//! SARI over n-gram sets of orders 1 to 4.
//!
//! For each order the output is scored on three operations against the
//! source and references: added n-grams (F1), kept n-grams (F1) and deleted
//! n-grams (precision only). Reference membership is fractional: an n-gram
//! found in `k` of `m` references has weight `k / m`.
//!
//! A precision or recall whose denominator set is empty is 1, so an output
//! identical to its source and to every reference scores exactly 100.

use std::collections::BTreeSet;

use super::tokenize::tokens;
use super::{CorpusStat, MetricError, MAX_NGRAM};

/// Per-order component scores, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SariComponents {
    pub add_f1: f64,
    pub keep_f1: f64,
    pub delete_precision: f64,
}

impl SariComponents {
    pub fn mean(&self) -> f64 {
        (self.add_f1 + self.keep_f1 + self.delete_precision) / 3.0
    }
}

type Gram<'a> = &'a [String];

fn ngram_set(tokens: &[String], n: usize) -> BTreeSet<Gram<'_>> {
    tokens.windows(n).collect()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Component scores for every order `1..=4`.
pub fn sari_components(
    source: &str,
    output: &str,
    refs: &[impl AsRef<str>],
) -> Result<[SariComponents; MAX_NGRAM], MetricError> {
    if refs.is_empty() {
        return Err(MetricError::EmptyReferences);
    }
    let src = tokens(source);
    let out = tokens(output);
    let ref_toks: Vec<_> = refs.iter().map(|r| tokens(r.as_ref())).collect();
    let nrefs = ref_toks.len() as f64;

    let mut comps = [SariComponents { add_f1: 0.0, keep_f1: 0.0, delete_precision: 0.0 }; MAX_NGRAM];
    for (i, comp) in comps.iter_mut().enumerate() {
        let n = i + 1;
        let s = ngram_set(&src.tokens, n);
        let o = ngram_set(&out.tokens, n);
        let ref_sets: Vec<_> = ref_toks.iter().map(|r| ngram_set(&r.tokens, n)).collect();
        let weight = |g: &Gram<'_>| ref_sets.iter().filter(|r| r.contains(g)).count() as f64 / nrefs;
        let weight_sum = |set: &mut dyn Iterator<Item = &Gram<'_>>| set.map(&weight).sum::<f64>();

        let added: Vec<_> = o.difference(&s).collect();
        let ref_new: BTreeSet<Gram<'_>> = ref_sets
            .iter()
            .flat_map(|r| r.iter().copied())
            .filter(|g| !s.contains(g))
            .collect();
        let add_good = weight_sum(&mut added.iter().copied());
        let add_p = ratio(add_good, added.len() as f64);
        let add_r = ratio(add_good, weight_sum(&mut ref_new.iter()));

        let kept: Vec<_> = s.intersection(&o).collect();
        let keep_good = weight_sum(&mut kept.iter().copied());
        let keep_p = ratio(keep_good, kept.len() as f64);
        let keep_r = ratio(keep_good, weight_sum(&mut s.iter()));

        let deleted: Vec<_> = s.difference(&o).collect();
        let del_good: f64 = deleted.iter().map(|g| 1.0 - weight(g)).sum();
        let del_p = ratio(del_good, deleted.len() as f64);

        *comp = SariComponents {
            add_f1: f1(add_p, add_r),
            keep_f1: f1(keep_p, keep_r),
            delete_precision: del_p,
        };
    }
    Ok(comps)
}

/// Sentence-level SARI in `[0, 100]`.
pub fn sari_sentence(source: &str, output: &str, refs: &[impl AsRef<str>]) -> Result<f64, MetricError> {
    let comps = sari_components(source, output, refs)?;
    let total: f64 = comps.iter().map(SariComponents::mean).sum();
    Ok(100.0 * total / MAX_NGRAM as f64)
}

/// Macro-average accumulator: corpus SARI is the mean sentence score.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SariStat {
    pub sum: f64,
    pub count: u64,
}

impl SariStat {
    pub fn sentence(source: &str, output: &str, refs: &[impl AsRef<str>]) -> Result<Self, MetricError> {
        Ok(SariStat { sum: sari_sentence(source, output, refs)?, count: 1 })
    }
}

impl CorpusStat for SariStat {
    fn merge(&mut self, other: &Self) {
        self.sum += other.sum;
        self.count += other.count;
    }

    fn score(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}
