//! Paired approximate randomization test over additive corpus statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::MetaEvalError;
use crate::corpus::EvalItem;
use crate::textmetrics::{bleu_item_stats, fkgl_item_stats, sari_item_stats, CorpusMetric, CorpusStat};

pub const DEFAULT_RESAMPLES: u64 = 10_000;
/// Largest item count the exhaustive variant accepts (2^n swap patterns).
pub const MAX_EXACT_ITEMS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigTestResult {
    pub score_a: f64,
    pub score_b: f64,
    /// `score_a - score_b`
    pub observed: f64,
    /// Two-sided.
    pub p_value: f64,
    /// Number of swap patterns evaluated.
    pub resamples: u64,
    pub seed: Option<u64>,
    pub exact: bool,
}

impl SigTestResult {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }

    /// The significantly better system, if any.
    pub fn winner(&self, higher_is_better: bool, alpha: f64) -> Option<Side> {
        if !self.significant(alpha) || self.observed == 0.0 {
            return None;
        }
        let a_better = (self.observed > 0.0) == higher_is_better;
        Some(if a_better { Side::A } else { Side::B })
    }
}

/// `"*"` when `p < alpha`, otherwise empty.
pub fn significance_marker(p_value: f64, alpha: f64) -> &'static str {
    if p_value < alpha {
        "*"
    } else {
        ""
    }
}

fn check_aligned<S>(a: &[S], b: &[S]) -> Result<(), MetaEvalError> {
    if a.len() != b.len() {
        return Err(MetaEvalError::Misaligned(format!("{} items for A, {} for B", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(MetaEvalError::Misaligned("no items".into()));
    }
    Ok(())
}

fn swapped_diff<S: CorpusStat>(a: &[S], b: &[S], mut swap: impl FnMut(usize) -> bool) -> f64 {
    let (mut sa, mut sb) = (S::default(), S::default());
    for i in 0..a.len() {
        if swap(i) {
            sa.merge(&b[i]);
            sb.merge(&a[i]);
        } else {
            sa.merge(&a[i]);
            sb.merge(&b[i]);
        }
    }
    sa.score() - sb.score()
}

fn at_least(d: f64, observed: f64) -> bool {
    d.abs() >= observed.abs() - 1e-9 * (1.0 + observed.abs())
}

fn observed<S: CorpusStat>(a: &[S], b: &[S]) -> (f64, f64) {
    (S::reduce(a).score(), S::reduce(b).score())
}

/// Monte Carlo test: each resample swaps every item's A/B statistics with
/// probability 1/2. Resample `r` draws from ChaCha8 stream `r` of `seed`, so
/// the result does not depend on thread scheduling.
/// `p = (#{|d*| >= |d|} + 1) / (R + 1)`.
pub fn randomization_test<S: CorpusStat>(
    a: &[S],
    b: &[S],
    resamples: u64,
    seed: u64,
) -> Result<SigTestResult, MetaEvalError> {
    check_aligned(a, b)?;
    if resamples == 0 {
        return Err(MetaEvalError::NoResamples);
    }
    let (score_a, score_b) = observed(a, b);
    let obs = score_a - score_b;
    let extreme: u64 = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r);
            u64::from(at_least(swapped_diff(a, b, |_| rng.random::<bool>()), obs))
        })
        .sum();
    Ok(SigTestResult {
        score_a,
        score_b,
        observed: obs,
        p_value: (extreme + 1) as f64 / (resamples + 1) as f64,
        resamples,
        seed: Some(seed),
        exact: false,
    })
}

/// Score differences `A* - B*` under every one of the `2^n` swap patterns,
/// indexed by the pattern's bitmask.
pub fn exact_null_diffs<S: CorpusStat>(a: &[S], b: &[S]) -> Result<Vec<f64>, MetaEvalError> {
    check_aligned(a, b)?;
    if a.len() > MAX_EXACT_ITEMS {
        return Err(MetaEvalError::TooManyForExact { max: MAX_EXACT_ITEMS, got: a.len() });
    }
    Ok((0..1u64 << a.len())
        .into_par_iter()
        .map(|mask| swapped_diff(a, b, |i| mask >> i & 1 == 1))
        .collect())
}

/// Fraction of `null` at least as extreme as `observed`.
pub fn exact_p(null: &[f64], observed: f64) -> f64 {
    null.iter().filter(|&&d| at_least(d, observed)).count() as f64 / null.len() as f64
}

/// Enumerates all `2^n` swap patterns; `p` is the fraction at least as
/// extreme as observed (the identity pattern included, so `p > 0`).
pub fn randomization_test_exact<S: CorpusStat>(a: &[S], b: &[S]) -> Result<SigTestResult, MetaEvalError> {
    let null = exact_null_diffs(a, b)?;
    let (score_a, score_b) = observed(a, b);
    let obs = score_a - score_b;
    Ok(SigTestResult {
        score_a,
        score_b,
        observed: obs,
        p_value: exact_p(&null, obs),
        resamples: null.len() as u64,
        seed: None,
        exact: true,
    })
}

/// Randomization test of two systems' outputs on the same items under a
/// corpus metric.
pub fn randomization_test_items(
    items: &[EvalItem],
    system_a: &str,
    system_b: &str,
    metric: CorpusMetric,
    resamples: u64,
    seed: u64,
) -> Result<SigTestResult, MetaEvalError> {
    let missing: Vec<String> = items
        .iter()
        .filter_map(|it| {
            let lacks: Vec<&str> = [system_a, system_b].into_iter().filter(|s| it.output(s).is_none()).collect();
            (!lacks.is_empty()).then(|| format!("{} (no output from {})", it.id(), lacks.join(", ")))
        })
        .collect();
    if !missing.is_empty() {
        return Err(MetaEvalError::Misaligned(missing.join("; ")));
    }
    match metric {
        CorpusMetric::Sari => {
            randomization_test(&sari_item_stats(items, system_a)?, &sari_item_stats(items, system_b)?, resamples, seed)
        }
        CorpusMetric::Bleu => {
            randomization_test(&bleu_item_stats(items, system_a)?, &bleu_item_stats(items, system_b)?, resamples, seed)
        }
        CorpusMetric::Fkgl => {
            randomization_test(&fkgl_item_stats(items, system_a)?, &fkgl_item_stats(items, system_b)?, resamples, seed)
        }
    }
}
