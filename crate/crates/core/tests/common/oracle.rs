//! Brute-force reference computations used to check the metric and
//! statistics implementations. Inputs are restricted to lowercase words
//! separated by single spaces, so plain whitespace splitting is a faithful
//! tokenizer here. Nothing in this file calls into the crate under test.
#![allow(dead_code)]

use std::collections::BTreeSet;

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Every n-gram of the sentence, joined with a separator, with repetition.
fn grams(s: &str, n: usize) -> Vec<String> {
    let w = words(s);
    if w.len() < n {
        return Vec::new();
    }
    (0..=w.len() - n).map(|i| w[i..i + n].join("\u{1}")).collect()
}

fn gram_set(s: &str, n: usize) -> BTreeSet<String> {
    grams(s, n).into_iter().collect()
}

/// Fraction of references containing `g`.
fn ref_fraction(g: &str, refs: &[&str], n: usize) -> f64 {
    let hits = refs.iter().filter(|r| gram_set(r, n).contains(g)).count();
    hits as f64 / refs.len() as f64
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// SARI by enumerating the whole n-gram universe of source, output and
/// references and classifying each n-gram with indicator functions.
pub fn sari(source: &str, output: &str, refs: &[&str]) -> f64 {
    let mut total = 0.0;
    for n in 1..=4 {
        let src = gram_set(source, n);
        let out = gram_set(output, n);
        let mut universe: BTreeSet<String> = src.union(&out).cloned().collect();
        for r in refs {
            universe.extend(gram_set(r, n));
        }

        let (mut add_num, mut add_den, mut add_rec_den) = (0.0, 0.0, 0.0);
        let (mut keep_num, mut keep_den, mut keep_rec_den) = (0.0, 0.0, 0.0);
        let (mut del_num, mut del_den) = (0.0, 0.0);
        for g in &universe {
            let in_s = src.contains(g);
            let in_o = out.contains(g);
            let w = ref_fraction(g, refs, n);
            if in_o && !in_s {
                add_num += w;
                add_den += 1.0;
            }
            if !in_s {
                add_rec_den += w;
            }
            if in_s && in_o {
                keep_num += w;
                keep_den += 1.0;
            }
            if in_s {
                keep_rec_den += w;
            }
            if in_s && !in_o {
                del_num += 1.0 - w;
                del_den += 1.0;
            }
        }
        let add = harmonic(safe_div(add_num, add_den), safe_div(add_num, add_rec_den));
        let keep = harmonic(safe_div(keep_num, keep_den), safe_div(keep_num, keep_rec_den));
        let del = safe_div(del_num, del_den);
        total += (add + keep + del) / 3.0;
    }
    100.0 * total / 4.0
}

/// Corpus BLEU: clipped counts summed over sentences, closest reference
/// length (shorter on ties), no smoothing.
pub fn bleu(corpus: &[(&str, Vec<&str>)]) -> f64 {
    let mut matched = [0usize; 4];
    let mut possible = [0usize; 4];
    let mut c = 0usize;
    let mut r = 0usize;
    for (hyp, refs) in corpus {
        let hl = words(hyp).len();
        c += hl;
        let mut best: Option<usize> = None;
        for rf in refs {
            let rl = words(rf).len();
            best = match best {
                None => Some(rl),
                Some(b) => {
                    let (db, dr) = (b.abs_diff(hl), rl.abs_diff(hl));
                    if dr < db || (dr == db && rl < b) {
                        Some(rl)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        r += best.unwrap();
        for n in 1..=4 {
            let hg = grams(hyp, n);
            possible[n - 1] += hg.len();
            let distinct: BTreeSet<&String> = hg.iter().collect();
            for g in distinct {
                let hc = hg.iter().filter(|x| *x == g).count();
                let rc = refs
                    .iter()
                    .map(|rf| grams(rf, n).iter().filter(|x| *x == g).count())
                    .max()
                    .unwrap_or(0);
                matched[n - 1] += hc.min(rc);
            }
        }
    }
    if c == 0 || matched.contains(&0) {
        return 0.0;
    }
    let mut log_p = 0.0;
    for n in 0..4 {
        log_p += (matched[n] as f64 / possible[n] as f64).ln();
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * (log_p / 4.0).exp()
}

/// Pearson correlation by the textbook two-pass formula.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Exact two-sided permutation p-value for a paired mean-difference
/// statistic, enumerating all 2^n swap patterns.
pub fn exact_swap_p(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let observed = (mean(a) - mean(b)).abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let mut sa = Vec::with_capacity(n);
        let mut sb = Vec::with_capacity(n);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                sa.push(b[i]);
                sb.push(a[i]);
            } else {
                sa.push(a[i]);
                sb.push(b[i]);
            }
        }
        if (mean(&sa) - mean(&sb)).abs() >= observed - 1e-12 {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

/// Shrout-Fleiss ICC(2,1) from raw sums of squares.
pub fn icc2_1(m: &[Vec<f64>]) -> f64 {
    let n = m.len() as f64;
    let k = m[0].len() as f64;
    let grand = m.iter().flatten().sum::<f64>() / (n * k);
    let ss_total: f64 = m.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_rows: f64 = m
        .iter()
        .map(|row| k * (row.iter().sum::<f64>() / k - grand).powi(2))
        .sum();
    let ss_cols: f64 = (0..m[0].len())
        .map(|j| n * (m.iter().map(|row| row[j]).sum::<f64>() / n - grand).powi(2))
        .sum();
    let ss_err = ss_total - ss_rows - ss_cols;
    let bms = ss_rows / (n - 1.0);
    let jms = ss_cols / (k - 1.0);
    let ems = ss_err / ((n - 1.0) * (k - 1.0));
    (bms - ems) / (bms + (k - 1.0) * ems + k * (jms - ems) / n)
}
