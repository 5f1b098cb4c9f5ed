//! Inter-annotator agreement for the Likert rating task: unanimity rate and
//! intraclass correlation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::erroranalysis::{Rating, RatingDimension};

#[derive(Debug, Error, PartialEq)]
pub enum AgreementError {
    #[error("rating matrix is empty")]
    Empty,
    #[error("need at least {needed} {what}, got {got}")]
    TooSmall { what: &'static str, needed: usize, got: usize },
    #[error("row {row} has {got} values, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("value {value} at row {row}, column {col} is outside 1..=3")]
    OutOfRange { row: usize, col: usize, value: u8 },
    #[error("item {item} has no rating from {rater}")]
    MissingCell { item: String, rater: String },
    #[error("duplicate rating for item {item} by {rater}")]
    DuplicateCell { item: String, rater: String },
    #[error("ICC undefined: zero between-item variance or zero denominator")]
    Degenerate,
}

/// Items x raters grid of 1-3 scores with no missing cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatingMatrix {
    pub items: Vec<String>,
    pub raters: Vec<String>,
    pub values: Vec<Vec<u8>>,
}

impl RatingMatrix {
    pub fn new(items: Vec<String>, raters: Vec<String>, values: Vec<Vec<u8>>) -> Result<Self, AgreementError> {
        if values.len() != items.len() {
            return Err(AgreementError::Ragged { row: values.len(), expected: items.len(), got: values.len() });
        }
        for (r, row) in values.iter().enumerate() {
            if row.len() != raters.len() {
                return Err(AgreementError::Ragged { row: r, expected: raters.len(), got: row.len() });
            }
            if let Some((c, &v)) = row.iter().enumerate().find(|(_, v)| !(1..=3).contains(*v)) {
                return Err(AgreementError::OutOfRange { row: r, col: c, value: v });
            }
        }
        Ok(Self { items, raters, values })
    }

    /// Anonymous matrix; item and rater ids are positional.
    pub fn from_rows(values: Vec<Vec<u8>>) -> Result<Self, AgreementError> {
        let k = values.first().map_or(0, Vec::len);
        let items = (0..values.len()).map(|i| i.to_string()).collect();
        let raters = (0..k).map(|i| format!("r{i}")).collect();
        Self::new(items, raters, values)
    }

    /// One dimension of a set of ratings. Units are keyed by (item, system);
    /// rows and columns come out sorted. Every unit must be rated by every
    /// annotator that appears anywhere in `ratings`.
    pub fn from_ratings(ratings: &[Rating], dim: RatingDimension) -> Result<Self, AgreementError> {
        let raters: BTreeSet<&str> = ratings.iter().map(|r| r.annotator.as_str()).collect();
        let mut cells: BTreeMap<(&str, &str), BTreeMap<&str, u8>> = BTreeMap::new();
        for r in ratings {
            let row = cells.entry((&r.item_id, &r.system_id)).or_default();
            if row.insert(&r.annotator, r.get(dim)).is_some() {
                return Err(AgreementError::DuplicateCell {
                    item: format!("{}/{}", r.item_id, r.system_id),
                    rater: r.annotator.clone(),
                });
            }
        }
        let mut items = Vec::with_capacity(cells.len());
        let mut values = Vec::with_capacity(cells.len());
        for ((item, system), row) in cells {
            let unit = format!("{item}/{system}");
            let mut vals = Vec::with_capacity(raters.len());
            for rater in &raters {
                match row.get(rater) {
                    Some(&v) => vals.push(v),
                    None => return Err(AgreementError::MissingCell { item: unit, rater: rater.to_string() }),
                }
            }
            items.push(unit);
            values.push(vals);
        }
        Self::new(items, raters.into_iter().map(String::from).collect(), values)
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_raters(&self) -> usize {
        self.raters.len()
    }

    fn as_f64(&self) -> Vec<Vec<f64>> {
        self.values.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect()
    }
}

/// Fraction of items on which every rater gave the same score.
pub fn overlap_rate(m: &RatingMatrix) -> Result<f64, AgreementError> {
    if m.n_items() == 0 || m.n_raters() == 0 {
        return Err(AgreementError::Empty);
    }
    if m.n_raters() < 2 {
        return Err(AgreementError::TooSmall { what: "raters", needed: 2, got: m.n_raters() });
    }
    let unanimous = m.values.iter().filter(|row| row.iter().all(|&v| v == row[0])).count();
    Ok(unanimous as f64 / m.n_items() as f64)
}

/// Shrout-Fleiss ICC forms: model (1 = one-way random, 2 = two-way random,
/// 3 = two-way mixed) and unit (single rater or mean of k raters).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize)]
pub enum IccForm {
    Icc1,
    #[default]
    Icc2,
    Icc3,
    Icc1k,
    Icc2k,
    Icc3k,
}

impl IccForm {
    pub const ALL: [IccForm; 6] =
        [IccForm::Icc1, IccForm::Icc2, IccForm::Icc3, IccForm::Icc1k, IccForm::Icc2k, IccForm::Icc3k];

    pub fn as_str(self) -> &'static str {
        match self {
            IccForm::Icc1 => "ICC(1,1)",
            IccForm::Icc2 => "ICC(2,1)",
            IccForm::Icc3 => "ICC(3,1)",
            IccForm::Icc1k => "ICC(1,k)",
            IccForm::Icc2k => "ICC(2,k)",
            IccForm::Icc3k => "ICC(3,k)",
        }
    }
}

impl fmt::Display for IccForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IccForm {
    type Err = String;

    /// Accepts `ICC(2,1)`, `2,1`, `icc2`, `2k` and similar spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .to_ascii_lowercase()
            .chars()
            .filter(|c| !matches!(c, ' ' | '(' | ')' | ','))
            .collect();
        let norm = norm.strip_prefix("icc").unwrap_or(&norm);
        match norm {
            "1" | "11" => Ok(IccForm::Icc1),
            "2" | "21" => Ok(IccForm::Icc2),
            "3" | "31" => Ok(IccForm::Icc3),
            "1k" => Ok(IccForm::Icc1k),
            "2k" => Ok(IccForm::Icc2k),
            "3k" => Ok(IccForm::Icc3k),
            _ => Err(format!("unknown ICC form {s:?}")),
        }
    }
}

/// Mean squares of the two-way decomposition of an n x k grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSquares {
    pub n: usize,
    pub k: usize,
    /// Between items (rows).
    pub msr: f64,
    /// Between raters (columns).
    pub msc: f64,
    /// Residual.
    pub mse: f64,
    /// Within items (columns + residual, one-way model).
    pub msw: f64,
}

pub fn mean_squares(values: &[Vec<f64>]) -> Result<MeanSquares, AgreementError> {
    let n = values.len();
    let k = values.first().map_or(0, Vec::len);
    if n == 0 || k == 0 {
        return Err(AgreementError::Empty);
    }
    if let Some((row, r)) = values.iter().enumerate().find(|(_, r)| r.len() != k) {
        return Err(AgreementError::Ragged { row, expected: k, got: r.len() });
    }
    if n < 2 {
        return Err(AgreementError::TooSmall { what: "items", needed: 2, got: n });
    }
    if k < 2 {
        return Err(AgreementError::TooSmall { what: "raters", needed: 2, got: k });
    }
    let (nf, kf) = (n as f64, k as f64);
    let grand = values.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = values.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = (0..k).map(|c| values.iter().map(|r| r[c]).sum::<f64>() / nf).collect();
    let sst: f64 = values.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ssr = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ssc = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let sse = (sst - ssr - ssc).max(0.0);
    Ok(MeanSquares {
        n,
        k,
        msr: ssr / (nf - 1.0),
        msc: ssc / (kf - 1.0),
        mse: sse / ((nf - 1.0) * (kf - 1.0)),
        msw: (ssc + sse) / (nf * (kf - 1.0)),
    })
}

/// ICC of a real-valued items x raters grid.
pub fn icc_values(values: &[Vec<f64>], form: IccForm) -> Result<f64, AgreementError> {
    let ms = mean_squares(values)?;
    let scale = values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if ms.msr <= 1e-12 * scale * scale {
        return Err(AgreementError::Degenerate);
    }
    let (n, k) = (ms.n as f64, ms.k as f64);
    let MeanSquares { msr, msc, mse, msw, .. } = ms;
    let (num, den) = match form {
        IccForm::Icc1 => (msr - msw, msr + (k - 1.0) * msw),
        IccForm::Icc2 => (msr - mse, msr + (k - 1.0) * mse + k * (msc - mse) / n),
        IccForm::Icc3 => (msr - mse, msr + (k - 1.0) * mse),
        IccForm::Icc1k => (msr - msw, msr),
        IccForm::Icc2k => (msr - mse, msr + (msc - mse) / n),
        IccForm::Icc3k => (msr - mse, msr),
    };
    if den <= 1e-12 * (msr + msc + mse + msw) {
        return Err(AgreementError::Degenerate);
    }
    Ok(num / den)
}

pub fn icc(m: &RatingMatrix, form: IccForm) -> Result<f64, AgreementError> {
    icc_values(&m.as_f64(), form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn overlap_examples() {
        let all_same = RatingMatrix::from_rows(vec![vec![3, 3, 3], vec![1, 1, 1]]).unwrap();
        assert_eq!(overlap_rate(&all_same).unwrap(), 1.0);

        let m = RatingMatrix::from_rows(vec![vec![3, 3, 3], vec![2, 2, 2], vec![1, 2, 3], vec![3, 3, 3]]).unwrap();
        assert_eq!(overlap_rate(&m).unwrap(), 0.75);

        let mut rows = vec![vec![3, 3, 3]; 98];
        rows.push(vec![2, 3, 3]);
        rows.push(vec![3, 3, 2]);
        assert_eq!(overlap_rate(&RatingMatrix::from_rows(rows).unwrap()).unwrap(), 0.98);

        let empty = RatingMatrix::from_rows(vec![]).unwrap();
        assert_eq!(overlap_rate(&empty), Err(AgreementError::Empty));
    }

    #[test]
    fn icc_edge_cases() {
        let perfect = RatingMatrix::from_rows(vec![vec![1, 1, 1], vec![2, 2, 2], vec![3, 3, 3]]).unwrap();
        for form in IccForm::ALL {
            assert!((icc(&perfect, form).unwrap() - 1.0).abs() < 1e-12, "{form}");
        }
        let constant = RatingMatrix::from_rows(vec![vec![2, 2], vec![2, 2], vec![2, 2]]).unwrap();
        assert_eq!(icc(&constant, IccForm::default()), Err(AgreementError::Degenerate));
        let one_item = RatingMatrix::from_rows(vec![vec![2, 3]]).unwrap();
        assert!(matches!(icc(&one_item, IccForm::Icc2), Err(AgreementError::TooSmall { .. })));
    }

    #[test]
    fn textbook_example() {
        // 6 targets x 4 judges; reference values are well known for this grid.
        let m: Vec<Vec<f64>> = [[9., 2., 5., 8.], [6., 1., 3., 2.], [8., 4., 6., 8.], [7., 1., 2., 6.], [10., 5., 6., 9.], [6., 2., 4., 7.]]
            .iter()
            .map(|r| r.to_vec())
            .collect();
        let want = [
            (IccForm::Icc1, 0.17),
            (IccForm::Icc2, 0.29),
            (IccForm::Icc3, 0.71),
            (IccForm::Icc1k, 0.44),
            (IccForm::Icc2k, 0.62),
            (IccForm::Icc3k, 0.91),
        ];
        for (form, v) in want {
            let got = icc_values(&m, form).unwrap();
            assert!((got - v).abs() < 0.005, "{form}: {got}");
        }
    }

    #[test]
    fn form_parsing() {
        assert_eq!("ICC(2,1)".parse::<IccForm>().unwrap(), IccForm::Icc2);
        assert_eq!("3k".parse::<IccForm>().unwrap(), IccForm::Icc3k);
        assert_eq!("icc1".parse::<IccForm>().unwrap(), IccForm::Icc1);
        assert!("4".parse::<IccForm>().is_err());
    }

    #[test]
    fn matrix_from_ratings() {
        let r = |id: &str, a: &str, m: u8| Rating {
            item_id: id.into(),
            system_id: "s".into(),
            annotator: a.into(),
            dataset: None,
            fluency: 3,
            meaning: m,
            simplicity: 3,
        };
        let ratings = vec![r("2", "b", 1), r("1", "a", 3), r("2", "a", 2), r("1", "b", 3)];
        let m = RatingMatrix::from_ratings(&ratings, RatingDimension::Meaning).unwrap();
        assert_eq!(m.items, vec!["1/s", "2/s"]);
        assert_eq!(m.raters, vec!["a", "b"]);
        assert_eq!(m.values, vec![vec![3, 3], vec![2, 1]]);
        assert!(matches!(
            RatingMatrix::from_ratings(&ratings[..3], RatingDimension::Meaning),
            Err(AgreementError::MissingCell { .. })
        ));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(RatingMatrix::from_rows(vec![vec![1, 4]]), Err(AgreementError::OutOfRange { .. })));
    }

    #[test]
    fn icc_falls_as_rater_noise_grows() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let truth: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..3.0)).collect();
        let mut last = f64::INFINITY;
        for sigma in [0.1, 0.5, 1.0, 2.0, 4.0] {
            let mut mean = 0.0;
            for _ in 0..20 {
                let grid: Vec<Vec<f64>> = truth
                    .iter()
                    .map(|t| (0..3).map(|_| t + sigma * (rng.random::<f64>() - 0.5) * 12f64.sqrt()).collect())
                    .collect();
                mean += icc_values(&grid, IccForm::Icc2).unwrap() / 20.0;
            }
            assert!(mean < last, "sigma {sigma}: {mean} !< {last}");
            last = mean;
        }
    }

    fn matrix() -> impl Strategy<Value = Vec<Vec<u8>>> {
        (2usize..10, 2usize..5).prop_flat_map(|(n, k)| prop::collection::vec(prop::collection::vec(1u8..=3, k), n))
    }

    proptest! {
        #[test]
        fn permutation_invariant(rows in matrix(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rows[0].len();
            let mut cols: Vec<usize> = (0..k).collect();
            cols.shuffle(&mut rng);
            let mut shuffled: Vec<Vec<u8>> = rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
            shuffled.shuffle(&mut rng);
            let a = RatingMatrix::from_rows(rows).unwrap();
            let b = RatingMatrix::from_rows(shuffled).unwrap();
            prop_assert_eq!(overlap_rate(&a).unwrap(), overlap_rate(&b).unwrap());
            for form in IccForm::ALL {
                match (icc(&a, form), icc(&b, form)) {
                    (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-9),
                    (x, y) => prop_assert_eq!(x.is_err(), y.is_err()),
                }
            }
        }

        #[test]
        fn bounded_above_by_one(rows in matrix()) {
            let unanimous = rows.iter().all(|r| r.iter().all(|&v| v == r[0]));
            let m = RatingMatrix::from_rows(rows).unwrap();
            let o = overlap_rate(&m).unwrap();
            prop_assert!((0.0..=1.0).contains(&o));
            prop_assert_eq!(o == 1.0, unanimous);
            for form in IccForm::ALL {
                if let Ok(v) = icc(&m, form) {
                    prop_assert!(v <= 1.0 + 1e-12, "{} = {}", form, v);
                }
            }
        }
    }
}
