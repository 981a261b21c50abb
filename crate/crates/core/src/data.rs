//! Core data types shared by every stage of the pipeline.
//!
//! [`LabeledMatrix`] stores the `n x p` feature matrix column-major, since
//! almost all work (per-feature fits, z-scores, scrambles) walks one feature
//! at a time. Row access is provided for the classifier.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Training data: `n` samples of `p` features plus a 0/1 label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    n: usize,
    p: usize,
    /// Column-major: feature `j` occupies `values[j * n..(j + 1) * n]`.
    values: Vec<f64>,
    labels: Vec<u8>,
}

impl LabeledMatrix {
    /// Builds from column-major storage and validates every invariant.
    pub fn from_columns(n: usize, p: usize, values: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n} x {p} matrix",
                values.len()
            )));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {n} rows",
                labels.len()
            )));
        }
        validate(Self { n, p, values, labels })
    }

    /// Builds from a slice of rows.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} entries, row 0 has {p}",
                r.len()
            )));
        }
        let mut values = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                values[j * n + i] = x;
            }
        }
        Self::from_columns(n, p, values, labels)
    }

    pub(crate) fn from_columns_unchecked(n: usize, p: usize, values: Vec<f64>, labels: Vec<u8>) -> Self {
        debug_assert_eq!(values.len(), n * p);
        debug_assert_eq!(labels.len(), n);
        Self { n, p, values, labels }
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of features.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n.max(1)).take(self.p)
    }

    /// Empirical class-1 proportion, π̂.
    pub fn pi_hat(&self) -> f64 {
        self.class_count(1) as f64 / self.n as f64
    }

    pub fn class_count(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    /// Same features, different labels. Used for scrambling.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        Self::from_columns(self.n, self.p, self.values.clone(), labels)
    }

    /// The rows listed in `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let m = rows.len();
        let mut values = Vec::with_capacity(m * self.p);
        for j in 0..self.p {
            let col = self.column(j);
            values.extend(rows.iter().map(|&i| col[i]));
        }
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        Self::from_columns(m, self.p, values, labels)
    }
}

/// Checks every [`LabeledMatrix`] invariant and hands the matrix back.
pub fn validate(matrix: LabeledMatrix) -> Result<LabeledMatrix> {
    if matrix.n < 2 {
        return Err(Error::TooFewSamples { min: 2, got: matrix.n });
    }
    if matrix.p == 0 {
        return Err(Error::NoFeatures);
    }
    if matrix.values.len() != matrix.n * matrix.p || matrix.labels.len() != matrix.n {
        return Err(Error::DimensionMismatch(format!(
            "{} values and {} labels for a {} x {} matrix",
            matrix.values.len(),
            matrix.labels.len(),
            matrix.n,
            matrix.p
        )));
    }
    if let Some((row, &value)) = matrix.labels.iter().enumerate().find(|(_, &l)| l > 1) {
        return Err(Error::InvalidLabel { row, value });
    }
    let ones = matrix.class_count(1);
    if ones == 0 {
        return Err(Error::SingleClass(0));
    }
    if ones == matrix.n {
        return Err(Error::SingleClass(1));
    }
    // Report the first offending entry in row-major order.
    let mut first: Option<(usize, usize)> = None;
    for (k, x) in matrix.values.iter().enumerate() {
        if !x.is_finite() {
            let (row, col) = (k % matrix.n, k / matrix.n);
            if first.is_none_or(|f| (row, col) < f) {
                first = Some((row, col));
            }
        }
    }
    if let Some((row, col)) = first {
        return Err(Error::NonFinite { row, col });
    }
    Ok(matrix)
}

/// Centers every column and scales it to unit sample standard deviation
/// (divisor `n - 1`).
pub fn standardize(matrix: &LabeledMatrix) -> Result<LabeledMatrix> {
    let n = matrix.n;
    let mut values = Vec::with_capacity(matrix.values.len());
    for (j, col) in matrix.columns().enumerate() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|x| (x - mean) * (x - mean)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        if sd == 0.0 || !sd.is_finite() {
            return Err(Error::ZeroVariance(j));
        }
        values.extend(col.iter().map(|x| (x - mean) / sd));
    }
    Ok(LabeledMatrix::from_columns_unchecked(
        n,
        matrix.p,
        values,
        matrix.labels.clone(),
    ))
}

/// Per-feature fit of the two-parameter logistic model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScore {
    pub feature_index: usize,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// Mean negative log-likelihood at the fitted point.
    pub ell_hat: f64,
    /// Empirical z-score statistic.
    pub s_hat: f64,
    pub converged: bool,
    pub at_bound: bool,
}

/// Features ordered by ascending `ell_hat`, strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    order: Vec<usize>,
    scores: Vec<FeatureScore>,
}

impl Ranking {
    /// Sorts `scores` (one per feature, any order) ascending by `ell_hat`;
    /// ties go to the lower feature index.
    pub fn from_scores(mut scores: Vec<FeatureScore>) -> Result<Self> {
        let p = scores.len();
        let mut seen = vec![false; p];
        for s in &scores {
            if s.feature_index >= p {
                return Err(Error::IndexOutOfRange {
                    index: s.feature_index,
                    p,
                });
            }
            if std::mem::replace(&mut seen[s.feature_index], true) {
                return Err(Error::DuplicateIndex(s.feature_index));
            }
        }
        scores.sort_by(|a, b| {
            a.ell_hat
                .total_cmp(&b.ell_hat)
                .then(a.feature_index.cmp(&b.feature_index))
        });
        let order = scores.iter().map(|s| s.feature_index).collect();
        Ok(Self { order, scores })
    }

    /// Feature indices, strongest first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Scores aligned with [`order`](Self::order).
    pub fn scores(&self) -> &[FeatureScore] {
        &self.scores
    }

    /// `ell_hat` along the ranking (non-decreasing).
    pub fn ell_sorted(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.ell_hat).collect()
    }

    /// `ell_hat` indexed by feature.
    pub fn ell_by_feature(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.order.len()];
        for s in &self.scores {
            out[s.feature_index] = s.ell_hat;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The first `r` features.
    pub fn prefix(&self, r: usize) -> &[usize] {
        &self.order[..r.min(self.order.len())]
    }
}

/// Which stage-(3) rule produced a [`SelectionResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    Threshold,
    Changepoint,
    BlockCv,
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMethod::Threshold => "threshold",
            SelectionMethod::Changepoint => "changepoint",
            SelectionMethod::BlockCv => "block_cv",
        })
    }
}

/// A diagnostic value attached to a selection.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    Real(f64),
    Int(i64),
    Flag(bool),
    Trace(Vec<f64>),
}

/// Chosen model size and the ranked features it keeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub r: usize,
    pub selected: Vec<usize>,
    pub method: SelectionMethod,
    pub diagnostics: BTreeMap<String, Diagnostic>,
}

impl SelectionResult {
    pub(crate) fn new(ranking: &Ranking, r: usize, method: SelectionMethod) -> Self {
        let r = r.min(ranking.len());
        Self {
            r,
            selected: ranking.prefix(r).to_vec(),
            method,
            diagnostics: BTreeMap::new(),
        }
    }

    pub(crate) fn with(mut self, key: &str, value: Diagnostic) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn real(&self, key: &str) -> Option<f64> {
        match self.diagnostics.get(key) {
            Some(Diagnostic::Real(x)) => Some(*x),
            Some(Diagnostic::Int(x)) => Some(*x as f64),
            _ => None,
        }
    }

    pub fn trace(&self, key: &str) -> Option<&[f64]> {
        match self.diagnostics.get(key) {
            Some(Diagnostic::Trace(t)) => Some(t),
            _ => None,
        }
    }

    pub fn flag(&self, key: &str) -> Option<bool> {
        match self.diagnostics.get(key) {
            Some(Diagnostic::Flag(b)) => Some(*b),
            _ => None,
        }
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn matrix() -> impl Strategy<Value = LabeledMatrix> {
        (3usize..15, 1usize..5).prop_flat_map(|(n, p)| {
            (
                prop::collection::vec(-10.0f64..10.0, n * p),
                prop::collection::vec(0u8..2, n).prop_filter("two classes", |l| l.contains(&0) && l.contains(&1)),
            )
                .prop_map(move |(v, l)| LabeledMatrix::from_columns(n, p, v, l).unwrap())
        })
    }

    fn max_diff(a: &LabeledMatrix, b: &LabeledMatrix) -> f64 {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn standardize_is_idempotent(m in matrix()) {
            let once = standardize(&m).unwrap();
            let twice = standardize(&once).unwrap();
            prop_assert!(max_diff(&once, &twice) < 1e-12);
        }

        #[test]
        fn standardize_commutes_with_row_order(
            (m, perm) in matrix().prop_flat_map(|m| {
                let n = m.n();
                (Just(m), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
            })
        ) {
            let a = standardize(&m.select_rows(&perm).unwrap()).unwrap();
            let b = standardize(&m).unwrap().select_rows(&perm).unwrap();
            prop_assert_eq!(a.labels(), b.labels());
            prop_assert!(max_diff(&a, &b) < 1e-12);
        }
    }
}
