//! Nearest-centroid classification on a feature subset, with test-set and
//! stratified cross-validated error rates.

use std::collections::HashSet;

use rand::seq::SliceRandom;

use crate::data::LabeledMatrix;
use crate::error::{Error, Result};
use crate::rng::{stream, tag};

/// Per-class training means over the selected features.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidModel {
    pub selected: Vec<usize>,
    pub centroid0: Vec<f64>,
    pub centroid1: Vec<f64>,
}

fn check_selection(selected: &[usize], p: usize) -> Result<()> {
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut seen = HashSet::with_capacity(selected.len());
    for &j in selected {
        if j >= p {
            return Err(Error::IndexOutOfRange { index: j, p });
        }
        if !seen.insert(j) {
            return Err(Error::DuplicateIndex(j));
        }
    }
    Ok(())
}

fn class_means(matrix: &LabeledMatrix, rows: &[usize], j: usize) -> (f64, f64) {
    let col = matrix.column(j);
    let labels = matrix.labels();
    let (mut s0, mut s1, mut n0, mut n1) = (0.0, 0.0, 0usize, 0usize);
    for &i in rows {
        if labels[i] == 1 {
            s1 += col[i];
            n1 += 1;
        } else {
            s0 += col[i];
            n0 += 1;
        }
    }
    (s0 / n0 as f64, s1 / n1 as f64)
}

fn train_on_rows(matrix: &LabeledMatrix, rows: &[usize], selected: &[usize]) -> CentroidModel {
    let (centroid0, centroid1) = selected.iter().map(|&j| class_means(matrix, rows, j)).unzip();
    CentroidModel {
        selected: selected.to_vec(),
        centroid0,
        centroid1,
    }
}

/// Class means of `matrix` restricted to `selected`.
pub fn train_centroid(matrix: &LabeledMatrix, selected: &[usize]) -> Result<CentroidModel> {
    check_selection(selected, matrix.p())?;
    let rows: Vec<usize> = (0..matrix.n()).collect();
    Ok(train_on_rows(matrix, &rows, selected))
}

impl CentroidModel {
    /// Label of the nearer centroid (squared Euclidean); ties go to 0.
    ///
    /// `row` is a full feature vector; only the selected entries are read.
    pub fn predict(&self, row: &[f64]) -> u8 {
        self.predict_with(|j| row[j])
    }

    fn predict_with(&self, value: impl Fn(usize) -> f64) -> u8 {
        let (mut d0, mut d1) = (0.0, 0.0);
        for ((&j, &c0), &c1) in self.selected.iter().zip(&self.centroid0).zip(&self.centroid1) {
            let x = value(j);
            d0 += (x - c0) * (x - c0);
            d1 += (x - c1) * (x - c1);
        }
        u8::from(d1 < d0)
    }

    fn errors_on(&self, matrix: &LabeledMatrix, rows: impl Iterator<Item = usize>) -> usize {
        let labels = matrix.labels();
        rows.filter(|&i| self.predict_with(|j| matrix.get(i, j)) != labels[i])
            .count()
    }
}

pub fn predict(model: &CentroidModel, row: &[f64]) -> u8 {
    model.predict(row)
}

/// Fraction of rows of `test` that `model` misclassifies.
pub fn test_error(model: &CentroidModel, test: &LabeledMatrix) -> Result<f64> {
    if let Some(&j) = model.selected.iter().find(|&&j| j >= test.p()) {
        return Err(Error::IndexOutOfRange { index: j, p: test.p() });
    }
    Ok(model.errors_on(test, 0..test.n()) as f64 / test.n() as f64)
}

/// Fold number for every row: each class, taken in input order, is
/// shuffled with a seeded stream and dealt round-robin into `folds` folds.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Result<Vec<usize>> {
    let order: Vec<usize> = (0..labels.len()).collect();
    deal_folds(labels, &order, folds, seed)
}

/// As [`stratified_folds`], but each class is first put in a canonical
/// order (rows compared lexicographically by value), so a row receives the
/// same fold however the rows of `matrix` are permuted.
pub fn stratified_folds_canonical(matrix: &LabeledMatrix, folds: usize, seed: u64) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..matrix.n()).collect();
    order.sort_by(|&a, &b| {
        (0..matrix.p())
            .map(|j| matrix.get(a, j).total_cmp(&matrix.get(b, j)))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    deal_folds(matrix.labels(), &order, folds, seed)
}

fn deal_folds(labels: &[u8], order: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {folds}")));
    }
    let mut assignment = vec![0; labels.len()];
    for class in [0u8, 1] {
        let mut members: Vec<usize> = order.iter().copied().filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::ClassTooSmall {
                class,
                size: members.len(),
                folds,
            });
        }
        members.shuffle(&mut stream(seed, &[tag::FOLDS, u64::from(class)]));
        for (k, &i) in members.iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    Ok(assignment)
}

/// Pooled cross-validated error for a given fold assignment.
pub fn cv_error_with_folds(matrix: &LabeledMatrix, selected: &[usize], fold_of_row: &[usize]) -> Result<f64> {
    check_selection(selected, matrix.p())?;
    if fold_of_row.len() != matrix.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} fold labels for {} rows",
            fold_of_row.len(),
            matrix.n()
        )));
    }
    let folds = fold_of_row.iter().max().map_or(0, |m| m + 1);
    let mut wrong = 0;
    for f in 0..folds {
        let (held, train): (Vec<usize>, Vec<usize>) = (0..matrix.n()).partition(|&i| fold_of_row[i] == f);
        if held.is_empty() {
            continue;
        }
        let model = train_on_rows(matrix, &train, selected);
        wrong += model.errors_on(matrix, held.into_iter());
    }
    Ok(wrong as f64 / matrix.n() as f64)
}

/// Stratified `folds`-fold cross-validated error of the centroid rule,
/// with folds from [`stratified_folds_canonical`].
pub fn cv_error(matrix: &LabeledMatrix, selected: &[usize], folds: usize, seed: u64) -> Result<f64> {
    let assignment = stratified_folds_canonical(matrix, folds, seed)?;
    cv_error_with_folds(matrix, selected, &assignment)
}

/// Training-set (resubstitution) error.
pub fn apparent_error(matrix: &LabeledMatrix, selected: &[usize]) -> Result<f64> {
    let model = train_centroid(matrix, selected)?;
    test_error(&model, matrix)
}

/// Test error of the centroid rule built on the first `k` features of
/// `order`, for every `k = 1..=max_k`. Distances are accumulated
/// feature by feature, in the same order [`CentroidModel::predict`] sums
/// them, so entry `k - 1` equals `test_error(train_centroid(train,
/// &order[..k]), test)` exactly.
pub fn error_curve(train: &LabeledMatrix, test: &LabeledMatrix, order: &[usize], max_k: usize) -> Result<Vec<f64>> {
    let max_k = max_k.min(order.len());
    check_selection(&order[..max_k], train.p())?;
    if train.p() != test.p() {
        return Err(Error::DimensionMismatch(format!(
            "train p = {}, test p = {}",
            train.p(),
            test.p()
        )));
    }
    let rows: Vec<usize> = (0..train.n()).collect();
    let m = test.n();
    let labels = test.labels();
    let mut d0 = vec![0.0; m];
    let mut d1 = vec![0.0; m];
    let mut curve = Vec::with_capacity(max_k);
    for &j in &order[..max_k] {
        let (c0, c1) = class_means(train, &rows, j);
        let col = test.column(j);
        let mut wrong = 0;
        for i in 0..m {
            let x = col[i];
            d0[i] += (x - c0) * (x - c0);
            d1[i] += (x - c1) * (x - c1);
            if u8::from(d1[i] < d0[i]) != labels[i] {
                wrong += 1;
            }
        }
        curve.push(wrong as f64 / m as f64);
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabeledMatrix {
        LabeledMatrix::from_rows(
            &[vec![0.0, 5.0], vec![0.0, 1.0], vec![1.0, 2.0], vec![1.0, 4.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn centroids_are_class_means() {
        let m = train_centroid(&toy(), &[0]).unwrap();
        assert_eq!((m.centroid0.clone(), m.centroid1.clone()), (vec![0.0], vec![1.0]));
        let m = train_centroid(&toy(), &[1, 0]).unwrap();
        assert_eq!(m.centroid0, vec![3.0, 0.0]);
        assert_eq!(m.centroid1, vec![3.0, 1.0]);
    }

    #[test]
    fn selection_errors() {
        assert!(matches!(train_centroid(&toy(), &[]), Err(Error::EmptySelection)));
        let e = train_centroid(&toy(), &[0, 0]).unwrap_err();
        assert!(e.to_string().contains("duplicate index"));
        assert!(matches!(
            train_centroid(&toy(), &[2]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn predict_nearest_with_tie_to_zero() {
        let m = train_centroid(&toy(), &[0]).unwrap();
        assert_eq!(m.predict(&[0.2, 0.0]), 0);
        assert_eq!(m.predict(&[0.5, 0.0]), 0);
        assert_eq!(m.predict(&[0.8, 0.0]), 1);
    }

    #[test]
    fn test_error_extremes() {
        let m = train_centroid(&toy(), &[0]).unwrap();
        assert_eq!(test_error(&m, &toy()).unwrap(), 0.0);
        let flipped = toy().with_labels(vec![1, 1, 0, 0]).unwrap();
        assert_eq!(test_error(&m, &flipped).unwrap(), 1.0);
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<u8> = (0..23).map(|i| u8::from(i % 3 == 0)).collect();
        let f = stratified_folds(&labels, 4, 1).unwrap();
        for class in [0, 1] {
            let mut counts = [0; 4];
            for (i, &k) in f.iter().enumerate() {
                if labels[i] == class {
                    counts[k] += 1;
                }
            }
            assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
        assert!(matches!(
            stratified_folds(&[0, 0, 1, 0], 2, 1),
            Err(Error::ClassTooSmall { class: 1, .. })
        ));
    }

    #[test]
    fn separated_classes_have_zero_cv_error() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![if i < 10 { -50.0 } else { 50.0 } + (i as f64) * 0.1])
            .collect();
        let labels = (0..20).map(|i| u8::from(i >= 10)).collect();
        let m = LabeledMatrix::from_rows(&rows, labels).unwrap();
        assert_eq!(cv_error(&m, &[0], 5, 3).unwrap(), 0.0);
    }

    #[test]
    fn curve_matches_direct_evaluation() {
        let train = LabeledMatrix::from_rows(
            &[
                vec![0.1, 2.0, -1.0],
                vec![0.4, -1.0, 0.3],
                vec![1.1, 0.5, 0.2],
                vec![0.9, 1.5, -0.8],
            ],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let test = LabeledMatrix::from_rows(
            &[
                vec![0.2, 0.1, 0.0],
                vec![0.7, 1.0, -1.0],
                vec![1.0, -0.5, 0.5],
                vec![0.5, 0.5, 0.5],
                vec![0.0, 3.0, 0.0],
            ],
            vec![0, 1, 1, 0, 1],
        )
        .unwrap();
        let order = [2, 0, 1];
        let curve = error_curve(&train, &test, &order, 3).unwrap();
        for k in 1..=3 {
            let m = train_centroid(&train, &order[..k]).unwrap();
            assert_eq!(curve[k - 1], test_error(&m, &test).unwrap());
        }
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(n: std::ops::Range<usize>) -> impl Strategy<Value = LabeledMatrix> {
        (n, 1usize..4).prop_flat_map(|(n, p)| {
            (
                prop::collection::vec(-4.0f64..4.0, n * p),
                prop::collection::vec(0u8..2, n).prop_filter("two classes of 2+", |l| {
                    l.iter().filter(|&&v| v == 1).count() >= 2 && l.iter().filter(|&&v| v == 0).count() >= 2
                }),
            )
                .prop_map(move |(v, l)| LabeledMatrix::from_columns(n, p, v, l).unwrap())
        })
    }

    fn dist2(model: &CentroidModel, row: &[f64]) -> (f64, f64) {
        let mut d = (0.0, 0.0);
        for (k, &j) in model.selected.iter().enumerate() {
            d.0 += (row[j] - model.centroid0[k]).powi(2);
            d.1 += (row[j] - model.centroid1[k]).powi(2);
        }
        d
    }

    proptest! {
        #[test]
        fn prediction_survives_affine_maps(
            m in matrix(4..20),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
            query in prop::collection::vec(-4.0f64..4.0, 3),
        ) {
            let p = m.p();
            let selected: Vec<usize> = (0..p).collect();
            let model = train_centroid(&m, &selected).unwrap();
            let q = &query[..p];
            let (d0, d1) = dist2(&model, q);
            prop_assume!((d0 - d1).abs() > 1e-9 * (d0 + d1));
            let rows: Vec<Vec<f64>> = (0..m.n()).map(|i| m.row(i).iter().map(|v| scale * v + shift).collect()).collect();
            let mapped = LabeledMatrix::from_rows(&rows, m.labels().to_vec()).unwrap();
            let q2: Vec<f64> = q.iter().map(|v| scale * v + shift).collect();
            prop_assert_eq!(model.predict(q), train_centroid(&mapped, &selected).unwrap().predict(&q2));
        }

        #[test]
        fn cv_error_ignores_row_order(
            (m, perm) in matrix(10..24).prop_flat_map(|m| {
                let n = m.n();
                (Just(m), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
            }),
            seed in 0u64..1000,
        ) {
            let selected: Vec<usize> = (0..m.p()).collect();
            let a = cv_error(&m, &selected, 2, seed).unwrap();
            let b = cv_error(&m.select_rows(&perm).unwrap(), &selected, 2, seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn cv_on_ten_rows_matches_a_hand_trace() {
        let x = [-1.2, 0.3, -0.4, 1.9, 0.8, 2.2, -0.1, 1.1, 0.5, 3.0];
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
        let m = LabeledMatrix::from_rows(&rows, labels.clone()).unwrap();
        let folds = stratified_folds_canonical(&m, 5, 4).unwrap();
        // every fold holds one row of each class
        for f in 0..5 {
            let held: Vec<usize> = (0..10).filter(|&i| folds[i] == f).collect();
            assert_eq!(held.len(), 2);
            assert_ne!(labels[held[0]], labels[held[1]]);
        }
        // held-out decisions by hand: centroids of the other eight rows,
        // nearer one wins, ties to class 0
        let mut wrong = 0;
        for f in 0..5 {
            let mean = |class: u8| {
                let v: Vec<f64> = (0..10)
                    .filter(|&i| folds[i] != f && labels[i] == class)
                    .map(|i| x[i])
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            let (c0, c1) = (mean(0), mean(1));
            for i in (0..10).filter(|&i| folds[i] == f) {
                let guess = u8::from((x[i] - c1).abs() < (x[i] - c0).abs());
                wrong += usize::from(guess != labels[i]);
            }
        }
        assert_eq!(cv_error(&m, &[0], 5, 4).unwrap(), wrong as f64 / 10.0);
        // the rows 0.8 (class 0) and -0.1 (class 1) sit on the wrong side of
        // any split learned from the rest
        assert!(wrong >= 2);
    }

    #[test]
    fn random_labels_give_coin_flip_error() {
        use crate::simulate::{generate, Magnitude, NoiseSpec, Placement, SignalSpec, SimConfig};
        let mut total = 0.0;
        for seed in 0..200 {
            let config = SimConfig {
                n: 40,
                p: 5,
                pi: 0.5,
                signal: SignalSpec {
                    count: 0,
                    magnitude: Magnitude::Fixed(0.0),
                },
                noise: NoiseSpec::IidStandardNormal,
                placement: Placement::GroupedHead,
                balanced: true,
                seed,
            };
            let m = generate(&config).unwrap().0;
            total += cv_error(&m, &[0, 1, 2, 3, 4], 5, seed).unwrap();
        }
        let mean = total / 200.0;
        assert!((mean - 0.5).abs() < 0.05, "{mean}");
    }
}
