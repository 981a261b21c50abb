//! Choosing how many ranked features to keep.
//!
//! Three selectors work on a [`Ranking`]:
//!
//! * thresholding: stop at the first rank whose successors look like noise,
//!   judged against a threshold `t` (either the `u2`-corrected rule or a
//!   percentile of scores recomputed on scrambled labels);
//! * change-point: locate the shift in the ratio of the sorted original
//!   scores to sorted scrambled scores;
//! * block cross-validation: grow the model in blocks of `b` ranked features
//!   while the cross-validated centroid error keeps improving.

use rand::seq::SliceRandom;

use crate::classify::{apparent_error, cv_error_with_folds, stratified_folds_canonical};
use crate::data::{Diagnostic, LabeledMatrix, Ranking, SelectionMethod, SelectionResult};
use crate::error::{Error, Result};
use crate::logit::{rank, zscore_empirical, FitSettings};
use crate::rng::{stream, tag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// `ell_tilde = ell_0 - u2_hat`, default `t = -lambda^2.5`.
    U2Corrected,
    /// `ell_tilde = 0`, `t` = lower `alpha_level` quantile of scrambled scores.
    ScrambledPercentile { alpha_level: f64, n_scrambles: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSettings {
    /// Number of successors that must all fail the signal test.
    pub k0: usize,
    /// Largest model size considered; `None` means `p`.
    pub q: Option<usize>,
    pub mode: ThresholdMode,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        Self {
            k0: 0,
            q: None,
            mode: ThresholdMode::U2Corrected,
        }
    }
}

impl ThresholdSettings {
    pub fn validate(&self) -> Result<()> {
        if let ThresholdMode::ScrambledPercentile {
            alpha_level,
            n_scrambles,
        } = self.mode
        {
            check_alpha(alpha_level)?;
            check_scrambles(n_scrambles)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangePointSettings {
    pub n_scrambles: usize,
}

impl Default for ChangePointSettings {
    fn default() -> Self {
        Self { n_scrambles: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockCvSettings {
    /// Block size `b`; `None` means `n`.
    pub block_size: Option<usize>,
    pub cv_folds: usize,
    /// Consecutive non-improving blocks tolerated before stopping.
    pub patience: usize,
    /// Number of alternative block sizes tried afterwards (`b/2, 2b, b/4, ...`).
    pub backfill_retries: usize,
}

impl Default for BlockCvSettings {
    fn default() -> Self {
        Self {
            block_size: None,
            cv_folds: 5,
            patience: 1,
            backfill_retries: 2,
        }
    }
}

impl BlockCvSettings {
    pub fn validate(&self) -> Result<()> {
        if self.block_size == Some(0) || self.cv_folds < 2 || self.patience == 0 {
            return Err(Error::InvalidConfig(format!("block-cv settings {self:?}")));
        }
        Ok(())
    }
}

fn check_alpha(alpha_level: f64) -> Result<()> {
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha_level must lie in (0, 1), got {alpha_level}"
        )));
    }
    Ok(())
}

fn check_scrambles(n_scrambles: usize) -> Result<()> {
    if n_scrambles == 0 {
        return Err(Error::InvalidConfig("n_scrambles must be at least 1".into()));
    }
    Ok(())
}

fn check_aligned(ranking: &Ranking, matrix: &LabeledMatrix) -> Result<()> {
    if ranking.len() != matrix.p() {
        return Err(Error::DimensionMismatch(format!(
            "ranking has {} features, matrix {}",
            ranking.len(),
            matrix.p()
        )));
    }
    Ok(())
}

/// Pooled within-column variance `(n p)^-1 sum_ij (X_ij - mean_j)^2`.
fn tau_hat_sq(matrix: &LabeledMatrix) -> Result<f64> {
    let n = matrix.n() as f64;
    let total: f64 = matrix
        .columns()
        .map(|col| {
            let mean = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        })
        .sum();
    let tau2 = total / (n * matrix.p() as f64);
    if !(tau2 > 0.0) {
        return Err(Error::DegenerateMatrix);
    }
    Ok(tau2)
}

fn u2_from(pi: f64, tau2: f64, s: f64) -> f64 {
    0.5 * pi * (3.0 - 2.0 * pi) / tau2 * s * s
}

/// `0.5 pi_hat (3 - 2 pi_hat) S_hat_j^2 / tau_hat^2`.
pub fn u2_hat(matrix: &LabeledMatrix, feature_index: usize) -> Result<f64> {
    if feature_index >= matrix.p() {
        return Err(Error::IndexOutOfRange {
            index: feature_index,
            p: matrix.p(),
        });
    }
    let tau2 = tau_hat_sq(matrix)?;
    let s = zscore_empirical(matrix.labels(), matrix.column(feature_index))?;
    Ok(u2_from(matrix.pi_hat(), tau2, s))
}

/// [`u2_hat`] for every feature, indexed by feature.
pub fn u2_hat_all(matrix: &LabeledMatrix) -> Result<Vec<f64>> {
    let tau2 = tau_hat_sq(matrix)?;
    let pi = matrix.pi_hat();
    matrix
        .columns()
        .map(|col| Ok(u2_from(pi, tau2, zscore_empirical(matrix.labels(), col)?)))
        .collect()
}

/// Intercept-only negative log-likelihood, the common starting value of
/// every fit.
pub fn null_ell(pi: f64) -> f64 {
    -(pi * pi.ln() + (1.0 - pi) * (1.0 - pi).ln())
}

/// Default threshold for the `u2` rule: `-lambda^2.5` with
/// `lambda = (log n / n)^(1/2)`.
pub fn default_u2_threshold(n: usize) -> f64 {
    let lambda = ((n as f64).ln() / n as f64).sqrt();
    -lambda.powf(2.5)
}

/// The thresholding rule on a sequence `d` listed in rank order.
///
/// Returns the least `r` in `k0 + 1 ..= q` such that `d` at ranks
/// `r + 1, ..., r + max(k0, 1)` all exceed `t`; ranks past the end fail.
/// Falls back to `q`.
pub fn threshold_rule(d: &[f64], t: f64, k0: usize, q: usize) -> usize {
    let q = q.min(d.len());
    let span = k0.max(1);
    // d is zero-based: rank r + k sits at d[r + k - 1].
    (k0 + 1..=q)
        .find(|&r| (1..=span).all(|k| d.get(r + k - 1).is_some_and(|&v| v > t)))
        .unwrap_or(q)
}

/// Thresholded model size with an explicit `t`.
pub fn select_threshold(
    ranking: &Ranking,
    matrix: &LabeledMatrix,
    t: f64,
    settings: &ThresholdSettings,
) -> Result<SelectionResult> {
    check_aligned(ranking, matrix)?;
    settings.validate()?;
    if !t.is_finite() {
        return Err(Error::InvalidConfig(format!("threshold must be finite, got {t}")));
    }
    let d: Vec<f64> = match settings.mode {
        ThresholdMode::U2Corrected => {
            let u2 = u2_hat_all(matrix)?;
            let ell0 = null_ell(matrix.pi_hat());
            ranking
                .scores()
                .iter()
                .map(|s| s.ell_hat - ell0 + u2[s.feature_index])
                .collect()
        }
        ThresholdMode::ScrambledPercentile { .. } => ranking.ell_sorted(),
    };
    let q = settings.q.unwrap_or(ranking.len());
    let r = threshold_rule(&d, t, settings.k0, q);
    Ok(SelectionResult::new(ranking, r, SelectionMethod::Threshold)
        .with("t", Diagnostic::Real(t))
        .with("k0", Diagnostic::Int(settings.k0 as i64))
        .with("q", Diagnostic::Int(q.min(ranking.len()) as i64)))
}

/// Thresholded model size with `t` chosen by the mode: the `u2` default,
/// or a scrambled-label percentile computed with `seed`.
pub fn select_threshold_auto(
    ranking: &Ranking,
    matrix: &LabeledMatrix,
    settings: &ThresholdSettings,
    seed: u64,
    fit: &FitSettings,
) -> Result<SelectionResult> {
    settings.validate()?;
    let t = match settings.mode {
        ThresholdMode::U2Corrected => default_u2_threshold(matrix.n()),
        ThresholdMode::ScrambledPercentile {
            alpha_level,
            n_scrambles,
        } => scrambled_threshold(matrix, alpha_level, n_scrambles, seed, fit)?,
    };
    select_threshold(ranking, matrix, t, settings)
}

/// `ell_hat` by feature after each of `n_scrambles` independent label
/// permutations. Scramble `s` uses its own stream, so results do not depend
/// on how many scrambles are requested after it.
pub fn scrambled_scores(
    matrix: &LabeledMatrix,
    n_scrambles: usize,
    seed: u64,
    fit: &FitSettings,
) -> Result<Vec<Vec<f64>>> {
    check_scrambles(n_scrambles)?;
    (0..n_scrambles)
        .map(|s| {
            let mut labels = matrix.labels().to_vec();
            labels.shuffle(&mut stream(seed, &[tag::SCRAMBLE, s as u64]));
            let scrambled = matrix.with_labels(labels)?;
            Ok(rank(&scrambled, fit)?.ell_by_feature())
        })
        .collect()
}

/// Lower empirical quantile: the smallest value whose empirical CDF is at
/// least `alpha_level`.
pub fn lower_quantile(values: &[f64], alpha_level: f64) -> Result<f64> {
    check_alpha(alpha_level)?;
    if values.is_empty() {
        return Err(Error::NoFeatures);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (alpha_level * sorted.len() as f64).ceil() as usize;
    Ok(sorted[k.clamp(1, sorted.len()) - 1])
}

/// Lower `alpha_level` quantile of scores pooled over scrambled labels.
pub fn scrambled_threshold(
    matrix: &LabeledMatrix,
    alpha_level: f64,
    n_scrambles: usize,
    seed: u64,
    fit: &FitSettings,
) -> Result<f64> {
    check_alpha(alpha_level)?;
    let pooled: Vec<f64> = scrambled_scores(matrix, n_scrambles, seed, fit)?.concat();
    lower_quantile(&pooled, alpha_level)
}

fn descending(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Change-point model size.
///
/// Ratios `rho_k` of the original to scrambled scores, both sorted weakest
/// (largest) first, are summed into `S(k)`, and
/// `T(k) = m^-1/2 (S(k) - (k/m) S(m))`. With several scrambles the sorted
/// scrambled sequences are averaged first. The change sits at the smallest
/// maximiser `k*` of `|T|`, giving `r = p - k*`.
pub fn select_changepoint(
    ranking: &Ranking,
    scrambled: &[Vec<f64>],
    _settings: &ChangePointSettings,
) -> Result<SelectionResult> {
    let p = ranking.len();
    if p == 0 {
        return Err(Error::NoFeatures);
    }
    check_scrambles(scrambled.len())?;
    let mut reference = vec![0.0; p];
    for s in scrambled {
        if s.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} scrambled scores for {p} features",
                s.len()
            )));
        }
        for (acc, v) in reference.iter_mut().zip(descending(s)) {
            *acc += v;
        }
    }
    let count = scrambled.len() as f64;
    let original = descending(&ranking.ell_sorted());
    let ratios: Vec<f64> = original.iter().zip(&reference).map(|(o, r)| o / (r / count)).collect();
    if let Some(k) = ratios.iter().position(|r| !r.is_finite()) {
        return Err(Error::NonFiniteObjective(k));
    }

    let m = p as f64;
    let total: f64 = ratios.iter().sum();
    let mut t_trace = Vec::with_capacity(p);
    let mut cum = 0.0;
    for (k, r) in ratios.iter().enumerate() {
        cum += r;
        t_trace.push((cum - (k + 1) as f64 / m * total) / m.sqrt());
    }
    let (mut best_k, mut best) = (1, -1.0);
    for (k, t) in t_trace.iter().enumerate() {
        if t.abs() > best {
            best = t.abs();
            best_k = k + 1;
        }
    }

    let diffs: Vec<f64> = ratios.windows(2).map(|w| w[1] - w[0]).collect();
    let sigma = if diffs.len() > 1 {
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (diffs.len() - 1) as f64;
        (var / 2.0).sqrt()
    } else {
        0.0
    };
    let mean_abs = ratios.iter().map(|r| r.abs()).sum::<f64>() / m;
    let noise_scale = sigma.max(f64::EPSILON * mean_abs * m);

    Ok(SelectionResult::new(ranking, p - best_k, SelectionMethod::Changepoint)
        .with("change_index", Diagnostic::Int(best_k as i64))
        .with("max_abs_t", Diagnostic::Real(best))
        .with("noise_scale", Diagnostic::Real(noise_scale))
        .with("no_material_change", Diagnostic::Flag(best <= 3.0 * noise_scale))
        .with("t_trace", Diagnostic::Trace(t_trace)))
}

/// Scrambles with `seed` and runs [`select_changepoint`].
pub fn select_changepoint_auto(
    ranking: &Ranking,
    matrix: &LabeledMatrix,
    settings: &ChangePointSettings,
    seed: u64,
    fit: &FitSettings,
) -> Result<SelectionResult> {
    check_aligned(ranking, matrix)?;
    let scrambled = scrambled_scores(matrix, settings.n_scrambles, seed, fit)?;
    select_changepoint(ranking, &scrambled, settings)
}

struct BlockRun {
    block_size: usize,
    r: usize,
    cv_error: f64,
    trace: Vec<f64>,
}

fn grow_blocks(
    ranking: &Ranking,
    matrix: &LabeledMatrix,
    b: usize,
    patience: usize,
    folds: &[usize],
) -> Result<BlockRun> {
    let p = ranking.len();
    let (mut best_s, mut best) = (0, f64::INFINITY);
    let mut trace = Vec::new();
    let mut s = 0;
    while s * b < p {
        s += 1;
        let err = cv_error_with_folds(matrix, ranking.prefix((s * b).min(p)), folds)?;
        trace.push(err);
        if err < best {
            best = err;
            best_s = s;
        } else if s - best_s >= patience {
            break;
        }
    }
    Ok(BlockRun {
        block_size: b,
        r: (best_s * b).min(p),
        cv_error: best,
        trace,
    })
}

/// Alternative block sizes `b/2, 2b, b/4, 4b, ...`, skipping repeats.
fn backfill_sizes(b: usize, retries: usize, p: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut factor = 2usize;
    while out.len() < retries && factor <= 1 << 20 {
        for cand in [(b / factor).max(1), b.saturating_mul(factor).min(p.max(1))] {
            if out.len() < retries && cand != b && !out.contains(&cand) {
                out.push(cand);
            }
        }
        factor *= 2;
    }
    out
}

/// Block-wise forward growth scored by stratified cross-validation,
/// followed by reruns at alternative block sizes. An alternative replaces
/// the current choice only when its CV error is strictly lower.
pub fn select_block_cv(
    ranking: &Ranking,
    matrix: &LabeledMatrix,
    settings: &BlockCvSettings,
    seed: u64,
) -> Result<SelectionResult> {
    check_aligned(ranking, matrix)?;
    settings.validate()?;
    if ranking.is_empty() {
        return Err(Error::NoFeatures);
    }
    let folds = stratified_folds_canonical(matrix, settings.cv_folds, seed)?;
    let b = settings.block_size.unwrap_or(matrix.n()).max(1);
    let mut best = grow_blocks(ranking, matrix, b, settings.patience, &folds)?;
    for alt in backfill_sizes(b, settings.backfill_retries, ranking.len()) {
        let run = grow_blocks(ranking, matrix, alt, settings.patience, &folds)?;
        if run.cv_error < best.cv_error {
            best = run;
        }
    }
    let result = SelectionResult::new(ranking, best.r, SelectionMethod::BlockCv);
    let apparent = apparent_error(matrix, &result.selected)?;
    Ok(result
        .with("block_size", Diagnostic::Int(best.block_size as i64))
        .with("cv_error", Diagnostic::Real(best.cv_error))
        .with("apparent_error", Diagnostic::Real(apparent))
        .with("cv_trace", Diagnostic::Trace(best.trace)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureScore;

    fn ranking_from(ell: &[f64]) -> Ranking {
        Ranking::from_scores(
            ell.iter()
                .enumerate()
                .map(|(j, &l)| FeatureScore {
                    feature_index: j,
                    alpha_hat: 0.0,
                    beta_hat: 0.0,
                    ell_hat: l,
                    s_hat: 0.0,
                    converged: true,
                    at_bound: false,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rule_on_worked_sequence() {
        let d = [-5.0, -4.0, -3.0, -0.01, -0.005, -0.002];
        assert_eq!(threshold_rule(&d, -0.1, 1, 6), 3);
        assert_eq!(threshold_rule(&d, -0.1, 0, 6), 3);
        // k0 = 2 needs ranks r+1 and r+2 both above t
        assert_eq!(threshold_rule(&d, -0.1, 2, 6), 3);
    }

    #[test]
    fn rule_extremes() {
        let d = [-3.0, -2.0, -1.0, 0.0];
        // every successor passes t: stop at once
        assert_eq!(threshold_rule(&d, -10.0, 0, 4), 1);
        assert_eq!(threshold_rule(&d, -10.0, 2, 4), 4);
        assert_eq!(threshold_rule(&[-3.0, -2.0, -1.0, 0.0, 0.0, 0.0], -10.0, 2, 6), 3);
        // nothing exceeds t: fall back to q
        assert_eq!(threshold_rule(&d, 10.0, 0, 4), 4);
        assert_eq!(threshold_rule(&d, 10.0, 0, 3), 3);
        // q beyond p is clamped
        assert_eq!(threshold_rule(&d, 10.0, 0, 9), 4);
    }

    #[test]
    fn u2_degenerate_and_zero() {
        let m = LabeledMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]], vec![0, 1, 1]).unwrap();
        assert!(matches!(u2_hat(&m, 0), Err(Error::DegenerateMatrix)));
        let m = LabeledMatrix::from_rows(
            &[vec![1.0, 2.0], vec![-1.0, 2.0], vec![1.0, 0.0], vec![-1.0, 0.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        assert_eq!(u2_hat(&m, 0).unwrap(), 0.0);
        assert!(u2_hat(&m, 1).unwrap() > 0.0);
    }

    #[test]
    fn u2_small_instance() {
        // n = 4, p = 2
        let m = LabeledMatrix::from_rows(
            &[vec![0.5, 1.0], vec![1.5, -2.0], vec![2.0, 0.0], vec![-1.0, 3.0]],
            vec![1, 0, 1, 1],
        )
        .unwrap();
        // pi = 3/4; column means 0.75, 0.5
        // sum sq dev: col0 = 0.0625 + 0.5625 + 1.5625 + 3.0625 = 5.25
        //             col1 = 0.25 + 6.25 + 0.25 + 6.25 = 13
        let tau2 = (5.25 + 13.0) / 8.0;
        // S_0 = sum (I - 3/4)(x - 0.75) / (4 * 3/16)
        let s0 = (0.25 * -0.25 + -0.75 * 0.75 + 0.25 * 1.25 + 0.25 * -1.75) / 0.75;
        let want = 0.5 * 0.75 * 1.5 / tau2 * s0 * s0;
        assert!((u2_hat(&m, 0).unwrap() - want).abs() < 1e-12);
        let all = u2_hat_all(&m).unwrap();
        assert_eq!(all[0], u2_hat(&m, 0).unwrap());
    }

    #[test]
    fn changepoint_step() {
        // 300 strong features with half the scrambled score, then 700 flat.
        let mut ell = vec![0.5; 300];
        ell.extend(vec![1.0; 700]);
        let ranking = ranking_from(&ell);
        let scrambled = vec![vec![1.0; 1000]];
        let res = select_changepoint(&ranking, &scrambled, &ChangePointSettings::default()).unwrap();
        assert_eq!(res.real("change_index"), Some(700.0));
        assert_eq!(res.r, 300);
        assert_eq!(res.flag("no_material_change"), Some(false));
    }

    #[test]
    fn changepoint_flat_is_flagged() {
        let ranking = ranking_from(&vec![0.69; 200]);
        let res = select_changepoint(&ranking, &[vec![0.69; 200]], &ChangePointSettings::default()).unwrap();
        assert_eq!(res.flag("no_material_change"), Some(true));
        assert!(res.real("max_abs_t").unwrap() < 1e-9);
    }

    #[test]
    fn changepoint_length_mismatch() {
        let ranking = ranking_from(&[0.1, 0.2]);
        assert!(select_changepoint(&ranking, &[vec![0.1]], &ChangePointSettings::default()).is_err());
    }

    #[test]
    fn quantile_lower_tail() {
        assert_eq!(lower_quantile(&[3.0], 0.5).unwrap(), 3.0);
        assert_eq!(lower_quantile(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 2.0);
        assert_eq!(lower_quantile(&[4.0, 1.0, 3.0, 2.0], 0.51).unwrap(), 3.0);
        assert!(lower_quantile(&[1.0], 0.0).is_err());
    }

    #[test]
    fn backfill_order() {
        assert_eq!(backfill_sizes(100, 2, 10_000), vec![50, 200]);
        assert_eq!(backfill_sizes(100, 3, 10_000), vec![50, 200, 25]);
        assert_eq!(backfill_sizes(1, 2, 10), vec![2, 4]);
    }
}
