//! Per-feature two-parameter logistic fits and the likelihood ranking.
//!
//! For feature `j` the model is `P(I = 1 | x) = 1 / (1 + exp(-(a + b x)))`
//! and the criterion is the mean negative log-likelihood
//!
//! ```text
//! ell_j(a, b) = n^-1 sum_i [ -I_i (a + b X_ij) + log(1 + exp(a + b X_ij)) ]
//! ```
//!
//! Each fit is a 2-D convex problem solved by Newton's method with step
//! halving, started at the intercept-only fit `(logit(pi_hat), 0)`. Features
//! are then sorted by the minimised value, smallest (most informative) first.

use rayon::prelude::*;

use crate::data::{FeatureScore, LabeledMatrix, Ranking};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub max_iters: usize,
    /// Convergence threshold on the sup-norm of the (projected) gradient.
    pub grad_tol: f64,
    /// Bound on `|b| * sd(x)`, the slope on the standardized scale.
    pub beta_cap: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            max_iters: 50,
            grad_tol: 1e-8,
            beta_cap: 10.0,
        }
    }
}

impl FitSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.grad_tol > 0.0) || !(self.beta_cap > 0.0) {
            return Err(Error::InvalidConfig(format!("fit settings {self:?}")));
        }
        Ok(())
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(p / (1 - p))`.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Mean negative log-likelihood of `(alpha, beta)` for one feature column.
pub fn negative_log_likelihood(alpha: f64, beta: f64, labels: &[u8], x: &[f64]) -> f64 {
    let sum: f64 = labels
        .iter()
        .zip(x)
        .map(|(&l, &xi)| {
            let eta = alpha + beta * xi;
            softplus(eta) - if l == 1 { eta } else { 0.0 }
        })
        .sum();
    sum / x.len() as f64
}

/// Objective with gradient and Hessian at one point.
struct Eval {
    f: f64,
    ga: f64,
    gb: f64,
    haa: f64,
    hab: f64,
    hbb: f64,
}

fn evaluate(alpha: f64, beta: f64, labels: &[u8], x: &[f64]) -> Eval {
    let (mut f, mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (&l, &xi) in labels.iter().zip(x) {
        let eta = alpha + beta * xi;
        let e = (-eta.abs()).exp();
        let y = f64::from(l);
        f += eta.max(0.0) + e.ln_1p() - y * eta;
        // sigmoid(eta) from the same exponential
        let prob = if eta >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
        let r = prob - y;
        let w = prob * (1.0 - prob);
        ga += r;
        gb += r * xi;
        haa += w;
        hab += w * xi;
        hbb += w * xi * xi;
    }
    let inv = 1.0 / x.len() as f64;
    Eval {
        f: f * inv,
        ga: ga * inv,
        gb: gb * inv,
        haa: haa * inv,
        hab: hab * inv,
        hbb: hbb * inv,
    }
}

fn fit_indexed(index: usize, labels: &[u8], x: &[f64], settings: &FitSettings) -> Result<FeatureScore> {
    let n = x.len() as f64;
    let pi_hat = labels.iter().filter(|&&l| l == 1).count() as f64 / n;
    let alpha0 = logit(pi_hat);
    let s_hat = zscore_empirical(labels, x)?;

    let mean = x.iter().sum::<f64>() / n;
    let spread = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if spread == 0.0 {
        // Slope unidentifiable: the intercept-only fit is the minimiser.
        let ell_hat = negative_log_likelihood(alpha0, 0.0, labels, x);
        return Ok(FeatureScore {
            feature_index: index,
            alpha_hat: alpha0,
            beta_hat: 0.0,
            ell_hat,
            s_hat,
            converged: true,
            at_bound: false,
        });
    }
    let beta_max = settings.beta_cap / spread;

    let (mut a, mut b) = (alpha0, 0.0);
    let mut cur = evaluate(a, b, labels, x);
    let mut converged = false;
    for _ in 0..settings.max_iters {
        if !cur.f.is_finite() {
            return Err(Error::NonFiniteObjective(index));
        }
        let pinned = b.abs() >= beta_max && cur.gb * b.signum() < 0.0;
        let pg = if pinned {
            cur.ga.abs()
        } else {
            cur.ga.abs().max(cur.gb.abs())
        };
        if pg < settings.grad_tol {
            converged = true;
            break;
        }
        let (da, db) = if pinned {
            (-cur.ga / cur.haa.max(f64::MIN_POSITIVE), 0.0)
        } else {
            let det = cur.haa * cur.hbb - cur.hab * cur.hab;
            if cur.haa > 0.0 && det > 1e-12 * cur.haa * cur.hbb {
                (
                    -(cur.hbb * cur.ga - cur.hab * cur.gb) / det,
                    -(cur.haa * cur.gb - cur.hab * cur.ga) / det,
                )
            } else {
                (-cur.ga / cur.haa.max(1e-12), -cur.gb / cur.hbb.max(1e-12))
            }
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let na = a + step * da;
            let nb = (b + step * db).clamp(-beta_max, beta_max);
            let next = evaluate(na, nb, labels, x);
            if next.f <= cur.f {
                accepted = Some((na, nb, next));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((na, nb, next)) => {
                debug_assert!(next.f <= cur.f, "objective increased");
                a = na;
                b = nb;
                cur = next;
            }
            None => break,
        }
    }
    if !cur.f.is_finite() {
        return Err(Error::NonFiniteObjective(index));
    }
    Ok(FeatureScore {
        feature_index: index,
        alpha_hat: a,
        beta_hat: b,
        ell_hat: cur.f,
        s_hat,
        converged,
        at_bound: b.abs() >= beta_max,
    })
}

/// Minimises the mean negative log-likelihood for a single feature column.
///
/// The returned score has `feature_index = 0`; [`rank`] fills in the real
/// index.
pub fn fit_feature(labels: &[u8], x: &[f64], settings: &FitSettings) -> Result<FeatureScore> {
    if labels.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels, {} values",
            labels.len(),
            x.len()
        )));
    }
    settings.validate()?;
    fit_indexed(0, labels, x, settings)
}

/// `sum_i (I_i - pi) X_ij / (n pi (1 - pi))` with a known class probability.
pub fn zscore(labels: &[u8], x: &[f64], pi: f64) -> f64 {
    let n = x.len() as f64;
    let s: f64 = labels.iter().zip(x).map(|(&l, &v)| (f64::from(l) - pi) * v).sum();
    s / (n * pi * (1.0 - pi))
}

/// As [`zscore`] with `pi` replaced by `pi_hat` and the column centered.
pub fn zscore_empirical(labels: &[u8], x: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == labels.len() {
        return Err(Error::SingleClass(u8::from(ones > 0)));
    }
    let pi_hat = ones as f64 / n;
    let mean = x.iter().sum::<f64>() / n;
    let s: f64 = labels
        .iter()
        .zip(x)
        .map(|(&l, &v)| (f64::from(l) - pi_hat) * (v - mean))
        .sum();
    Ok(s / (n * pi_hat * (1.0 - pi_hat)))
}

/// Fits every feature independently and returns them sorted by
/// ascending `ell_hat` (ties by feature index).
pub fn rank(matrix: &LabeledMatrix, settings: &FitSettings) -> Result<Ranking> {
    settings.validate()?;
    let labels = matrix.labels();
    let scores = (0..matrix.p())
        .into_par_iter()
        .map(|j| fit_indexed(j, labels, matrix.column(j), settings))
        .collect::<Result<Vec<_>>>()?;
    Ranking::from_scores(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn nll_at_origin_is_log2() {
        let v = negative_log_likelihood(0.0, 0.0, &[0, 1, 1], &[0.3, -2.0, 5.0]);
        assert!((v - LN2).abs() < 1e-15);
    }

    #[test]
    fn nll_at_trivial_fit() {
        // pi_hat = 1/4: -0.25 log(1/3) + log(4/3)
        let labels = [1, 0, 0, 0];
        let v = negative_log_likelihood(logit(0.25), 0.0, &labels, &[1.0, 2.0, 3.0, 4.0]);
        let expect = -0.25 * (1.0f64 / 3.0).ln() + (4.0f64 / 3.0).ln();
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.562_335_144_618_808_3).abs() < 1e-12);
    }

    #[test]
    fn nll_saturates_without_overflow() {
        let v = negative_log_likelihood(0.0, 1000.0, &[1], &[1.0]);
        assert!(v.is_finite() && v.abs() < 1e-300);
        // softplus is exact out to |eta| = 700
        assert_eq!(softplus(700.0), 700.0);
        assert!((softplus(-700.0) - (-700.0f64).exp()).abs() <= 1e-12 * (-700.0f64).exp());
        assert!((softplus(30.0) - (30.0 + (-30.0f64).exp().ln_1p())).abs() == 0.0);
    }

    #[test]
    fn constant_feature_balanced_labels() {
        let s = fit_feature(&[0, 1], &[0.0, 0.0], &FitSettings::default()).unwrap();
        assert_eq!(s.beta_hat, 0.0);
        assert!(s.alpha_hat.abs() < 1e-15);
        assert!((s.ell_hat - LN2).abs() < 1e-15);
        assert!(s.converged && !s.at_bound);
    }

    #[test]
    fn separable_feature_hits_cap() {
        let s = fit_feature(&[0, 1], &[-1.0, 1.0], &FitSettings::default()).unwrap();
        assert_eq!(s.beta_hat, 10.0);
        assert!(s.at_bound);
        assert!(s.alpha_hat.abs() < 1e-10);
        assert!(s.ell_hat < 1e-4);
    }

    #[test]
    fn trivial_fit_is_an_upper_bound() {
        let labels = [0, 0, 1, 1, 1, 0, 1];
        let x = [0.4, -1.2, 0.9, 0.3, 2.2, 0.0, -0.5];
        let s = fit_feature(&labels, &x, &FitSettings::default()).unwrap();
        let trivial = negative_log_likelihood(logit(4.0 / 7.0), 0.0, &labels, &x);
        assert!(s.ell_hat <= trivial + 1e-12);
        assert!(s.converged);
    }

    #[test]
    fn zscore_examples() {
        assert_eq!(zscore(&[0, 1], &[0.0, 2.0], 0.5), 2.0);
        assert_eq!(zscore(&[0, 1, 1], &[0.0, 0.0, 0.0], 0.3), 0.0);
        assert_eq!(zscore(&[1, 1, 0, 0], &[1.0; 4], 0.5), 0.0);
        assert_eq!(zscore_empirical(&[0, 1], &[0.0, 2.0]).unwrap(), 2.0);
        assert_eq!(zscore_empirical(&[0, 1, 0], &[3.0; 3]).unwrap(), 0.0);
        assert!(zscore_empirical(&[1, 1], &[0.0, 2.0]).is_err());
    }

    #[test]
    fn rank_singleton_and_informative_first() {
        let x = LabeledMatrix::from_rows(&[vec![0.1], vec![0.7]], vec![0, 1]).unwrap();
        assert_eq!(rank(&x, &FitSettings::default()).unwrap().order(), &[0]);

        let labels = vec![0, 1, 0, 1, 1, 0, 0, 1];
        let noise = [0.3, -0.1, 0.8, 0.2, -0.7, 0.5, -0.4, 0.1];
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .zip(noise)
            .map(|(&l, z)| vec![z, 3.0 * f64::from(l) - 1.0])
            .collect();
        let m = LabeledMatrix::from_rows(&rows, labels).unwrap();
        let r = rank(&m, &FitSettings::default()).unwrap();
        assert_eq!(r.order(), &[1, 0]);
    }
}
