//! Ranking quality: misranking counts, AUC, ROC paths and the
//! normal-approximation misranking probabilities.
//!
//! A misranking is a (signal, null) pair where the null feature has the
//! smaller `ell_hat`. With `p1` signals among `p` features,
//!
//! ```text
//! AUC = 1 - misrankings / (p1 (p - p1))
//! ```
//!
//! and this is exactly the trapezoid area under the ROC path traced by the
//! ranking, so long as tied scores count one half.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Ranking;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingQuality {
    /// Misranked (signal, null) pairs; ties contribute one half.
    pub misrankings: f64,
    pub p1: usize,
    pub p: usize,
    pub auc: f64,
}

fn check_mask(mask: &[bool]) -> Result<usize> {
    let p1 = mask.iter().filter(|&&m| m).count();
    if p1 == 0 || p1 == mask.len() {
        return Err(Error::AucUndefined {
            signals: p1,
            total: mask.len(),
        });
    }
    Ok(p1)
}

/// Counts misrankings in `O(p log p)` and derives the AUC.
pub fn count_misrankings(ell_hat: &[f64], truth_nonzero: &[bool]) -> Result<RankingQuality> {
    if ell_hat.len() != truth_nonzero.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores, {} mask entries",
            ell_hat.len(),
            truth_nonzero.len()
        )));
    }
    let p1 = check_mask(truth_nonzero)?;
    let p = ell_hat.len();
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| ell_hat[a].total_cmp(&ell_hat[b]));

    // Walk groups of equal score from the strongest end. Each signal in a
    // group is beaten by every null already passed, and ties with the
    // nulls inside its own group.
    let mut twice_nu: u128 = 0;
    let mut nulls_below: u128 = 0;
    let mut start = 0;
    while start < p {
        let mut end = start + 1;
        while end < p && ell_hat[idx[end]] == ell_hat[idx[start]] {
            end += 1;
        }
        let signals = idx[start..end].iter().filter(|&&j| truth_nonzero[j]).count() as u128;
        let nulls = (end - start) as u128 - signals;
        twice_nu += 2 * signals * nulls_below + signals * nulls;
        nulls_below += nulls;
        start = end;
    }
    let misrankings = twice_nu as f64 / 2.0;
    let pairs = (p1 * (p - p1)) as f64;
    Ok(RankingQuality {
        misrankings,
        p1,
        p,
        auc: 1.0 - misrankings / pairs,
    })
}

/// `(fpr, tpr)` after including the first `k` ranked features, `k = 0..=p`.
pub fn roc_points(order: &[usize], truth_nonzero: &[bool]) -> Result<Vec<(f64, f64)>> {
    if order.len() != truth_nonzero.len() {
        return Err(Error::DimensionMismatch(format!(
            "order has {} entries, mask {}",
            order.len(),
            truth_nonzero.len()
        )));
    }
    let p1 = check_mask(truth_nonzero)?;
    let p0 = order.len() - p1;
    let mut points = Vec::with_capacity(order.len() + 1);
    let (mut tp, mut fp) = (0usize, 0usize);
    points.push((0.0, 0.0));
    for &j in order {
        if truth_nonzero[j] {
            tp += 1;
        } else {
            fp += 1;
        }
        points.push((fp as f64 / p0 as f64, tp as f64 / p1 as f64));
    }
    Ok(points)
}

/// Trapezoid area under a polyline of `(fpr, tpr)` points.
pub fn roc_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Curve of `ell_hat` along the ranking relative to the leading score:
/// `(k / p, ell_(k) / ell_(1))` for `k = 1..=p`.
pub fn likelihood_profile(ranking: &Ranking) -> Result<Vec<(f64, f64)>> {
    let ell = ranking.ell_sorted();
    let lead = *ell.first().ok_or(Error::NoFeatures)?;
    if lead == 0.0 {
        return Err(Error::ZeroLeadingScore);
    }
    let p = ell.len() as f64;
    Ok(ell
        .iter()
        .enumerate()
        .map(|(k, &l)| ((k + 1) as f64 / p, l / lead))
        .collect())
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    Normal::standard().cdf(x)
}

// c / sigma with the degenerate conventions for sigma <= 0: the ratio is
// +/- infinity (0 when c is also 0).
fn ratio(c: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        c / sigma
    } else if c > 0.0 {
        f64::INFINITY
    } else if c < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

/// Limiting probability that a null feature outranks a signal feature of
/// size `c / sqrt(n)`:
///
/// ```text
/// Phi(-c/s+) Phi(c/s-) + Phi(c/s+) Phi(-c/s-)
/// ```
///
/// `sigma_plus` and `sigma_minus` are supplied by the caller.
pub fn theorem3_misrank_probability(c: f64, sigma_plus: f64, sigma_minus: f64) -> f64 {
    let zp = ratio(c, sigma_plus);
    let zm = ratio(c, sigma_minus);
    phi(-zp) * phi(zm) + phi(zp) * phi(-zm)
}

/// Expected misrankings for signals of size `c (log n / n)^(1/2)`:
/// the sum over `(sigma_plus, sigma_minus)` pairs of
/// `Phi(-c k/s+) + Phi(-c k/s-)` with `k = (log n)^(1/2)`.
pub fn theorem4_expected_misrankings(c: f64, n: usize, pairs: &[(f64, f64)]) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewSamples { min: 2, got: n });
    }
    let kappa = (n as f64).ln().sqrt();
    Ok(pairs
        .iter()
        .map(|&(sp, sm)| phi(-ratio(c * kappa, sp)) + phi(-ratio(c * kappa, sm)))
        .sum())
}

/// `sigma_{+/-}` for two features with unit-variance noise of correlation
/// `corr` and class probability `pi`: `pi (1 - pi) var(Z1 +/- Z2)`.
pub fn pair_sigmas(pi: f64, corr: f64) -> (f64, f64) {
    let w = pi * (1.0 - pi);
    ((w * (2.0 + 2.0 * corr)).sqrt(), (w * (2.0 - 2.0 * corr)).sqrt())
}
