//! Synthetic two-class data from the mean-shift model.
//!
//! Class-0 rows are pure noise, `X_ij = Z_ij`; class-1 rows carry a
//! non-negative shift, `X_ij = mu_j + Z_ij`. Noise is either i.i.d. N(0,1)
//! or the first-order recursion
//!
//! ```text
//! Z_i1 = e_i1,   Z_ij = rho * Z_i,j-1 + sqrt(1 - rho^2) * e_ij
//! ```
//!
//! which is stationary with unit variance and `corr(Z_ij, Z_ik) = rho^|j-k|`.
//!
//! Each row's noise is drawn from its own stream keyed by `(seed, row)`, so
//! output is bit-identical for a given config regardless of thread count.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::LabeledMatrix;
use crate::error::{Error, Result};
use crate::rng::{stream, tag};

/// How the non-zero means are sized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Magnitude {
    /// Every signal equals this value.
    Fixed(f64),
    /// Signals drawn uniformly on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
}

impl Magnitude {
    /// `c0 * (20 / n)^(1/2)`: a fixed size whose `sqrt(n)`-scaled strength
    /// does not depend on `n`.
    pub fn scaled_fixed(c0: f64, n: usize) -> Self {
        Magnitude::Fixed(c0 * (20.0 / n as f64).sqrt())
    }

    /// Uniform on `[0, c0 * (20 / n)^(1/2)]`.
    pub fn scaled_uniform(c0: f64, n: usize) -> Self {
        Magnitude::Uniform {
            lo: 0.0,
            hi: c0 * (20.0 / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSpec {
    /// Number of features with a non-zero mean, `p1`.
    pub count: usize,
    pub magnitude: Magnitude,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    IidStandardNormal,
    /// Stationary first-order recursion along the feature axis.
    Serial {
        rho: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Signals occupy features `0..p1`.
    GroupedHead,
    /// Signals scattered by a uniform random choice of positions.
    Randomized,
}

/// Full description of one simulated dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    /// Class-1 probability.
    pub pi: f64,
    pub signal: SignalSpec,
    pub noise: NoiseSpec,
    pub placement: Placement,
    /// Exact class counts (`round(pi * n)` ones) instead of Bernoulli labels.
    pub balanced: bool,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n < 2 {
            return bad(format!("n = {} < 2", self.n));
        }
        if self.p == 0 {
            return bad("p = 0".into());
        }
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return bad(format!("pi = {} outside (0, 1)", self.pi));
        }
        if self.signal.count > self.p {
            return bad(format!("signal count {} > p = {}", self.signal.count, self.p));
        }
        match self.signal.magnitude {
            Magnitude::Fixed(v) if !(v >= 0.0 && v.is_finite()) => {
                return bad(format!("signal magnitude {v} must be finite and >= 0"))
            }
            Magnitude::Uniform { lo, hi } if !(lo >= 0.0 && hi >= lo && hi.is_finite()) => {
                return bad(format!("uniform magnitude range [{lo}, {hi}] invalid"))
            }
            _ => {}
        }
        if let NoiseSpec::Serial { rho } = self.noise {
            if !(rho.abs() < 1.0) {
                return bad(format!("|rho| = {} must be < 1", rho.abs()));
            }
        }
        if self.balanced {
            let ones = (self.pi * self.n as f64).round() as usize;
            if ones == 0 || ones == self.n {
                return bad(format!(
                    "balanced design with n = {} and pi = {} has an empty class",
                    self.n, self.pi
                ));
            }
        }
        Ok(())
    }

    /// Stability cell: `p = 0.4 n^2`, 10% signals of size `c0 (20/n)^(1/2)`
    /// (or uniform below it), i.i.d. noise, Bernoulli(1/2) labels.
    pub fn stability(n: usize, c0: f64, uniform: bool, seed: u64) -> Self {
        let p = (0.4 * (n * n) as f64).round() as usize;
        let magnitude = if uniform {
            Magnitude::scaled_uniform(c0, n)
        } else {
            Magnitude::scaled_fixed(c0, n)
        };
        Self {
            n,
            p,
            pi: 0.5,
            signal: SignalSpec {
                count: (0.1 * p as f64).round() as usize,
                magnitude,
            },
            noise: NoiseSpec::IidStandardNormal,
            placement: Placement::GroupedHead,
            balanced: false,
            seed,
        }
    }

    /// Correlated-noise cell: as [`stability`](Self::stability) with
    /// `c0 = 1.2`, uniform magnitudes and serial noise.
    pub fn correlation(n: usize, rho: f64, placement: Placement, seed: u64) -> Self {
        let mut c = Self::stability(n, 1.2, true, seed);
        c.noise = if rho == 0.0 {
            NoiseSpec::IidStandardNormal
        } else {
            NoiseSpec::Serial { rho }
        };
        c.placement = placement;
        c
    }

    /// The large single-dataset study: `n = 100` (50 per class),
    /// `p = 10_000`, 1,000 signals uniform on `[0, 0.35]`.
    pub fn large_study(seed: u64) -> Self {
        Self {
            n: 100,
            p: 10_000,
            pi: 0.5,
            signal: SignalSpec {
                count: 1_000,
                magnitude: Magnitude::Uniform { lo: 0.0, hi: 0.35 },
            },
            noise: NoiseSpec::IidStandardNormal,
            placement: Placement::GroupedHead,
            balanced: true,
            seed,
        }
    }
}

/// Draws the signal vector `mu` (length `p`).
pub fn draw_truth(config: &SimConfig) -> Vec<f64> {
    let p1 = config.signal.count;
    let mut rng = stream(config.seed, &[tag::SIGNAL]);
    let magnitudes: Vec<f64> = match config.signal.magnitude {
        Magnitude::Fixed(v) => vec![v; p1],
        Magnitude::Uniform { lo, hi } => (0..p1).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect(),
    };
    let mut truth = vec![0.0; config.p];
    match config.placement {
        Placement::GroupedHead => truth[..p1].copy_from_slice(&magnitudes),
        Placement::Randomized => {
            let mut positions: Vec<usize> = (0..config.p).collect();
            let mut prng = stream(config.seed, &[tag::PLACEMENT]);
            let (chosen, _) = positions.partial_shuffle(&mut prng, p1);
            for (&j, &m) in chosen.iter().zip(&magnitudes) {
                truth[j] = m;
            }
        }
    }
    truth
}

fn draw_labels(config: &SimConfig, n: usize, label_tag: u64) -> Vec<u8> {
    if config.balanced {
        let ones = (config.pi * n as f64).round() as usize;
        let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i >= n - ones)).collect();
        labels.shuffle(&mut stream(config.seed, &[label_tag]));
        return labels;
    }
    // Redraw on a single-class sample so the result is always a valid
    // matrix; the attempt number selects the stream.
    for attempt in 0u64.. {
        let mut rng = stream(config.seed, &[label_tag, attempt]);
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < config.pi)).collect();
        let ones = labels.iter().filter(|&&l| l == 1).count();
        if ones > 0 && ones < n {
            return labels;
        }
    }
    unreachable!()
}

fn noise_row(config: &SimConfig, noise_tag: u64, row: usize, out: &mut [f64]) {
    let mut rng = stream(config.seed, &[noise_tag, row as u64]);
    for z in out.iter_mut() {
        *z = rng.sample(StandardNormal);
    }
    if let NoiseSpec::Serial { rho } = config.noise {
        let s = (1.0 - rho * rho).sqrt();
        for j in 1..out.len() {
            out[j] = rho * out[j - 1] + s * out[j];
        }
    }
}

/// Noise matrix only, column-major `n x p`. Exposed for moment checks.
pub fn draw_noise(config: &SimConfig, rows: usize) -> Vec<f64> {
    assemble(config, rows, tag::NOISE, |_, _, z| z)
}

fn assemble(
    config: &SimConfig,
    rows: usize,
    noise_tag: u64,
    entry: impl Fn(usize, usize, f64) -> f64 + Sync,
) -> Vec<f64> {
    let p = config.p;
    let row_data: Vec<Vec<f64>> = (0..rows)
        .into_par_iter()
        .map(|i| {
            let mut z = vec![0.0; p];
            noise_row(config, noise_tag, i, &mut z);
            z
        })
        .collect();
    let mut values = vec![0.0; rows * p];
    for (i, row) in row_data.iter().enumerate() {
        for (j, &z) in row.iter().enumerate() {
            values[j * rows + i] = entry(i, j, z);
        }
    }
    values
}

fn build(config: &SimConfig, truth: &[f64], rows: usize, label_tag: u64, noise_tag: u64) -> LabeledMatrix {
    let labels = draw_labels(config, rows, label_tag);
    let values = assemble(
        config,
        rows,
        noise_tag,
        |i, j, z| {
            if labels[i] == 1 {
                truth[j] + z
            } else {
                z
            }
        },
    );
    LabeledMatrix::from_columns_unchecked(rows, config.p, values, labels)
}

/// One dataset from `config`, plus the true mean vector.
pub fn generate(config: &SimConfig) -> Result<(LabeledMatrix, Vec<f64>)> {
    config.validate()?;
    let truth = draw_truth(config);
    let matrix = build(config, &truth, config.n, tag::LABELS, tag::NOISE);
    Ok((matrix, truth))
}

/// Independent rows from the same law as `generate(config)`, sharing its
/// signal vector. Labels are Bernoulli(pi) even for balanced configs.
pub fn generate_test_set(config: &SimConfig, truth: &[f64], rows: usize) -> Result<LabeledMatrix> {
    config.validate()?;
    if truth.len() != config.p {
        return Err(Error::DimensionMismatch(format!(
            "truth has {} entries, p = {}",
            truth.len(),
            config.p
        )));
    }
    let test_config = SimConfig {
        balanced: false,
        ..*config
    };
    Ok(build(&test_config, truth, rows, tag::TEST_LABELS, tag::TEST_NOISE))
}

/// Train/test pair for the large study: 100 training rows (50 per class),
/// 1,000 test rows, `p = 10_000`.
pub fn generate_section53(seed: u64) -> Result<(LabeledMatrix, LabeledMatrix, Vec<f64>)> {
    let config = SimConfig::large_study(seed);
    let (train, truth) = generate(&config)?;
    let test = generate_test_set(&config, &truth, 1_000)?;
    Ok((train, test, truth))
}

fn fmt_real(x: f64) -> String {
    // Shortest representation that round-trips.
    format!("{x:?}")
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Magnitude::Fixed(v) => write!(f, "fixed({})", fmt_real(*v)),
            Magnitude::Uniform { lo, hi } => write!(f, "uniform({},{})", fmt_real(*lo), fmt_real(*hi)),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::IidStandardNormal => f.write_str("iid"),
            NoiseSpec::Serial { rho } => write!(f, "serial({})", fmt_real(*rho)),
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::GroupedHead => "grouped_head",
            Placement::Randomized => "randomized",
        })
    }
}

impl FromStr for Placement {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "grouped_head" | "grouped" => Ok(Placement::GroupedHead),
            "randomized" | "random" => Ok(Placement::Randomized),
            other => Err(Error::InvalidConfig(format!("unknown placement '{other}'"))),
        }
    }
}

/// Flat `key=value` lines; `#` starts a comment.
///
/// ```text
/// n=100
/// p=4000
/// pi=0.5
/// signal_count=400
/// magnitude=uniform(0,0.5366563145999496)
/// noise=serial(0.5)
/// placement=randomized
/// balanced=false
/// seed=7
/// ```
///
/// `magnitude` also accepts `scaled(c0)` and `scaled_uniform(c0)`, which
/// expand to `c0 * (20/n)^(1/2)` using the `n` given in the same file.
impl fmt::Display for SimConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "p={}", self.p)?;
        writeln!(f, "pi={}", fmt_real(self.pi))?;
        writeln!(f, "signal_count={}", self.signal.count)?;
        writeln!(f, "magnitude={}", self.signal.magnitude)?;
        writeln!(f, "noise={}", self.noise)?;
        writeln!(f, "placement={}", self.placement)?;
        writeln!(f, "balanced={}", self.balanced)?;
        writeln!(f, "seed={}", self.seed)
    }
}

fn call_args<'a>(value: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let inner = value.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(str::trim).collect())
}

impl FromStr for SimConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut kv = std::collections::BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value", lineno + 1)))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            kv.get(k)
                .ok_or_else(|| Error::InvalidConfig(format!("missing key '{k}'")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("{k}: {e}")))
        };
        let int = |k: &str| -> Result<u64> {
            get(k)?
                .parse::<u64>()
                .map_err(|e| Error::InvalidConfig(format!("{k}: {e}")))
        };
        let known = [
            "n",
            "p",
            "pi",
            "signal_count",
            "magnitude",
            "noise",
            "placement",
            "balanced",
            "seed",
        ];
        if let Some(k) = kv.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::InvalidConfig(format!("unknown key '{k}'")));
        }

        let n = int("n")? as usize;
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidConfig(format!("{s}: {e}")));
        let mag = get("magnitude")?;
        let magnitude = if let Some(a) = call_args(mag, "fixed") {
            Magnitude::Fixed(parse_f(a[0])?)
        } else if let Some(a) = call_args(mag, "uniform") {
            if a.len() != 2 {
                return Err(Error::InvalidConfig(format!("magnitude '{mag}' needs two bounds")));
            }
            Magnitude::Uniform {
                lo: parse_f(a[0])?,
                hi: parse_f(a[1])?,
            }
        } else if let Some(a) = call_args(mag, "scaled_uniform") {
            Magnitude::scaled_uniform(parse_f(a[0])?, n)
        } else if let Some(a) = call_args(mag, "scaled") {
            Magnitude::scaled_fixed(parse_f(a[0])?, n)
        } else {
            return Err(Error::InvalidConfig(format!("unknown magnitude '{mag}'")));
        };

        let noise_s = kv.get("noise").map(String::as_str).unwrap_or("iid");
        let noise = if noise_s == "iid" {
            NoiseSpec::IidStandardNormal
        } else if let Some(a) = call_args(noise_s, "serial") {
            NoiseSpec::Serial { rho: parse_f(a[0])? }
        } else {
            return Err(Error::InvalidConfig(format!("unknown noise '{noise_s}'")));
        };

        let config = SimConfig {
            n,
            p: int("p")? as usize,
            pi: kv.get("pi").map_or(Ok(0.5), |_| num("pi"))?,
            signal: SignalSpec {
                count: int("signal_count")? as usize,
                magnitude,
            },
            noise,
            placement: kv.get("placement").map_or(Ok(Placement::GroupedHead), |s| s.parse())?,
            balanced: match kv.get("balanced").map(String::as_str) {
                None | Some("false") => false,
                Some("true") => true,
                Some(other) => return Err(Error::InvalidConfig(format!("balanced: '{other}'"))),
            },
            seed: int("seed")?,
        };
        config.validate()?;
        Ok(config)
    }
}
