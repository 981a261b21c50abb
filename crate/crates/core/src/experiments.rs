//! Simulation studies: AUC stability across `n`, AUC under correlated noise
//! with grouped or scattered signals, and the single large dataset worked
//! through every stage of the pipeline.
//!
//! Each study has a typed form (`*_study`) and a report form
//! (`run_*_experiment`). Replicates are keyed by seeds derived from the
//! study seed, and results are collected in a fixed order, so reports are
//! byte-identical whatever the thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classify::error_curve;
use crate::data::LabeledMatrix;
use crate::error::Result;
use crate::io::{fmt_real, write_file};
use crate::logit::{rank, FitSettings};
use crate::metrics::{count_misrankings, likelihood_profile, roc_points};
use crate::rng::{derive_seed, tag};
use crate::select::{
    lower_quantile, scrambled_scores, select_block_cv, select_changepoint, select_threshold, BlockCvSettings,
    ChangePointSettings, ThresholdMode, ThresholdSettings,
};
use crate::simulate::{generate, generate_section53, Placement, SimConfig};

pub const STABILITY_NS: [usize; 4] = [20, 50, 100, 200];
pub const STABILITY_C0: [f64; 4] = [0.4, 0.8, 1.2, 1.6];
pub const CORRELATION_NS: [usize; 4] = [20, 50, 100, 200];
pub const CORRELATION_RHOS: [f64; 9] = [-0.99, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 0.99];

/// A named table of pre-formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        let bytes = writer.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Index of a column by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Output of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment_id: String,
    /// `key=value` lines describing the configuration.
    pub config: String,
    /// Machine-readable tables; every per-replicate row has a `seed` column.
    pub tables: Vec<Table>,
    /// Human-readable summary at 3 decimals.
    pub summary: String,
}

impl ExperimentReport {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `<id>_config.txt`, `<id>_summary.txt` and one
    /// `<id>_<table>.csv` per table into `dir`; returns the paths written.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, body: &str| -> Result<()> {
            let path = dir.join(name);
            write_file(&path, body)?;
            written.push(path);
            Ok(())
        };
        put(format!("{}_config.txt", self.experiment_id), &self.config)?;
        put(format!("{}_summary.txt", self.experiment_id), &self.summary)?;
        for t in &self.tables {
            put(format!("{}_{}.csv", self.experiment_id, t.name), &t.to_csv()?)?;
        }
        Ok(written)
    }
}

/// Sample mean and standard deviation (divisor `len - 1`; 0 for one value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

fn auc_of(matrix: &LabeledMatrix, truth: &[f64], fit: &FitSettings) -> Result<f64> {
    let ranking = rank(matrix, fit)?;
    let mask: Vec<bool> = truth.iter().map(|&m| m > 0.0).collect();
    Ok(count_misrankings(&ranking.ell_by_feature(), &mask)?.auc)
}

/// AUCs for one simulated condition.
#[derive(Debug, Clone, PartialEq)]
pub struct AucCell {
    pub n: usize,
    pub seeds: Vec<u64>,
    pub aucs: Vec<f64>,
}

impl AucCell {
    pub fn mean(&self) -> f64 {
        mean_sd(&self.aucs).0
    }

    pub fn sd(&self) -> f64 {
        mean_sd(&self.aucs).1
    }

    /// Normal-approximation 95% band for the mean.
    pub fn band(&self) -> (f64, f64) {
        let (m, s) = mean_sd(&self.aucs);
        let h = 1.96 * s / (self.aucs.len() as f64).sqrt();
        (m - h, m + h)
    }
}

fn run_cells<K: Sync>(
    keys: &[K],
    reps: usize,
    make: impl Fn(&K, usize) -> (usize, u64, SimConfig) + Sync,
    fit: &FitSettings,
) -> Result<Vec<AucCell>> {
    let jobs: Vec<(usize, usize)> = (0..keys.len()).flat_map(|c| (0..reps).map(move |r| (c, r))).collect();
    let results = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (_, seed, config) = make(&keys[c], r);
            let (matrix, truth) = generate(&config)?;
            Ok((seed, auc_of(&matrix, &truth, fit)?))
        })
        .collect::<Result<Vec<(u64, f64)>>>()?;
    Ok(keys
        .iter()
        .enumerate()
        .map(|(c, key)| {
            let chunk = &results[c * reps..(c + 1) * reps];
            AucCell {
                n: make(key, 0).0,
                seeds: chunk.iter().map(|x| x.0).collect(),
                aucs: chunk.iter().map(|x| x.1).collect(),
            }
        })
        .collect())
}

/// AUC versus `n` for several signal strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityStudy {
    pub reps: usize,
    pub seed: u64,
    /// `(c0, uniform, cell)` in grid order: magnitude kind, then `c0`, then `n`.
    pub cells: Vec<(f64, bool, AucCell)>,
}

impl StabilityStudy {
    pub fn cell(&self, n: usize, c0: f64, uniform: bool) -> Option<&AucCell> {
        self.cells
            .iter()
            .find(|(c, u, cell)| *c == c0 && *u == uniform && cell.n == n)
            .map(|x| &x.2)
    }
}

/// Stability sweep over an arbitrary grid. Replicate `r` at size `n` uses
/// the seed `derive_seed(seed, [REPLICATE, n, r])` for every `c0` and both
/// magnitude kinds, so cells are paired.
pub fn stability_study_with(ns: &[usize], c0s: &[f64], reps: usize, seed: u64) -> Result<StabilityStudy> {
    check_reps(reps)?;
    let fit = FitSettings::default();
    let keys: Vec<(bool, f64, usize)> = [false, true]
        .iter()
        .flat_map(|&u| c0s.iter().flat_map(move |&c| ns.iter().map(move |&n| (u, c, n))))
        .collect();
    let cells = run_cells(
        &keys,
        reps,
        |&(u, c, n), r| {
            let s = derive_seed(seed, &[tag::REPLICATE, n as u64, r as u64]);
            (n, s, SimConfig::stability(n, c, u, s))
        },
        &fit,
    )?;
    Ok(StabilityStudy {
        reps,
        seed,
        cells: keys.iter().zip(cells).map(|(&(u, c, _), cell)| (c, u, cell)).collect(),
    })
}

pub fn stability_study(reps: usize, seed: u64) -> Result<StabilityStudy> {
    stability_study_with(&STABILITY_NS, &STABILITY_C0, reps, seed)
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(crate::Error::InvalidConfig("reps must be at least 1".into()));
    }
    Ok(())
}

fn kind(uniform: bool) -> &'static str {
    if uniform {
        "uniform"
    } else {
        "fixed"
    }
}

impl StabilityStudy {
    pub fn report(&self) -> Result<ExperimentReport> {
        let mut reps_t = Table::new("replicates", &["magnitude", "c0", "n", "rep", "seed", "auc"]);
        let mut cells_t = Table::new(
            "cells",
            &[
                "magnitude",
                "c0",
                "n",
                "reps",
                "mean_auc",
                "sd_auc",
                "band_lo",
                "band_hi",
            ],
        );
        for (c0, u, cell) in &self.cells {
            for (r, (s, a)) in cell.seeds.iter().zip(&cell.aucs).enumerate() {
                reps_t.push(vec![
                    kind(*u).into(),
                    fmt_real(*c0),
                    cell.n.to_string(),
                    r.to_string(),
                    s.to_string(),
                    fmt_real(*a),
                ]);
            }
            let (lo, hi) = cell.band();
            cells_t.push(vec![
                kind(*u).into(),
                fmt_real(*c0),
                cell.n.to_string(),
                self.reps.to_string(),
                fmt_real(cell.mean()),
                fmt_real(cell.sd()),
                fmt_real(lo),
                fmt_real(hi),
            ]);
        }

        let mut ns: Vec<usize> = self.cells.iter().map(|c| c.2.n).collect();
        ns.dedup();
        ns.sort_unstable();
        ns.dedup();
        let mut summary = format!("stability: mean AUC (sd), reps={}, seed={}\n", self.reps, self.seed);
        for uniform in [false, true] {
            let _ = writeln!(summary, "\nmagnitude {}", kind(uniform));
            let _ = write!(summary, "{:>6}", "c0");
            for n in &ns {
                let _ = write!(summary, "{:>16}", format!("n={n}"));
            }
            summary.push('\n');
            let mut c0s: Vec<f64> = self.cells.iter().filter(|c| c.1 == uniform).map(|c| c.0).collect();
            c0s.dedup();
            for c0 in c0s {
                let _ = write!(summary, "{c0:>6.3}");
                for &n in &ns {
                    if let Some(cell) = self.cell(n, c0, uniform) {
                        let _ = write!(summary, "{:>16}", format!("{:.3} ({:.3})", cell.mean(), cell.sd()));
                    }
                }
                summary.push('\n');
            }
        }
        let config = format!(
            "experiment=stability\nreps={}\nseed={}\np=0.4*n^2\nsignal_fraction=0.1\npi=0.5\nnoise=iid\nexample_cell:\n{}",
            self.reps,
            self.seed,
            SimConfig::stability(20, 1.2, false, 0)
        );
        Ok(ExperimentReport {
            experiment_id: "stability".into(),
            config,
            tables: vec![reps_t, cells_t],
            summary,
        })
    }
}

pub fn run_stability_experiment(reps: usize, seed: u64) -> Result<ExperimentReport> {
    stability_study(reps, seed)?.report()
}

/// AUC under serially correlated noise for one signal placement.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationStudy {
    pub reps: usize,
    pub seed: u64,
    pub placement: Placement,
    /// `(rho, cell)`, `rho`-major then `n`.
    pub cells: Vec<(f64, AucCell)>,
}

impl CorrelationStudy {
    pub fn cell(&self, n: usize, rho: f64) -> Option<&AucCell> {
        self.cells.iter().find(|(r, c)| *r == rho && c.n == n).map(|x| &x.1)
    }
}

/// Correlation sweep over an arbitrary grid. Replicate seeds depend on
/// `(n, rho, rep)` but not on the placement, so the grouped and randomized
/// studies see identical labels, noise and signal sizes.
pub fn correlation_study_with(
    ns: &[usize],
    rhos: &[f64],
    reps: usize,
    placement: Placement,
    seed: u64,
) -> Result<CorrelationStudy> {
    check_reps(reps)?;
    let fit = FitSettings::default();
    let keys: Vec<(f64, usize)> = rhos.iter().flat_map(|&r| ns.iter().map(move |&n| (r, n))).collect();
    let cells = run_cells(
        &keys,
        reps,
        |&(rho, n), r| {
            let s = derive_seed(seed, &[tag::REPLICATE, n as u64, rho.to_bits(), r as u64]);
            (n, s, SimConfig::correlation(n, rho, placement, s))
        },
        &fit,
    )?;
    Ok(CorrelationStudy {
        reps,
        seed,
        placement,
        cells: keys.iter().zip(cells).map(|(&(rho, _), c)| (rho, c)).collect(),
    })
}

pub fn correlation_study(reps: usize, placement: Placement, seed: u64) -> Result<CorrelationStudy> {
    correlation_study_with(&CORRELATION_NS, &CORRELATION_RHOS, reps, placement, seed)
}

impl CorrelationStudy {
    pub fn report(&self) -> Result<ExperimentReport> {
        let id = format!("correlation_{}", self.placement);
        let mut reps_t = Table::new("replicates", &["placement", "rho", "n", "rep", "seed", "auc"]);
        let mut cells_t = Table::new("cells", &["placement", "rho", "n", "reps", "mean_auc", "sd_auc"]);
        for (rho, cell) in &self.cells {
            for (r, (s, a)) in cell.seeds.iter().zip(&cell.aucs).enumerate() {
                reps_t.push(vec![
                    self.placement.to_string(),
                    fmt_real(*rho),
                    cell.n.to_string(),
                    r.to_string(),
                    s.to_string(),
                    fmt_real(*a),
                ]);
            }
            cells_t.push(vec![
                self.placement.to_string(),
                fmt_real(*rho),
                cell.n.to_string(),
                self.reps.to_string(),
                fmt_real(cell.mean()),
                fmt_real(cell.sd()),
            ]);
        }

        let mut ns: Vec<usize> = self.cells.iter().map(|c| c.1.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut rhos: Vec<f64> = self.cells.iter().map(|c| c.0).collect();
        rhos.dedup();
        let mut summary = format!(
            "correlated noise, {} signals: mean AUC (sd), reps={}, seed={}\n\n{:>6}",
            self.placement, self.reps, self.seed, "rho"
        );
        for n in &ns {
            let _ = write!(summary, "{:>16}", format!("n={n}"));
        }
        summary.push('\n');
        for rho in rhos {
            let _ = write!(summary, "{rho:>6.2}");
            for &n in &ns {
                if let Some(cell) = self.cell(n, rho) {
                    let _ = write!(summary, "{:>16}", format!("{:.3} ({:.3})", cell.mean(), cell.sd()));
                }
            }
            summary.push('\n');
        }
        let config = format!(
            "experiment={id}\nreps={}\nseed={}\nc0=1.2\nmagnitude=scaled_uniform\nexample_cell:\n{}",
            self.reps,
            self.seed,
            SimConfig::correlation(20, 0.5, self.placement, 0)
        );
        Ok(ExperimentReport {
            experiment_id: id,
            config,
            tables: vec![reps_t, cells_t],
            summary,
        })
    }
}

pub fn run_correlation_experiment(reps: usize, placement: Placement, seed: u64) -> Result<ExperimentReport> {
    correlation_study(reps, placement, seed)?.report()
}

/// Settings shared by the large-study pipeline and the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineSettings {
    pub fit: FitSettings,
    pub alpha_level: f64,
    pub n_scrambles: usize,
    pub block_cv: BlockCvSettings,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            fit: FitSettings::default(),
            alpha_level: 0.2,
            n_scrambles: 1,
            block_cv: BlockCvSettings::default(),
        }
    }
}

/// Per-feature curves from one large-study run.
#[derive(Debug, Clone, PartialEq)]
pub struct Section53Curves {
    /// Test error using the `k` truly strongest features, `k = 1..=p`.
    pub ideal: Vec<f64>,
    /// Test error using the top `k` ranked features.
    pub empirical: Vec<f64>,
    pub roc: Vec<(f64, f64)>,
    pub profile: Vec<(f64, f64)>,
    pub changepoint_t: Vec<f64>,
    pub block_cv_trace: Vec<f64>,
}

/// Headline numbers from one large-study run.
#[derive(Debug, Clone, PartialEq)]
pub struct Section53Run {
    pub seed: u64,
    pub ideal_min_error: f64,
    pub ideal_argmin: usize,
    pub top50_error: f64,
    pub auc: f64,
    pub empirical_min_error: f64,
    pub empirical_argmin: usize,
    pub threshold_t: f64,
    pub threshold_r: usize,
    pub threshold_fpr: f64,
    pub threshold_test_error: f64,
    pub changepoint_r: usize,
    pub changepoint_test_error: f64,
    pub changepoint_no_change: bool,
    pub block_cv_r: usize,
    pub block_cv_block_size: usize,
    pub block_cv_apparent_error: f64,
    pub block_cv_cv_error: f64,
    pub block_cv_test_error: f64,
    pub curves: Section53Curves,
}

fn argmin(curve: &[f64]) -> (usize, f64) {
    curve.iter().enumerate().fold(
        (0, f64::INFINITY),
        |best, (k, &e)| if e < best.1 { (k + 1, e) } else { best },
    )
}

// Test error with the first r features; with none, every row is labelled 0.
fn error_at(curve: &[f64], test: &LabeledMatrix, r: usize) -> f64 {
    if r == 0 {
        test.class_count(1) as f64 / test.n() as f64
    } else {
        curve[r - 1]
    }
}

/// Runs the full pipeline on the large dataset drawn with `seed`. The
/// scrambles and CV folds also use `seed`, so running the command-line
/// selectors with the same seed on the saved training data reproduces
/// the selections here.
pub fn section53_run(seed: u64, settings: &PipelineSettings) -> Result<Section53Run> {
    let (train, test, truth) = generate_section53(seed)?;
    let p = train.p();
    let mask: Vec<bool> = truth.iter().map(|&m| m > 0.0).collect();
    let nulls = mask.iter().filter(|&&m| !m).count();

    // (a) the oracle ordering by true effect size
    let mut ideal_order: Vec<usize> = (0..p).collect();
    ideal_order.sort_by(|&a, &b| truth[b].total_cmp(&truth[a]).then(a.cmp(&b)));
    let ideal = error_curve(&train, &test, &ideal_order, p)?;
    let (ideal_argmin, ideal_min_error) = argmin(&ideal);

    // (b) ranking quality
    let ranking = rank(&train, &settings.fit)?;
    let auc = count_misrankings(&ranking.ell_by_feature(), &mask)?.auc;
    let roc = roc_points(ranking.order(), &mask)?;
    let profile = likelihood_profile(&ranking)?;

    // (c) error along the empirical ranking
    let empirical = error_curve(&train, &test, ranking.order(), p)?;
    let (empirical_argmin, empirical_min_error) = argmin(&empirical);

    // (d) scrambled-percentile threshold
    let scrambled = scrambled_scores(&train, settings.n_scrambles, seed, &settings.fit)?;
    let pooled: Vec<f64> = scrambled.concat();
    let t = lower_quantile(&pooled, settings.alpha_level)?;
    let th_settings = ThresholdSettings {
        mode: ThresholdMode::ScrambledPercentile {
            alpha_level: settings.alpha_level,
            n_scrambles: settings.n_scrambles,
        },
        ..ThresholdSettings::default()
    };
    let th = select_threshold(&ranking, &train, t, &th_settings)?;
    let false_pos = th.selected.iter().filter(|&&j| !mask[j]).count();

    // (e) change-point on the same scrambles
    let cp = select_changepoint(
        &ranking,
        &scrambled,
        &ChangePointSettings {
            n_scrambles: settings.n_scrambles,
        },
    )?;

    // (f) block-wise cross-validation
    let bc = select_block_cv(&ranking, &train, &settings.block_cv, seed)?;

    Ok(Section53Run {
        seed,
        ideal_min_error,
        ideal_argmin,
        top50_error: error_at(&ideal, &test, 50.min(p)),
        auc,
        empirical_min_error,
        empirical_argmin,
        threshold_t: t,
        threshold_r: th.r,
        threshold_fpr: false_pos as f64 / nulls as f64,
        threshold_test_error: error_at(&empirical, &test, th.r),
        changepoint_r: cp.r,
        changepoint_test_error: error_at(&empirical, &test, cp.r),
        changepoint_no_change: cp.flag("no_material_change").unwrap_or(false),
        block_cv_r: bc.r,
        block_cv_block_size: bc.real("block_size").unwrap_or(0.0) as usize,
        block_cv_apparent_error: bc.real("apparent_error").unwrap_or(f64::NAN),
        block_cv_cv_error: bc.real("cv_error").unwrap_or(f64::NAN),
        block_cv_test_error: error_at(&empirical, &test, bc.r),
        curves: Section53Curves {
            ideal,
            empirical,
            roc,
            profile,
            changepoint_t: cp.trace("t_trace").unwrap_or_default().to_vec(),
            block_cv_trace: bc.trace("cv_trace").unwrap_or_default().to_vec(),
        },
    })
}

/// Runs `reps` datasets with seeds `seed, seed + 1, ...`, one after another
/// (each run already parallelizes internally).
pub fn section53_study(reps: usize, seed: u64, settings: &PipelineSettings) -> Result<Vec<Section53Run>> {
    check_reps(reps)?;
    (0..reps as u64)
        .map(|i| section53_run(seed.wrapping_add(i), settings))
        .collect()
}

const S53_FIELDS: [&str; 20] = [
    "seed",
    "ideal_min_error",
    "ideal_argmin",
    "top50_error",
    "auc",
    "empirical_min_error",
    "empirical_argmin",
    "threshold_t",
    "threshold_r",
    "threshold_fpr",
    "threshold_test_error",
    "changepoint_r",
    "changepoint_test_error",
    "changepoint_no_change",
    "block_cv_r",
    "block_cv_block_size",
    "block_cv_apparent_error",
    "block_cv_cv_error",
    "block_cv_test_error",
    "test_error_gap",
];

/// Report with the per-seed headline table and long-format curve tables.
pub fn section53_report(runs: &[Section53Run], seed: u64, settings: &PipelineSettings) -> Result<ExperimentReport> {
    let mut head = Table::new("runs", &S53_FIELDS);
    let mut ideal_t = Table::new("ideal_curve", &["seed", "k", "test_error"]);
    let mut emp_t = Table::new("empirical_curve", &["seed", "k", "test_error"]);
    let mut roc_t = Table::new("roc", &["seed", "k", "fpr", "tpr"]);
    let mut prof_t = Table::new("likelihood_profile", &["seed", "k", "fraction", "ratio"]);
    let mut cp_t = Table::new("changepoint_trace", &["seed", "k", "t"]);
    let mut bc_t = Table::new("block_cv_trace", &["seed", "blocks", "cv_error"]);
    for run in runs {
        let s = run.seed.to_string();
        head.push(vec![
            s.clone(),
            fmt_real(run.ideal_min_error),
            run.ideal_argmin.to_string(),
            fmt_real(run.top50_error),
            fmt_real(run.auc),
            fmt_real(run.empirical_min_error),
            run.empirical_argmin.to_string(),
            fmt_real(run.threshold_t),
            run.threshold_r.to_string(),
            fmt_real(run.threshold_fpr),
            fmt_real(run.threshold_test_error),
            run.changepoint_r.to_string(),
            fmt_real(run.changepoint_test_error),
            run.changepoint_no_change.to_string(),
            run.block_cv_r.to_string(),
            run.block_cv_block_size.to_string(),
            fmt_real(run.block_cv_apparent_error),
            fmt_real(run.block_cv_cv_error),
            fmt_real(run.block_cv_test_error),
            fmt_real(run.block_cv_test_error - run.threshold_test_error.max(run.changepoint_test_error)),
        ]);
        let c = &run.curves;
        for (k, e) in c.ideal.iter().enumerate() {
            ideal_t.push(vec![s.clone(), (k + 1).to_string(), fmt_real(*e)]);
        }
        for (k, e) in c.empirical.iter().enumerate() {
            emp_t.push(vec![s.clone(), (k + 1).to_string(), fmt_real(*e)]);
        }
        for (k, (f, t)) in c.roc.iter().enumerate() {
            roc_t.push(vec![s.clone(), k.to_string(), fmt_real(*f), fmt_real(*t)]);
        }
        for (k, (f, r)) in c.profile.iter().enumerate() {
            prof_t.push(vec![s.clone(), (k + 1).to_string(), fmt_real(*f), fmt_real(*r)]);
        }
        for (k, t) in c.changepoint_t.iter().enumerate() {
            cp_t.push(vec![s.clone(), (k + 1).to_string(), fmt_real(*t)]);
        }
        for (k, e) in c.block_cv_trace.iter().enumerate() {
            bc_t.push(vec![s.clone(), (k + 1).to_string(), fmt_real(*e)]);
        }
    }

    let mut summary = format!("large study: {} dataset(s) from seed {seed}\n", runs.len());
    for run in runs {
        let _ = write!(
            summary,
            "\nseed {}\n\
             (a) ideal order: min error {:.3} at {} features; top-50 error {:.3}\n\
             (b) ranking AUC {:.3}\n\
             (c) empirical order: min error {:.3} at {} features\n\
             (d) threshold alpha={}: {} features, FPR {:.3}, test error {:.3}\n\
             (e) change-point: {} features, test error {:.3}{}\n\
             (f) block-CV: {} features (b={}), apparent error {:.3}, CV error {:.3}, test error {:.3}\n",
            run.seed,
            run.ideal_min_error,
            run.ideal_argmin,
            run.top50_error,
            run.auc,
            run.empirical_min_error,
            run.empirical_argmin,
            settings.alpha_level,
            run.threshold_r,
            run.threshold_fpr,
            run.threshold_test_error,
            run.changepoint_r,
            run.changepoint_test_error,
            if run.changepoint_no_change {
                " (no material change)"
            } else {
                ""
            },
            run.block_cv_r,
            run.block_cv_block_size,
            run.block_cv_apparent_error,
            run.block_cv_cv_error,
            run.block_cv_test_error,
        );
    }
    let config = format!(
        "experiment=section53\nreps={}\nseed={seed}\ntest_rows=1000\nalpha_level={}\nn_scrambles={}\nblock_cv={:?}\nfit={:?}\ndataset:\n{}",
        runs.len(),
        settings.alpha_level,
        settings.n_scrambles,
        settings.block_cv,
        settings.fit,
        SimConfig::large_study(seed)
    );
    Ok(ExperimentReport {
        experiment_id: "section53".into(),
        config,
        tables: vec![head, ideal_t, emp_t, roc_t, prof_t, cp_t, bc_t],
        summary,
    })
}

pub fn run_section53_experiment(seed: u64) -> Result<ExperimentReport> {
    let settings = PipelineSettings::default();
    section53_report(&section53_study(1, seed, &settings)?, seed, &settings)
}
