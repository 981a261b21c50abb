//! The `featrank` command line.
//!
//! Exit status is 0 on success, 2 on a usage error and 1 when the input data
//! or configuration is rejected.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::classify::{apparent_error, test_error, train_centroid};
use crate::data::{standardize, Diagnostic, LabeledMatrix, SelectionResult};
use crate::error::{Error, Result};
use crate::experiments::{
    correlation_study, run_stability_experiment, section53_report, section53_study, PipelineSettings,
};
use crate::io::{fmt_real, load_csv, save_csv, write_file, write_scores};
use crate::logit::{rank, FitSettings};
use crate::select::{
    default_u2_threshold, scrambled_threshold, select_block_cv, select_changepoint_auto, select_threshold,
    BlockCvSettings, ChangePointSettings, ThresholdMode, ThresholdSettings,
};
use crate::simulate::{generate, generate_test_set, Placement, SimConfig};

/// Environment variable consulted when `--threads` is not given.
pub const THREADS_ENV: &str = "FEATRANK_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "featrank",
    version,
    about = "Rank features by univariate logistic fit and choose a model size"
)]
struct Cli {
    /// Seed for scrambles, folds and simulation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores, or $FEATRANK_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Standardize every loaded feature column to mean 0, sd 1.
    #[arg(long, global = true)]
    standardize: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Input {
    /// CSV with the 0/1 label in column 0.
    csv: PathBuf,
    /// The first line is a header.
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Threshold,
    Changepoint,
    Blockcv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    Stability,
    Tables,
    Section53,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-feature scores in rank order.
    Rank {
        #[command(flatten)]
        input: Input,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Choose a model size.
    Select {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        method: Method,
        /// Threshold from scrambled labels at this lower quantile.
        #[arg(long)]
        alpha_level: Option<f64>,
        /// Label scrambles for the threshold or change-point methods.
        #[arg(long, default_value_t = 1)]
        n_scrambles: usize,
        /// Explicit threshold for the u2-corrected rule.
        #[arg(long, allow_negative_numbers = true)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 0)]
        k0: usize,
        #[arg(long)]
        q: Option<usize>,
        /// Block size (default n).
        #[arg(long)]
        block_size: Option<usize>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Write the selected features (feature_index, rank) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the centroid rule on the top-ranked features and test it.
    Classify {
        train: PathBuf,
        test: PathBuf,
        #[arg(long)]
        model_size: usize,
        #[arg(long)]
        header: bool,
    },
    /// Draw a dataset from a key=value config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write an independent test set here.
        #[arg(long)]
        test_out: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        test_rows: usize,
    },
    /// Run a simulation study and write its tables.
    Experiment {
        #[arg(value_enum)]
        which: Experiment,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs the command line with `argv` (including the program name) and
/// returns the exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load(cli: &Cli, path: &Path, header: bool) -> Result<LabeledMatrix> {
    let m = load_csv(path, header)?;
    if cli.standardize {
        standardize(&m)
    } else {
        Ok(m)
    }
}

fn emit(out: Option<&PathBuf>, body: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, body)?,
        None => std::io::stdout().write_all(body)?,
    }
    Ok(())
}

fn print_selection(res: &SelectionResult) {
    println!("method={}", res.method);
    println!("selected_size={}", res.r);
    for (k, v) in &res.diagnostics {
        match v {
            Diagnostic::Real(x) => println!("{k}={}", fmt_real(*x)),
            Diagnostic::Int(x) => println!("{k}={x}"),
            Diagnostic::Flag(b) => println!("{k}={b}"),
            Diagnostic::Trace(t) => println!("{k}_length={}", t.len()),
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let fit = FitSettings::default();
    match &cli.command {
        Command::Rank { input, out } => {
            let m = load(cli, &input.csv, input.header)?;
            let ranking = rank(&m, &fit)?;
            let mut buf = Vec::new();
            write_scores(&mut buf, &ranking)?;
            emit(out.as_ref(), &buf)
        }
        Command::Select {
            input,
            method,
            alpha_level,
            n_scrambles,
            threshold,
            k0,
            q,
            block_size,
            folds,
            out,
        } => {
            let m = load(cli, &input.csv, input.header)?;
            let ranking = rank(&m, &fit)?;
            let res = match method {
                Method::Threshold => {
                    let (mode, t) = match alpha_level {
                        Some(a) => {
                            if threshold.is_some() {
                                return Err(Error::InvalidConfig(
                                    "--threshold and --alpha-level are mutually exclusive".into(),
                                ));
                            }
                            let t = scrambled_threshold(&m, *a, *n_scrambles, seed, &fit)?;
                            let mode = ThresholdMode::ScrambledPercentile {
                                alpha_level: *a,
                                n_scrambles: *n_scrambles,
                            };
                            (mode, t)
                        }
                        None => (
                            ThresholdMode::U2Corrected,
                            threshold.unwrap_or(default_u2_threshold(m.n())),
                        ),
                    };
                    let settings = ThresholdSettings { k0: *k0, q: *q, mode };
                    select_threshold(&ranking, &m, t, &settings)?
                }
                Method::Changepoint => select_changepoint_auto(
                    &ranking,
                    &m,
                    &ChangePointSettings {
                        n_scrambles: *n_scrambles,
                    },
                    seed,
                    &fit,
                )?,
                Method::Blockcv => {
                    let settings = BlockCvSettings {
                        block_size: *block_size,
                        cv_folds: *folds,
                        ..BlockCvSettings::default()
                    };
                    select_block_cv(&ranking, &m, &settings, seed)?
                }
            };
            print_selection(&res);
            if let Some(path) = out {
                let mut body = String::from("feature_index,rank\n");
                for (k, j) in res.selected.iter().enumerate() {
                    body.push_str(&format!("{j},{}\n", k + 1));
                }
                write_file(path, &body)?;
            }
            Ok(())
        }
        Command::Classify {
            train,
            test,
            model_size,
            header,
        } => {
            let train = load(cli, train, *header)?;
            let test = load(cli, test, *header)?;
            if train.p() != test.p() {
                return Err(Error::DimensionMismatch(format!(
                    "train has {} features, test {}",
                    train.p(),
                    test.p()
                )));
            }
            let ranking = rank(&train, &fit)?;
            let selected = ranking.prefix(*model_size);
            let model = train_centroid(&train, selected)?;
            println!("model_size={}", selected.len());
            println!("apparent_error={}", fmt_real(apparent_error(&train, selected)?));
            println!("test_error={}", fmt_real(test_error(&model, &test)?));
            Ok(())
        }
        Command::Simulate {
            config,
            out,
            test_out,
            test_rows,
        } => {
            let text = std::fs::read_to_string(config).map_err(|source| Error::File {
                path: config.clone(),
                source,
            })?;
            let mut sim: SimConfig = text.parse()?;
            if let Some(s) = cli.seed {
                sim.seed = s;
            }
            let (train, truth) = generate(&sim)?;
            save_csv(out, &train)?;
            if let Some(path) = test_out {
                save_csv(path, &generate_test_set(&sim, &truth, *test_rows)?)?;
            }
            println!("n={}", train.n());
            println!("p={}", train.p());
            println!("signals={}", truth.iter().filter(|&&m| m > 0.0).count());
            Ok(())
        }
        Command::Experiment { which, reps, out } => {
            let reports = match which {
                Experiment::Stability => vec![run_stability_experiment(*reps, seed)?],
                Experiment::Tables => vec![
                    correlation_study(*reps, Placement::GroupedHead, seed)?.report()?,
                    correlation_study(*reps, Placement::Randomized, seed)?.report()?,
                ],
                Experiment::Section53 => {
                    let settings = PipelineSettings::default();
                    let runs = section53_study(*reps, seed, &settings)?;
                    vec![section53_report(&runs, seed, &settings)?]
                }
            };
            for report in reports {
                report.write_to(out)?;
                print!("{}", report.summary);
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::section53_run;

    fn run_args(args: &[&str]) -> i32 {
        cli_main(std::iter::once("featrank").chain(args.iter().copied()))
    }

    fn path_str(p: &std::path::Path) -> &str {
        p.to_str().unwrap()
    }

    #[test]
    fn rank_writes_one_line_per_feature() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("d.csv");
        std::fs::write(&csv, "1,0.5,2.0,-1\n0,1.5,-1.0,-1\n").unwrap();
        let out = dir.path().join("scores.csv");
        assert_eq!(run_args(&["rank", path_str(&csv), "--out", path_str(&out)]), 0);
        let text = std::fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "feature_index,rank,ell_hat,alpha_hat,beta_hat,s_hat");
        assert_eq!(lines.len(), 4);
        // the constant third column cannot beat the other two
        assert!(lines[3].starts_with("2,3,"));
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "1,0.5\n3,1.0\n").unwrap();
        let one_class = dir.path().join("one.csv");
        std::fs::write(&one_class, "1,0.5\n1,1.0\n").unwrap();
        assert_eq!(run_args(&["frobnicate"]), 2);
        assert_eq!(run_args(&["select", path_str(&bad)]), 2);
        assert_eq!(run_args(&["--threads", "0", "rank", path_str(&bad)]), 2);
        assert_eq!(run_args(&["--help"]), 0);
        assert_eq!(run_args(&["rank", path_str(&bad)]), 1);
        assert_eq!(run_args(&["rank", path_str(&one_class)]), 1);
        assert_eq!(run_args(&["rank", path_str(&dir.path().join("missing.csv"))]), 1);
        let cfg = dir.path().join("bad.cfg");
        std::fs::write(&cfg, "n=10\np=0\n").unwrap();
        let out = dir.path().join("x.csv");
        assert_eq!(
            run_args(&["simulate", "--config", path_str(&cfg), "--out", path_str(&out)]),
            1
        );
    }

    #[test]
    fn simulate_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = SimConfig::large_study(3);
        config.p = 40;
        config.signal.count = 4;
        let cfg = dir.path().join("s.cfg");
        std::fs::write(&cfg, config.to_string()).unwrap();
        let out = dir.path().join("s.csv");
        assert_eq!(
            run_args(&["simulate", "--config", path_str(&cfg), "--out", path_str(&out)]),
            0
        );
        assert_eq!(load_csv(&out, false).unwrap(), generate(&config).unwrap().0);
    }

    #[test]
    fn select_matches_the_large_study() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("s.cfg");
        std::fs::write(&cfg, SimConfig::large_study(1).to_string()).unwrap();
        let data = dir.path().join("train.csv");
        assert_eq!(
            run_args(&["simulate", "--config", path_str(&cfg), "--out", path_str(&data)]),
            0
        );
        let chosen = dir.path().join("chosen.csv");
        let code = run_args(&[
            "--seed",
            "1",
            "select",
            path_str(&data),
            "--method",
            "threshold",
            "--alpha-level",
            "0.2",
            "--out",
            path_str(&chosen),
        ]);
        assert_eq!(code, 0);
        let r = std::fs::read_to_string(&chosen).unwrap().lines().count() - 1;
        let run = section53_run(1, &PipelineSettings::default()).unwrap();
        assert_eq!(r, run.threshold_r);
    }

    #[test]
    fn experiment_output_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        for d in [&a, &b] {
            std::fs::create_dir(d).unwrap();
            assert_eq!(
                run_args(&[
                    "--seed",
                    "4",
                    "experiment",
                    "section53",
                    "--reps",
                    "1",
                    "--out",
                    path_str(d)
                ]),
                0
            );
        }
        let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() > 3);
        for name in names {
            assert_eq!(
                std::fs::read(a.join(&name)).unwrap(),
                std::fs::read(b.join(&name)).unwrap()
            );
        }
    }
}
