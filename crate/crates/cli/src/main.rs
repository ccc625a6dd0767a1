//! `seqleak` command line: datasets, attacks, sweeps, plots, self-checks.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use seqleak::evaluators::{write_audit_rows, AUDIT_CSV_HEADER, KAGGLE_PRECISION};
use seqleak::harness::experiment::{read_curve, write_curve, write_sweep};
use seqleak::harness::plot::render_svg;
use seqleak::harness::trial::{write_trace_rows, TRACE_CSV_HEADER};
use seqleak::harness::verify::{check_exact_posterior, check_hoeffding, check_mechanisms};
use seqleak::harness::{run_experiment, sweep, CurveMetric, DataSource, ExperimentConfig};
use seqleak::ingest::{build_test, Ml100k};
use seqleak::kvfile::KvFile;
use seqleak::rng::{RngStream, Role};
use seqleak::synthgen::{generate, save_dataset, write_sidecar};

mod fetch;

/// A problem with input data rather than with how the tool was invoked.
#[derive(Debug)]
pub struct DataError(pub String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

#[derive(Debug)]
struct VerificationFailed(String);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

#[derive(Parser)]
#[command(name = "seqleak", version, about = "Test-set leakage through the order of recommender data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sequential dataset (CSV plus a .config sidecar).
    Gen {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Download and checksum-verify MovieLens 100k.
    FetchMl100k {
        #[arg(long, default_value = "data")]
        dest: PathBuf,
        #[arg(long, default_value = fetch::DEFAULT_URL)]
        url: String,
        /// Expected md5 of the archive; by default the published checksum file is used.
        #[arg(long)]
        md5: Option<String>,
    },
    /// Turn a MovieLens test split into a balanced sequential dataset CSV.
    Ingest {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "u1")]
        split: String,
        #[arg(long, default_value_t = 1000)]
        n_test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        one_hot_occupation: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment: repeated trials of an attacker against a mechanism.
    Attack {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value = "query")]
        metric: String,
        /// Receives trace.csv, curve.csv, audit.csv, curve.svg and config.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Grid over attacker parameters; reports the mean risk at the last query.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_delimiter = ',')]
        windows: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        zs: Option<Vec<usize>>,
        #[arg(long, default_value = "query")]
        metric: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render curve CSVs into one SVG.
    Plot {
        /// `label=path` pairs, or bare paths (labelled by file stem).
        #[arg(required = true)]
        curves: Vec<String>,
        #[arg(long, default_value = "risk vs queries")]
        title: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the brute-force oracle suites and mechanism invariant checks.
    Verify {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 8)]
        max_n: usize,
        #[arg(long, default_value_t = 10_000)]
        streams: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Experiment settings. Each flag has the name of a config key (dashes for
/// underscores); flags override the config file.
#[derive(Args, Default)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    user_dim: Option<usize>,
    #[arg(long)]
    item_dim: Option<usize>,
    #[arg(long)]
    n_items: Option<usize>,
    #[arg(long)]
    n_centers: Option<usize>,
    #[arg(long)]
    k_star: Option<usize>,
    #[arg(long)]
    logging_k: Option<usize>,
    #[arg(long)]
    exploration: Option<f64>,
    #[arg(long)]
    n_sim: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    no_repeat: Option<bool>,
    #[arg(long)]
    ml100k_dir: Option<PathBuf>,
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    one_hot_occupation: Option<bool>,
    #[arg(long)]
    mechanism: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    attacker: Option<String>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    z: Option<usize>,
    #[arg(long)]
    cluster_k: Option<usize>,
    #[arg(long)]
    assumed_k: Option<usize>,
    #[arg(long)]
    assumed_exploration: Option<f64>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    labels: Option<String>,
    #[arg(long)]
    jobs: Option<usize>,
}

impl ExperimentArgs {
    fn overrides(&self) -> KvFile {
        let mut kv = KvFile::new();
        macro_rules! put {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    kv.set(stringify!($field), v);
                })*
            };
        }
        put!(
            source, n_test, user_dim, item_dim, n_items, n_centers, k_star, logging_k, exploration, n_sim,
            test_fraction, no_repeat, split, one_hot_occupation, mechanism, eta, attacker, window, alpha, z,
            cluster_k, assumed_k, assumed_exploration, queries, repetitions, seed, labels, jobs
        );
        if let Some(d) = &self.ml100k_dir {
            kv.set("ml100k_dir", d.display());
        }
        kv
    }

    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut kv = match &self.config {
            Some(path) => KvFile::read(path)?,
            None => KvFile::new(),
        };
        let flags = self.overrides();
        // A mechanism switch without an explicit step picks that mechanism's default.
        if flags.get("mechanism").is_some() && flags.get("eta").is_none() {
            kv.remove("eta");
        }
        kv.merge(&flags);
        Ok(ExperimentConfig::from_kv(&kv)?)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { exp, trial, out } => {
            let cfg = exp.resolve()?;
            let DataSource::Synthetic(synth) = &cfg.source else {
                return Err(seqleak::Error::Config("gen needs source = synthetic".into()).into());
            };
            let data = generate(synth, cfg.seed, trial)?;
            save_dataset(&out, &data.dataset)?;
            write_sidecar(&out, synth, cfg.seed, trial)?;
            eprintln!("wrote {} ({} interactions, {} test)", out.display(), data.dataset.len(), data.dataset.n_test());
        }
        Command::FetchMl100k { dest, url, md5 } => {
            let dir = fetch::fetch(&url, md5.as_deref(), &dest)?;
            eprintln!("MovieLens 100k ready in {}", dir.display());
        }
        Command::Ingest {
            dir,
            split,
            n_test,
            seed,
            trial,
            one_hot_occupation,
            out,
        } => {
            let data = Ml100k::load(&dir)?;
            let featurizer = data.featurizer(one_hot_occupation);
            let ratings = data.split_test(&split)?;
            let mut rng = RngStream::derive(seed, trial, Role::Split).rng();
            let ds = build_test(&data, &featurizer, &ratings, n_test, &mut rng)?;
            save_dataset(&out, &ds)?;
            eprintln!("wrote {} ({} test interactions from split {split})", out.display(), ds.n_test());
        }
        Command::Attack { exp, metric, out_dir } => {
            let cfg = exp.resolve()?;
            let metric: CurveMetric = metric.parse()?;
            let res = run_experiment(&cfg, metric)?;
            std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            cfg.to_kv().write(&out_dir.join("config"))?;

            let mut trace = create(&out_dir.join("trace.csv"))?;
            writeln!(trace, "{TRACE_CSV_HEADER}")?;
            let mut audit = create(&out_dir.join("audit.csv"))?;
            writeln!(audit, "{AUDIT_CSV_HEADER}")?;
            for (trial, run) in res.runs.iter().enumerate() {
                write_trace_rows(&mut trace, &run.trace)?;
                write_audit_rows(&mut audit, trial as u64, cfg.mechanism, &run.audit)?;
            }
            trace.flush()?;
            audit.flush()?;
            let mut curve = create(&out_dir.join("curve.csv"))?;
            write_curve(&mut curve, &res.curve)?;
            curve.flush()?;
            let label = format!("{} vs {}", cfg.attacker.kind, cfg.mechanism);
            let svg = render_svg(&label, &[(label.clone(), res.curve.clone())])?;
            std::fs::write(out_dir.join("curve.svg"), svg)?;
            if let Some(p) = res.final_point() {
                println!("{label}: mean {} risk at t={} is {:.4} ± {:.4} over {} trials", metric.as_str(), p.t, p.mean, p.stderr, p.n_trials);
            }
        }
        Command::Sweep {
            exp,
            windows,
            alphas,
            zs,
            metric,
            out,
        } => {
            let cfg = exp.resolve()?;
            let metric: CurveMetric = metric.parse()?;
            let windows = windows.unwrap_or_else(|| vec![cfg.attacker.window]);
            let alphas = alphas.unwrap_or_else(|| vec![cfg.attacker.alpha]);
            let zs = zs.unwrap_or_else(|| vec![cfg.attacker.z]);
            let rows = sweep(&cfg, &windows, &alphas, &zs, metric)?;
            let mut f = create(&out)?;
            write_sweep(&mut f, &rows)?;
            f.flush()?;
            if let Some(best) = rows.iter().min_by(|a, b| a.final_mean.total_cmp(&b.final_mean)) {
                println!(
                    "best: window={} alpha={} z={} mean risk {:.4} ± {:.4}",
                    best.window, best.alpha, best.z, best.final_mean, best.final_stderr
                );
            }
        }
        Command::Plot { curves, title, out } => {
            let mut series = Vec::new();
            for spec in curves {
                let (label, path) = match spec.split_once('=') {
                    Some((l, p)) => (l.to_string(), PathBuf::from(p)),
                    None => {
                        let p = PathBuf::from(&spec);
                        let stem = p.file_stem().map_or(spec.clone(), |s| s.to_string_lossy().into_owned());
                        (stem, p)
                    }
                };
                series.push((label, read_curve(&path)?));
            }
            let svg = render_svg(&title, &series)?;
            let mut f = create(&out)?;
            f.write_all(svg.as_bytes())?;
            f.flush()?;
        }
        Command::Verify {
            instances,
            max_n,
            streams,
            seed,
        } => {
            let mut failures = Vec::new();
            let post = check_exact_posterior(seed, instances, max_n)?;
            let ok = post.max_abs_diff <= 1e-9;
            println!(
                "{} exact posterior vs brute force: {} instances, max |diff| {:.3e}",
                if ok { "PASS" } else { "FAIL" },
                post.instances,
                post.max_abs_diff
            );
            if !ok {
                failures.push("posterior");
            }
            let mech = check_mechanisms(seed, streams, 100, 100)?;
            let ok = mech.ladder_violations == 0 && mech.kaggle_max_error <= KAGGLE_PRECISION / 2.0 + 1e-12;
            println!(
                "{} mechanisms: {} streams, {} ladder increases, kaggle max error {:.3e}",
                if ok { "PASS" } else { "FAIL" },
                mech.streams,
                mech.ladder_violations,
                mech.kaggle_max_error
            );
            if !ok {
                failures.push("mechanisms");
            }
            let h = check_hoeffding(seed, 1000, 1000, 0.06)?;
            let ok = h.fraction() < 0.05;
            println!(
                "{} hoeffding: {} of {} reports further than {} from 0.5",
                if ok { "PASS" } else { "FAIL" },
                h.far,
                h.queries,
                h.threshold
            );
            if !ok {
                failures.push("hoeffding");
            }
            if !failures.is_empty() {
                return Err(VerificationFailed(failures.join(", ")).into());
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<VerificationFailed>().is_some() {
        return 3;
    }
    if err.downcast_ref::<DataError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<seqleak::Error>() {
        Some(
            seqleak::Error::Config(_)
            | seqleak::Error::InvalidArgument(_)
            | seqleak::Error::EnumerationTooLarge { .. },
        ) => 1,
        // Anything else is about the data or the filesystem.
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
