//! Repeated trials and their averaged risk curve.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::trial::{run_attack, run_trial, trial_data, PreparedSource, TraceRow, TrialData, TrialRun};

/// Which risk a curve averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurveMetric {
    /// Empirical risk of the vector submitted at step t.
    #[default]
    Query,
    /// Empirical risk of the attacker's final prediction as of step t.
    Final,
}

impl CurveMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Query => "query",
            Self::Final => "final",
        }
    }

    fn of(self, row: &TraceRow) -> f64 {
        match self {
            Self::Query => row.query_risk,
            Self::Final => row.final_risk,
        }
    }
}

impl FromStr for CurveMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "query" => Ok(Self::Query),
            "final" => Ok(Self::Final),
            other => Err(Error::Config(format!("unknown curve metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub t: u64,
    pub mean: f64,
    pub stderr: f64,
    pub n_trials: usize,
}

pub const CURVE_CSV_HEADER: &str = "t,mean_risk,stderr,n_trials";

/// Mean and standard error per step, summed in trial order.
pub fn aggregate(runs: &[TrialRun], metric: CurveMetric) -> Vec<CurvePoint> {
    let steps = runs.iter().map(|r| r.trace.len()).max().unwrap_or(0);
    (0..steps)
        .filter_map(|s| {
            let xs: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.trace.get(s))
                .map(|row| metric.of(row))
                .collect();
            let n = xs.len();
            if n == 0 {
                return None;
            }
            let mean = xs.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            Some(CurvePoint {
                t: s as u64 + 1,
                mean,
                stderr,
                n_trials: n,
            })
        })
        .collect()
}

pub fn write_curve<W: Write>(out: &mut W, curve: &[CurvePoint]) -> std::io::Result<()> {
    writeln!(out, "{CURVE_CSV_HEADER}")?;
    for p in curve {
        writeln!(out, "{},{},{},{}", p.t, p.mean, p.stderr, p.n_trials)?;
    }
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CURVE_CSV_HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("expected header {CURVE_CSV_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::parse(path, n + 1, "expected 4 fields"));
        }
        let bad = |what: &str| Error::parse(path, n + 1, format!("bad {what}"));
        out.push(CurvePoint {
            t: f[0].parse().map_err(|_| bad("t"))?,
            mean: f[1].parse().map_err(|_| bad("mean_risk"))?,
            stderr: f[2].parse().map_err(|_| bad("stderr"))?,
            n_trials: f[3].parse().map_err(|_| bad("n_trials"))?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<TrialRun>,
    pub curve: Vec<CurvePoint>,
}

impl ExperimentResult {
    pub fn trace(&self) -> impl Iterator<Item = &TraceRow> {
        self.runs.iter().flat_map(|r| r.trace.iter())
    }

    /// Curve value at the last step.
    pub fn final_point(&self) -> Option<&CurvePoint> {
        self.curve.last()
    }
}

/// Runs trials `0..repetitions` on up to `cfg.jobs` threads. Each trial
/// derives its randomness from (seed, trial) alone, so the result does not
/// depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig, metric: CurveMetric) -> Result<ExperimentResult> {
    cfg.validate()?;
    let source = PreparedSource::load(cfg)?;
    run_prepared(cfg, &source, metric)
}

pub fn run_prepared(cfg: &ExperimentConfig, source: &PreparedSource, metric: CurveMetric) -> Result<ExperimentResult> {
    let trials = 0..cfg.repetitions as u64;
    let runs: Vec<TrialRun> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| trials.into_par_iter().map(|t| run_trial(cfg, source, t)).collect::<Result<_>>())?
    } else {
        trials.map(|t| run_trial(cfg, source, t)).collect::<Result<_>>()?
    };
    let curve = aggregate(&runs, metric);
    Ok(ExperimentResult { runs, curve })
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub window: usize,
    pub alpha: f64,
    pub z: usize,
    pub final_mean: f64,
    pub final_stderr: f64,
}

pub const SWEEP_CSV_HEADER: &str = "window,alpha,z,mean_risk_at_T,stderr";

/// Runs the base config once per (window, alpha, z) combination. Parameters
/// the attacker does not use are still varied; callers pass singletons for
/// those. Each trial's data is built once and shared by every grid point.
pub fn sweep(
    base: &ExperimentConfig,
    windows: &[usize],
    alphas: &[f64],
    zs: &[usize],
    metric: CurveMetric,
) -> Result<Vec<SweepRow>> {
    base.validate()?;
    let source = PreparedSource::load(base)?;
    let data = (0..base.repetitions as u64)
        .map(|t| trial_data(base, &source, t))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &window in windows {
        for &alpha in alphas {
            for &z in zs {
                let mut cfg = base.clone();
                cfg.attacker.window = window;
                cfg.attacker.alpha = alpha;
                cfg.attacker.z = z;
                cfg.validate()?;
                let runs = run_on(&cfg, &data)?;
                let curve = aggregate(&runs, metric);
                let last = curve
                    .last()
                    .ok_or_else(|| Error::Config("sweep needs at least one query".into()))?;
                rows.push(SweepRow {
                    window,
                    alpha,
                    z,
                    final_mean: last.mean,
                    final_stderr: last.stderr,
                });
            }
        }
    }
    Ok(rows)
}

/// Attacks prebuilt trial data; trial `t` is `data[t]`.
pub fn run_on(cfg: &ExperimentConfig, data: &[TrialData]) -> Result<Vec<TrialRun>> {
    let attack = |(t, d): (usize, &TrialData)| run_attack(cfg, d, t as u64);
    if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| data.par_iter().enumerate().map(attack).collect())
    } else {
        data.iter().enumerate().map(attack).collect()
    }
}

pub fn write_sweep<W: Write>(out: &mut W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.window, r.alpha, r.z, r.final_mean, r.final_stderr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::DataSource;
    use crate::synthgen::SynthConfig;

    fn cfg() -> ExperimentConfig {
        let s = SynthConfig {
            n_sim: 150,
            n_test: 10,
            ..Default::default()
        };
        ExperimentConfig {
            source: DataSource::Synthetic(s),
            queries: 12,
            repetitions: 6,
            ..Default::default()
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let one = run_experiment(&cfg(), CurveMetric::Query).unwrap();
        let many = run_experiment(&ExperimentConfig { jobs: 3, ..cfg() }, CurveMetric::Query).unwrap();
        assert_eq!(one.curve, many.curve);
        assert_eq!(one.trace().count(), 6 * 12);
    }

    #[test]
    fn aggregate_by_hand() {
        let base = run_experiment(&ExperimentConfig { repetitions: 2, queries: 1, ..cfg() }, CurveMetric::Final)
            .unwrap();
        let a = base.runs[0].trace[0].final_risk;
        let b = base.runs[1].trace[0].final_risk;
        let p = &base.curve[0];
        assert!((p.mean - (a + b) / 2.0).abs() < 1e-12);
        assert!((p.stderr - (a - b).abs() / 2.0).abs() < 1e-12);
        assert_eq!(p.n_trials, 2);
    }

    #[test]
    fn curve_csv_round_trip() {
        let res = run_experiment(&cfg(), CurveMetric::Query).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        write_curve(&mut f, &res.curve).unwrap();
        drop(f);
        assert_eq!(read_curve(&path).unwrap(), res.curve);
    }
}
