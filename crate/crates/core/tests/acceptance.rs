//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.
//!
//! MovieLens criterion: set `SEQLEAK_ML100K_DIR` or fetch into `data/ml-100k`
//! at the workspace root (`seqleak fetch-ml100k --dest data`).

use std::path::PathBuf;
use std::time::{Duration, Instant};

use seqleak::attacks::AttackerKind;
use seqleak::evaluators::{write_audit_rows, MechanismKind, KAGGLE_PRECISION};
use seqleak::harness::experiment::{aggregate, run_on, sweep, write_curve, CurvePoint};
use seqleak::harness::trial::{trial_data, write_trace_rows};
use seqleak::harness::verify::{check_exact_posterior, check_hoeffding, check_mechanisms};
use seqleak::harness::{
    run_experiment, CurveMetric, DataSource, ExperimentConfig, LabelMode, PreparedSource, TrialRun,
};
use seqleak::synthgen::SynthConfig;
use seqleak::Result;

const MASTER_SEED: u64 = 20240601;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn synthetic(n_test: usize, n_sim: usize) -> SynthConfig {
    SynthConfig {
        logging_k: 1,
        exploration: 0.1,
        n_sim,
        n_test,
        ..Default::default()
    }
}

fn config(source: SynthConfig, kind: AttackerKind, mechanism: MechanismKind, queries: usize, reps: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        source: DataSource::Synthetic(source),
        mechanism,
        eta: match mechanism {
            MechanismKind::Kaggle => KAGGLE_PRECISION,
            MechanismKind::Ladder => 0.01,
        },
        queries,
        repetitions: reps,
        seed: MASTER_SEED,
        ..Default::default()
    };
    cfg.attacker.kind = kind;
    cfg
}

fn last(curve: &[CurvePoint]) -> &CurvePoint {
    curve.last().expect("non-empty curve")
}

fn postboost_exact() -> Result<Outcome> {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for mech in [MechanismKind::Kaggle, MechanismKind::Ladder] {
        let cfg = config(synthetic(10, 30), AttackerKind::PostBoost, mech, 100, 1000);
        let res = run_experiment(&cfg, CurveMetric::Query)?;
        let first = res.curve[0].mean;
        let lo = res.curve.iter().map(|p| p.mean).fold(f64::INFINITY, f64::min);
        let hi = res.curve.iter().map(|p| p.mean).fold(0.0, f64::max);
        let fin = last(&res.curve);
        ok &= first <= 0.47 && lo >= 0.42 && hi <= 0.48;
        lines.push(format!(
            "{mech}: first {first:.4}, final {:.4}±{:.4}, curve range [{lo:.4}, {hi:.4}]",
            fin.mean, fin.stderr
        ));
    }
    let secs = start.elapsed();
    ok &= secs < Duration::from_secs(120);
    lines.push(format!("{:.1}s", secs.as_secs_f64()));
    Ok(verdict(ok, lines.join("; ")))
}

fn wboost_contrast() -> Result<Outcome> {
    let start = Instant::now();
    let reps = 60;
    // Pick (w, alpha) on a separate seed so the reported run is not the one
    // that was tuned on.
    let mut tune = config(synthetic(1000, 3000), AttackerKind::WBoost, MechanismKind::Kaggle, 2000, 10);
    tune.seed = MASTER_SEED + 1;
    let grid = sweep(&tune, &[10, 25, 50], &[0.1, 0.3], &[tune.attacker.z], CurveMetric::Query)?;
    let best = grid
        .iter()
        .min_by(|a, b| a.final_mean.total_cmp(&b.final_mean))
        .expect("non-empty sweep");

    let mut cfg = config(synthetic(1000, 3000), AttackerKind::WBoost, MechanismKind::Kaggle, 2000, reps);
    cfg.attacker.window = best.window;
    cfg.attacker.alpha = best.alpha;
    let source = PreparedSource::load(&cfg)?;
    let data = (0..reps as u64)
        .map(|t| trial_data(&cfg, &source, t))
        .collect::<Result<Vec<_>>>()?;
    let kaggle = aggregate(&run_on(&cfg, &data)?, CurveMetric::Query);
    let ladder_cfg = ExperimentConfig {
        mechanism: MechanismKind::Ladder,
        eta: 0.01,
        ..cfg.clone()
    };
    let ladder = aggregate(&run_on(&ladder_cfg, &data)?, CurveMetric::Query);
    let (k, l) = (last(&kaggle), last(&ladder));
    let secs = start.elapsed();
    let ok = k.mean < 0.49 && (l.mean - 0.5).abs() <= 0.005 && secs < Duration::from_secs(600);
    Ok(verdict(
        ok,
        format!(
            "w={} alpha={}: kaggle {:.4}±{:.4}, ladder {:.4}±{:.4} at T=2000 over {reps} trials; {:.1}s",
            best.window,
            best.alpha,
            k.mean,
            k.stderr,
            l.mean,
            l.stderr,
            secs.as_secs_f64()
        ),
    ))
}

fn ml100k_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("SEQLEAK_ML100K_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k"));
    dir.join("u.data").is_file().then_some(dir)
}

fn ml100k_disruption() -> Result<Outcome> {
    let Some(dir) = ml100k_dir() else {
        return Ok(Outcome::Skip(
            "MovieLens 100k not found; run `seqleak fetch-ml100k --dest data` or set SEQLEAK_ML100K_DIR".into(),
        ));
    };
    let mut cfg = ExperimentConfig {
        source: DataSource::Ml100k {
            dir,
            split: "u1".into(),
            n_test: 1000,
            one_hot_occupation: false,
        },
        queries: 1000,
        repetitions: 20,
        seed: MASTER_SEED,
        ..Default::default()
    };
    cfg.attacker.kind = AttackerKind::PostBoostApprox;
    cfg.attacker.z = 10;
    let source = PreparedSource::load(&cfg)?;
    let data = (0..cfg.repetitions as u64)
        .map(|t| trial_data(&cfg, &source, t))
        .collect::<Result<Vec<_>>>()?;
    let post = aggregate(&run_on(&cfg, &data)?, CurveMetric::Query);
    let mut boost_cfg = cfg.clone();
    boost_cfg.attacker.kind = AttackerKind::Boost;
    let boost = aggregate(&run_on(&boost_cfg, &data)?, CurveMetric::Query);
    let (p, b) = (last(&post), last(&boost));
    Ok(verdict(
        p.mean <= 0.495 && p.mean < b.mean,
        format!("postboost-approx {:.4}±{:.4}, boost {:.4}±{:.4}", p.mean, p.stderr, b.mean, b.stderr),
    ))
}

fn posterior_oracle() -> Result<Outcome> {
    let start = Instant::now();
    let c = check_exact_posterior(MASTER_SEED, 100, 8)?;
    let secs = start.elapsed();
    Ok(verdict(
        c.max_abs_diff <= 1e-9 && secs < Duration::from_secs(60),
        format!("{} instances, max |diff| {:.2e}; {:.1}s", c.instances, c.max_abs_diff, secs.as_secs_f64()),
    ))
}

fn blindness() -> Result<Outcome> {
    let trials = 100;
    let mut ok = true;
    let mut lines = Vec::new();
    for kind in AttackerKind::ALL {
        let n_test = if kind == AttackerKind::PostBoost { 10 } else { 100 };
        let mut cfg = config(synthetic(n_test, 3 * n_test), kind, MechanismKind::Kaggle, 100, trials);
        cfg.labels = LabelMode::CoinFlip;
        cfg.attacker.window = 10;
        cfg.attacker.z = 10;
        let res = run_experiment(&cfg, CurveMetric::Final)?;
        let risks: Vec<f64> = res.runs.iter().filter_map(|r: &TrialRun| r.fresh_risk).collect();
        let mean = risks.iter().sum::<f64>() / risks.len() as f64;
        // Exact spread of a risk against fresh fair coins: sqrt(1/4n) per trial.
        let sigma = (0.25 / n_test as f64).sqrt() / (risks.len() as f64).sqrt();
        let z = (mean - 0.5) / sigma;
        ok &= risks.len() == trials && z.abs() <= 3.0;
        lines.push(format!("{kind} {mean:.4} ({z:+.2}σ)"));
    }
    Ok(verdict(ok, format!("true risk over {trials} trials: {}", lines.join(", "))))
}

fn mechanism_properties() -> Result<Outcome> {
    let m = check_mechanisms(MASTER_SEED, 10_000, 100, 100)?;
    let h = check_hoeffding(MASTER_SEED, 1000, 1000, 0.06)?;
    let ok = m.ladder_violations == 0 && m.kaggle_max_error <= KAGGLE_PRECISION / 2.0 + 1e-12 && h.fraction() < 0.05;
    Ok(verdict(
        ok,
        format!(
            "{} ladder streams, {} increases; kaggle max error {:.2e}; hoeffding {}/{} beyond {}",
            m.streams, m.ladder_violations, m.kaggle_max_error, h.far, h.queries, h.threshold
        ),
    ))
}

fn csv_bytes(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let res = run_experiment(cfg, CurveMetric::Query)?;
    let mut out = Vec::new();
    for (t, run) in res.runs.iter().enumerate() {
        write_trace_rows(&mut out, &run.trace).expect("in-memory write");
        write_audit_rows(&mut out, t as u64, cfg.mechanism, &run.audit).expect("in-memory write");
    }
    write_curve(&mut out, &res.curve).expect("in-memory write");
    Ok(out)
}

fn determinism() -> Result<Outcome> {
    let mut checked = 0;
    for kind in AttackerKind::ALL {
        for mech in [MechanismKind::Kaggle, MechanismKind::Ladder] {
            let n_test = if kind == AttackerKind::PostBoost { 10 } else { 200 };
            let mut cfg = config(synthetic(n_test, 3 * n_test), kind, mech, 50, 4);
            cfg.attacker.window = 20;
            let a = csv_bytes(&cfg)?;
            let b = csv_bytes(&ExperimentConfig { jobs: 3, ..cfg.clone() })?;
            if a != b {
                return Ok(Outcome::Fail(format!("{kind} vs {mech}: CSV bytes differ between runs")));
            }
            checked += 1;
        }
    }
    Ok(Outcome::Pass(format!("{checked} experiments reproduced byte-identical CSVs (1 and 3 threads)")))
}

type Check = fn() -> Result<Outcome>;

fn main() {
    let criteria: [(&str, Check); 7] = [
        ("1 postboost exact, kaggle and ladder", postboost_exact),
        ("2 wboost mechanism contrast", wboost_contrast),
        ("3 movielens disruption", ml100k_disruption),
        ("4 posterior oracle equivalence", posterior_oracle),
        ("5 blindness on coin-flip labels", blindness),
        ("6 mechanism properties", mechanism_properties),
        ("7 determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let line = match check() {
            Ok(Outcome::Pass(d)) => format!("PASS criterion {name}: {d}"),
            Ok(Outcome::Skip(d)) => format!("SKIP criterion {name}: {d}"),
            Ok(Outcome::Fail(d)) => {
                failed += 1;
                format!("FAIL criterion {name}: {d}")
            }
            Err(e) => {
                failed += 1;
                format!("FAIL criterion {name}: error: {e}")
            }
        };
        println!("{line}");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
