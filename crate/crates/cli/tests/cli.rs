use std::path::Path;
use std::process::{Command, Output};

fn seqleak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqleak"))
        .args(args)
        .output()
        .expect("spawn seqleak")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&seqleak(&["attack", "--no-such-flag"])), 1);
    assert_eq!(code(&seqleak(&[])), 1);
    let tmp = tempfile::tempdir().unwrap();
    let out = seqleak(&["attack", "--n-test", "7", "--out-dir", p(tmp.path())]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&seqleak(&["--help"])), 0);
}

#[test]
fn missing_data_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = seqleak(&["ingest", "--dir", p(&tmp.path().join("nope")), "--out", p(&tmp.path().join("x.csv"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("u.user"));
    let out = seqleak(&["plot", p(&tmp.path().join("missing.csv")), "--out", p(&tmp.path().join("p.svg"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_passes() {
    let out = seqleak(&["verify", "--instances", "20", "--streams", "200"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("PASS").count(), 3, "{stdout}");
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.cfg");
    std::fs::write(&cfg, "# small run\nn_test = 20\nn_sim = 80\nqueries = 5\nrepetitions = 2\nattacker = wboost\nwindow = 4\n").unwrap();
    let out_dir = tmp.path().join("run");
    let out = seqleak(&["attack", "--config", p(&cfg), "--queries", "7", "--out-dir", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 2 * 7);
    assert!(trace.lines().nth(1).unwrap().starts_with("0,wboost,kaggle,1,"));
    let saved = std::fs::read_to_string(out_dir.join("config")).unwrap();
    assert!(saved.contains("queries = 7") && saved.contains("window = 4"), "{saved}");

    // The saved config reproduces the run byte for byte.
    let again = tmp.path().join("again");
    assert_eq!(code(&seqleak(&["attack", "--config", p(&out_dir.join("config")), "--out-dir", p(&again)])), 0);
    for f in ["trace.csv", "curve.csv", "audit.csv"] {
        assert_eq!(std::fs::read(out_dir.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn gen_sweep_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("d.csv");
    let out = seqleak(&["gen", "--n-sim", "100", "--n-test", "20", "--seed", "3", "--out", p(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("time,split,label,u_0,u_1,i_0,i_1\n"));
    let sidecar = std::fs::read_to_string(tmp.path().join("d.csv.config")).unwrap();
    assert!(sidecar.contains("seed = 3"), "{sidecar}");

    let sweep = tmp.path().join("s.csv");
    let out = seqleak(&[
        "sweep", "--attacker", "wboost", "--n-sim", "100", "--n-test", "20", "--queries", "10", "--repetitions", "2",
        "--windows", "2,4", "--alphas", "0.1,0.5", "--out", p(&sweep),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&sweep).unwrap().lines().count(), 5);

    let mut curves = Vec::new();
    for mech in ["kaggle", "ladder"] {
        let dir = tmp.path().join(mech);
        let out = seqleak(&[
            "attack", "--mechanism", mech, "--n-sim", "60", "--n-test", "10", "--queries", "10",
            "--repetitions", "3", "--attacker", "postboost", "--out-dir", p(&dir),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.join("curve.svg").is_file());
        curves.push(format!("{mech}={}", dir.join("curve.csv").display()));
    }
    let svg = tmp.path().join("both.svg");
    let out = seqleak(&["plot", &curves[0], &curves[1], "--out", p(&svg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 2);
    assert!(text.contains(">kaggle<") && text.contains(">ladder<"));
}
