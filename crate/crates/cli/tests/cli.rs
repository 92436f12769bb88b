use std::path::Path;
use std::process::{Command, Output};

fn blocksparse(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blocksparse"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BLOCKSPARSE_OUT")
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path)).unwrap()
}

const SMALL_NANOPORE: [&str; 6] = ["--experiment", "nanopore", "--n", "128", "--alpha", "30"];

#[test]
fn noiseless_identity_problem_hits_the_snr_cap() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("identity.txt");
    std::fs::write(
        &inst,
        "blocksparse-instance 1\nA identity 4\nL identity 4\nx0 4\n0 2 3 0\ny 4\n0 2 3 0\n",
    )
    .unwrap();
    let out = dir.path().join("solve");
    let o = blocksparse(&["solve", "--method", "l1@lambda=0", "--instance", inst.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("report.json"));
    // exact to solver tolerance, reported as the cap
    assert_eq!(report["snr_db"], blocksparse::experiments::SNR_CAP_DB);
    assert_eq!(report["f1"], 1.0);
    for f in ["x_hat.csv", "sigma_hat.csv", "trace.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"trials": 3, "colour": "red"}"#).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["bench", "--config", bad.to_str().unwrap()],
        vec!["bench", "--rho", "0.5"],
        vec!["bench", "--method", "lop@alpha=-1"],
        vec!["solve", "--method", "lop", "--method", "adalop"],
        vec!["sweep"],
        vec!["bench", "--no-such-flag"],
    ];
    for args in cases {
        let o = blocksparse(&args, &dir.path().join("out"));
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    // nothing was computed, so nothing was written
    assert!(!dir.path().join("out").join("manifest.json").exists());
}

#[test]
fn solver_failure_exits_1_with_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("huge.txt");
    // entries this large overflow the normal equations on the first sweep
    std::fs::write(&inst, "blocksparse-instance 1\nA dense 2 2\n1e300 1e300\n1e300 -1e300\nL identity 2\ny 2\n1e300 1e300\n")
        .unwrap();
    let out = dir.path().join("solve");
    let o = blocksparse(&["solve", "--method", "lop", "--instance", inst.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("report.json"));
    assert!(report["error"].is_string());
    assert!(read(&out.join("trace.csv")).starts_with("iter,lagrangian"));
}

#[test]
fn bench_is_deterministic_and_shaped() {
    let dir = tempfile::tempdir().unwrap();
    let args = [&SMALL_NANOPORE[..], &["bench", "--trials", "3", "--seed", "5", "--method", "lop", "--method", "adalop:sid@gamma=1e4"]].concat();
    let a = blocksparse(&args, &dir.path().join("a"));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = blocksparse(&[args.as_slice(), &["--jobs", "2"]].concat(), &dir.path().join("b"));
    assert!(b.status.success());

    let summary = read(&dir.path().join("a/summary.csv"));
    assert_eq!(summary, read(&dir.path().join("b/summary.csv")));
    assert_eq!(json(&dir.path().join("a/summary.json")), json(&dir.path().join("b/summary.json")));
    let header = summary.lines().next().unwrap();
    for col in ["method", "snr_db_mean", "snr_db_median", "snr_db_std", "f1_mean"] {
        assert!(header.split(',').any(|c| c == col), "{col}");
    }
    assert_eq!(summary.lines().count(), 3);

    let trials = read(&dir.path().join("a/trials.csv"));
    assert!(trials.starts_with("method,trial,seed,snr_db,f1,nmse,iters,wall_time_s"));
    assert_eq!(trials.lines().count(), 1 + 3 * 2);

    let manifest = json(&dir.path().join("a/manifest.json"));
    assert_eq!(manifest["command"], "bench");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config"]["trials"], 3);
}

#[test]
fn sweep_writes_one_row_per_value_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        &SMALL_NANOPORE[..],
        &["sweep", "--trials", "1", "--mu", "1,1,1,1", "--param", "lambda", "--values", "0.1,1,10", "--method", "l1", "--method", "lop"],
    ]
    .concat();
    let o = blocksparse(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read(&dir.path().join("summary.csv"));
    let rows: Vec<&str> = summary.lines().collect();
    assert!(rows[0].starts_with("lambda,method,"));
    assert_eq!(rows.len(), 1 + 3 * 2);
    assert!(rows[1].starts_with("0.1,l1,") && rows[6].starts_with("10,lop,"));
}

#[test]
fn generated_instance_round_trips_through_solve() {
    let dir = tempfile::tempdir().unwrap();
    let g = blocksparse(&[&SMALL_NANOPORE[..], &["generate", "--seed", "3"]].concat(), &dir.path().join("g"));
    assert!(g.status.success());
    let inst = dir.path().join("g/instance.txt");
    let from_file = blocksparse(
        &[&SMALL_NANOPORE[..], &["solve", "--method", "lop:sid", "--instance", inst.to_str().unwrap()]].concat(),
        &dir.path().join("f"),
    );
    let generated = blocksparse(
        &[&SMALL_NANOPORE[..], &["solve", "--method", "lop:sid", "--seed", "3"]].concat(),
        &dir.path().join("s"),
    );
    assert!(from_file.status.success() && generated.status.success());
    assert_eq!(read(&dir.path().join("f/x_hat.csv")), read(&dir.path().join("s/x_hat.csv")));
}

#[test]
fn golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let o = blocksparse(
        &["solve", "--instance", golden.join("small.txt").to_str().unwrap(), "--method", "adalop@lambda=0.5,alpha=3,gamma=20"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut report = json(&dir.path().join("report.json"));
    report["instance"] = "small.txt".into();
    let expected = json(&golden.join("small_report.json"));
    assert_eq!(report, expected);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_blocksparse"))
        .args(["generate", "--experiment", "nanopore", "--n", "64"])
        .env("BLOCKSPARSE_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("instance.txt").exists());
}
