use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn calibkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calibkit"))
        .args(args)
        .env_remove("CALIBKIT_SEED")
        .output()
        .expect("binary runs")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/reference_curve.csv")
}

#[test]
fn simulate_single_curve_matches_reference() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let o = calibkit(&["simulate", "--p", "0.5,0.5,0.5,0.5", "--out", path_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let got = csv_rows(&out);
    let want = csv_rows(&fixture());
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert!((g[0] - w[0]).abs() <= 1e-12 * w[0]);
        assert!((g[1] - w[1]).abs() < 1e-7, "{g:?} vs {w:?}");
    }
    assert!(dir.path().join("curve.csv.manifest.json").exists());
}

#[test]
fn design_then_bundle_has_one_column_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("design.csv");
    let bundle = dir.path().join("bundle.csv");
    let o = calibkit(&[
        "--seed",
        "3",
        "doe",
        "--n",
        "6",
        "--iterations",
        "200",
        "--out",
        path_arg(&design),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("discrepancy"));
    let o = calibkit(&[
        "simulate",
        "--design",
        path_arg(&design),
        "--points",
        "50",
        "--out",
        path_arg(&bundle),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&bundle).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 7, "{header}");
    assert_eq!(text.lines().count(), 51);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bundle.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn malformed_design_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("design.csv");
    fs::write(&design, "p1,p2,p3,p4\n0.1,0.2,0.3,0.4\n0.5,oops,0.5,0.5\n").unwrap();
    let out = dir.path().join("bundle.csv");
    let o = calibkit(&["simulate", "--design", path_arg(&design), "--out", path_arg(&out)]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("oops"), "{err}");
    assert!(!out.exists());
}

#[test]
fn unknown_strategy_lists_valid_ids() {
    let dir = tempfile::tempdir().unwrap();
    let o = calibkit(&["pipeline", "--strategy", "ForwNope", "--out-dir", path_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ForwSpliIII") && err.contains("InvPCA"), "{err}");
}

#[test]
fn out_of_cube_parameters_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = calibkit(&["simulate", "--p", "0.5,1.5,0.5,0.5", "--out", path_arg(&out)]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let o = calibkit(&["simulate", "--p", "0.5,0.5,0.5", "--out", path_arg(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected 4 parameters"));
}

#[test]
fn small_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(
        &config,
        "seed = 8\nlhs_iterations = 200\n[train]\nv_folds = 3\nratio_window = 20\nmax_iters = 200\nh_max = 3\n[optimizer]\nbudget = 300\n",
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = calibkit(&[
            "--config",
            path_arg(&config),
            "pipeline",
            "--strategy",
            "InvPCA",
            "--n-train",
            "25",
            "--n-test",
            "5",
            "--out-dir",
            path_arg(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["report.json", "test.csv", "train.csv", "bank/bank.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file} differs"
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 8);
    assert!(manifest["outputs"].as_array().unwrap().len() >= 4);

    let table = dir.path().join("table.csv");
    let o = calibkit(&[
        "report",
        "--inputs",
        path_arg(&a.join("report.json")),
        "--out",
        path_arg(&table),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("source,strategy,set,err_p1"), "{text}");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn unknown_config_key_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "seed = 1\nfolds = 3\n").unwrap();
    let out = dir.path().join("c.csv");
    let o = calibkit(&[
        "--config",
        path_arg(&config),
        "simulate",
        "--p",
        "0.5,0.5,0.5,0.5",
        "--out",
        path_arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn train_then_validate_against_an_observed_curve() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let (cfg, design, bundle, obs) = (p("small.toml"), p("d.csv"), p("b.csv"), p("obs.csv"));
    fs::write(
        &cfg,
        "seed = 2\n[train]\nv_folds = 3\nratio_window = 20\nmax_iters = 200\nh_max = 3\n[optimizer]\nbudget = 300\n",
    )
    .unwrap();
    let run = |args: &[&str], extra: &[&str]| calibkit(&[args, extra].concat());
    let ok = |args: &[&str], extra: &[&str]| {
        let o = run(args, extra);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8_lossy(&o.stdout).into_owned()
    };
    ok(
        &[
            "--config",
            &cfg,
            "doe",
            "--n",
            "20",
            "--iterations",
            "100",
            "--out",
            &design,
        ],
        &[],
    );
    ok(&["simulate", "--design", &design, "--out", &bundle], &[]);
    ok(&["simulate", "--p", "0.4,0.6,0.5,0.7", "--out", &obs], &[]);
    let observed = ["--observed", obs.as_str(), "--bundle", bundle.as_str()];

    let (fwd, inv) = (p("fwd"), p("inv"));
    for (strategy, bank) in [("ForwSpli", &fwd), ("InvExp", &inv)] {
        let args = [
            "--config",
            &cfg,
            "train",
            "--strategy",
            strategy,
            "--design",
            &design,
            "--bundle",
            &bundle,
        ];
        ok(&args, &["--out-dir", bank]);
    }
    let out = ok(
        &["--config", &cfg, "calibrate", "--bank", &fwd, "--out", &p("fwd.json")],
        &observed,
    );
    assert!(out.contains("response error"), "{out}");
    assert!(dir.path().join("fwd.csv").exists() && dir.path().join("fwd.json.manifest.json").exists());
    ok(
        &["--config", &cfg, "identify", "--bank", &inv, "--out", &p("inv.json")],
        &observed,
    );

    let err = p("err");
    let args = [
        "--config",
        &cfg,
        "train",
        "--strategy",
        "ErrorF1",
        "--design",
        &design,
        "--bundle",
        &bundle,
    ];
    assert_eq!(run(&args, &["--out-dir", &err]).status.code(), Some(2));
    ok(&args, &["--out-dir", &err, "--observed", &obs]);
    ok(
        &["--config", &cfg, "calibrate", "--bank", &err, "--out", &p("err.json")],
        &observed,
    );

    // Each bank kind is tied to its own command.
    let wrong = run(&["calibrate", "--bank", &inv, "--out", &p("x.json")], &observed);
    assert_eq!(wrong.status.code(), Some(2));

    ok(&["--config", &cfg, "direct", "--out", &p("direct.json")], &observed);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("direct.json")).unwrap()).unwrap();
    assert_eq!(report["strategy"], "Direct1");
    assert_eq!(report["mode"], "validation");
}
