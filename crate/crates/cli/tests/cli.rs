use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gaborboost"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_exits_zero() {
    let out = run(&["cv", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(&["cv", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_print_one_prefixed_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = run(&["train", "--table", p(&missing), "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: "), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "bogus_key = 3\n").unwrap();
    let out = run(&["--config", p(&cfg), "generate", "--out", p(&dir.path().join("d"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus-key"));
}

#[test]
fn generate_tabularize_cv_train_explain_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    let table = d.join("table.csv");
    let report = d.join("report.json");
    let model = d.join("model.json");
    let cfg = d.join("run.conf");
    // Config supplies defaults; flags on the command line win.
    std::fs::write(&cfg, "# smoke run\nrepeats = 3\nk = 3\nmax_rounds = 150\nwidth = 64\nheight = 32\ncounts = 18,12,9\n")
        .unwrap();
    let c = p(&cfg);

    ok(&["--config", c, "generate", "--out", p(&data), "--seed", "5"]);
    assert!(data.join("labels.csv").exists() && data.join("ground_truth.csv").exists());

    let out = ok(&["--config", c, "tabularize", "--data", p(&data), "--out", p(&table), "--with-pf"]);
    assert!(out.contains("wrote 39 rows"), "{out}");
    let header = std::fs::read_to_string(&table).unwrap();
    assert!(header.starts_with("id,sigma_x,sigma_y,lambda,x_star,y_star,q_tl,q_tr,q_bl,q_br,egf_tl_bl,egf_tr_br,egf_tl_tr,egf_bl_br,pf_amp,"));

    let text = d.join("report.txt");
    let out = ok(&["--config", c, "cv", "--table", p(&table), "--out", p(&report), "--text", p(&text), "--repeats", "1"]);
    assert!(out.contains("Accuracy"));
    let json = std::fs::read_to_string(&report).unwrap();
    assert!(json.contains("\"repeats\": 1") && json.contains("\"k\": 3"), "{json}");
    assert_eq!(std::fs::read_to_string(&text).unwrap(), out);

    ok(&["--config", c, "train", "--table", p(&table), "--out", p(&model), "--feature-set", "GF+EGF"]);
    let svg = d.join("svg");
    let out = ok(&["explain", "--model", p(&model), "--out", p(&d.join("bundle.json")), "--svg-dir", p(&svg)]);
    assert!(out.contains("vortex:"));
    assert!(svg.join("importance_vortex.svg").exists());

    let eval = d.join("eval.json");
    let out = ok(&["evaluate", "--model", p(&model), "--table", p(&table), "--out", p(&eval)]);
    assert!(out.contains("accuracy"));
    assert!(std::fs::read_to_string(&eval).unwrap().contains("\"confusion\""));

    let fits = d.join("fits.csv");
    ok(&["fit-physics", "--data", p(&data), "--out", p(&fits)]);
    assert_eq!(std::fs::read_to_string(&fits).unwrap().lines().count(), 40);
}

#[test]
fn sequential_and_parallel_tables_match() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    ok(&["generate", "--out", p(&data), "--width", "48", "--height", "24", "--counts", "4,3,3"]);
    let (a, b) = (d.join("a.csv"), d.join("b.csv"));
    ok(&["tabularize", "--data", p(&data), "--out", p(&a)]);
    ok(&["--sequential", "tabularize", "--data", p(&data), "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
