use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qdgen::engine::metrics;
use qdgen::molgraph::read_dataset;
use qdgen::reward::local_filter;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qdgen"));
    c.env_remove("QDGEN_THREADS");
    c
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn toy_path() -> PathBuf {
    workspace().join("data/toy_200.smi")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn toy_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        "dataset = \"{}\"\nn_qubits = 4\nembed_dim = 16\nhidden_dim = 24\nepochs_lstm = 2\nepochs_qcbm = 2\n\
         priors_per_epoch = 8\nmolecules_per_prior = 2\nbatch_size = 50\nmax_len = 40\neval_samples = 20\n{extra}",
        toy_path().display()
    );
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn augment_one_seed() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("seed.smi");
    fs::write(&input, "CC(=O)Nc1ccc(O)cc1\n").unwrap();
    let out = dir.path().join("aug.smi");
    let o = run(&["augment", "--in", s(&input), "--out", s(&out), "--per-seed", "5", "--no-filter"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# qdgen augment"));
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(!body.is_empty() && body.len() <= 5);
}

#[test]
fn augment_unreadable_input() {
    let o = run(&["augment", "--in", "/nonexistent/seeds.smi", "--out", "/tmp/never.smi"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/nonexistent/seeds.smi"));
}

#[test]
fn augment_parse_error_names_line() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.smi");
    fs::write(&input, "CCO\nC1CC\n").unwrap();
    let o = run(&["augment", "--in", s(&input), "--out", s(&dir.path().join("o.smi"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn augment_is_deterministic_on_650_seeds() {
    let dir = TempDir::new().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/seeds_650.smi");
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("a{i}.smi"));
        let o = bin()
            .env("QDGEN_THREADS", threads)
            .args(["augment", "--in", s(&fixture), "--out", s(&out), "--per-seed", "100", "--seed", "1"])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outputs.push((String::from_utf8(o.stdout).unwrap(), fs::read(&out).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(outputs[0].0.starts_with("seeds 650 "));
}

#[test]
fn train_writes_reproducible_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = toy_config(dir.path(), "");
    let mut csvs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&["train", "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let csv = fs::read_to_string(out.join("epochs.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(out.join("checkpoint.json").exists());
        assert!(out.join("checkpoints/epoch_002.json").exists());
        assert!(out.join("summary.json").exists());
        csvs.push(csv);
    }
    assert_eq!(csvs[0], csvs[1]);

    let other = dir.path().join("c");
    assert_eq!(code(&run(&["train", "--config", s(&cfg), "--out", s(&other), "--seed", "5"])), 0);
    assert_ne!(fs::read_to_string(other.join("epochs.csv")).unwrap(), csvs[0]);
}

#[test]
fn train_config_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    for (extra, key) in [("n_qubits = -4\n", "n_qubits"), ("bogus_key = 1\n", "bogus_key")] {
        let text = format!("{extra}dataset = \"{}\"\n", toy_path().display());
        let cfg = dir.path().join("bad.toml");
        fs::write(&cfg, text).unwrap();
        let o = run(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
        assert_eq!(code(&o), 3);
        assert!(stderr(&o).contains(key), "{}", stderr(&o));
    }
}

#[test]
fn train_scorer_failure_exits_4() {
    let dir = TempDir::new().unwrap();
    let scorer = workspace().join("crates/core/tests/fixtures/scorers/failing.sh");
    let cfg = toy_config(
        dir.path(),
        &format!("reward = \"external\"\nexternal_scorer = [\"sh\", \"{}\"]\n", scorer.display()),
    );
    let o = run(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

fn trained(dir: &Path) -> PathBuf {
    let cfg = toy_config(dir, "");
    let text = fs::read_to_string(&cfg).unwrap().replace("epochs_lstm = 2", "epochs_lstm = 1");
    fs::write(&cfg, text.replace("epochs_qcbm = 2", "epochs_qcbm = 1")).unwrap();
    let out = dir.join("run");
    let o = run(&["train", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out.join("checkpoint.json")
}

#[test]
fn sample_contract() {
    let dir = TempDir::new().unwrap();
    let ck = trained(dir.path());

    let empty = dir.path().join("empty.smi");
    assert_eq!(code(&run(&["sample", "--checkpoint", s(&ck), "--count", "0", "--out", s(&empty)])), 0);
    assert_eq!(fs::read_to_string(&empty).unwrap(), "");

    let a = dir.path().join("a.smi");
    let b = dir.path().join("b.smi");
    for p in [&a, &b] {
        let o = run(&["sample", "--checkpoint", s(&ck), "--count", "40", "--seed", "3", "--out", s(p)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let sidecar = dir.path().join("a.smi.failures.tsv");
    let fails = fs::read_to_string(&sidecar).unwrap();
    let n_ok = fs::read_to_string(&a).unwrap().lines().count();
    assert_eq!(n_ok + fails.lines().count() - 1, 40);

    let text = fs::read_to_string(&ck).unwrap().replacen("\"schema_version\":1", "\"schema_version\":7", 1);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, text).unwrap();
    assert_eq!(code(&run(&["sample", "--checkpoint", s(&bad), "--count", "3", "--out", s(&a)])), 5);
    assert_eq!(code(&run(&["sample", "--checkpoint", "/nonexistent.json", "--out", s(&a)])), 5);
}

#[test]
fn eval_contract() {
    let dir = TempDir::new().unwrap();
    let toy = toy_path();
    let report = dir.path().join("r.json");

    let dups = dir.path().join("dups.smi");
    fs::write(&dups, "CCO\nCCO\nOCC\nC(O)C\n").unwrap();
    let o = run(&["eval", "--in", s(&dups), "--train-set", s(&toy), "--report", s(&report)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["uf"].as_f64().unwrap(), 25.0);

    let empty = dir.path().join("empty.smi");
    fs::write(&empty, "# nothing\n").unwrap();
    assert_eq!(code(&run(&["eval", "--in", s(&empty), "--train-set", s(&toy), "--report", s(&report)])), 2);

    let bad = dir.path().join("bad.smi");
    fs::write(&bad, "CCO\nC1CC\nc1ccccc1\nN(\n").unwrap();
    let o = run(&["eval", "--in", s(&bad), "--train-set", s(&toy), "--report", s(&report)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("2, 4"), "{}", stderr(&o));
    let o = run(&["eval", "--in", s(&bad), "--train-set", s(&toy), "--report", s(&report), "--lenient"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["n_total"].as_u64().unwrap(), 4);
    assert_eq!(v["invalid_lines"], serde_json::json!([2, 4]));
}

#[test]
fn eval_matches_engine_metrics() {
    let dir = TempDir::new().unwrap();
    let toy = toy_path();
    let report = dir.path().join("r.json");
    let svg = dir.path().join("m.svg");
    let o = run(&["eval", "--in", s(&toy), "--train-set", s(&toy), "--report", s(&report), "--svg", s(&svg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let molecules: Vec<_> = read_dataset(&toy).unwrap().into_iter().map(Some).collect();
    let m = metrics(&molecules, |g| local_filter(g).passed).unwrap();
    assert_eq!(v["sr"].as_f64().unwrap(), m.sr);
    assert_eq!(v["uf"].as_f64().unwrap(), m.uf);
    assert_eq!(v["df"].as_f64().unwrap(), m.df);
    assert_eq!(v["novel"].as_f64().unwrap(), 0.0);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn scaling_contract() {
    let dir = TempDir::new().unwrap();
    let cfg = toy_config(dir.path(), "");
    let one = dir.path().join("one.csv");
    let o = run(&["scaling", "--config", s(&cfg), "--qubits", "4", "--out", s(&one)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&one).unwrap().lines().count(), 2);

    let three = dir.path().join("three.csv");
    let o = run(&["scaling", "--config", s(&cfg), "--qubits", "3,3,5", "--out", s(&three)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(&three).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][..6], rows[1][..6]);
    let svg = fs::read_to_string(dir.path().join("three.svg")).unwrap();
    assert_eq!(svg.matches("class=\"point\"").count(), 3);

    let o = run(&["scaling", "--config", s(&cfg), "--qubits", "", "--out", s(&one)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let o = run(&["scaling", "--config", s(&cfg), "--out", s(&one)]);
    assert_eq!(code(&o), 3);
}
