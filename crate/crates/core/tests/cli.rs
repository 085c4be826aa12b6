use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spherekhin::report::ReportDocument;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spherekhin"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn small_verify(dir: &Path, name: &str, extra: &[&str]) -> Output {
    let out = dir.join(name);
    let mut args = vec![
        "verify", "--ids", "thm-main,thm-diag", "--p", "3,5", "--d", "3", "--n", "2,6", "--vectors", "2",
        "--samples", "20000", "--seed", "11", "--out", out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn moment_examples() {
    let out = run(&["moment", "--d", "3", "--p", "4", "--a", "0.7071067811865476,0.7071067811865476", "--method", "exact"]);
    assert!(out.status.success());
    assert!((json(&out)["value"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-10);

    let out = run(&["moment", "--d", "2", "--p", "2", "--a", "1"]);
    assert_eq!(json(&out)["value"].as_f64().unwrap(), 1.0);

    let diag = ["0.3535533905932738"; 8].join(",");
    let args = ["moment", "--d", "5", "--p", "3", "--a", &diag, "--method", "mc", "--samples", "100000", "--seed", "7"];
    let (one, two) = (run(&args), run(&args));
    assert!(one.status.success());
    assert_eq!(one.stdout, two.stdout);
    let v = json(&one);
    assert_eq!(v["method"], "mc");
    assert!(v["err"].as_f64().unwrap() > 0.0);
}

#[test]
fn constants_examples() {
    let v = json(&run(&["constants", "--p", "2", "--d", "3"]));
    for key in ["c_main", "c_diag", "kappa", "beta", "beta_tilde"] {
        assert_eq!(v[key].as_f64().unwrap(), 0.0, "{key}");
    }
    let v = json(&run(&["constants", "--p", "4", "--d", "3"]));
    assert!((v["c_main"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let v = json(&run(&["constants", "--p", "6", "--d", "2"]));
    assert!((v["m_cut"].as_f64().unwrap() - (1.0 - 2f64.powf(-0.5)).sqrt()).abs() < 1e-15);
    assert_eq!(run(&["constants", "--p", "1.5", "--d", "3"]).status.code(), Some(2));
    assert_eq!(run(&["constants", "--p", "3", "--d", "1"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["moment", "--d", "3"]).status.code(), Some(2));
    assert_eq!(run(&["moment", "--d", "1", "--p", "3", "--a", "1"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--p", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["tightness", "--id", "thm-main", "--p", "3", "--d", "2", "--n", "2", "--budget", "0"]).status.code(), Some(2));
}

#[test]
fn verify_is_deterministic_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_verify(dir.path(), "a.jsonl", &[]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = small_verify(dir.path(), "b.jsonl", &[]);
    assert_eq!(b.status.code(), Some(0));
    let body = |name: &str| {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        text.lines().skip(1).map(str::to_string).collect::<Vec<_>>()
    };
    assert_eq!(body("a.jsonl"), body("b.jsonl"));
    let doc = ReportDocument::read_jsonl(std::fs::File::open(dir.path().join("a.jsonl")).map(std::io::BufReader::new).unwrap()).unwrap();
    assert_eq!(doc.summary.pass, doc.records.len());
    assert_eq!(doc.config.seed, 11);

    let c = small_verify(dir.path(), "c.csv", &["--format", "csv"]);
    assert_eq!(c.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(csv.lines().count(), doc.records.len() + 1);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, "ids = [\"remark-scaling\"]\np = [4.0]\nd = [2, 8]\nseed = 3\n").unwrap();
    let out = dir.path().join("r.jsonl");
    let status = run(&["verify", "--config", cfg.to_str().unwrap(), "--d", "16", "--out", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).filter(|v: &Value| v["type"] == "record").collect();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["params"]["d"], 16);

    std::fs::write(&cfg, "p = [1.5]\n").unwrap();
    assert_eq!(run(&["verify", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--config", dir.path().join("missing.toml").to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn unwritable_output_exits_four() {
    let out = run(&["verify", "--ids", "remark-scaling", "--p", "3", "--d", "2", "--out", "/nonexistent-dir/r.jsonl"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn tightness_examples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let out = run(&["tightness", "--id", "thm-main", "--p", "3", "--d", "4", "--n", "1", "--budget", "10", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    let c = spherekhin::constants::c_main(3.0, 4).unwrap();
    let want = spherekhin::kernel::special::gaussian_abs_moment_minus_one(3.0, 4).unwrap() / c;
    assert!((v["ratio"].as_f64().unwrap() - want).abs() < 1e-12 * want);
    let persisted: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(persisted, v);

    let v = json(&run(&["tightness", "--id", "thm-diag", "--p", "2", "--d", "3", "--n", "2", "--budget", "50"]));
    assert_eq!(v["degenerate"], true);

    let out = run(&["tightness", "--id", "thm-main", "--p", "3", "--d", "2", "--n", "4", "--budget", "300", "--seed", "1", "--samples", "50000"]);
    assert!(out.status.success());
    let v = json(&out);
    let ratio = v["ratio"].as_f64().unwrap();
    let err = v["ratio_err"].as_f64().unwrap();
    assert!(ratio >= 1.0 - 4.0 * err, "{ratio} ± {err}");
}
