use std::fs;
use std::path::{Path, PathBuf};

use veilvote::accounting::{Granularity, VotingScheme};
use veilvote_cli::{cmd_account, cmd_compare, cmd_run, parse_margins, AccountArgs};

const FEDERATION: &str = r#"
[federation]
num_agents = 8
samples_per_agent = 40
public_pool_size = 40
test_size = 200

[federation.partition]
kind = "iid"

[federation.source]
kind = "synthetic_blobs"
num_classes = 3
dim = 3
separation = 6.0
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_config(delta: &str, extra_scheme: &str) -> String {
    format!(
        "seed = 3\nrepeats = 2\ndelta = {delta}\noutput = \"out.jsonl\"\n{FEDERATION}\n[scheme]\nkind = \"ae\"\nsigma = 2.0\nqueries = 30\n{extra_scheme}"
    )
}

fn stderr_of(f: impl FnOnce(&mut Vec<u8>) -> i32) -> (i32, String) {
    let mut err = Vec::new();
    let code = f(&mut err);
    (code, String::from_utf8(err).unwrap())
}

#[test]
fn run_writes_one_line_per_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &run_config("1e-3", ""));
    let (code, err) = stderr_of(|e| cmd_run(&cfg, e));
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(dir.path().join("out.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(first["scheme"], "ae");
    assert_eq!(first["seed"], 3);
    let second: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(second["seed"], 4);
}

#[test]
fn run_rejects_bad_delta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &run_config("1.5", ""));
    let (code, err) = stderr_of(|e| cmd_run(&cfg, e));
    assert_eq!(code, 2);
    assert!(err.contains("delta out of range"), "{err}");
}

#[test]
fn run_names_missing_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let text = "seed = 1\ndelta = 1e-3\noutput = \"o.jsonl\"\n[federation]\nnum_agents = 2\nsamples_per_agent = 1\npublic_pool_size = 1\ntest_size = 1\n[federation.partition]\nkind = \"iid\"\n[federation.source]\nkind = \"file_backed\"\nfeatures = \"nowhere.vvft\"\nlabels = \"nowhere.csv\"\n[scheme]\nkind = \"ae\"\nsigma = 1.0\nqueries = 1\n";
    let cfg = write(dir.path(), "run.toml", text);
    let (code, err) = stderr_of(|e| cmd_run(&cfg, e));
    assert_eq!(code, 2);
    assert!(err.contains("nowhere.vvft"), "{err}");
}

#[test]
fn run_reports_runtime_failures_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // More queries than the pool holds only surfaces once data exists.
    let cfg = write(dir.path(), "run.toml", &run_config("1e-3", "").replace("queries = 30", "queries = 41"));
    let (code, _) = stderr_of(|e| cmd_run(&cfg, e));
    assert_eq!(code, 1);
    let missing = dir.path().join("absent.toml");
    assert_eq!(stderr_of(|e| cmd_run(&missing, e)).0, 2);
    let garbage = write(dir.path(), "bad.toml", "seed = \"x\"");
    assert_eq!(stderr_of(|e| cmd_run(&garbage, e)).0, 2);
}

fn account(sigma: f64, margins: Option<PathBuf>) -> (i32, String, String) {
    let args = AccountArgs {
        scheme: VotingScheme::Ae,
        granularity: Granularity::Agent,
        queries: 500,
        sigma,
        k: None,
        delta: 1e-3,
        agents: margins.as_ref().map(|_| 200),
        classes: margins.as_ref().map(|_| 10),
        margins,
    };
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cmd_account(&args, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn margins_file(dir: &Path, gamma: f64) -> PathBuf {
    let mut text = String::from("query_id,gamma\n");
    for i in 0..500 {
        text.push_str(&format!("{i},{gamma}\n"));
    }
    write(dir, "margins.csv", &text)
}

#[test]
fn account_worst_case() {
    let (code, out, err) = account(25.0, None);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let eps = v["epsilon"].as_f64().unwrap();
    assert!((eps - 3.725).abs() < 0.005, "{eps}");
    assert!(v["epsilon_data_dependent"].is_null());
}

#[test]
fn account_with_margins() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = account(25.0, Some(margins_file(dir.path(), 1.0)));
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["epsilon_data_dependent"].as_f64().unwrap() < v["epsilon"].as_f64().unwrap());

    let (code, out, _) = account(25.0, Some(margins_file(dir.path(), 0.0)));
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["epsilon_data_dependent"], v["epsilon"]);
}

#[test]
fn account_rejects_bad_parameters() {
    assert_eq!(account(0.0, None).0, 2);
    let dir = tempfile::tempdir().unwrap();
    let short = write(dir.path(), "m.csv", "query_id,gamma\n0,1.0\n");
    assert_eq!(account(25.0, Some(short)).0, 2);
    let bad = write(dir.path(), "b.csv", "id,g\n0,1\n");
    assert_eq!(account(25.0, Some(bad)).0, 2);
}

#[test]
fn margins_csv_parsing() {
    let m = parse_margins("query_id,gamma\n3,0.5\n\n4, 1\n").unwrap();
    assert_eq!(m.len(), 2);
    assert_eq!(m[1].query_id, 4);
    assert!(parse_margins("query_id,gamma\n3\n").is_err());
    assert!(parse_margins("").is_err());
}

fn compare_config(blocks: &str) -> String {
    format!("seed = 1\nrepeats = 2\ndelta = 1e-3\noutput = \"cmp.csv\"\n{FEDERATION}\n{blocks}")
}

const AE_BLOCK: &str = "[[scheme]]\nkind = \"ae\"\nsigma = 2.0\nqueries = 30\n";
const DP_BLOCK: &str = "[[scheme]]\nkind = \"dp_fed_avg\"\nq = 1.0\nsigma = 1.0\nclip = 1.0\nlocal_iters = 2\neta = 0.5\nrounds = 3\n";

#[test]
fn compare_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cmp.toml", &compare_config(&format!("{AE_BLOCK}\n{DP_BLOCK}")));
    let (code, err) = stderr_of(|e| cmd_compare(&cfg, e));
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scheme,seed,accuracy,epsilon,epsilon_star,comm_floats");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("ae,1,"));
    assert!(lines[4].starts_with("dp_fed_avg,2,"));
    assert!(lines[4].ends_with(",36"));
}

#[test]
fn compare_validation() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "e.toml", &compare_config(""));
    assert_eq!(stderr_of(|e| cmd_compare(&empty, e)).0, 2);

    let other = format!(
        "{AE_BLOCK}\n{DP_BLOCK}[scheme.federation]\nnum_agents = 9\nsamples_per_agent = 40\npublic_pool_size = 40\ntest_size = 200\n[scheme.federation.partition]\nkind = \"iid\"\n[scheme.federation.source]\nkind = \"synthetic_blobs\"\nnum_classes = 3\ndim = 3\nseparation = 6.0\n"
    );
    let mismatched = write(dir.path(), "m.toml", &compare_config(&other));
    let (code, err) = stderr_of(|e| cmd_compare(&mismatched, e));
    assert_eq!(code, 2);
    assert!(err.contains("federation"), "{err}");
}
