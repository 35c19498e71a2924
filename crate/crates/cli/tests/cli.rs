use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hyperank");
const TAXONOMY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/finsim3/hierarchy.json");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const TERMS: &str = "term,label\ncallable bond,Bonds\nequity swap,Swap\ncall option,Option\n\
                     mutual fund,Funds\ncommon stock,Stocks\nindex futures,Future\ntreasury bills,MMIs\n";

#[test]
fn negsample_emits_eleven_rows_per_term() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("terms.csv"), TERMS).unwrap();
    let out = run(
        dir.path(),
        &[
            "negsample",
            "--records",
            "terms.csv",
            "--taxonomy",
            TAXONOMY,
            "--k",
            "0.4",
            "--neg-per-term",
            "10",
            "--out",
            "pairs.tsv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let tsv = std::fs::read_to_string(dir.path().join("pairs.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 7 * 11);
    let scores: Vec<&str> = tsv.lines().map(|l| l.split('\t').nth(2).unwrap()).collect();
    assert_eq!(scores.iter().filter(|s| **s == "1.000000").count(), 7);
    assert!(scores
        .iter()
        .all(|s| ["0.000000", "0.400000", "0.800000", "1.000000"].contains(s)));
}

#[test]
fn zero_keep_subsamples() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("terms.csv"), TERMS).unwrap();
    let base = [
        "negsample",
        "--records",
        "terms.csv",
        "--taxonomy",
        TAXONOMY,
        "--out",
        "pairs.tsv",
        "--zero-keep",
    ];
    let out = run(dir.path(), &[&base[..], &["5"]].concat());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let tsv = std::fs::read_to_string(dir.path().join("pairs.tsv")).unwrap();
    assert_eq!(
        tsv.lines().filter(|l| l.split('\t').nth(2) == Some("0.000000")).count(),
        5
    );
    let out = run(dir.path(), &[&base[..], &["1.5"]].concat());
    assert_eq!(code(&out), 2);
}

#[test]
fn evaluate_hand_fixture() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("ranked.csv"),
        "origin_id,term,rank1,rank2,rank3,rank4,rank5\n\
         t1,alpha,A,B,C,D,E\nt2,beta,A,B,C,D,E\nt3,gamma,A,B,D,E,C\n",
    )
    .unwrap();
    let gold: String = [("t1", "alpha", "A"), ("t2", "beta", "B"), ("t3", "gamma", "C")]
        .iter()
        .map(|(id, t, l)| {
            format!("{{\"origin_id\":\"{id}\",\"term\":\"{t}\",\"text\":\"{t}\",\"label\":\"{l}\",\"source\":\"original\"}}\n")
        })
        .collect();
    std::fs::write(dir.path().join("gold.jsonl"), gold).unwrap();
    let out = run(
        dir.path(),
        &[
            "evaluate",
            "--ranked",
            "ranked.csv",
            "--gold",
            "gold.jsonl",
            "--cutoff",
            "3",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["accuracy"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
    assert!((report["mean_rank"].as_f64().unwrap() - 2.3333).abs() < 1e-4);
}

#[test]
fn rerunning_a_stage_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("terms.csv"), TERMS).unwrap();
    let args = [
        "embed",
        "--records",
        "terms.csv",
        "--taxonomy",
        TAXONOMY,
        "--hash-dim",
        "32",
        "--out",
        "e.txt",
    ];
    assert_eq!(code(&run(dir.path(), &args)), 0);
    let first = std::fs::read(dir.path().join("e.txt")).unwrap();
    assert_eq!(code(&run(dir.path(), &args)), 0);
    assert_eq!(std::fs::read(dir.path().join("e.txt")).unwrap(), first);
    assert!(String::from_utf8(first).unwrap().starts_with("24 32\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["--help"])), 0);
    assert_eq!(code(&run(d, &["--version"])), 0);
    assert_eq!(code(&run(d, &["train", "--help"])), 0);
    assert_eq!(code(&run(d, &[])), 1);
    assert_eq!(code(&run(d, &["frobnicate"])), 1);
    assert_eq!(
        code(&run(
            d,
            &["split", "--records", "x", "--dev-out", "a", "--val-out", "b", "--bogus"]
        )),
        1
    );
    assert_eq!(
        code(&run(d, &["rank", "--records", "r", "--taxonomy", "t", "--out", "o"])),
        1
    );

    let missing = run(
        d,
        &["split", "--records", "nope.jsonl", "--dev-out", "a", "--val-out", "b"],
    );
    assert_eq!(code(&missing), 2);
    assert!(stderr(&missing).contains("nope.jsonl"));

    std::fs::write(d.join("bad.jsonl"), "{\"origin_id\":\"t1\"}\n").unwrap();
    std::fs::write(d.join("ok.csv"), TERMS).unwrap();
    let bad = run(
        d,
        &["split", "--records", "bad.jsonl", "--dev-out", "a", "--val-out", "b"],
    );
    assert_eq!(code(&bad), 2);
    assert!(stderr(&bad).contains("line 1"), "{}", stderr(&bad));

    std::fs::write(d.join("tax.json"), "{\"labels\": {\"A\": {\"path\": [\"R\", \"B\"]}}}").unwrap();
    let tax = run(
        d,
        &[
            "negsample",
            "--records",
            "ok.csv",
            "--taxonomy",
            "tax.json",
            "--out",
            "p.tsv",
        ],
    );
    assert_eq!(code(&tax), 2);

    let frac = run(
        d,
        &[
            "split",
            "--records",
            "ok.csv",
            "--dev-fraction",
            "1.5",
            "--dev-out",
            "a",
            "--val-out",
            "b",
        ],
    );
    assert_eq!(code(&frac), 2);
}
