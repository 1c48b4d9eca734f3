use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/e2e")
}

fn kbqe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbqe")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn build_index(dir: &TempDir) -> PathBuf {
    let out = dir.path().join("index.json");
    let o = kbqe(&["index", "--corpus", p(&fixtures().join("corpus.jsonl")), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn run_variant(dir: &TempDir, index: &Path, variant: &str, extra: &[&str]) -> Output {
    let f = fixtures();
    let store = f.join("concepts.jsonl");
    let topics = f.join("topics.jsonl");
    let mut args = vec!["run", "--index", p(index), "--store", p(&store), "--topics", p(&topics), "--variant", variant];
    args.extend_from_slice(extra);
    let _ = dir;
    kbqe(&args)
}

#[test]
fn index_reports_statistics() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("c.jsonl");
    fs::write(
        &corpus,
        concat!(
            "{\"id\": \"1\", \"text\": \"storm hits the coast\", \"post_time\": 1.0}\n",
            "{\"id\": \"2\", \"text\": \"RT @news storm hits the coast\", \"post_time\": 2.0}\n",
            "{\"id\": \"3\", \"text\": \"coastal flooding warnings\", \"post_time\": 3.0}\n",
            "{\"id\": \"4\", \"text\": \"the and of\", \"post_time\": 4.0}\n",
            "not json\n",
            "{\"id\": \"5\", \"text\": \"storm over\", \"post_time\": 5.0}\n",
        ),
    )
    .unwrap();
    let out = dir.path().join("i.json");
    let o = kbqe(&["index", "--corpus", p(&corpus), "--out", p(&out)]);
    assert!(o.status.success());
    let line = stdout(&o);
    assert!(line.starts_with("documents 3 rejected_retweet 1 "), "{line}");
    assert!(line.contains("rejected_empty_after_preprocess 1"), "{line}");
    assert!(line.contains("malformed 1"), "{line}");
    assert!(out.exists());
}

#[test]
fn empty_corpus_indexes_nothing() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("empty.jsonl");
    fs::write(&corpus, "").unwrap();
    let out = dir.path().join("i.json");
    let o = kbqe(&["index", "--corpus", p(&corpus), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("documents 0 "));
}

#[test]
fn run_eval_round_trip_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let index = build_index(&dir);
    let a = run_variant(&dir, &index, "qefb_smm", &[]);
    let b = run_variant(&dir, &index, "qefb_smm", &[]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.lines().all(|l| l.split_whitespace().count() == 6 && l.ends_with(" qefb_smm")));

    let run = dir.path().join("smm.run");
    fs::write(&run, &text).unwrap();
    let qrels = fixtures().join("qrels.txt");
    let o = kbqe(&["eval", "--run", p(&run), "--qrels", p(&qrels), "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let golden: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixtures().join("golden/qefb_smm.eval.json")).unwrap()).unwrap();
    assert_eq!(v, golden);

    let base = dir.path().join("simple.run");
    fs::write(&base, stdout(&run_variant(&dir, &index, "simplekl", &[]))).unwrap();
    let o = kbqe(&["eval", "--run", p(&run), "--qrels", p(&qrels), "--baseline", p(&base)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("t-test"), "{}", stdout(&o));
}

#[test]
fn tag_and_debug_dump() {
    let dir = TempDir::new().unwrap();
    let index = build_index(&dir);
    let dump = dir.path().join("dump.txt");
    let o = run_variant(&dir, &index, "qefb", &["--tag", "mine", "--debug-dump", p(&dump)]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().all(|l| l.ends_with(" mine")));
    let dump = fs::read_to_string(dump).unwrap();
    assert!(dump.lines().any(|l| l.starts_with("MB141 ")));
}

#[test]
fn sweep_emits_one_row_per_value() {
    let dir = TempDir::new().unwrap();
    let index = build_index(&dir);
    let f = fixtures();
    let o = kbqe(&[
        "sweep",
        "--index",
        p(&index),
        "--store",
        p(&f.join("concepts.jsonl")),
        "--topics",
        p(&f.join("topics.jsonl")),
        "--qrels",
        p(&f.join("qrels.txt")),
        "--variant",
        "qefb",
        "--param",
        "r",
        "--values",
        "0.01,0.1,0.5",
        "--json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        for key in ["value", "map", "p@1", "p@5", "p@10", "p@30"] {
            assert!(row.get(key).is_some(), "{row}");
        }
    }
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let index = build_index(&dir);
    // bad flag value
    assert_eq!(run_variant(&dir, &index, "qefb", &["--alpha", "1.5"]).status.code(), Some(1));
    assert_eq!(run_variant(&dir, &index, "nonsense", &[]).status.code(), Some(1));
    assert_eq!(kbqe(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(kbqe(&["--help"]).status.code(), Some(0));

    // missing input file
    let missing = dir.path().join("missing.jsonl");
    assert_eq!(kbqe(&["index", "--corpus", p(&missing), "--out", p(&dir.path().join("x"))]).status.code(), Some(2));

    // knowledge variant without a store
    let f = fixtures();
    let o = kbqe(&["run", "--index", p(&index), "--topics", p(&f.join("topics.jsonl")), "--variant", "qefb"]);
    assert_eq!(o.status.code(), Some(2));
    let o = kbqe(&["run", "--index", p(&index), "--topics", p(&f.join("topics.jsonl")), "--variant", "simplekl"]);
    assert_eq!(o.status.code(), Some(0));

    // malformed config file
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(run_variant(&dir, &index, "qefb", &["--config", p(&cfg)]).status.code(), Some(1));
}
