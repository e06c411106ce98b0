use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tablerec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tablerec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn tablerec")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = tablerec(dir, args);
    assert!(
        o.status.success(),
        "tablerec {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

const CFG: &[&str] = &["--config", "demo/experiment.conf", "--set", "trees=30"];

fn with_cfg<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(CFG.iter().copied()).collect()
}

fn demo() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["demo-data", "--out", "demo", "--tables", "120"]);
    ok(dir.path(), &with_cfg(&["ingest"]));
    ok(dir.path(), &with_cfg(&["index"]));
    dir
}

fn work(dir: &Path, rel: &str) -> PathBuf {
    dir.join("demo/work").join(rel)
}

#[test]
fn pipeline_produces_runs_and_evaluates() {
    let dir = demo();
    let d = dir.path();

    let pool = ok(d, &with_cfg(&["pool", "--input", "t000"]));
    let ids: Vec<&str> = pool.lines().collect();
    assert!(!ids.is_empty() && ids.len() <= 450);
    assert!(!ids.contains(&"t000"));

    ok(d, &with_cfg(&["extract-features", "--variant", "CRAB-2"]));
    let csv = std::fs::read_to_string(work(d, "features/crab-2.csv")).unwrap();
    assert!(csv.starts_with("# tablerec extract-features\n"));
    assert!(csv.contains("# trees = 30\n"));
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header.split(',').count(), 3 + 56);

    ok(d, &with_cfg(&["rank", "--variant", "crab-2"]));
    ok(d, &with_cfg(&["rank", "--variant", "kw-caption"]));
    let run = std::fs::read_to_string(work(d, "runs/crab-2.run")).unwrap();
    assert!(run.lines().all(|l| l.split(' ').count() == 6 && l.ends_with(" crab-2")));
    let sidecar = std::fs::read_to_string(work(d, "runs/crab-2.run.config")).unwrap();
    assert!(sidecar.contains("variant = crab-2\n"));

    let table = ok(
        d,
        &with_cfg(&["eval", "--runs", "demo/work/runs/kw-caption.run", "demo/work/runs/crab-2.run", "--deltas", "deltas.csv"]),
    );
    assert!(table.contains("NDCG@5") && table.contains("NDCG@10"));
    assert!(table.lines().any(|l| l.starts_with("crab-2")));
    assert!(d.join("deltas.csv").exists());

    ok(d, &with_cfg(&["train", "--variant", "crab-2"]));
    let model = work(d, "models/crab-2.model");
    let imp = ok(d, &with_cfg(&["importance", "--model", model.to_str().unwrap(), "--top", "5"]));
    assert_eq!(imp.lines().count(), 5);
    ok(d, &with_cfg(&["rank", "--variant", "crab-2", "--model", model.to_str().unwrap(), "--out", "model.run"]));
    assert!(d.join("model.run").exists());

    let curve = ok(
        d,
        &with_cfg(&[
            "importance", "--model", model.to_str().unwrap(), "--incremental", "demo/work/features/crab-2.csv",
            "--batch", "20", "--out", "curve.csv",
        ]),
    );
    assert_eq!(curve.lines().count(), 3, "56 features in batches of 20");

    ok(d, &with_cfg(&["split-eval", "--variant", "crab-2", "--axes", "rows", "--out", "split.csv"]));
    let split = std::fs::read_to_string(d.join("split.csv")).unwrap();
    let rows: Vec<&str> = split.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.starts_with("rows,")));
}

#[test]
fn outputs_are_idempotent() {
    let dir = demo();
    let d = dir.path();
    let mut seen = Vec::new();
    for _ in 0..2 {
        ok(d, &with_cfg(&["extract-features", "--variant", "hcf-2"]));
        ok(d, &with_cfg(&["rank", "--features", "demo/work/features/hcf-2.csv", "--variant", "hcf-2"]));
        seen.push((
            std::fs::read(work(d, "features/hcf-2.csv")).unwrap(),
            std::fs::read(work(d, "runs/hcf-2.run")).unwrap(),
        ));
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn failed_step_leaves_no_output() {
    let dir = demo();
    let d = dir.path();
    ok(d, &with_cfg(&["extract-features", "--variant", "hcf-2"]));
    ok(d, &with_cfg(&["train", "--variant", "hcf-2"]));
    // an HCF-2 model cannot score CRAB-2 vectors
    let o = tablerec(
        d,
        &with_cfg(&["rank", "--variant", "crab-2", "--model", "demo/work/models/hcf-2.model", "--out", "bad.run"]),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.join("bad.run").exists());
    let leftovers: Vec<_> = std::fs::read_dir(d).unwrap().filter_map(|e| e.ok()).map(|e| e.file_name()).collect();
    assert_eq!(leftovers.len(), 1, "{leftovers:?}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(tablerec(d, &["--help"]).status.code(), Some(0));
    assert_eq!(tablerec(d, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(tablerec(d, &["rank", "--variant", "crab-9"]).status.code(), Some(1));
    assert_eq!(tablerec(d, &["ingest", "--set", "bogus=1"]).status.code(), Some(1));
    std::fs::write(d.join("x.conf"), "corpus = missing.jsonl\nkb_catalog = a\nkb_links = b\nkb_redirects = c\n").unwrap();
    let o = tablerec(d, &["ingest", "--config", "x.conf"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
    let o = tablerec(d, &["pool", "--input", "t1", "--config", "x.conf"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn kappa_from_judgments() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // perfect agreement over mixed categories
    let lines: String = (0..6)
        .flat_map(|i| (0..3).map(move |r| format!("item{i} r{r} {}\n", i % 3)))
        .collect();
    std::fs::write(d.join("j.txt"), lines).unwrap();
    let out = ok(d, &["kappa", "--judgments", "j.txt"]);
    assert!(out.contains("kappa 1.0000"), "{out}");
    std::fs::write(d.join("bad.txt"), "item0 r0 7\n").unwrap();
    assert_eq!(tablerec(d, &["kappa", "--judgments", "bad.txt"]).status.code(), Some(2));
}
