use std::path::Path;
use std::process::{Command, Output};

fn kindred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kindred"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_posts(dir: &Path) -> std::path::PathBuf {
    let posts: String = (0..20)
        .map(|i| format!("p{i}\tMy job has been really overwhelming lately, week {i}.\n"))
        .collect();
    let path = dir.join("posts.tsv");
    std::fs::write(&path, posts).unwrap();
    path
}

#[test]
fn serve_refuses_to_start_without_rules() {
    let dir = tempfile::tempdir().unwrap();
    let posts = write_posts(dir.path());
    let out = kindred(&["serve", "--posts", p(&posts), "--listen-address", "127.0.0.1:0"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("refusing to start"), "{err}");

    let missing = dir.path().join("no_rules.tsv");
    let out = kindred(&["serve", "--rules", p(&missing), "--posts", p(&posts)]);
    assert!(!out.status.success());

    let broken = dir.path().join("broken.tsv");
    std::fs::write(&broken, "bad\t.*(unclosed.*\n").unwrap();
    let out = kindred(&["serve", "--rules", p(&broken), "--posts", p(&posts)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("refusing to start"));
}

#[test]
fn invalid_config_exits_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k.toml");
    std::fs::write(&cfg, "[study]\narm_weights = [-1.0, 1.0, 1.0]\n").unwrap();
    let out = kindred(&["serve", "--config", p(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("arm_weights"));
}

#[test]
fn ingest_escalates_unsafe_posts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.txt");
    std::fs::write(
        &input,
        "a\tMy exams are stressing me out.\nb\tI just want to commit suicide.\nc\tI cut myself last night.\nNo id on this one.\n",
    )
    .unwrap();
    let pool = dir.path().join("pool.tsv");
    let report = dir.path().join("report.json");
    let out = kindred(&["ingest-posts", "--input", p(&input), "--out", p(&pool), "--report", p(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pool = std::fs::read_to_string(pool).unwrap();
    assert!(pool.contains("My exams") && pool.contains("line-4\tNo id"));
    assert!(!pool.contains("suicide") && !pool.contains("cut myself"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    let ids: Vec<&str> = report["escalated"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["post_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["b", "c"]);
}

#[test]
fn score_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.tsv");
    std::fs::write(
        &corpus,
        "My job is stressful.\tI'm so sorry. What happened at your job?\nMy job is stressful.\tOk.\n",
    )
    .unwrap();
    let out_path = dir.path().join("scores.tsv");
    let out = kindred(&["score", "--corpus", p(&corpus), "--out", p(&out_path)]);
    assert!(out.status.success());
    let table = std::fs::read_to_string(out_path).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert!(rows[0].starts_with("row\temotional_reactions"));
    assert!(rows[2].ends_with("\t0"));
}

#[test]
fn simulate_then_analyze_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "participants = 30\n[evaluators]\nraters = 2\ntasks_per_rater = 20\n").unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let log = dir.path().join(format!("log{run}.jsonl"));
        let out = kindred(&["simulate", "--spec", p(&spec), "--seed", "21", "--out", p(&log)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let res = dir.path().join(format!("out{run}"));
        let out = kindred(&["analyze", "--log", p(&log), "--out", p(&res), "--n-boot", "2000"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&res)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"taxonomy_consult.tsv") && names.contains(&"manifest.json"));
}
