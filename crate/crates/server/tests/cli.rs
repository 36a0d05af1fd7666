use std::path::Path;
use std::process::{Command, Output};

use kidsask_core::store::ContentDatabase;

fn kidsask(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kidsask"))
        .arg("--config")
        .arg(dir.join("missing.toml"))
        .arg("--data-dir")
        .arg(dir.join("data"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn kidsask")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = kidsask(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn listed_ids(dir: &Path, status: &str) -> Vec<String> {
    ok(dir, &["review", "list", "--status", status]).lines().map(|l| l.split('\t').next().unwrap().to_string()).collect()
}

fn content(dir: &Path) -> ContentDatabase {
    ContentDatabase::load(&dir.join("data/content.json")).unwrap()
}

#[test]
fn ingest_then_generate_then_review() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = ok(dir, &["ingest", "--sample"]);
    assert!(out.contains("0 cue sets"), "{out}");
    // refuses to clobber
    assert!(!kidsask(dir, &["ingest", "--sample"]).status.success());
    ok(dir, &["ingest", "--sample", "--demo-cues", "--force"]);
    let approved = content(dir).approved_count();
    assert!(approved > 0);

    let out = ok(dir, &["gen-cues", "--text-id", "big-bang", "--mode", "incentive", "--n", "4"]);
    assert!(out.contains("4 calls (0 failed)"), "{out}");
    let listed = ok(dir, &["review", "list"]);
    let ids: Vec<&str> = listed.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert!(!ids.is_empty(), "{listed}");
    // a second unseeded run must not collide with the first
    ok(dir, &["gen-cues", "--text-id", "big-bang", "--mode", "incentive", "--n", "2"]);
    assert!(ok(dir, &["review", "list"]).lines().count() > ids.len());

    let target = ids[0];
    let bad = kidsask(dir, &["review", "approve", target, "--annotator", "a1", "--relatedness", "9", "--divergence-level", "3", "--offensiveness", "5"]);
    assert!(!bad.status.success());
    let out = ok(dir, &["review", "approve", target, "--annotator", "a1", "--relatedness", "4", "--divergence-level", "3", "--offensiveness", "5"]);
    assert!(out.contains("approved"), "{out}");
    assert!(!listed_ids(dir, "pending").iter().any(|i| i == target));
    assert!(listed_ids(dir, "approved").iter().any(|i| i == target));
    let out = ok(dir, &["review", "reject", ids[1], "--annotator", "a1", "--reason", "off topic"]);
    assert!(out.contains("rejected"), "{out}");
    assert!(!kidsask(dir, &["review", "reject", target, "--annotator", "a1", "--reason", "x"]).status.success());
    assert_eq!(content(dir).approved_count(), approved + 1);
}

#[test]
fn score_prints_one_csv_row_per_question() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["ingest", "--sample", "--demo-cues"]);
    let q = dir.join("q.txt");
    std::fs::write(&q, "Why did the universe start expanding?\n\nWhat is the big bang?\nWhy did the universe start expanding?\nbanana\n").unwrap();
    let out = ok(dir, &["score", "--questions", q.to_str().unwrap(), "--text-id", "big-bang"]);
    let mut r = csv::Reader::from_reader(out.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, kidsask_server::cli::SCORE_COLUMNS);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][1], "true");
    assert_eq!(&rows[2][2], "duplicate");
    assert_eq!(&rows[3][2], "not_a_question");
    assert!(!kidsask(dir, &["score", "--questions", q.to_str().unwrap(), "--text-id", "nope"]).status.success());
}

#[test]
fn assign_balances_profiles_and_report_is_watermarked() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["ingest", "--sample", "--demo-cues"]);
    let mut csv = String::from("participant_id,age,gender,device_use,curiosity_trait,perception_of_curiosity,reading_ability,qa_fluency_pre,domain_quiz_score\n");
    for i in 0..12 {
        csv.push_str(&format!("p{i},{},{},{},{},3,{},{},{}\n", 9 + i % 3, if i % 2 == 0 { "f" } else { "m" }, i % 4, 2 + i % 3, 4 + i % 5, i % 6, i % 7));
    }
    let profiles = dir.join("profiles.csv");
    std::fs::write(&profiles, csv).unwrap();
    let out = ok(dir, &["assign", "--profiles", profiles.to_str().unwrap(), "--trials", "200"]);
    assert!(out.contains("assigned 12 participants"), "{out}");
    let table: serde_json::Map<String, serde_json::Value> =
        serde_json::from_slice(&std::fs::read(dir.join("data/assignments.json")).unwrap()).unwrap();
    assert_eq!(table.len(), 12);
    for cond in ["hand_incentive", "auto_incentive", "auto_open"] {
        assert_eq!(table.values().filter(|v| *v == cond).count(), 4, "{cond}");
    }
    // same seed, same answer
    let again = dir.join("again.json");
    ok(dir, &["assign", "--profiles", profiles.to_str().unwrap(), "--trials", "200", "--out", again.to_str().unwrap()]);
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(dir.join("data/assignments.json")).unwrap());

    // no sessions yet: study-grade has nothing to block on, machine-only is marked
    let out = ok(dir, &["report", "--machine-only"]);
    assert!(out.starts_with("# MACHINE-ONLY"), "{out}");
    let out = ok(dir, &["report"]);
    assert!(!out.starts_with('#'), "{out}");
}

#[test]
fn serve_refuses_an_empty_cue_database() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["ingest", "--sample"]);
    let out = kidsask(dir, &["serve", "--bind", "127.0.0.1:0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no approved cue sets"));
}

#[test]
fn example_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../kidsask.example.toml");
    let cfg = kidsask_server::config::AppConfig::load(&path).unwrap();
    assert_eq!(cfg.auth.reviewers.get("change-me").map(String::as_str), Some("annotator-1"));
    assert_eq!(cfg.pipeline.sample_size, 6);
}
