mod common;

use std::collections::HashMap;
use std::fs;

use proptest::prelude::*;
use sketchcode_core::corpus::{
    build_epoch_plan, build_epoch_plan_weighted, clean_and_filter, clean_file, dedup, extract_library_subcorpus,
    load_records, quality_filter, read_manifest, FileRecord, FilterConfig, FilterStats, LexicalChecker, ManifestEntry,
    RepoMeta,
};

fn record(path: &str, content: &str) -> FileRecord {
    FileRecord::new(path, content, RepoMeta::default())
}

#[test]
fn golden_filter_labels() {
    let cases = common::golden_cases();
    assert_eq!(cases.len(), 30);
    for (case, (path, kept, reasons, duplicate)) in cases.iter().zip(common::run_golden()) {
        assert_eq!(case.path, path);
        assert_eq!(reasons, case.reasons, "{path}");
        assert_eq!(kept, case.kept, "{path}");
        assert_eq!(duplicate, case.duplicate, "{path}");
    }
}

#[test]
fn golden_verdicts_do_not_depend_on_order() {
    let config = FilterConfig::default();
    let cases = common::golden_cases();
    let forward: HashMap<String, _> = cases
        .iter()
        .map(|c| {
            let r = record(&c.path, &clean_file(&c.content));
            (c.path.clone(), quality_filter(&r, &config, &LexicalChecker))
        })
        .collect();
    for c in cases.iter().rev() {
        let r = record(&c.path, &clean_file(&c.content));
        assert_eq!(quality_filter(&r, &config, &LexicalChecker), forward[&c.path]);
    }
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("src/a")).unwrap();
    fs::write(dir.path().join("src/a/x.py"), "import pandas as pd\n").unwrap();
    fs::write(dir.path().join("src/y.py"), b"x = '\xff'\n").unwrap();
    let entries = [
        ManifestEntry {
            path: "src/a/x.py".into(),
            repo_name: "a/x".into(),
            stars: 10,
            url: "https://example.org/a".into(),
        },
        ManifestEntry { path: "src/y.py".into(), repo_name: "b/y".into(), stars: 0, url: String::new() },
    ];
    let manifest = dir.path().join("manifest.jsonl");
    let body: String = entries.iter().map(|e| serde_json::to_string(e).unwrap() + "\n").collect();
    fs::write(&manifest, body).unwrap();

    let read = read_manifest(&manifest).unwrap();
    assert_eq!(read, entries);
    let records = load_records(&read, dir.path()).unwrap();
    assert_eq!(records[0].repo.stars, 10);
    assert_eq!(records[0].size_bytes, 20);
    assert!(records[1].content.contains('\u{fffd}'));

    fs::write(&manifest, "{\"path\": 3}\n").unwrap();
    let err = read_manifest(&manifest).unwrap_err().to_string();
    assert!(err.contains(":1:"), "{err}");
}

#[test]
fn library_subcorpus_from_generated_files() {
    let files = common::synthetic_corpus(3, 200, 800);
    let records: Vec<FileRecord> = files.iter().map(|(p, c)| record(p, c)).collect();
    let pandas = extract_library_subcorpus(records.clone(), "pandas");
    assert!(!pandas.is_empty() && pandas.len() < records.len());
    for r in &pandas {
        assert!(r.content.contains("import pandas"), "{}", r.path);
    }
    let expected = records.iter().filter(|r| r.content.contains("import pandas")).count();
    assert_eq!(pandas.len(), expected);
}

#[test]
fn stats_histogram() {
    let results = clean_and_filter(
        common::golden_cases().iter().map(|c| record(&c.path, &c.content)).collect(),
        &FilterConfig::default(),
        &LexicalChecker,
    );
    let stats = FilterStats::from_verdicts(results.iter().map(|(_, v)| v));
    assert_eq!(stats.total, 30);
    assert_eq!(stats.kept, 16);
    let json = serde_json::to_value(&stats).unwrap();
    assert_eq!(json["reason_histogram"]["Blacklist"], 3);
    assert_eq!(json["reason_histogram"]["Syntax"], 3);
}

#[test]
fn weighted_plan_ratio() {
    let records = vec![record("a.py", ""), record("b.py", "")];
    let plan = build_epoch_plan_weighted(&records, &[1.0, 3.0], 10_000, 42).unwrap();
    assert_eq!(plan.ids.len(), 10_002);
    let b = plan.ids.iter().filter(|&&i| i == 1).count() - 1;
    let a = plan.ids.iter().filter(|&&i| i == 0).count() - 1;
    let ratio = b as f64 / a as f64;
    assert!((ratio - 3.0).abs() / 3.0 < 0.05, "{ratio}");
    assert_eq!(plan, build_epoch_plan_weighted(&records, &[1.0, 3.0], 10_000, 42).unwrap());
    assert!(build_epoch_plan_weighted(&records, &[0.0, 0.0], 5, 1).is_err());
}

fn paths() -> impl Strategy<Value = Vec<(String, String)>> {
    prop::collection::vec(("[a-c]{1,2}", "(x = [0-9]\n){1,3}[ \t]{0,2}(\r\n)?"), 0..20)
}

proptest! {
    #[test]
    fn dedup_is_idempotent_and_keeps_first(files in paths()) {
        let records: Vec<FileRecord> = files.iter().enumerate().map(|(i, (_, c))| record(&format!("f{i}.py"), c)).collect();
        let once = dedup(records.clone());
        prop_assert_eq!(dedup(once.clone()), once.clone());
        let mut last_index = None;
        for r in &once {
            let index = records.iter().position(|x| x.path == r.path).unwrap();
            prop_assert!(last_index.is_none_or(|l| index > l));
            last_index = Some(index);
            let normalized = sketchcode_core::corpus::normalize_for_dedup(&r.content);
            let first = records.iter().position(|x| sketchcode_core::corpus::normalize_for_dedup(&x.content) == normalized).unwrap();
            prop_assert_eq!(first, index);
        }
    }

    #[test]
    fn plan_covers_every_file(n in 1usize..30, extra in 0usize..200, seed in any::<u64>()) {
        let records: Vec<FileRecord> = (0..n).map(|i| record(&format!("f{i}.py"), "def test_a():\n    pass\n")).collect();
        let plan = build_epoch_plan(&records, extra, seed).unwrap();
        prop_assert_eq!(plan.ids.len(), n + extra);
        for i in 0..n {
            prop_assert!(plan.ids.contains(&i));
        }
        prop_assert_eq!(plan, build_epoch_plan(&records, extra, seed).unwrap());
    }

    #[test]
    fn clean_never_adds_text(src in "[a-z#= \n'-]{0,60}") {
        let cleaned = clean_file(&src);
        prop_assert!(cleaned.len() <= src.len());
    }
}

#[test]
fn records_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/records.jsonl");
    let records = vec![
        FileRecord::new("a.py", "x = 1\n", RepoMeta { name: "o/r".into(), stars: 4, url: "u".into() }),
        record("b.py", "y = '\u{e9}'\n"),
    ];
    sketchcode_core::corpus::write_records(&path, &records).unwrap();
    assert_eq!(sketchcode_core::corpus::read_records(&path).unwrap(), records);
}
