//! Seeded generator of Python-like source files for corpus-scale tests.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketchcode_core::corpus::{clean_and_filter, dedup, FileRecord, FilterConfig, LexicalChecker, RepoMeta};
use sketchcode_core::lexer::{tokenize, TokenKind};
use sketchcode_core::sketch::{SketchMode, SymbolTable};
use sketchcode_core::traindata::make_generator_doc;

const WORDS: &[&str] = &[
    "data", "frame", "value", "index", "count", "total", "item", "result", "path", "name", "size", "row", "column",
    "buffer", "config", "model", "score", "label", "weight", "batch", "cache", "node", "key",
];
const LIBS: &[(&str, &str)] = &[("pandas", "pd"), ("numpy", "np"), ("os", "os"), ("re", "re"), ("json", "json")];
const METHODS: &[&str] = &["read_csv", "groupby", "sum", "mean", "join", "split", "load", "get", "append", "zeros"];

pub struct PyGen {
    rng: ChaCha8Rng,
}

impl PyGen {
    pub fn new(seed: u64) -> Self {
        PyGen { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn word(&mut self) -> &'static str {
        WORDS.choose(&mut self.rng).expect("non-empty")
    }

    fn ident(&mut self) -> String {
        match self.rng.random_range(0..4) {
            0 => self.word().to_string(),
            1 => format!("{}_{}", self.word(), self.word()),
            2 => format!("{}{}", self.word(), self.rng.random_range(0..10)),
            _ => format!("_{}", self.word()),
        }
    }

    fn literal(&mut self) -> String {
        match self.rng.random_range(0..12) {
            0 => self.rng.random_range(0..4).to_string(),
            1 => self.rng.random_range(4..10_000).to_string(),
            2 => format!("{:.3}", self.rng.random_range(0.0..100.0)),
            3 => format!("0x{:X}", self.rng.random_range(0..4096)),
            4 => "1e-5".to_string(),
            5 => format!("'{}'", self.word()),
            6 => format!("\"{} {}\"", self.word(), self.word()),
            7 => format!("f\"{{{}}}-{}\"", self.word(), self.word()),
            8 => format!("r'\\d+{}'", self.word()),
            9 => format!("b'{}'", self.word()),
            10 => "None".to_string(),
            _ => "'it\\'s'".to_string(),
        }
    }

    fn expr(&mut self, depth: usize) -> String {
        let choice = if depth > 2 { self.rng.random_range(0..2) } else { self.rng.random_range(0..9) };
        match choice {
            0 => self.literal(),
            1 => self.ident(),
            2 => format!("{} + {}", self.expr(depth + 1), self.expr(depth + 1)),
            3 => {
                let (_, alias) = *LIBS.choose(&mut self.rng).expect("non-empty");
                let method = METHODS.choose(&mut self.rng).expect("non-empty");
                format!("{alias}.{method}({})", self.expr(depth + 1))
            }
            4 => format!("[{}, {}]", self.expr(depth + 1), self.expr(depth + 1)),
            5 => format!("{{{}: {}}}", self.literal(), self.expr(depth + 1)),
            6 => format!("{}({}, key={})", self.ident(), self.expr(depth + 1), self.literal()),
            7 => format!("{} if {} else {}", self.expr(depth + 1), self.ident(), self.literal()),
            _ => format!("lambda {}: {} * {}", self.word(), self.word(), self.literal()),
        }
    }

    fn simple_stmt(&mut self) -> String {
        match self.rng.random_range(0..8) {
            0..=2 => format!("{} = {}", self.ident(), self.expr(0)),
            3 => format!("{}.{}({})", self.ident(), METHODS.choose(&mut self.rng).expect("non-empty"), self.expr(1)),
            4 => format!("{} += {}", self.ident(), self.literal()),
            5 => format!("print({}, {})", self.expr(1), self.literal()),
            6 => format!("{}, {} = {}, {}", self.word(), self.ident(), self.literal(), self.literal()),
            _ => format!("assert {} == {}", self.ident(), self.literal()),
        }
    }

    fn comment(&mut self) -> String {
        match self.rng.random_range(0..3) {
            0 => format!("# {} the {}", self.word(), self.word()),
            1 => "# ----------".to_string(),
            _ => format!("# TODO: {} {}", self.word(), self.literal()),
        }
    }

    fn body(&mut self, indent: usize, depth: usize, out: &mut String) {
        let pad = "    ".repeat(indent);
        let count = self.rng.random_range(1..5);
        for i in 0..count {
            let roll = self.rng.random_range(0..12);
            if roll == 0 {
                out.push_str(&format!("{pad}{}\n", self.comment()));
            }
            if depth < 3 && roll < 3 {
                let kind = self.rng.random_range(0..4);
                let header = match kind {
                    0 => format!("if {} > {}:", self.ident(), self.literal()),
                    1 => format!("for {} in {}:", self.word(), self.expr(1)),
                    2 => format!("while {}:", self.ident()),
                    _ => format!("with open({}) as {}:", self.literal(), self.word()),
                };
                out.push_str(&format!("{pad}{header}\n"));
                self.body(indent + 1, depth + 1, out);
                if kind == 0 && roll == 1 {
                    out.push_str(&format!("{pad}else:\n"));
                    self.body(indent + 1, depth + 1, out);
                }
            } else if i + 1 == count && depth > 0 && roll % 3 == 0 {
                out.push_str(&format!("{pad}return {}\n", self.expr(0)));
            } else {
                let trailing = if roll == 11 { format!("  {}", self.comment()) } else { String::new() };
                out.push_str(&format!("{pad}{}{trailing}\n", self.simple_stmt()));
            }
        }
    }

    fn function(&mut self, indent: usize, out: &mut String) {
        let pad = "    ".repeat(indent);
        if self.rng.random_bool(0.2) {
            out.push_str(&format!("{pad}@{}\n", self.word()));
        }
        let name = if self.rng.random_bool(0.15) { format!("test_{}", self.word()) } else { self.ident() };
        let params = if indent > 0 {
            format!("self, {}", self.word())
        } else {
            format!("{}, {}={}", self.word(), self.ident(), self.literal())
        };
        let prefix = if self.rng.random_bool(0.1) { "async " } else { "" };
        out.push_str(&format!("{pad}{prefix}def {name}({params}):\n"));
        if self.rng.random_bool(0.4) {
            out.push_str(&format!("{pad}    \"\"\"{} the {}.\"\"\"\n", self.word(), self.word()));
        }
        self.body(indent + 1, 1, out);
        out.push_str(&format!("{pad}    return {}\n", self.expr(0)));
    }

    /// One file of roughly `target_bytes` bytes.
    pub fn file(&mut self, target_bytes: usize) -> String {
        let mut out = String::new();
        if self.rng.random_bool(0.2) {
            out.push_str("# Copyright 2021 Example Authors\n# Licensed under the Apache License, Version 2.0\n\n");
        }
        if self.rng.random_bool(0.3) {
            out.push_str(&format!("\"\"\"{} {} module.\"\"\"\n\n", self.word(), self.word()));
        }
        for _ in 0..self.rng.random_range(1..4) {
            let (lib, alias) = *LIBS.choose(&mut self.rng).expect("non-empty");
            if lib == alias {
                out.push_str(&format!("import {lib}\n"));
            } else {
                out.push_str(&format!("import {lib} as {alias}\n"));
            }
        }
        out.push('\n');
        while out.len() < target_bytes {
            match self.rng.random_range(0..6) {
                0 => {
                    out.push_str(&format!("\n\nclass {}(object):\n", self.ident()));
                    out.push_str(&format!("    {} = {}\n\n", self.word(), self.literal()));
                    self.function(1, &mut out);
                }
                1 | 2 => {
                    out.push_str("\n\n");
                    self.function(0, &mut out);
                }
                3 => {
                    out.push_str(&format!("{}\n", self.comment()));
                    self.body(0, 0, &mut out);
                }
                _ => self.body(0, 0, &mut out),
            }
        }
        out
    }
}

/// `count` files named `pkg{i}/mod{i}.py`, each near `bytes` bytes, with
/// every 25th file a copy of an earlier one.
pub fn synthetic_corpus(seed: u64, count: usize, bytes: usize) -> Vec<(String, String)> {
    let mut gen = PyGen::new(seed);
    let mut files: Vec<(String, String)> = Vec::with_capacity(count);
    for i in 0..count {
        let content = if i > 0 && i % 25 == 0 { files[i / 2].1.clone() } else { gen.file(bytes) };
        files.push((format!("pkg{}/mod{i}.py", i % 37), content));
    }
    files
}

pub struct GoldenCase {
    pub path: String,
    pub content: String,
    pub kept: bool,
    pub reasons: Vec<String>,
    pub duplicate: bool,
}

/// A file of exactly `bytes` bytes that passes every other rule.
pub fn sized_file(bytes: usize) -> String {
    let mut out = String::from(
        "import alphabetagammadeltaepsilonzetaetathetaiotakappalambda\ndef computeeverything():\n    if alphabetagammadeltaepsilonzetaetathetaiotakappalambda:\n        return alphabetagammadeltaepsilonzetaetathetaiotakappalambda\n    for element in alphabetagammadeltaepsilonzetaetathetaiotakappalambda:\n        yield element\n",
    );
    let line = format!("        yield {}\n", "q".repeat(60));
    while bytes - out.len() >= line.len() + 20 {
        out.push_str(&line);
    }
    let rest = bytes - out.len();
    out.push_str(&format!("        yield {}\n", "z".repeat(rest - 15)));
    assert_eq!(out.len(), bytes);
    out
}

pub fn golden_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/filter_golden")
}

/// The labelled filter fixtures, sorted by path.
pub fn golden_cases() -> Vec<GoldenCase> {
    let dir = golden_dir();
    let labels: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("labels.json")).unwrap()).unwrap();
    let mut cases: Vec<GoldenCase> = labels
        .into_iter()
        .map(|(path, label)| {
            let content = match label.get("generate_bytes").and_then(|v| v.as_u64()) {
                Some(bytes) => sized_file(bytes as usize),
                None => String::from_utf8(std::fs::read(dir.join(&path)).unwrap()).unwrap(),
            };
            GoldenCase {
                content,
                kept: label["kept"].as_bool().unwrap(),
                reasons: label["reasons"].as_array().unwrap().iter().map(|r| r.as_str().unwrap().to_string()).collect(),
                duplicate: label["duplicate"].as_bool().unwrap(),
                path,
            }
        })
        .collect();
    cases.sort_by(|a, b| a.path.cmp(&b.path));
    cases
}

/// (kept, reasons, duplicate) per path after clean, filter and dedup.
pub fn run_golden() -> Vec<(String, bool, Vec<String>, bool)> {
    let cases = golden_cases();
    let records: Vec<FileRecord> =
        cases.iter().map(|c| FileRecord::new(&c.path, &c.content, RepoMeta::default())).collect();
    let results = clean_and_filter(records, &FilterConfig::default(), &LexicalChecker);
    let passed: Vec<FileRecord> = results.iter().filter(|(_, v)| v.kept).map(|(r, _)| r.clone()).collect();
    let survivors: Vec<String> = dedup(passed).into_iter().map(|r| r.path).collect();
    results
        .iter()
        .map(|(r, v)| {
            let duplicate = v.kept && !survivors.contains(&r.path);
            let reasons = v.reasons.iter().map(|x| x.to_string()).collect();
            (r.path.clone(), v.kept && !duplicate, reasons, duplicate)
        })
        .collect()
}

/// Check the interleaving contract for one file; returns the block count.
pub fn check_merged(record: &FileRecord, mode: SketchMode) -> usize {
    let table = SymbolTable::default();
    let doc = make_generator_doc(record, mode, &table).unwrap_or_else(|e| panic!("{}: {e}", record.path));
    assert_eq!(doc.parts.len() % 2, 0);
    let originals: String = doc.original_parts().collect();
    assert_eq!(originals, record.content, "{}", record.path);
    for part in doc.sketched_parts() {
        let stream = tokenize(part).unwrap_or_else(|e| panic!("{}: sketched part does not lex: {e}", record.path));
        assert_eq!(stream.count(TokenKind::Comment), 0, "{}", record.path);
        if mode == SketchMode::ConstantsOnly {
            for t in &stream.tokens {
                assert_ne!(t.kind, TokenKind::String, "{}: {}", record.path, t.text);
                if t.kind == TokenKind::Number {
                    assert!(table.keep_numbers.contains(&t.text));
                }
            }
        }
    }
    doc.block_count()
}
