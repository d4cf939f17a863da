//! Training documents for the sketcher (sketched whole files) and the
//! generator (sketched blocks interleaved with their originals).

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{EpochPlan, FileRecord};
use crate::lexer::{self, LexError, Token, TokenKind, TokenStream};
use crate::sketch::{sketch_tokens, SketchMode, SymbolTable};

pub const DEFAULT_SENTINEL: &str = "<|endoftext|>";
pub const DEFAULT_SHARD_BYTES: u64 = 100 * 1024 * 1024;
pub const DEFAULT_BLOCK_TOKEN_CAP: usize = 512;

#[derive(Debug, Error)]
pub enum TraindataError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("block boundaries could not be aligned: {0}")]
    BlockAlignment(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("plan refers to record {0}, which does not exist")]
    PlanOutOfRange(usize),
}

/// A comment- and docstring-free stream plus, for every original token, its
/// index in the stripped stream (None if it was removed).
#[derive(Debug, Clone)]
pub struct Stripped {
    pub stream: TokenStream,
    pub index_map: Vec<Option<usize>>,
}

pub fn strip_comments_and_docstrings(stream: &TokenStream) -> Result<TokenStream, TraindataError> {
    Ok(strip_with_map(stream)?.stream)
}

pub fn strip_with_map(stream: &TokenStream) -> Result<Stripped, TraindataError> {
    let text = lexer::render_without_comments(stream, |_, _| true);
    let without_comments = lexer::tokenize(&text)?;
    let mut first_map = Vec::with_capacity(stream.len());
    let mut next = 0;
    for token in &stream.tokens {
        if token.kind == TokenKind::Comment {
            first_map.push(None);
        } else {
            first_map.push(Some(next));
            next += 1;
        }
    }
    let expected: Vec<(TokenKind, &str)> =
        stream.signature().into_iter().filter(|(kind, _)| *kind != TokenKind::Comment).collect();
    if without_comments.signature() != expected {
        return Err(TraindataError::BlockAlignment("comment removal changed the token sequence".into()));
    }

    let (stripped, second_map) = remove_docstrings(&without_comments)?;
    let index_map = first_map.into_iter().map(|i| i.and_then(|i| second_map[i])).collect();
    Ok(Stripped { stream: stripped, index_map })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edit {
    Keep,
    Delete,
    Pass,
}

fn remove_docstrings(stream: &TokenStream) -> Result<(TokenStream, Vec<Option<usize>>), TraindataError> {
    let tokens = &stream.tokens;
    let mut edits = vec![Edit::Keep; tokens.len()];
    let mut clear_gap = vec![false; tokens.len()];

    let mut candidates = Vec::new();
    if tokens.first().is_some_and(|t| t.kind == TokenKind::String) {
        candidates.push((0, DocPosition::Module));
    }
    for i in 1..tokens.len() {
        if tokens[i].kind != TokenKind::String {
            continue;
        }
        let prev = &tokens[i - 1];
        if prev.kind == TokenKind::Indent && header_opens_scope(tokens, i - 1) {
            candidates.push((i, DocPosition::Body));
        } else if prev.is_op(":") && header_opens_scope(tokens, i) {
            candidates.push((i, DocPosition::SameLine));
        }
    }

    for (start, position) in candidates {
        let mut end = start;
        while tokens.get(end).is_some_and(|t| t.kind == TokenKind::String) {
            end += 1;
        }
        if tokens.get(end).is_none_or(|t| t.kind != TokenKind::Newline) {
            continue;
        }
        let after = end + 1;
        let sole_statement =
            tokens.get(after).is_none_or(|t| matches!(t.kind, TokenKind::Dedent | TokenKind::EndMarker));
        match position {
            DocPosition::Module => {
                for e in &mut edits[start..=end] {
                    *e = Edit::Delete;
                }
                if after < tokens.len() {
                    clear_gap[after] = true;
                }
            }
            DocPosition::Body if !sole_statement => {
                for e in &mut edits[start..=end] {
                    *e = Edit::Delete;
                }
                clear_gap[after] = true;
            }
            DocPosition::Body | DocPosition::SameLine => {
                edits[start] = Edit::Pass;
                for e in &mut edits[start + 1..end] {
                    *e = Edit::Delete;
                }
            }
        }
    }

    let mut text = String::new();
    let mut expected: Vec<(TokenKind, &str)> = Vec::new();
    let mut map = Vec::with_capacity(tokens.len());
    for (i, token) in tokens.iter().enumerate() {
        match edits[i] {
            Edit::Delete => {
                map.push(None);
                continue;
            }
            Edit::Keep => {
                expected.push((token.kind, token.text.as_str()));
                if !clear_gap[i] {
                    text.push_str(&stream.gaps[i]);
                }
                text.push_str(&token.text);
            }
            Edit::Pass => {
                expected.push((TokenKind::Name, "pass"));
                text.push_str(&stream.gaps[i]);
                text.push_str("pass");
            }
        }
        map.push(Some(expected.len() - 1));
    }
    let out = lexer::tokenize(&text)?;
    if out.signature() != expected {
        return Err(TraindataError::BlockAlignment("docstring removal changed the token sequence".into()));
    }
    Ok((out, map))
}

#[derive(Debug, Clone, Copy)]
enum DocPosition {
    Module,
    Body,
    SameLine,
}

/// True if the logical line ending just before `index` is a `def` or
/// `class` header.
fn header_opens_scope(tokens: &[Token], index: usize) -> bool {
    let mut start = index;
    while start > 0 {
        let t = &tokens[start - 1];
        if matches!(t.kind, TokenKind::Indent | TokenKind::Dedent)
            || (t.kind == TokenKind::Newline && start - 1 != index - 1)
        {
            break;
        }
        start -= 1;
    }
    let mut first = start;
    while tokens.get(first).is_some_and(|t| t.is_name("async")) {
        first += 1;
    }
    tokens.get(first).is_some_and(|t| t.is_name("def") || t.is_name("class"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    FunctionDef,
    ClassDef,
    StatementRun,
}

/// A half-open token range `[start, end)` of a stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub start: usize,
    pub end: usize,
    pub kind: BlockKind,
    pub index: usize,
}

impl Block {
    pub fn text(&self, stream: &TokenStream) -> String {
        stream.render_range(self.start, self.end)
    }

    pub fn tokens<'a>(&self, stream: &'a TokenStream) -> &'a [Token] {
        &stream.tokens[self.start..self.end]
    }
}

#[derive(Debug, Clone)]
struct Unit {
    start: usize,
    end: usize,
    /// Comments and dedents waiting for the next statement.
    prefix: bool,
}

/// Split the stream into top-level units. Comment lines at column 0 that the
/// lexer places inside a closing suite are handed to the next unit.
fn top_level_units(stream: &TokenStream) -> Vec<Unit> {
    let tokens = &stream.tokens;
    let n = tokens.len();
    let mut units = Vec::new();
    let mut i = 0;
    while i < n {
        match tokens[i].kind {
            TokenKind::EndMarker => break,
            TokenKind::Comment | TokenKind::Dedent | TokenKind::Indent | TokenKind::Newline => {
                units.push(Unit { start: i, end: i + 1, prefix: true });
                i += 1;
                continue;
            }
            _ => {}
        }
        let start = i;
        while i < n && !matches!(tokens[i].kind, TokenKind::Newline | TokenKind::EndMarker) {
            i += 1;
        }
        if i < n && tokens[i].kind == TokenKind::Newline {
            i += 1;
        }
        if i < n && tokens[i].kind == TokenKind::Indent {
            let mut level = 0usize;
            let mut last_newline = i;
            while i < n {
                match tokens[i].kind {
                    TokenKind::Indent => level += 1,
                    TokenKind::Dedent => level = level.saturating_sub(1),
                    TokenKind::Newline => last_newline = i,
                    TokenKind::EndMarker => break,
                    _ => {}
                }
                i += 1;
                if level == 0 {
                    break;
                }
            }
            let tail = last_newline + 1..i;
            if let Some(cut) = tail.clone().find(|&j| tokens[j].kind == TokenKind::Comment && tokens[j].col == 0) {
                units.push(Unit { start, end: cut, prefix: false });
                i = cut;
                continue;
            }
        }
        units.push(Unit { start, end: i, prefix: false });
    }
    units
}

fn statement_kind(tokens: &[Token]) -> Option<BlockKind> {
    let mut idx = 0;
    while tokens.get(idx).is_some_and(|t| t.is_name("async")) {
        idx += 1;
    }
    match tokens.get(idx) {
        Some(t) if t.is_name("def") => Some(BlockKind::FunctionDef),
        Some(t) if t.is_name("class") => Some(BlockKind::ClassDef),
        Some(t) if t.is_op("@") => None,
        _ => Some(BlockKind::StatementRun),
    }
}

pub fn split_blocks(stream: &TokenStream) -> Vec<Block> {
    split_blocks_with_cap(stream, DEFAULT_BLOCK_TOKEN_CAP)
}

pub fn split_blocks_with_cap(stream: &TokenStream, token_cap: usize) -> Vec<Block> {
    let tokens = &stream.tokens;
    let units = top_level_units(stream);

    // Group into (start, end, kind, starts_after_blank_line) pieces, with
    // prefixes and decorators attached to what follows them.
    let mut pieces: Vec<(usize, usize, BlockKind, bool)> = Vec::new();
    let mut pending: Option<usize> = None;
    for unit in &units {
        let start = *pending.get_or_insert(unit.start);
        if unit.prefix {
            continue;
        }
        let Some(kind) = statement_kind(&tokens[unit.start..unit.end]) else {
            continue;
        };
        let blank_before = stream.gaps[start].contains(['\n', '\r']) || start == 0;
        pieces.push((start, unit.end, kind, blank_before));
        pending = None;
    }
    if pieces.is_empty() {
        return Vec::new();
    }
    // A trailing decorator without a definition still needs a home.
    if let Some(start) = pending {
        if units.last().is_some_and(|u| !u.prefix && u.start >= start) {
            pieces.push((start, units.last().map_or(start, |u| u.end), BlockKind::StatementRun, true));
        }
    }

    let mut blocks: Vec<Block> = Vec::new();
    let mut run: Vec<(usize, usize, bool)> = Vec::new();
    let flush = |run: &mut Vec<(usize, usize, bool)>, blocks: &mut Vec<Block>| {
        if run.is_empty() {
            return;
        }
        let total: usize = run.iter().map(|p| p.1 - p.0).sum();
        let mut chunk_start = run[0].0;
        let mut chunk_len = 0;
        for &(s, e, blank) in run.iter() {
            if total > token_cap && blank && chunk_len > 0 && chunk_len + (e - s) > token_cap {
                blocks.push(Block { start: chunk_start, end: s, kind: BlockKind::StatementRun, index: 0 });
                chunk_start = s;
                chunk_len = 0;
            }
            chunk_len += e - s;
        }
        let end = run.last().map_or(chunk_start, |p| p.1);
        blocks.push(Block { start: chunk_start, end, kind: BlockKind::StatementRun, index: 0 });
        run.clear();
    };
    for (start, end, kind, blank) in pieces {
        if kind == BlockKind::StatementRun {
            run.push((start, end, blank));
        } else {
            flush(&mut run, &mut blocks);
            blocks.push(Block { start, end, kind, index: 0 });
        }
    }
    flush(&mut run, &mut blocks);

    // Blocks must tile the stream: stretch the first back to 0 and the last
    // over any trailing comments and the end marker.
    blocks[0].start = 0;
    let last = blocks.len() - 1;
    blocks[last].end = tokens.len();
    for i in 0..blocks.len() {
        blocks[i].index = i;
        if i + 1 < blocks.len() {
            blocks[i].end = blocks[i + 1].start;
        }
    }
    blocks
}

/// Whole-file sketch with comments kept.
pub fn make_sketcher_doc(record: &FileRecord, mode: SketchMode, table: &SymbolTable) -> Result<String, TraindataError> {
    let stream = lexer::tokenize(&record.content)?;
    Ok(sketch_tokens(&stream, mode, table).text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedDoc {
    pub source_path: String,
    /// Sketched block, original block, sketched block, ...
    pub parts: Vec<String>,
}

impl MergedDoc {
    pub fn block_count(&self) -> usize {
        self.parts.len() / 2
    }

    pub fn sketched_parts(&self) -> impl Iterator<Item = &str> {
        self.parts.iter().step_by(2).map(String::as_str)
    }

    pub fn original_parts(&self) -> impl Iterator<Item = &str> {
        self.parts.iter().skip(1).step_by(2).map(String::as_str)
    }

    /// Concatenate the parts, starting each one on a fresh line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for part in &self.parts {
            if part.trim().is_empty() {
                continue;
            }
            if !out.is_empty() && !out.ends_with('\n') {
                out.push('\n');
            }
            out.push_str(part.trim_start_matches(['\n', '\r']));
        }
        if !out.is_empty() && !out.ends_with('\n') {
            out.push('\n');
        }
        out
    }
}

pub fn make_generator_doc(
    record: &FileRecord,
    mode: SketchMode,
    table: &SymbolTable,
) -> Result<MergedDoc, TraindataError> {
    let stream = lexer::tokenize(&record.content)?;
    let blocks = split_blocks(&stream);
    let stripped = strip_with_map(&stream)?;
    let sketched = sketch_tokens(&stripped.stream, mode, table);
    if sketched.stream.len() != stripped.stream.len() {
        return Err(TraindataError::BlockAlignment(format!("{}: sketching changed the token count", record.path)));
    }

    // survivors[i] = number of kept tokens among the first i original tokens
    let mut survivors = Vec::with_capacity(stream.len() + 1);
    survivors.push(0usize);
    for mapped in &stripped.index_map {
        let last = *survivors.last().unwrap_or(&0);
        survivors.push(last + usize::from(mapped.is_some()));
    }
    if survivors.last().copied() != Some(sketched.stream.len()) {
        return Err(TraindataError::BlockAlignment(format!("{}: index map does not cover the stream", record.path)));
    }

    let mut parts = Vec::with_capacity(blocks.len() * 2);
    for block in &blocks {
        let (s, e) = (survivors[block.start], survivors[block.end]);
        if s > e {
            return Err(TraindataError::BlockAlignment(format!("{}: block {} inverted", record.path, block.index)));
        }
        parts.push(sketched.stream.render_range(s, e));
        parts.push(block.text(&stream));
    }
    Ok(MergedDoc { source_path: record.path.clone(), parts })
}

/// Builds one training document per file.
pub trait DocBuilder: Sync {
    fn build(&self, record: &FileRecord) -> Result<Option<String>, TraindataError>;
    fn mode(&self) -> SketchMode;
    /// Settings that affect the output, folded into the manifest digest.
    fn describe(&self) -> serde_json::Value;
}

#[derive(Debug, Clone, Default)]
pub struct SketcherDocs {
    pub mode: SketchMode,
    pub table: SymbolTable,
}

impl DocBuilder for SketcherDocs {
    fn build(&self, record: &FileRecord) -> Result<Option<String>, TraindataError> {
        make_sketcher_doc(record, self.mode, &self.table).map(Some)
    }

    fn mode(&self) -> SketchMode {
        self.mode
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({"kind": "sketcher", "mode": self.mode, "table": self.table})
    }
}

#[derive(Debug, Clone, Default)]
pub struct GeneratorDocs {
    pub mode: SketchMode,
    pub table: SymbolTable,
}

impl DocBuilder for GeneratorDocs {
    fn build(&self, record: &FileRecord) -> Result<Option<String>, TraindataError> {
        let doc = make_generator_doc(record, self.mode, &self.table)?;
        Ok((doc.block_count() > 0).then(|| doc.render()))
    }

    fn mode(&self) -> SketchMode {
        self.mode
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({"kind": "generator", "mode": self.mode, "table": self.table})
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmitConfig {
    pub shard_bytes: u64,
    pub sentinel: String,
    pub shard_prefix: String,
}

impl Default for EmitConfig {
    fn default() -> Self {
        EmitConfig { shard_bytes: DEFAULT_SHARD_BYTES, sentinel: DEFAULT_SENTINEL.into(), shard_prefix: "shard".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardInfo {
    pub path: String,
    pub documents: usize,
    pub tokens: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub shards: Vec<ShardInfo>,
    pub documents: usize,
    pub tokens: u64,
    pub mode: SketchMode,
    pub config_digest: String,
    #[serde(default)]
    pub skipped: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Whitespace-delimited word count.
pub fn count_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

struct ShardWriter<'a> {
    dir: &'a Path,
    config: &'a EmitConfig,
    current: Option<(BufWriter<fs::File>, ShardInfo)>,
    done: Vec<ShardInfo>,
    written: Vec<PathBuf>,
}

impl ShardWriter<'_> {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> TraindataError + '_ {
        move |source| TraindataError::Io { path: path.to_owned(), source }
    }

    fn write_doc(&mut self, doc: &str) -> Result<(), TraindataError> {
        let mut record = String::with_capacity(doc.len() + self.config.sentinel.len() + 2);
        record.push_str(doc);
        if !doc.is_empty() && !doc.ends_with('\n') {
            record.push('\n');
        }
        record.push_str(&self.config.sentinel);
        record.push('\n');
        let size = record.len() as u64;

        let full = self
            .current
            .as_ref()
            .is_some_and(|(_, info)| info.documents > 0 && info.bytes + size > self.config.shard_bytes);
        if full {
            self.finish_shard()?;
        }
        if self.current.is_none() {
            let name = format!("{}-{:05}.txt", self.config.shard_prefix, self.done.len());
            let path = self.dir.join(&name);
            let file = fs::File::create(&path).map_err(Self::io(&path))?;
            self.written.push(path);
            self.current = Some((BufWriter::new(file), ShardInfo { path: name, documents: 0, tokens: 0, bytes: 0 }));
        }
        let (writer, info) = self.current.as_mut().expect("shard is open");
        writer
            .write_all(record.as_bytes())
            .map_err(|source| TraindataError::Io { path: self.dir.join(&info.path), source })?;
        info.documents += 1;
        info.tokens += count_tokens(doc);
        info.bytes += size;
        Ok(())
    }

    fn finish_shard(&mut self) -> Result<(), TraindataError> {
        if let Some((mut writer, info)) = self.current.take() {
            writer.flush().map_err(|source| TraindataError::Io { path: self.dir.join(&info.path), source })?;
            self.done.push(info);
        }
        Ok(())
    }

    fn cleanup(&mut self) {
        self.current = None;
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
    }
}

const BUILD_CHUNK: usize = 256;

/// Build one document per plan entry, in plan order, and write them to
/// size-capped shards plus a manifest. Files whose document cannot be built
/// are skipped and listed in the manifest.
pub fn emit_corpus(
    records: &[FileRecord],
    plan: &EpochPlan,
    builder: &dyn DocBuilder,
    out_dir: &Path,
    config: &EmitConfig,
) -> Result<CorpusManifest, TraindataError> {
    if let Some(&bad) = plan.ids.iter().find(|&&i| i >= records.len()) {
        return Err(TraindataError::PlanOutOfRange(bad));
    }
    fs::create_dir_all(out_dir).map_err(ShardWriter::io(out_dir))?;

    let mut writer = ShardWriter { dir: out_dir, config, current: None, done: Vec::new(), written: Vec::new() };
    let mut skipped = Vec::new();
    let result = (|| {
        for chunk in plan.ids.chunks(BUILD_CHUNK) {
            let docs: Vec<_> = chunk.par_iter().map(|&i| builder.build(&records[i])).collect();
            for (&i, doc) in chunk.iter().zip(docs) {
                match doc {
                    Ok(Some(text)) => writer.write_doc(&text)?,
                    Ok(None) => skipped.push(records[i].path.clone()),
                    Err(err) => {
                        log::warn!("skipping {}: {err}", records[i].path);
                        skipped.push(records[i].path.clone());
                    }
                }
            }
        }
        writer.finish_shard()?;

        let digest_input = serde_json::json!({"builder": builder.describe(), "emit": config});
        let config_digest = hex::encode(Sha256::digest(digest_input.to_string().as_bytes()));
        let manifest = CorpusManifest {
            documents: writer.done.iter().map(|s| s.documents).sum(),
            tokens: writer.done.iter().map(|s| s.tokens).sum(),
            shards: writer.done.clone(),
            mode: builder.mode(),
            config_digest,
            skipped: std::mem::take(&mut skipped),
        };
        let path = out_dir.join(MANIFEST_FILE);
        writer.written.push(path.clone());
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json + "\n").map_err(ShardWriter::io(&path))?;
        Ok(manifest)
    })();
    if result.is_err() {
        writer.cleanup();
    }
    result
}

/// Split a shard's contents back into documents.
pub fn read_shard_documents(contents: &str, sentinel: &str) -> Vec<String> {
    let mut docs = Vec::new();
    let mut current = String::new();
    for line in contents.split_inclusive('\n') {
        if line.trim_end_matches(['\n', '\r']) == sentinel {
            docs.push(std::mem::take(&mut current));
        } else {
            current.push_str(line);
        }
    }
    docs
}
