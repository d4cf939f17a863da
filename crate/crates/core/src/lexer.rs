//! Lossless, indentation-aware tokenizer for Python source text.
//!
//! The lexer follows the token boundaries of the Python runtime's own
//! `tokenize` module with two differences: formatted string literals are
//! single opaque `String` tokens, and non-logical line breaks (blank lines,
//! comment-only lines, breaks inside brackets, backslash continuations) are
//! not tokens. Everything that is not a token is kept in the gap preceding
//! the next token, so [`render`] reproduces the input byte-for-byte.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Hard keywords of the source language.
pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal",
    "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
];

/// Keywords counted by the corpus keyword heuristic.
pub const DEFAULT_FILTER_KEYWORDS: &[&str] = &["def", "if", "return", "for"];

const TAB_SIZE: usize = 8;

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

/// True when `word` is a valid identifier that is not a keyword.
pub fn is_identifier(word: &str) -> bool {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) if is_ident_start(c) => {}
        _ => return false,
    }
    chars.all(is_ident_continue) && !is_keyword(word)
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TokenKind {
    Name,
    Number,
    String,
    Operator,
    Comment,
    Newline,
    Indent,
    Dedent,
    EndMarker,
}

impl TokenKind {
    /// Kinds that carry no source text of their own apart from layout.
    pub fn is_layout(self) -> bool {
        matches!(self, TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent | TokenKind::EndMarker)
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the first character.
    pub line: usize,
    /// 0-based character column of the first character.
    pub col: usize,
    /// Byte offset into the source the stream was built from.
    pub offset: usize,
}

impl Token {
    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_op(&self, text: &str) -> bool {
        self.is(TokenKind::Operator, text)
    }

    pub fn is_name(&self, text: &str) -> bool {
        self.is(TokenKind::Name, text)
    }
}

/// Tokens plus the whitespace preceding each of them.
///
/// `gaps[i]` is the source text between token `i - 1` and token `i`, so the
/// two vectors always have the same length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
    pub gaps: Vec<String>,
    pub source_hash: String,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// `(kind, text)` pairs, the identity used by the re-lex laws.
    pub fn signature(&self) -> Vec<(TokenKind, &str)> {
        self.tokens.iter().map(|t| (t.kind, t.text.as_str())).collect()
    }

    /// Render the half-open token range `[start, end)` with its gaps.
    pub fn render_range(&self, start: usize, end: usize) -> String {
        let mut out = String::new();
        for i in start..end {
            out.push_str(&self.gaps[i]);
            out.push_str(&self.tokens[i].text);
        }
        out
    }

    /// Replace the text and kind of token `index`, keeping its gap.
    pub fn replace(&mut self, index: usize, kind: TokenKind, text: impl Into<String>) {
        let token = &mut self.tokens[index];
        token.kind = kind;
        token.text = text.into();
    }

    /// Count of tokens of a given kind.
    pub fn count(&self, kind: TokenKind) -> usize {
        self.tokens.iter().filter(|t| t.kind == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LexErrorKind {
    UnterminatedString,
    InconsistentIndent,
    InvalidEncoding,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} at line {line}, column {col}")]
pub struct LexError {
    pub kind: LexErrorKind,
    pub line: usize,
    pub col: usize,
}

/// Tokenize raw bytes, rejecting invalid UTF-8.
pub fn tokenize_bytes(bytes: &[u8]) -> Result<TokenStream, LexError> {
    match std::str::from_utf8(bytes) {
        Ok(source) => tokenize(source),
        Err(err) => {
            let valid = &bytes[..err.valid_up_to()];
            // The prefix is valid UTF-8 by construction.
            let prefix = std::str::from_utf8(valid).unwrap_or_default();
            let line = prefix.matches('\n').count() + 1;
            let col = prefix.rsplit('\n').next().map_or(0, |l| l.chars().count());
            Err(LexError { kind: LexErrorKind::InvalidEncoding, line, col })
        }
    }
}

pub fn tokenize(source: &str) -> Result<TokenStream, LexError> {
    Lexer::new(source).run()
}

/// Concatenate gaps and token texts.
pub fn render(stream: &TokenStream) -> String {
    stream.render_range(0, stream.tokens.len())
}

/// Render a stream with selected Comment tokens removed.
///
/// Horizontal whitespace before a removed comment goes with it, and a line
/// that held nothing but the comment disappears entirely.
pub fn render_without_comments(stream: &TokenStream, remove: impl Fn(usize, &Token) -> bool) -> String {
    let mut out = String::new();
    let mut eat_line_break = false;
    for (i, token) in stream.tokens.iter().enumerate() {
        let mut gap = stream.gaps[i].as_str();
        if eat_line_break {
            gap = gap
                .strip_prefix("\r\n")
                .or_else(|| gap.strip_prefix('\n'))
                .or_else(|| gap.strip_prefix('\r'))
                .unwrap_or(gap);
            eat_line_break = false;
        }
        if token.kind == TokenKind::Comment && remove(i, token) {
            let trimmed = gap.trim_end_matches([' ', '\t', '\x0c']);
            out.push_str(trimmed);
            eat_line_break = out.is_empty() || out.ends_with(['\n', '\r']);
            continue;
        }
        out.push_str(gap);
        out.push_str(&token.text);
    }
    out
}

/// Number of distinct words from `keywords` that occur as Name tokens.
///
/// Text that does not lex falls back to a whole-word scan, so the heuristic
/// still works on files that will later fail the syntax check.
pub fn count_keywords(source: &str, keywords: &[&str]) -> usize {
    count_keywords_lexed(source, tokenize(source).as_ref().ok(), keywords)
}

/// [`count_keywords`] for a caller that has already lexed `source`.
pub fn count_keywords_lexed(source: &str, stream: Option<&TokenStream>, keywords: &[&str]) -> usize {
    let wanted: BTreeSet<&str> = keywords.iter().copied().collect();
    let mut seen = BTreeSet::new();
    match stream {
        Some(stream) => {
            for token in &stream.tokens {
                if token.kind == TokenKind::Name && wanted.contains(token.text.as_str()) {
                    seen.insert(token.text.as_str());
                }
            }
        }
        None => {
            for word in source.split(|c: char| !is_ident_continue(c)) {
                if wanted.contains(word) {
                    seen.insert(word);
                }
            }
        }
    }
    seen.len()
}

/// Lexical well-formedness: brackets balance and nest, and no character
/// outside the language's operator set appears.
pub fn check_structure(stream: &TokenStream) -> Result<(), (usize, usize)> {
    let mut stack: Vec<(&str, usize, usize)> = Vec::new();
    for token in &stream.tokens {
        if token.kind != TokenKind::Operator {
            continue;
        }
        match token.text.as_str() {
            "(" | "[" | "{" => stack.push((token.text.as_str(), token.line, token.col)),
            ")" | "]" | "}" => {
                let open = match token.text.as_str() {
                    ")" => "(",
                    "]" => "[",
                    _ => "{",
                };
                match stack.pop() {
                    Some((o, _, _)) if o == open => {}
                    _ => return Err((token.line, token.col)),
                }
            }
            text if !OPERATORS.contains(&text) => return Err((token.line, token.col)),
            _ => {}
        }
    }
    match stack.pop() {
        Some((_, line, col)) => Err((line, col)),
        None => Ok(()),
    }
}

// Longest first so that greedy matching picks the right operator.
const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "!=", "**", "//", ">>", "<<", "<=", ">=", "==", "->", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "@=", ":=", "+", "-", "*", "/", "%", "@", "&", "|", "^", "~", "<", ">", "(", ")", "[", "]",
    "{", "}", ",", ":", ".", ";", "=",
];

fn is_string_prefix(word: &str) -> bool {
    word.len() <= 2 && matches!(word.to_ascii_lowercase().as_str(), "r" | "u" | "b" | "f" | "br" | "rb" | "fr" | "rf")
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    line_start: usize,
    tokens: Vec<Token>,
    gaps: Vec<String>,
    gap_start: usize,
    indents: Vec<(usize, usize)>,
    depth: usize,
    line_has_token: bool,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            pos: 0,
            line: 1,
            line_start: 0,
            tokens: Vec::new(),
            gaps: Vec::new(),
            gap_start: 0,
            indents: vec![(0, 0)],
            depth: 0,
            line_has_token: false,
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn col_of(&self, offset: usize) -> usize {
        self.src[self.line_start..offset].chars().count()
    }

    fn error(&self, kind: LexErrorKind, offset: usize) -> LexError {
        LexError { kind, line: self.line, col: self.col_of(offset) }
    }

    fn push(&mut self, kind: TokenKind, start: usize, end: usize) {
        let col = self.col_of(start);
        self.gaps.push(self.src[self.gap_start..start].to_string());
        self.tokens.push(Token { kind, text: self.src[start..end].to_string(), line: self.line, col, offset: start });
        self.gap_start = end;
    }

    /// Consume a line break at `pos` if present, returning its byte length.
    fn line_break_len(&self) -> usize {
        let rest = &self.src.as_bytes()[self.pos..];
        match rest {
            [b'\r', b'\n', ..] => 2,
            [b'\r', ..] | [b'\n', ..] => 1,
            _ => 0,
        }
    }

    fn advance_line(&mut self, len: usize) {
        self.pos += len;
        self.line += 1;
        self.line_start = self.pos;
    }

    fn run(mut self) -> Result<TokenStream, LexError> {
        if self.src.starts_with('\u{feff}') {
            self.pos = '\u{feff}'.len_utf8();
        }
        let mut at_line_start = true;
        while self.pos < self.src.len() {
            if at_line_start && self.depth == 0 {
                at_line_start = false;
                if self.handle_indentation()? {
                    at_line_start = true;
                    continue;
                }
            }
            let c = match self.peek() {
                Some(c) => c,
                None => break,
            };
            match c {
                ' ' | '\t' | '\x0c' => self.pos += 1,
                '\r' | '\n' => {
                    let len = self.line_break_len();
                    if self.depth == 0 && self.line_has_token {
                        let start = self.pos;
                        self.push(TokenKind::Newline, start, start + len);
                        self.line_has_token = false;
                    }
                    self.advance_line(len);
                    at_line_start = self.depth == 0;
                }
                '\\' if matches!(self.peek_at(1), Some('\r' | '\n')) => {
                    self.pos += 1;
                    let len = self.line_break_len();
                    self.advance_line(len);
                }
                '#' => {
                    let start = self.pos;
                    let end = self.src[start..].find(['\r', '\n']).map_or(self.src.len(), |i| start + i);
                    self.push(TokenKind::Comment, start, end);
                    self.pos = end;
                }
                '"' | '\'' => {
                    self.lex_string(self.pos)?;
                    self.line_has_token = true;
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) => {
                    let start = self.pos;
                    self.lex_number();
                    self.push(TokenKind::Number, start, self.pos);
                    self.line_has_token = true;
                }
                c if is_ident_start(c) => {
                    let start = self.pos;
                    while let Some(c) = self.peek() {
                        if !is_ident_continue(c) {
                            break;
                        }
                        self.pos += c.len_utf8();
                    }
                    let word = &self.src[start..self.pos];
                    if is_string_prefix(word) && matches!(self.peek(), Some('"' | '\'')) {
                        self.lex_string(start)?;
                    } else {
                        self.push(TokenKind::Name, start, self.pos);
                    }
                    self.line_has_token = true;
                }
                _ => {
                    let start = self.pos;
                    let rest = &self.src[start..];
                    let len = OPERATORS.iter().find(|op| rest.starts_with(*op)).map_or(c.len_utf8(), |op| op.len());
                    match &rest[..len] {
                        "(" | "[" | "{" => self.depth += 1,
                        ")" | "]" | "}" => self.depth = self.depth.saturating_sub(1),
                        _ => {}
                    }
                    self.pos += len;
                    self.push(TokenKind::Operator, start, self.pos);
                    self.line_has_token = true;
                }
            }
        }
        let end = self.src.len();
        if self.line_has_token {
            self.push(TokenKind::Newline, end, end);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(TokenKind::Dedent, end, end);
        }
        self.push(TokenKind::EndMarker, end, end);
        Ok(TokenStream { tokens: self.tokens, gaps: self.gaps, source_hash: content_digest(self.src) })
    }

    /// Measure indentation at the start of a physical line and emit
    /// Indent/Dedent tokens. Returns true if the line was blank or
    /// comment-only and has been fully consumed.
    fn handle_indentation(&mut self) -> Result<bool, LexError> {
        let start = self.pos;
        let (mut col, mut alt) = (0usize, 0usize);
        while let Some(c) = self.peek() {
            match c {
                ' ' => {
                    col += 1;
                    alt += 1;
                }
                '\t' => {
                    col = (col / TAB_SIZE + 1) * TAB_SIZE;
                    alt += 1;
                }
                '\x0c' => {
                    col = 0;
                    alt = 0;
                }
                _ => break,
            }
            self.pos += 1;
        }
        match self.peek() {
            None => return Ok(true),
            Some('\r' | '\n') => {
                let len = self.line_break_len();
                self.advance_line(len);
                return Ok(true);
            }
            Some('#') => {
                let cstart = self.pos;
                let end = self.src[cstart..].find(['\r', '\n']).map_or(self.src.len(), |i| cstart + i);
                self.push(TokenKind::Comment, cstart, end);
                self.pos = end;
                let len = self.line_break_len();
                if len > 0 {
                    self.advance_line(len);
                }
                return Ok(true);
            }
            Some('\\') if matches!(self.peek_at(1), Some('\r' | '\n')) => {
                // A continuation on an otherwise empty line joins the next line.
                return Ok(false);
            }
            _ => {}
        }
        let (top, top_alt) = *self.indents.last().expect("indent stack is never empty");
        if col == top {
            if alt != top_alt {
                return Err(self.error(LexErrorKind::InconsistentIndent, self.pos));
            }
        } else if col > top {
            if alt <= top_alt {
                return Err(self.error(LexErrorKind::InconsistentIndent, self.pos));
            }
            self.indents.push((col, alt));
            self.push(TokenKind::Indent, start, self.pos);
        } else {
            while self.indents.last().is_some_and(|&(c, _)| col < c) {
                self.indents.pop();
                let here = self.pos;
                self.push(TokenKind::Dedent, here, here);
            }
            let (top, top_alt) = *self.indents.last().expect("indent stack is never empty");
            if col != top || alt != top_alt {
                return Err(self.error(LexErrorKind::InconsistentIndent, self.pos));
            }
        }
        Ok(false)
    }

    fn lex_number(&mut self) {
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        let digits = |i: &mut usize, pred: fn(u8) -> bool| {
            while *i < bytes.len() && (pred(bytes[*i]) || bytes[*i] == b'_') {
                *i += 1;
            }
        };
        if bytes[i] == b'0' && i + 1 < bytes.len() && matches!(bytes[i + 1], b'x' | b'X' | b'o' | b'O' | b'b' | b'B') {
            i += 2;
            digits(&mut i, |b| b.is_ascii_hexdigit());
            self.pos = i;
            return;
        }
        digits(&mut i, |b| b.is_ascii_digit());
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            digits(&mut i, |b| b.is_ascii_digit());
        }
        if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
            let mut j = i + 1;
            if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                i = j;
                digits(&mut i, |b| b.is_ascii_digit());
            }
        }
        if i < bytes.len() && matches!(bytes[i], b'j' | b'J') {
            i += 1;
        }
        self.pos = i;
    }

    /// Lex a string literal whose prefix (if any) starts at `start`; `pos`
    /// points at the opening quote.
    fn lex_string(&mut self, start: usize) -> Result<(), LexError> {
        let (start_line, start_line_start) = (self.line, self.line_start);
        let quote = self.peek().expect("caller checked for a quote");
        let rest = &self.src[self.pos..];
        let triple: String = std::iter::repeat_n(quote, 3).collect();
        let is_triple = rest.starts_with(&triple);
        let bytes = self.src.as_bytes();
        let mut i = self.pos + if is_triple { 3 } else { 1 };
        let unterminated = |lexer: &Lexer| LexError {
            kind: LexErrorKind::UnterminatedString,
            line: start_line,
            col: lexer.src[start_line_start..start].chars().count(),
        };
        loop {
            if i >= bytes.len() {
                return Err(unterminated(self));
            }
            match bytes[i] {
                b'\\' => {
                    i += 1;
                    if i < bytes.len() {
                        if bytes[i] == b'\r' && bytes.get(i + 1) == Some(&b'\n') {
                            i += 1;
                        }
                        if matches!(bytes[i], b'\r' | b'\n') {
                            self.line += 1;
                            self.line_start = i + 1;
                        }
                        i += 1;
                    }
                }
                b'\r' | b'\n' => {
                    if !is_triple {
                        return Err(unterminated(self));
                    }
                    if bytes[i] == b'\r' && bytes.get(i + 1) == Some(&b'\n') {
                        i += 1;
                    }
                    i += 1;
                    self.line += 1;
                    self.line_start = i;
                }
                b if b == quote as u8 => {
                    if !is_triple {
                        i += 1;
                        break;
                    }
                    if self.src[i..].starts_with(&triple) {
                        i += 3;
                        break;
                    }
                    i += 1;
                }
                _ => i += 1,
            }
        }
        // Tokens report the position of their first character.
        let (end_line, end_line_start) = (self.line, self.line_start);
        self.line = start_line;
        self.line_start = start_line_start;
        self.push(TokenKind::String, start, i);
        self.line = end_line;
        self.line_start = end_line_start;
        self.pos = i;
        Ok(())
    }
}

/// Hex SHA-256 of a text.
pub fn content_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds(src: &str) -> Vec<(TokenKind, std::string::String)> {
        tokenize(src).unwrap().tokens.into_iter().map(|t| (t.kind, t.text)).collect()
    }

    fn pairs(list: &[(TokenKind, &str)]) -> Vec<(TokenKind, std::string::String)> {
        list.iter().map(|(k, t)| (*k, t.to_string())).collect()
    }

    #[test]
    fn minimal_statement() {
        assert_eq!(
            kinds("x = 1\n"),
            pairs(&[(Name, "x"), (Operator, "="), (Number, "1"), (Newline, "\n"), (EndMarker, "")])
        );
    }

    #[test]
    fn empty_input() {
        assert_eq!(kinds(""), pairs(&[(EndMarker, "")]));
    }

    #[test]
    fn keywords_sorted_for_binary_search() {
        let mut sorted = KEYWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, KEYWORDS);
        assert!(is_keyword("def"));
        assert!(!is_keyword("number"));
    }

    #[test]
    fn string_forms_are_single_tokens() {
        let src = "a = rb'x\\'y' + f\"{b['k']}\" + '''multi\nline''' + U\"u\"\n";
        let toks = kinds(src);
        let strings: Vec<_> = toks.iter().filter(|(k, _)| *k == String).map(|(_, t)| t.as_str()).collect();
        assert_eq!(strings, ["rb'x\\'y'", "f\"{b['k']}\"", "'''multi\nline'''", "U\"u\""]);
        assert_eq!(render(&tokenize(src).unwrap()), src);
    }

    #[test]
    fn unterminated_strings() {
        let err = tokenize("x = 'abc\n").unwrap_err();
        assert_eq!(err.kind, LexErrorKind::UnterminatedString);
        assert_eq!((err.line, err.col), (1, 4));
        let err = tokenize("y = 1\nx = \"\"\"abc\n\n").unwrap_err();
        assert_eq!(err.kind, LexErrorKind::UnterminatedString);
        assert_eq!(err.line, 2);
    }

    #[test]
    fn indentation_tokens() {
        let src = "if x:\n    y = 1\n    if z:\n        w = 2\nv = 3\n";
        let stream = tokenize(src).unwrap();
        assert_eq!(stream.count(Indent), 2);
        assert_eq!(stream.count(Dedent), 2);
        assert_eq!(render(&stream), src);
        let indents: Vec<_> = stream.tokens.iter().filter(|t| t.kind == Indent).map(|t| t.text.as_str()).collect();
        assert_eq!(indents, ["    ", "        "]);
    }

    #[test]
    fn dedent_at_eof_without_newline() {
        let src = "def f():\n    return 1";
        let toks = kinds(src);
        assert_eq!(&toks[toks.len() - 3..], &pairs(&[(Newline, ""), (Dedent, ""), (EndMarker, "")])[..]);
    }

    #[test]
    fn bad_dedent_is_inconsistent() {
        let err = tokenize("if x:\n    y\n  z\n").unwrap_err();
        assert_eq!(err.kind, LexErrorKind::InconsistentIndent);
        assert_eq!(err.line, 3);
    }

    #[test]
    fn tab_space_mix_is_inconsistent() {
        // One tab and eight spaces reach the same column but differ in layout.
        let err = tokenize("if x:\n\ty = 1\n        z = 2\n").unwrap_err();
        assert_eq!(err.kind, LexErrorKind::InconsistentIndent);
        // Tabs alone are fine.
        assert!(tokenize("if x:\n\ty = 1\n\tz = 2\n").is_ok());
    }

    #[test]
    fn invalid_encoding() {
        let err = tokenize_bytes(b"x = 1\ny = \xff\n").unwrap_err();
        assert_eq!(err.kind, LexErrorKind::InvalidEncoding);
        assert_eq!((err.line, err.col), (2, 4));
    }

    #[test]
    fn brackets_suppress_newlines() {
        let src = "x = [\n    1,\n    2,\n]\n";
        let stream = tokenize(src).unwrap();
        assert_eq!(stream.count(Newline), 1);
        assert_eq!(stream.count(Indent), 0);
        assert_eq!(render(&stream), src);
    }

    #[test]
    fn comments_and_blank_lines_are_not_logical_lines() {
        let src = "def f():\n    x = 1\n\n    # inner\n    return x\n# top\n\ny = 2\n";
        let toks = kinds(src);
        let comment_then_dedent = toks
            .windows(2)
            .any(|w| w[0] == (Comment, "# top".to_string()) && w[1] == (Dedent, std::string::String::new()));
        assert!(comment_then_dedent, "{toks:?}");
        assert_eq!(render(&tokenize(src).unwrap()), src);
    }

    #[test]
    fn continuation_and_crlf() {
        let src = "x = 1 + \\\r\n    2\r\ny = 'a'\r\n";
        let stream = tokenize(src).unwrap();
        assert_eq!(render(&stream), src);
        assert_eq!(stream.tokens[5].text, "\r\n");
        assert_eq!(stream.count(Indent), 0);
    }

    #[test]
    fn numbers() {
        let toks = kinds("a = 0x1F + 1_000 + 2.5e-3 + .5 + 3j + 1e5\n");
        let nums: Vec<_> = toks.iter().filter(|(k, _)| *k == Number).map(|(_, t)| t.as_str()).collect();
        assert_eq!(nums, ["0x1F", "1_000", "2.5e-3", ".5", "3j", "1e5"]);
    }

    #[test]
    fn operators_longest_match() {
        let toks = kinds("a **= b // c -> d ... e := f\n");
        let ops: Vec<_> = toks.iter().filter(|(k, _)| *k == Operator).map(|(_, t)| t.as_str()).collect();
        assert_eq!(ops, ["**=", "//", "->", "...", ":="]);
    }

    #[test]
    fn positions() {
        let stream = tokenize("x = 1\n  # c\nyy = '''a\nb''' if 1 else 2\n").unwrap();
        let yy = stream.tokens.iter().find(|t| t.text == "yy").unwrap();
        assert_eq!((yy.line, yy.col), (3, 0));
        let after = stream.tokens.iter().find(|t| t.text == "if").unwrap();
        assert_eq!((after.line, after.col), (4, 5));
    }

    #[test]
    fn keyword_counting() {
        assert_eq!(count_keywords("def f():\n    return 1\n", DEFAULT_FILTER_KEYWORDS), 2);
        assert_eq!(count_keywords("", DEFAULT_FILTER_KEYWORDS), 0);
        // Inside strings and comments keywords do not count.
        assert_eq!(count_keywords("x = 'def if for'  # return\n", DEFAULT_FILTER_KEYWORDS), 0);
        // Repeats count once.
        assert_eq!(count_keywords("if a:\n    pass\nif b:\n    pass\n", DEFAULT_FILTER_KEYWORDS), 1);
        // Unlexable text falls back to whole words.
        assert_eq!(count_keywords("def 'oops\nif for\n", DEFAULT_FILTER_KEYWORDS), 3);
    }

    #[test]
    fn comment_removal_keeps_layout() {
        let src = "# head\nx = 1  # note\n\ndef f():\n    # inner\n    return [1,  # one\n        2]\n";
        let stream = tokenize(src).unwrap();
        let out = render_without_comments(&stream, |_, _| true);
        assert_eq!(out, "x = 1\n\ndef f():\n    return [1,\n        2]\n");
        let relexed = tokenize(&out).unwrap();
        let expected: Vec<_> = stream.signature().into_iter().filter(|(k, _)| *k != Comment).collect();
        assert_eq!(relexed.signature(), expected);
        assert_eq!(render_without_comments(&stream, |_, _| false), src);
    }

    #[test]
    fn structure_check() {
        assert!(check_structure(&tokenize("f(a[1], {2: 3})\n").unwrap()).is_ok());
        assert_eq!(check_structure(&tokenize("f(a]\n").unwrap()), Err((1, 3)));
        assert_eq!(check_structure(&tokenize("f(a\n").unwrap()), Err((1, 1)));
        assert!(check_structure(&tokenize("a = $b\n").unwrap()).is_err());
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("number"));
        assert!(is_identifier("_x1"));
        assert!(!is_identifier("class"));
        assert!(!is_identifier("1x"));
        assert!(!is_identifier(""));
    }
}
