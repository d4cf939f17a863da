//! Sketching: anonymize user-defined constants and/or names with
//! predefined symbol words, plus normalization and majority voting over
//! sampled sketches.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::{self, is_identifier, is_keyword, LexError, TokenKind, TokenStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SketchMode {
    /// Replace user-defined literals only.
    #[default]
    #[serde(alias = "constants")]
    ConstantsOnly,
    /// Replace user-defined function, class and variable names only.
    #[serde(alias = "names")]
    NamesOnly,
    #[serde(alias = "names-constants")]
    NamesAndConstants,
}

impl SketchMode {
    fn constants(self) -> bool {
        matches!(self, SketchMode::ConstantsOnly | SketchMode::NamesAndConstants)
    }

    fn names(self) -> bool {
        matches!(self, SketchMode::NamesOnly | SketchMode::NamesAndConstants)
    }
}

impl fmt::Display for SketchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SketchMode::ConstantsOnly => "constants",
            SketchMode::NamesOnly => "names",
            SketchMode::NamesAndConstants => "names-constants",
        })
    }
}

impl FromStr for SketchMode {
    type Err = SketchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constants" | "constants-only" => Ok(SketchMode::ConstantsOnly),
            "names" | "names-only" => Ok(SketchMode::NamesOnly),
            "names-constants" | "names-and-constants" => Ok(SketchMode::NamesAndConstants),
            other => Err(SketchError::UnknownMode(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NameCategory {
    Function,
    Class,
    Variable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SymbolTable {
    pub number_symbol: String,
    pub string_symbol: String,
    pub name_symbols: BTreeMap<NameCategory, String>,
    /// Numeric literal texts that survive sketching.
    pub keep_numbers: BTreeSet<String>,
}

impl Default for SymbolTable {
    fn default() -> Self {
        SymbolTable {
            number_symbol: "number".into(),
            string_symbol: "string".into(),
            name_symbols: BTreeMap::from([
                (NameCategory::Function, "function".into()),
                (NameCategory::Class, "klass".into()),
                (NameCategory::Variable, "variable".into()),
            ]),
            keep_numbers: ["0", "1", "2", "3"].into_iter().map(String::from).collect(),
        }
    }
}

impl SymbolTable {
    pub fn validate(&self) -> Result<(), SketchError> {
        let mut seen = BTreeSet::new();
        for word in self.words() {
            if !is_identifier(word) {
                return Err(SketchError::InvalidSymbol(word.to_string()));
            }
            if !seen.insert(word) {
                return Err(SketchError::DuplicateSymbol(word.to_string()));
            }
        }
        for category in [NameCategory::Function, NameCategory::Class, NameCategory::Variable] {
            if !self.name_symbols.contains_key(&category) {
                return Err(SketchError::MissingCategory(category));
            }
        }
        Ok(())
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        [self.number_symbol.as_str(), self.string_symbol.as_str()]
            .into_iter()
            .chain(self.name_symbols.values().map(String::as_str))
    }

    pub fn is_symbol(&self, word: &str) -> bool {
        self.words().any(|w| w == word)
    }

    fn name_symbol(&self, category: NameCategory) -> &str {
        &self.name_symbols[&category]
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SketchError {
    #[error("candidate list is empty")]
    EmptyCandidateList,
    #[error("symbol word {0:?} is not a valid identifier")]
    InvalidSymbol(String),
    #[error("symbol word {0:?} is used twice")]
    DuplicateSymbol(String),
    #[error("no symbol configured for {0:?} names")]
    MissingCategory(NameCategory),
    #[error("unknown sketch mode {0:?}")]
    UnknownMode(String),
    #[error(transparent)]
    Lex(#[from] LexError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sketch {
    pub stream: TokenStream,
    pub text: String,
    /// Symbol words present in the sketch: insertions made by sketching, or
    /// for [`Sketch::detect`], occurrences found in predicted text.
    pub anonymous_count: usize,
    pub mode: SketchMode,
    /// Symbol words that already occurred as names in the input.
    pub collisions: BTreeSet<String>,
}

impl Sketch {
    /// Interpret already-sketched text (for example a model prediction),
    /// counting the symbol words it contains.
    pub fn detect(text: &str, mode: SketchMode, table: &SymbolTable) -> Result<Sketch, LexError> {
        let stream = lexer::tokenize(text)?;
        let anonymous_count =
            stream.tokens.iter().filter(|t| t.kind == TokenKind::Name && table.is_symbol(&t.text)).count();
        Ok(Sketch { text: text.to_string(), stream, anonymous_count, mode, collisions: BTreeSet::new() })
    }
}

pub fn has_anonymous_symbols(sketch: &Sketch) -> bool {
    sketch.anonymous_count > 0
}

/// Tokenize and sketch source text.
pub fn sketch_source(source: &str, mode: SketchMode, table: &SymbolTable) -> Result<Sketch, LexError> {
    Ok(sketch_tokens(&lexer::tokenize(source)?, mode, table))
}

/// Apply the sketching operation to a token stream.
///
/// Every replacement is a single Name token, so the token count never
/// changes. A space is inserted into a gap only where the new word would
/// otherwise fuse with a neighbouring token.
pub fn sketch_tokens(stream: &TokenStream, mode: SketchMode, table: &SymbolTable) -> Sketch {
    let mut out = stream.clone();
    let collisions: BTreeSet<String> = stream
        .tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Name && table.is_symbol(&t.text))
        .map(|t| t.text.clone())
        .collect();

    let mut replacements: Vec<(usize, &str)> = Vec::new();
    if mode.constants() {
        for (i, token) in stream.tokens.iter().enumerate() {
            match token.kind {
                TokenKind::Number if !table.keep_numbers.contains(&token.text) => {
                    replacements.push((i, &table.number_symbol))
                }
                TokenKind::String => replacements.push((i, &table.string_symbol)),
                _ => {}
            }
        }
    }
    if mode.names() {
        let names = classify_names(stream, table);
        for i in names.occurrences {
            let category = names.categories[stream.tokens[i].text.as_str()];
            replacements.push((i, table.name_symbol(category)));
        }
    }
    replacements.sort_unstable_by_key(|(i, _)| *i);

    for &(i, word) in &replacements {
        out.replace(i, TokenKind::Name, word);
    }
    for &(i, _) in &replacements {
        separate_word(&mut out, i);
    }

    Sketch { text: lexer::render(&out), anonymous_count: replacements.len(), stream: out, mode, collisions }
}

/// Ensure the identifier at `i` does not run into its neighbours.
fn separate_word(stream: &mut TokenStream, i: usize) {
    let joins = |c: Option<char>| c.is_some_and(|c| c == '_' || c.is_alphanumeric() || c == '\'' || c == '"');
    if i > 0 && stream.gaps[i].is_empty() && joins(stream.tokens[i - 1].text.chars().last()) {
        stream.gaps[i].push(' ');
    }
    if i + 1 < stream.tokens.len() && stream.gaps[i + 1].is_empty() && joins(stream.tokens[i + 1].text.chars().next()) {
        stream.gaps[i + 1].push(' ');
    }
}

struct NameUses<'a> {
    categories: HashMap<&'a str, NameCategory>,
    occurrences: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Bracket {
    /// Tuple/list display or grouping.
    Group,
    /// Call, subscript, or a def/lambda parameter list.
    Access,
    Params,
}

/// Lexically classify user-defined names and find their replaceable
/// occurrences.
fn classify_names<'a>(stream: &'a TokenStream, table: &SymbolTable) -> NameUses<'a> {
    let tokens = &stream.tokens;
    let mut categories: HashMap<&str, NameCategory> = HashMap::new();
    let mut imported: HashSet<&str> = HashSet::new();
    let mut in_import = vec![false; tokens.len()];
    let mut exempt = vec![false; tokens.len()];

    let candidate = |i: usize| {
        let t = &tokens[i];
        t.kind == TokenKind::Name
            && !is_keyword(&t.text)
            && !table.is_symbol(&t.text)
            && !(i > 0 && tokens[i - 1].is_op("."))
    };

    for stmt in statements(stream) {
        let Some(&first) = stmt.first() else { continue };
        let head = tokens[first].text.as_str();
        if tokens[first].kind == TokenKind::Name && (head == "import" || head == "from") {
            for &i in &stmt {
                in_import[i] = true;
                if tokens[i].kind == TokenKind::Name && !is_keyword(&tokens[i].text) {
                    imported.insert(tokens[i].text.as_str());
                }
            }
            continue;
        }

        let define = |i: usize, category: NameCategory, categories: &mut HashMap<&'a str, NameCategory>| {
            if candidate(i) {
                categories.entry(tokens[i].text.as_str()).or_insert(category);
            }
        };

        // Bracket roles, per statement.
        let mut stack: Vec<Bracket> = Vec::new();
        let mut roles: Vec<Vec<Bracket>> = Vec::with_capacity(stmt.len());
        let mut pending_params = false;
        let mut lambda_depths: Vec<usize> = Vec::new();
        let mut for_depths: Vec<usize> = Vec::new();
        for (pos, &i) in stmt.iter().enumerate() {
            let t = &tokens[i];
            let prev = pos.checked_sub(1).map(|p| &tokens[stmt[p]]);
            if t.kind == TokenKind::Operator {
                match t.text.as_str() {
                    "(" | "[" | "{" => {
                        let accessed = prev.is_some_and(|p| {
                            (p.kind == TokenKind::Name && !is_keyword(&p.text))
                                || p.kind == TokenKind::String
                                || p.is_op(")")
                                || p.is_op("]")
                                || p.is_op("}")
                        });
                        let role = if pending_params && t.text == "(" {
                            pending_params = false;
                            Bracket::Params
                        } else if accessed {
                            Bracket::Access
                        } else {
                            Bracket::Group
                        };
                        stack.push(role);
                    }
                    ")" | "]" | "}" => {
                        stack.pop();
                    }
                    ":" if lambda_depths.last() == Some(&stack.len()) => {
                        lambda_depths.pop();
                    }
                    _ => {}
                }
            }
            roles.push(stack.clone());

            if t.kind != TokenKind::Name {
                continue;
            }
            match t.text.as_str() {
                "def" => {
                    if let Some(&next) = stmt.get(pos + 1) {
                        define(next, NameCategory::Function, &mut categories);
                    }
                    pending_params = true;
                }
                "class" => {
                    if let Some(&next) = stmt.get(pos + 1) {
                        define(next, NameCategory::Class, &mut categories);
                    }
                }
                "lambda" => lambda_depths.push(stack.len()),
                "for" => for_depths.push(stack.len()),
                "in" => {
                    if for_depths.last() == Some(&stack.len()) {
                        for_depths.pop();
                    }
                }
                "as" => {
                    if let Some(&next) = stmt.get(pos + 1) {
                        define(next, NameCategory::Variable, &mut categories);
                    }
                }
                _ => {
                    let next = stmt.get(pos + 1).map(|&n| &tokens[n]);
                    let prev_sep = prev.is_none_or(|p| {
                        p.is_op("(") || p.is_op(",") || p.is_op("*") || p.is_op("**") || p.is_name("lambda")
                    });
                    let next_sep = next.is_none_or(|n| n.is_op(",") || n.is_op(")") || n.is_op("=") || n.is_op(":"));
                    let parameter = prev_sep
                        && next_sep
                        && (stack.last() == Some(&Bracket::Params) || lambda_depths.last() == Some(&stack.len()));
                    let loop_target =
                        !for_depths.is_empty() && next.is_none_or(|n| !n.is_op(".") && !n.is_op("(") && !n.is_op("["));
                    let walrus = next.is_some_and(|n| n.is_op(":="));
                    if parameter || loop_target || walrus {
                        define(i, NameCategory::Variable, &mut categories);
                    }
                    // Keyword arguments name the callee's parameters.
                    if stack.last() == Some(&Bracket::Access) && next.is_some_and(|n| n.is_op("=")) {
                        exempt[i] = true;
                    }
                }
            }
        }

        // Assignment targets: every segment before the last top-level '='.
        let top_level_eq: Vec<usize> = stmt
            .iter()
            .enumerate()
            .filter(|(pos, &i)| {
                roles[*pos].is_empty()
                    && tokens[i].kind == TokenKind::Operator
                    && (tokens[i].text == "=" || is_augmented(&tokens[i].text))
            })
            .map(|(pos, _)| pos)
            .collect();
        let annotated = tokens[first].kind == TokenKind::Name
            && !is_keyword(head)
            && stmt.get(1).is_some_and(|&n| tokens[n].is_op(":"));
        let target_end = match (top_level_eq.last(), annotated) {
            (_, true) => Some(1),
            (Some(&last), false) => Some(last),
            (None, false) => None,
        };
        if let Some(end) = target_end {
            for pos in 0..end {
                let i = stmt[pos];
                if tokens[i].kind != TokenKind::Name || !roles[pos].iter().all(|b| *b == Bracket::Group) {
                    continue;
                }
                let next = stmt.get(pos + 1).map(|&n| &tokens[n]);
                if next.is_some_and(|n| n.is_op(".") || n.is_op("(") || n.is_op("[")) {
                    continue;
                }
                define(i, NameCategory::Variable, &mut categories);
            }
        }
    }

    for name in &imported {
        categories.remove(name);
    }
    let occurrences = (0..tokens.len())
        .filter(|&i| candidate(i) && !in_import[i] && !exempt[i] && categories.contains_key(tokens[i].text.as_str()))
        .collect();
    NameUses { categories, occurrences }
}

fn is_augmented(op: &str) -> bool {
    op.len() >= 2 && op.ends_with('=') && !matches!(op, "==" | "!=" | "<=" | ">=" | ":=")
}

/// Token indices of each simple statement, without comments or layout
/// tokens. Statements are separated by Newline and top-level `;`.
fn statements(stream: &TokenStream) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut depth = 0usize;
    for (i, t) in stream.tokens.iter().enumerate() {
        match t.kind {
            TokenKind::Comment | TokenKind::Indent | TokenKind::Dedent => {}
            TokenKind::Newline | TokenKind::EndMarker => {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
                depth = 0;
            }
            TokenKind::Operator if t.text == ";" && depth == 0 => {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
            }
            _ => {
                if t.kind == TokenKind::Operator {
                    match t.text.as_str() {
                        "(" | "[" | "{" => depth += 1,
                        ")" | "]" | "}" => depth = depth.saturating_sub(1),
                        _ => {}
                    }
                }
                // A compound header's body on the same line starts a new statement.
                if t.is_op(":") && depth == 0 && starts_compound(stream, &current) {
                    current.push(i);
                    out.push(std::mem::take(&mut current));
                    continue;
                }
                current.push(i);
            }
        }
    }
    out
}

fn starts_compound(stream: &TokenStream, stmt: &[usize]) -> bool {
    let Some(&first) = stmt.first() else { return false };
    let head = &stream.tokens[first];
    let mut lambdas = 0usize;
    let mut colons = 0usize;
    for &i in stmt {
        let t = &stream.tokens[i];
        if t.is_name("lambda") {
            lambdas += 1;
        } else if t.is_op(":") {
            colons += 1;
        }
    }
    // Colons already consumed by lambdas do not end a header.
    if lambdas > colons {
        return false;
    }
    head.kind == TokenKind::Name
        && matches!(
            head.text.as_str(),
            "def"
                | "class"
                | "if"
                | "elif"
                | "else"
                | "for"
                | "while"
                | "try"
                | "except"
                | "finally"
                | "with"
                | "async"
        )
}

/// Canonical form used for voting and exact match: one logical line per
/// row, indentation as four spaces per level, tokens joined by single
/// spaces, comments dropped.
pub fn normalize(text: &str) -> Result<String, LexError> {
    let stream = lexer::tokenize(text)?;
    let mut lines: Vec<String> = Vec::new();
    let mut level = 0usize;
    let mut current: Vec<&str> = Vec::new();
    for t in &stream.tokens {
        match t.kind {
            TokenKind::Indent => level += 1,
            TokenKind::Dedent => level = level.saturating_sub(1),
            TokenKind::Comment | TokenKind::EndMarker => {}
            TokenKind::Newline => {
                if !current.is_empty() {
                    lines.push(format!("{}{}", "    ".repeat(level), current.join(" ")));
                    current.clear();
                }
            }
            _ => current.push(&t.text),
        }
    }
    if !current.is_empty() {
        lines.push(format!("{}{}", "    ".repeat(level), current.join(" ")));
    }
    Ok(lines.join("\n").trim_end().to_string())
}

/// Voting key: the normalized text, or collapsed whitespace for
/// candidates that do not lex.
fn vote_key(candidate: &str) -> String {
    normalize(candidate).unwrap_or_else(|_| candidate.split_whitespace().collect::<Vec<_>>().join(" "))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteOutcome {
    /// Winning normalized text.
    pub normalized: String,
    /// Earliest raw candidate in the winning class.
    pub representative: String,
    pub votes: usize,
}

/// Modal normalized candidate; ties go to the lexicographically smallest.
pub fn vote<S: AsRef<str>>(candidates: &[S]) -> Result<String, SketchError> {
    vote_with_representative(candidates).map(|v| v.normalized)
}

pub fn vote_with_representative<S: AsRef<str>>(candidates: &[S]) -> Result<VoteOutcome, SketchError> {
    let mut classes: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (index, candidate) in candidates.iter().enumerate() {
        let entry = classes.entry(vote_key(candidate.as_ref())).or_insert((0, index));
        entry.0 += 1;
    }
    let mut best: Option<(&String, usize, usize)> = None;
    for (key, &(count, first)) in &classes {
        if best.is_none_or(|(_, c, _)| count > c) {
            best = Some((key, count, first));
        }
    }
    let (key, votes, first) = best.ok_or(SketchError::EmptyCandidateList)?;
    Ok(VoteOutcome { normalized: key.clone(), representative: candidates[first].as_ref().to_string(), votes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sk(src: &str, mode: SketchMode) -> Sketch {
        sketch_source(src, mode, &SymbolTable::default()).unwrap()
    }

    #[test]
    fn string_constant_becomes_symbol() {
        let s = sk("x = 'user_1'\n", SketchMode::ConstantsOnly);
        assert_eq!(s.text, "x = string\n");
        assert_eq!(s.anonymous_count, 1);
    }

    #[test]
    fn small_integers_survive() {
        let s = sk("s = pd.Series([[2.5]*3])\n", SketchMode::ConstantsOnly);
        assert_eq!(s.text, "s = pd.Series([[number]*3])\n");
    }

    #[test]
    fn literal_free_input_is_fixed_point() {
        let src = "import numpy as np\ny = np.zeros(x)\n";
        let s = sk(src, SketchMode::ConstantsOnly);
        assert_eq!(s.text, src);
        assert_eq!(s.anonymous_count, 0);
        assert!(!has_anonymous_symbols(&s));
    }

    #[test]
    fn anonymous_symbol_flag() {
        assert!(has_anonymous_symbols(&sk("x = 'a'", SketchMode::ConstantsOnly)));
        assert!(!has_anonymous_symbols(&sk("import numpy", SketchMode::ConstantsOnly)));
        let predicted =
            Sketch::detect("out = np.ones(number)", SketchMode::ConstantsOnly, &SymbolTable::default()).unwrap();
        assert!(has_anonymous_symbols(&predicted));
        let complete = Sketch::detect("out = np.ones(3)", SketchMode::ConstantsOnly, &SymbolTable::default()).unwrap();
        assert!(!has_anonymous_symbols(&complete));
    }

    #[test]
    fn fused_neighbours_get_a_space() {
        let s = sk("x = 1.5if y else'a'\n", SketchMode::ConstantsOnly);
        assert_eq!(s.text, "x = number if y else string\n");
        assert_eq!(lexer::tokenize(&s.text).unwrap().len(), s.stream.len());
    }

    #[test]
    fn names_mode_replaces_user_names_consistently() {
        let src = "import pandas as pd\n\ndef load(path, sep=','):\n    frame = pd.read_csv(path, sep=sep)\n    return frame\n\nclass Box:\n    pass\n\nresult = load('a.csv')\nfor row in result.itertuples():\n    print(row)\n";
        let s = sk(src, SketchMode::NamesOnly);
        let expected = "import pandas as pd\n\ndef function(variable, variable=','):\n    variable = pd.read_csv(variable, sep=variable)\n    return variable\n\nclass klass:\n    pass\n\nvariable = function('a.csv')\nfor variable in variable.itertuples():\n    print(variable)\n";
        assert_eq!(s.text, expected);
        // Attribute and keyword-argument names are left alone.
        assert!(s.text.contains("pd.read_csv"));
        assert!(s.text.contains("sep=variable"));
    }

    #[test]
    fn names_and_constants() {
        let s = sk("total = compute(7, 'x')\n", SketchMode::NamesAndConstants);
        assert_eq!(s.text, "variable = compute(number, string)\n");
        assert_eq!(s.anonymous_count, 3);
    }

    #[test]
    fn imported_names_are_never_renamed() {
        let s = sk("from os import path\npath = path.join('a')\n", SketchMode::NamesOnly);
        assert_eq!(s.text, "from os import path\npath = path.join('a')\n");
    }

    #[test]
    fn subscript_and_attribute_targets_are_not_definitions() {
        let s = sk("df['a'] = 1\ndf.x = 2\n", SketchMode::NamesOnly);
        assert_eq!(s.text, "df['a'] = 1\ndf.x = 2\n");
        let s = sk("a, (b, c) = t\n", SketchMode::NamesOnly);
        assert_eq!(s.text, "variable, (variable, variable) = t\n");
    }

    #[test]
    fn lambda_walrus_and_with_targets() {
        let s =
            sk("f = lambda q: q + 1\nif (m := g()):\n    pass\nwith open(p) as fh:\n    pass\n", SketchMode::NamesOnly);
        assert_eq!(
            s.text,
            "variable = lambda variable: variable + 1\nif (variable := g()):\n    pass\nwith open(p) as variable:\n    pass\n"
        );
    }

    #[test]
    fn idempotent_in_every_mode() {
        let src = "def f(a, b=2.5):\n    s = 'x' + str(a)\n    return s * 40\n";
        for mode in [SketchMode::ConstantsOnly, SketchMode::NamesOnly, SketchMode::NamesAndConstants] {
            let once = sk(src, mode);
            let twice = sk(&once.text, mode);
            assert_eq!(once.text, twice.text, "{mode}");
        }
    }

    #[test]
    fn collisions_are_flagged() {
        let s = sk("number = 5\n", SketchMode::ConstantsOnly);
        assert_eq!(s.text, "number = number\n");
        assert!(s.collisions.contains("number"));
    }

    #[test]
    fn symbol_table_validation() {
        assert!(SymbolTable::default().validate().is_ok());
        let t = SymbolTable { string_symbol: "number".into(), ..SymbolTable::default() };
        assert_eq!(t.validate(), Err(SketchError::DuplicateSymbol("number".into())));
        let t = SymbolTable { number_symbol: "class".into(), ..SymbolTable::default() };
        assert_eq!(t.validate(), Err(SketchError::InvalidSymbol("class".into())));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize("x  =  1").unwrap(), "x = 1");
        assert_eq!(normalize("x = 1  # c").unwrap(), "x = 1");
        assert_eq!(normalize("").unwrap(), "");
        assert_eq!(normalize("  \n\n").unwrap(), "");
        assert_eq!(normalize("if a:\n  b(1,\n    2)\nc").unwrap(), "if a :\n    b ( 1 , 2 )\nc");
        assert!(normalize("x = 'oops").is_err());
    }

    #[test]
    fn voting() {
        assert_eq!(vote(&["a = 1", "b = 2", "a = 1"]).unwrap(), "a = 1");
        assert_eq!(vote(&["b = 2", "a = 1"]).unwrap(), "a = 1");
        assert_eq!(vote::<&str>(&[]), Err(SketchError::EmptyCandidateList));
        let v = vote_with_representative(&["x  =  1  # first", "y = 2", "x = 1"]).unwrap();
        assert_eq!(v.normalized, "x = 1");
        assert_eq!(v.representative, "x  =  1  # first");
        assert_eq!(v.votes, 2);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("constants".parse::<SketchMode>().unwrap(), SketchMode::ConstantsOnly);
        assert_eq!("names-constants".parse::<SketchMode>().unwrap(), SketchMode::NamesAndConstants);
        assert!("bogus".parse::<SketchMode>().is_err());
        assert_eq!(SketchMode::default(), SketchMode::ConstantsOnly);
    }
}
