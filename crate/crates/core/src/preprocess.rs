//! Text preprocessing pipeline: reference stripping, tokenization, entity
//! tagging, stopword removal and rule-based lemmatization.
//!
//! The pipeline order is fixed: `strip_references` -> `tokenize` -> entity
//! tagging -> stopword removal -> lemmatization. Entity tagging must see the
//! raw token sequence (entity names may contain stopwords), so it runs before
//! any token is dropped.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ExtractedText;
use crate::ner::{self, EntityLabel, Gazetteer};

/// Embedded default stopword list, one word per line.
pub const STOPWORDS_TXT: &str = include_str!("../resources/stopwords.txt");
/// Embedded irregular-form lemma table, `surface<TAB>lemma` per line.
pub const LEMMA_EXCEPTIONS_TXT: &str = include_str!("../resources/lemma_exceptions.txt");

/// Whether entity tokens are kept (`include`) or dropped (`exclude`) before
/// scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NerMode {
    Include,
    Exclude,
}

impl fmt::Display for NerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NerMode::Include => "include",
            NerMode::Exclude => "exclude",
        })
    }
}

impl FromStr for NerMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "include" => Ok(NerMode::Include),
            "exclude" => Ok(NerMode::Exclude),
            other => Err(format!(
                "unknown ner mode {other:?} (expected include or exclude)"
            )),
        }
    }
}

/// Records which pipeline steps ran. Two documents are comparable only when
/// their options are identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    pub strip_refs: bool,
    pub stopwords: bool,
    pub lemmatize: bool,
    pub ner_mode: NerMode,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            strip_refs: true,
            stopwords: true,
            lemmatize: true,
            ner_mode: NerMode::Include,
        }
    }
}

impl PreprocessOptions {
    pub fn with_ner_mode(mut self, mode: NerMode) -> Self {
        self.ner_mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lower: String,
    pub lemma: String,
    /// Ordinal in the tokenized stream. Later pipeline stages drop tokens but
    /// never renumber, so positions strictly increase with possible gaps.
    pub position: usize,
    pub is_stopword: bool,
    pub entity_label: Option<EntityLabel>,
}

impl Token {
    fn new(surface: String, position: usize) -> Self {
        let lower = surface.to_lowercase();
        Token {
            lemma: lower.clone(),
            lower,
            surface,
            position,
            is_stopword: false,
            entity_label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessedDoc {
    pub doc_id: String,
    pub tokens: Vec<Token>,
    pub options: PreprocessOptions,
}

impl PreprocessedDoc {
    pub fn lemmas(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.lemma.clone()).collect()
    }

    pub fn lemma_set(&self) -> BTreeSet<String> {
        self.tokens.iter().map(|t| t.lemma.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Stopword list, lemma exceptions and gazetteer used by the pipeline.
#[derive(Debug, Clone, Default)]
pub struct PreprocessContext {
    pub stopwords: HashSet<String>,
    pub lemma_exceptions: HashMap<String, String>,
    pub gazetteer: Gazetteer,
}

impl PreprocessContext {
    /// Embedded resources and an empty gazetteer.
    pub fn embedded() -> Self {
        PreprocessContext {
            stopwords: parse_stopwords(STOPWORDS_TXT),
            lemma_exceptions: parse_lemma_exceptions(LEMMA_EXCEPTIONS_TXT)
                .expect("embedded lemma table is well-formed"),
            gazetteer: Gazetteer::default(),
        }
    }

    pub fn with_gazetteer(gazetteer: Gazetteer) -> Self {
        PreprocessContext {
            gazetteer,
            ..Self::embedded()
        }
    }
}

fn parse_stopwords(src: &str) -> HashSet<String> {
    src.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn parse_lemma_exceptions(src: &str) -> Result<HashMap<String, String>> {
    parse_lemma_exceptions_named(src, "lemma_exceptions.txt")
}

fn parse_lemma_exceptions_named(src: &str, origin: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (i, line) in src.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (surface, lemma) = line.split_once('\t').ok_or_else(|| Error::Parse {
            file: origin.to_string(),
            line: i + 1,
            msg: "expected `surface<TAB>lemma`".to_string(),
        })?;
        map.insert(surface.trim().to_string(), lemma.trim().to_string());
    }
    Ok(map)
}

/// Loads a stopword list (one word per line, `#` comments allowed).
pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stopwords(&src))
}

/// Loads an irregular-form lemma table (`surface<TAB>lemma` per line).
pub fn load_lemma_exceptions(path: &Path) -> Result<HashMap<String, String>> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lemma_exceptions_named(&src, &path.display().to_string())
}

static BRACKET_CITATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[\s*\d+(?:\s*[,-]\s*\d+)*\s*\]").unwrap());
static PARENTHETICAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\([^()]*\)").unwrap());
static YEAR_1500_2099: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(1[5-9]\d\d|20\d\d)\b").unwrap());

/// Removes bracketed numeric citations (`[12]`, `[3,4]`, `[1-5]`) and
/// parenthesized author-year citations (any parenthetical containing a
/// four-digit year in 1500..=2099). Applied to a fixpoint so the result is
/// idempotent even when a removal re-joins text into a new citation shape.
pub fn strip_references(text: &str) -> String {
    let mut cur = text.to_string();
    loop {
        let next = strip_once(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

fn strip_once(text: &str) -> String {
    let no_brackets = BRACKET_CITATION.replace_all(text, "");
    PARENTHETICAL
        .replace_all(&no_brackets, |caps: &regex::Captures<'_>| {
            let inner = &caps[0];
            if YEAR_1500_2099.is_match(inner) {
                String::new()
            } else {
                inner.to_string()
            }
        })
        .into_owned()
}

/// Splits text into maximal runs of Unicode letters and digits. Everything
/// else separates tokens and is discarded.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(Token::new(std::mem::take(&mut current), tokens.len()));
        }
    }
    if !current.is_empty() {
        tokens.push(Token::new(current, tokens.len()));
    }
    tokens
}

/// Drops tokens whose lower form is on the stopword list. Tokens inside an
/// entity span are kept: the span is a unit and may legitimately contain
/// words like "of". Dropped-or-kept status is recorded on `is_stopword`.
pub fn remove_stopwords(tokens: Vec<Token>, stopwords: &HashSet<String>) -> Vec<Token> {
    tokens
        .into_iter()
        .filter_map(|mut t| {
            t.is_stopword = stopwords.contains(&t.lower);
            if t.is_stopword && t.entity_label.is_none() {
                None
            } else {
                Some(t)
            }
        })
        .collect()
}

/// Assigns `lemma` to every token from the exception table and an ordered
/// suffix-rule list.
pub fn lemmatize(tokens: &mut [Token], exceptions: &HashMap<String, String>) {
    for t in tokens {
        t.lemma = lemma_of(&t.lower, exceptions);
    }
}

/// Single-pass lemmatizer: the exception table wins, then the first matching
/// suffix rule applies.
pub fn lemma_of(lower: &str, exceptions: &HashMap<String, String>) -> String {
    if let Some(lemma) = exceptions.get(lower) {
        return lemma.clone();
    }
    let n = lower.chars().count();
    if let Some(stem) = lower.strip_suffix("sses") {
        return format!("{stem}ss");
    }
    if n >= 4 {
        if let Some(stem) = lower.strip_suffix("ies") {
            return format!("{stem}y");
        }
    }
    if lower.ends_with("ches") || lower.ends_with("shes") {
        return lower[..lower.len() - 2].to_string();
    }
    if n > 3 && lower.ends_with('s') && !lower.ends_with("ss") {
        return lower[..lower.len() - 1].to_string();
    }
    if n >= 6 {
        if let Some(stem) = lower.strip_suffix("ing") {
            return undouble(stem);
        }
    }
    if n >= 5 {
        if let Some(stem) = lower.strip_suffix("ed") {
            return undouble(stem);
        }
    }
    lower.to_string()
}

/// Collapses a doubled final consonant left behind by suffix removal
/// ("running" -> "runn" -> "run").
fn undouble(stem: &str) -> String {
    let chars: Vec<char> = stem.chars().collect();
    if chars.len() >= 2 {
        let last = chars[chars.len() - 1];
        if last == chars[chars.len() - 2]
            && last.is_alphabetic()
            && !matches!(last, 'a' | 'e' | 'i' | 'o' | 'u')
        {
            return chars[..chars.len() - 1].iter().collect();
        }
    }
    stem.to_string()
}

/// Runs the full pipeline on one extracted text.
pub fn preprocess(
    text: &ExtractedText,
    options: PreprocessOptions,
    ctx: &PreprocessContext,
) -> PreprocessedDoc {
    let raw = if options.strip_refs {
        strip_references(&text.raw_text)
    } else {
        text.raw_text.clone()
    };
    let mut tokens = tokenize(&raw);
    let spans = ner::tag_entities(&tokens, &ctx.gazetteer, &ctx.stopwords);
    ner::apply_labels(&mut tokens, &spans);
    if options.stopwords {
        tokens = remove_stopwords(tokens, &ctx.stopwords);
    }
    if options.lemmatize {
        lemmatize(&mut tokens, &ctx.lemma_exceptions);
    }
    let doc = PreprocessedDoc {
        doc_id: text.doc_id.clone(),
        tokens,
        options: options.with_ner_mode(NerMode::Include),
    };
    match options.ner_mode {
        NerMode::Include => doc,
        NerMode::Exclude => ner::exclude_entities(&doc, &spans),
    }
}
