//! Rule-based named-entity tagging: gazetteer lookup, four-digit years and
//! capitalized-word runs, in that priority order.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{NerMode, PreprocessedDoc, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EntityLabel {
    Person,
    Org,
    Loc,
    Date,
    Misc,
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityLabel::Person => "PERSON",
            EntityLabel::Org => "ORG",
            EntityLabel::Loc => "LOC",
            EntityLabel::Date => "DATE",
            EntityLabel::Misc => "MISC",
        })
    }
}

impl FromStr for EntityLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "PERSON" => Ok(EntityLabel::Person),
            "ORG" => Ok(EntityLabel::Org),
            "LOC" => Ok(EntityLabel::Loc),
            "DATE" => Ok(EntityLabel::Date),
            "MISC" => Ok(EntityLabel::Misc),
            other => Err(format!("unknown entity label {other:?}")),
        }
    }
}

/// Where a span came from; useful when debugging tagging decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpanSource {
    Gazetteer,
    YearPattern,
    CapitalRun,
}

/// Inclusive token-position range carrying one entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: EntityLabel,
    pub source: SpanSource,
}

impl EntitySpan {
    /// Number of tokens covered; spans are never empty.
    pub fn token_count(&self) -> usize {
        self.end - self.start + 1
    }

    fn contains(&self, position: usize) -> bool {
        self.start <= position && position <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct GazetteerEntry {
    label: EntityLabel,
    surface: String,
    words: Vec<String>,
}

/// Known entity surface forms, matched case-sensitively against consecutive
/// token surfaces.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
}

impl Gazetteer {
    /// Parses `LABEL<TAB>surface form` lines; `#` comments and blank lines are
    /// skipped. Labels are PERSON, ORG or LOC.
    pub fn parse(src: &str, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                file: origin.to_string(),
                line: i + 1,
                msg,
            };
            let (label, surface) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected `LABEL<TAB>surface form`".to_string()))?;
            let label = match label.trim() {
                "PERSON" => EntityLabel::Person,
                "ORG" => EntityLabel::Org,
                "LOC" => EntityLabel::Loc,
                other => return Err(parse_err(format!("unknown gazetteer label {other:?}"))),
            };
            let surface = surface.trim();
            let words: Vec<String> = surface.split_whitespace().map(str::to_string).collect();
            if words.is_empty() {
                return Err(parse_err("empty surface form".to_string()));
            }
            entries.push(GazetteerEntry {
                label,
                surface: surface.to_string(),
                words,
            });
        }
        Ok(Gazetteer { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src, &path.display().to_string())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Stable `LABEL<TAB>surface` lines, sorted; the canonical form hashed
    /// into the options fingerprint and stored in the index.
    pub fn canonical_lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .entries
            .iter()
            .map(|e| format!("{}\t{}", e.label, e.surface))
            .collect();
        lines.sort();
        lines.dedup();
        lines
    }

    /// Rebuilds a gazetteer from canonical lines stored in an index.
    pub fn from_canonical_lines(lines: &[String]) -> Result<Self> {
        Self::parse(&lines.join("\n"), "index gazetteer")
    }
}

fn is_year(surface: &str) -> bool {
    surface.len() == 4
        && surface.chars().all(|c| c.is_ascii_digit())
        && matches!(surface.parse::<u32>(), Ok(y) if (1500..=2099).contains(&y))
}

fn is_capitalized(surface: &str) -> bool {
    surface.chars().next().is_some_and(|c| c.is_uppercase())
}

/// Tags entities over the full token stream. Priority: gazetteer matches,
/// then standalone years (DATE), then runs of two or more capitalized
/// non-stopwords (MISC). Within a tier, overlaps resolve longest-first, then
/// leftmost. Returned spans are disjoint and sorted by start.
pub fn tag_entities(
    tokens: &[Token],
    gazetteer: &Gazetteer,
    stopwords: &HashSet<String>,
) -> Vec<EntitySpan> {
    let mut claimed = vec![false; tokens.len()];
    let mut spans: Vec<EntitySpan> = Vec::new();

    let claim = |span: EntitySpan, claimed: &mut Vec<bool>, spans: &mut Vec<EntitySpan>| {
        if (span.start..=span.end).any(|i| claimed[i]) {
            return;
        }
        for slot in &mut claimed[span.start..=span.end] {
            *slot = true;
        }
        spans.push(span);
    };

    // Tier 1: gazetteer, longest match first, ties to the earliest start.
    let mut candidates: Vec<EntitySpan> = Vec::new();
    for entry in &gazetteer.entries {
        let len = entry.words.len();
        if len == 0 || len > tokens.len() {
            continue;
        }
        for start in 0..=(tokens.len() - len) {
            let matches = entry
                .words
                .iter()
                .zip(&tokens[start..start + len])
                .all(|(w, t)| *w == t.surface);
            if matches {
                candidates.push(EntitySpan {
                    start,
                    end: start + len - 1,
                    label: entry.label,
                    source: SpanSource::Gazetteer,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.token_count()
            .cmp(&a.token_count())
            .then(a.start.cmp(&b.start))
            .then(a.label.cmp(&b.label))
    });
    for c in candidates {
        claim(c, &mut claimed, &mut spans);
    }

    // Tier 2: standalone four-digit years on unclaimed tokens.
    for (i, t) in tokens.iter().enumerate() {
        if !claimed[i] && is_year(&t.surface) {
            claim(
                EntitySpan {
                    start: i,
                    end: i,
                    label: EntityLabel::Date,
                    source: SpanSource::YearPattern,
                },
                &mut claimed,
                &mut spans,
            );
        }
    }

    // Tier 3: maximal runs of >= 2 capitalized non-stopwords on unclaimed
    // tokens.
    let eligible = |claimed: &[bool], i: usize| {
        !claimed[i] && is_capitalized(&tokens[i].surface) && !stopwords.contains(&tokens[i].lower)
    };
    let mut i = 0;
    while i < tokens.len() {
        if !eligible(&claimed, i) {
            i += 1;
            continue;
        }
        let start = i;
        while i < tokens.len() && eligible(&claimed, i) {
            i += 1;
        }
        if i - start >= 2 {
            claim(
                EntitySpan {
                    start,
                    end: i - 1,
                    label: EntityLabel::Misc,
                    source: SpanSource::CapitalRun,
                },
                &mut claimed,
                &mut spans,
            );
        }
    }

    spans.sort_by_key(|s| s.start);
    spans
}

/// Writes span labels onto the tokens they cover. Span bounds refer to token
/// positions, which equal indices on a freshly tokenized stream.
pub fn apply_labels(tokens: &mut [Token], spans: &[EntitySpan]) {
    for t in tokens.iter_mut() {
        if let Some(span) = spans.iter().find(|s| s.contains(t.position)) {
            t.entity_label = Some(span.label);
        }
    }
}

/// Returns a copy of the document with every token inside any span removed
/// and `ner_mode` switched to `exclude`. Positions are not renumbered, so the
/// result is a subsequence of the input.
pub fn exclude_entities(doc: &PreprocessedDoc, spans: &[EntitySpan]) -> PreprocessedDoc {
    PreprocessedDoc {
        doc_id: doc.doc_id.clone(),
        tokens: doc
            .tokens
            .iter()
            .filter(|t| !spans.iter().any(|s| s.contains(t.position)))
            .cloned()
            .collect(),
        options: doc.options.with_ner_mode(NerMode::Exclude),
    }
}
