//! The six similarity algorithms behind one dispatcher.
//!
//! Every algorithm maps a (query, target) pair to a score in [0, 1]. The
//! empty-input policy is uniform: if either side has no usable content the
//! score is 0.0 and an [`Warning::EmptyComparison`] is attached instead of
//! erroring, so one hollow document cannot abort a whole report.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embed::{embed_similarity, Embedder};
use crate::error::{Error, Result};
use crate::index::IndexSide;
use crate::preprocess::PreprocessedDoc;
use crate::vectorspace::{project_query, tf_vector_of_lemmas, tfidf_from_tf, TermVector};
use crate::wordnet::{Lexicon, Measure};

/// The similarity algorithms, in canonical report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmId {
    Jaccard,
    Cosine,
    Tfidf,
    Lsa,
    Embed,
    Wordnet,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 6] = [
        AlgorithmId::Jaccard,
        AlgorithmId::Cosine,
        AlgorithmId::Tfidf,
        AlgorithmId::Lsa,
        AlgorithmId::Embed,
        AlgorithmId::Wordnet,
    ];

    /// Identifier used in CSV/JSON output and on the command line.
    pub fn key(&self) -> &'static str {
        match self {
            AlgorithmId::Jaccard => "jaccard",
            AlgorithmId::Cosine => "cosine",
            AlgorithmId::Tfidf => "tfidf",
            AlgorithmId::Lsa => "lsa",
            AlgorithmId::Embed => "embed",
            AlgorithmId::Wordnet => "wordnet",
        }
    }

    /// Human-facing column title for the table renderer.
    pub fn title(&self) -> &'static str {
        match self {
            AlgorithmId::Jaccard => "Jaccard",
            AlgorithmId::Cosine => "Cosine",
            AlgorithmId::Tfidf => "TF-IDF",
            AlgorithmId::Lsa => "LSA",
            AlgorithmId::Embed => "BERT",
            AlgorithmId::Wordnet => "WordNet",
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "jaccard" => Ok(AlgorithmId::Jaccard),
            "cosine" => Ok(AlgorithmId::Cosine),
            "tfidf" | "tf-idf" => Ok(AlgorithmId::Tfidf),
            "lsa" => Ok(AlgorithmId::Lsa),
            "embed" | "bert" => Ok(AlgorithmId::Embed),
            "wordnet" => Ok(AlgorithmId::Wordnet),
            other => Err(Error::UnknownAlgorithm(other.to_string())),
        }
    }
}

/// Non-fatal conditions attached to a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    /// Query or target contributed no usable content; score forced to 0.0.
    EmptyComparison,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::EmptyComparison => f.write_str("empty comparison"),
        }
    }
}

/// A similarity in [0, 1] plus an optional warning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub warning: Option<Warning>,
}

impl SimilarityScore {
    pub fn new(value: f64) -> Self {
        debug_assert!(
            (0.0..=1.0).contains(&value) || value.is_nan(),
            "score out of range: {value}"
        );
        SimilarityScore {
            value,
            warning: None,
        }
    }

    pub fn empty() -> Self {
        SimilarityScore {
            value: 0.0,
            warning: Some(Warning::EmptyComparison),
        }
    }
}

/// Jaccard coefficient over two lemma sets: `|A ∩ B| / |A ∪ B|`.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    inter / union
}

/// Cosine similarity of two sparse term vectors; zero vectors score 0.0.
pub fn cosine(a: &TermVector, b: &TermVector) -> f64 {
    if a.is_zero() || b.is_zero() {
        return 0.0;
    }
    // Weights are non-negative, so the true value sits in [0, 1]; clamp the
    // one-ulp overshoot rounding can produce (e.g. on u == v).
    (a.dot(b) / (a.norm() * b.norm())).clamp(0.0, 1.0)
}

/// What the query is compared against.
pub enum Target {
    /// A single corpus document, by position in the index side.
    Doc(usize),
    /// The concatenation of every corpus document (pooled mode).
    Pool,
}

/// Precomputed query-side artifacts reused across algorithms and targets.
pub struct QueryArtifacts {
    pub doc: PreprocessedDoc,
    pub lemma_set: BTreeSet<String>,
    pub tf: TermVector,
    pub tfidf: TermVector,
    pub latent: Vec<f64>,
    pub embedding: Vec<f64>,
}

/// Everything needed to score a query against one index side.
pub struct ScoreContext<'a> {
    pub side: &'a IndexSide,
    pub lexicon: &'a Lexicon,
    pub embedder: &'a Embedder,
    pub measure: Measure,
}

impl<'a> ScoreContext<'a> {
    /// Prepares query artifacts against this side's vector space.
    pub fn prepare_query(&self, doc: PreprocessedDoc) -> Result<QueryArtifacts> {
        if doc.options != self.side.options {
            return Err(Error::OptionsMismatch(format!(
                "query preprocessed with {:?} but index side was built with {:?}",
                doc.options, self.side.options
            )));
        }
        let lemma_set = doc.lemma_set();
        let lemmas = doc.lemmas();
        let tf = tf_vector_of_lemmas(&lemmas, &self.side.vocabulary);
        let tfidf = tfidf_from_tf(&tf, &self.side.vocabulary);
        let latent = project_query(&tf, &self.side.latent);
        let embedding = self.embedder.embed_lemmas(&lemmas)?;
        Ok(QueryArtifacts {
            doc,
            lemma_set,
            tf,
            tfidf,
            latent,
            embedding,
        })
    }

    /// Scores one algorithm for the query against the target.
    pub fn score(
        &self,
        algorithm: AlgorithmId,
        query: &QueryArtifacts,
        target: &Target,
    ) -> Result<SimilarityScore> {
        let query_empty = query.doc.is_empty();
        let target_empty = match target {
            Target::Doc(i) => self.side.docs[*i].is_empty(),
            Target::Pool => self.side.docs.iter().all(|d| d.is_empty()),
        };
        if query_empty || target_empty {
            return Ok(SimilarityScore::empty());
        }
        let value = match algorithm {
            AlgorithmId::Jaccard => {
                let target_set = self.target_lemma_set(target);
                jaccard(&query.lemma_set, &target_set)
            }
            AlgorithmId::Cosine => cosine(&query.tf, &self.target_tf(target)),
            AlgorithmId::Tfidf => cosine(&query.tfidf, &self.target_tfidf(target)),
            AlgorithmId::Lsa => {
                let target_latent = self.target_latent(target);
                latent_cosine(&query.latent, &target_latent)
            }
            AlgorithmId::Embed => {
                let target_embedding = self.target_embedding(target)?;
                embed_similarity(&query.embedding, &target_embedding)?
            }
            AlgorithmId::Wordnet => {
                let target_set = self.target_lemma_set(target);
                let (sim, empty) =
                    self.lexicon
                        .doc_similarity(&query.lemma_set, &target_set, self.measure);
                if empty {
                    return Ok(SimilarityScore::empty());
                }
                sim
            }
        };
        Ok(SimilarityScore::new(value))
    }

    fn target_lemma_set(&self, target: &Target) -> BTreeSet<String> {
        match target {
            Target::Doc(i) => self.side.docs[*i].lemma_set(),
            Target::Pool => self.side.docs.iter().flat_map(|d| d.lemma_set()).collect(),
        }
    }

    fn pooled_lemmas(&self) -> Vec<String> {
        self.side.docs.iter().flat_map(|d| d.lemmas()).collect()
    }

    fn target_tf(&self, target: &Target) -> TermVector {
        match target {
            Target::Doc(i) => self.side.tf[*i].clone(),
            Target::Pool => tf_vector_of_lemmas(&self.pooled_lemmas(), &self.side.vocabulary),
        }
    }

    fn target_tfidf(&self, target: &Target) -> TermVector {
        match target {
            Target::Doc(i) => self.side.tfidf[*i].clone(),
            Target::Pool => tfidf_from_tf(&self.target_tf(target), &self.side.vocabulary),
        }
    }

    fn target_latent(&self, target: &Target) -> Vec<f64> {
        match target {
            Target::Doc(i) => self.side.latent.doc_latent[*i].clone(),
            Target::Pool => project_query(&self.target_tf(target), &self.side.latent),
        }
    }

    fn target_embedding(&self, target: &Target) -> Result<Vec<f64>> {
        match target {
            Target::Doc(i) => self.embedder.embed_doc(&self.side.docs[*i]),
            Target::Pool => self.embedder.embed_lemmas(&self.pooled_lemmas()),
        }
    }
}

/// Cosine between latent vectors, clamped to [0, 1]: LSA coordinates are not
/// sign-canonical, so small negative cosines can occur and are floored.
pub fn latent_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}
