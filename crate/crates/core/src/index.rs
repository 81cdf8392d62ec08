//! Persistent corpus index: preprocessed documents, vocabulary, term
//! vectors and the latent space, built once per corpus side (entities
//! included and excluded) and saved as a single JSON file.
//!
//! The index embeds every resource that shaped it (stopwords, lemma
//! exceptions, gazetteer), so a later `check` reproduces the exact pipeline
//! without relying on files that may have changed on disk. A fingerprint
//! over those inputs detects option drift between indexing and checking.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::EmbedProvider;
use crate::error::{Error, Result};
use crate::ingest::ExtractedText;
use crate::ner::Gazetteer;
use crate::preprocess::{
    preprocess, NerMode, PreprocessContext, PreprocessOptions, PreprocessedDoc,
};
use crate::vectorspace::{
    build_vocabulary, default_rank, doc_term_matrix, tf_vector, tfidf_vectors, truncated_svd,
    LatentIndex, TermVector, Vocabulary, DEFAULT_SVD_TOL,
};
use crate::wordnet::Measure;

/// Bumped whenever the serialized layout changes incompatibly.
pub const INDEX_VERSION: u32 = 1;

/// Everything the indexer lets the operator tune.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub strip_refs: bool,
    pub stopwords: bool,
    pub lemmatize: bool,
    /// Truncated-SVD rank; `None` picks `min(50, n_docs - 1, n_terms)`.
    pub lsa_rank: Option<usize>,
    pub embed: EmbedProvider,
    pub measure: Measure,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            strip_refs: true,
            stopwords: true,
            lemmatize: true,
            lsa_rank: None,
            embed: EmbedProvider::default(),
            measure: Measure::default(),
        }
    }
}

impl IndexConfig {
    /// Preprocessing options for one NER mode under this config.
    pub fn preprocess_options(&self, ner_mode: NerMode) -> PreprocessOptions {
        PreprocessOptions {
            strip_refs: self.strip_refs,
            stopwords: self.stopwords,
            lemmatize: self.lemmatize,
            ner_mode,
        }
    }
}

/// Canonical copies of the text resources the pipeline ran with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexResources {
    /// Sorted stopword list.
    pub stopwords: Vec<String>,
    /// Sorted `(surface, lemma)` irregular-form pairs.
    pub lemma_exceptions: Vec<(String, String)>,
    /// Sorted `LABEL<TAB>surface` gazetteer lines.
    pub gazetteer: Vec<String>,
}

impl IndexResources {
    pub fn from_context(ctx: &PreprocessContext) -> Self {
        let mut stopwords: Vec<String> = ctx.stopwords.iter().cloned().collect();
        stopwords.sort();
        let mut lemma_exceptions: Vec<(String, String)> = ctx
            .lemma_exceptions
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        lemma_exceptions.sort();
        IndexResources {
            stopwords,
            lemma_exceptions,
            gazetteer: ctx.gazetteer.canonical_lines(),
        }
    }

    /// Rebuilds the exact preprocessing context these resources came from.
    pub fn to_context(&self) -> Result<PreprocessContext> {
        Ok(PreprocessContext {
            stopwords: self.stopwords.iter().cloned().collect(),
            lemma_exceptions: self.lemma_exceptions.iter().cloned().collect(),
            gazetteer: Gazetteer::from_canonical_lines(&self.gazetteer)?,
        })
    }
}

/// Fingerprint over everything that shapes the stored artifacts: the
/// preprocessing flags, the LSA rank and the canonical resource contents.
/// Scoring-time knobs (embedding provider, taxonomy measure) are excluded —
/// they can change between `index` and `check` without invalidating the
/// stored vectors.
pub fn options_fingerprint(config: &IndexConfig, resources: &IndexResources) -> String {
    let mut canon = String::new();
    canon.push_str(&format!("v={INDEX_VERSION}\n"));
    canon.push_str(&format!("strip_refs={}\n", config.strip_refs));
    canon.push_str(&format!("stopwords={}\n", config.stopwords));
    canon.push_str(&format!("lemmatize={}\n", config.lemmatize));
    match config.lsa_rank {
        Some(k) => canon.push_str(&format!("lsa_rank={k}\n")),
        None => canon.push_str("lsa_rank=auto\n"),
    }
    canon.push_str("--stopwords--\n");
    for w in &resources.stopwords {
        canon.push_str(w);
        canon.push('\n');
    }
    canon.push_str("--lemma-exceptions--\n");
    for (s, l) in &resources.lemma_exceptions {
        canon.push_str(&format!("{s}\t{l}\n"));
    }
    canon.push_str("--gazetteer--\n");
    for line in &resources.gazetteer {
        canon.push_str(line);
        canon.push('\n');
    }
    let digest = Sha256::digest(canon.as_bytes());
    format!("{digest:x}")
}

/// One NER mode's complete vector space over the corpus. Documents are kept
/// sorted by id so positions are stable and ties break deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSide {
    pub options: PreprocessOptions,
    pub docs: Vec<PreprocessedDoc>,
    pub vocabulary: Vocabulary,
    pub tf: Vec<TermVector>,
    pub tfidf: Vec<TermVector>,
    pub latent: LatentIndex,
}

impl IndexSide {
    /// Builds the vector space for already-preprocessed documents. A side
    /// whose documents are all empty degenerates to a rank-zero space
    /// instead of failing: comparisons against it score 0.0 with a warning.
    pub fn build(mut docs: Vec<PreprocessedDoc>, lsa_rank: Option<usize>) -> Result<IndexSide> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus("no documents to index".to_string()));
        }
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let options = docs[0].options;
        if let Some(odd) = docs.iter().find(|d| d.options != options) {
            return Err(Error::OptionsMismatch(format!(
                "document {:?} was preprocessed with different options",
                odd.doc_id
            )));
        }
        if docs.iter().all(|d| d.is_empty()) {
            let n = docs.len();
            return Ok(IndexSide {
                options,
                docs,
                vocabulary: Vocabulary::empty(n),
                tf: vec![TermVector::zero(); n],
                tfidf: vec![TermVector::zero(); n],
                latent: LatentIndex::empty(n, 0),
            });
        }
        let vocabulary = build_vocabulary(&docs)?;
        let tf: Vec<TermVector> = docs.iter().map(|d| tf_vector(d, &vocabulary)).collect();
        let tfidf = tfidf_vectors(&docs, &vocabulary);
        let k = lsa_rank.unwrap_or_else(|| default_rank(docs.len(), vocabulary.len()));
        let matrix = doc_term_matrix(&tf, vocabulary.len());
        let latent = truncated_svd(&matrix, k, DEFAULT_SVD_TOL)?;
        Ok(IndexSide {
            options,
            docs,
            vocabulary,
            tf,
            tfidf,
            latent,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn doc_ids(&self) -> Vec<&str> {
        self.docs.iter().map(|d| d.doc_id.as_str()).collect()
    }
}

/// The serialized index: both NER sides plus the configuration and
/// resources that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlagiarismIndex {
    pub version: u32,
    pub fingerprint: String,
    /// Label of the OCR backend the corpus was extracted with.
    pub ocr_backend: String,
    pub config: IndexConfig,
    pub resources: IndexResources,
    pub include: IndexSide,
    pub exclude: IndexSide,
}

impl PlagiarismIndex {
    pub fn side(&self, mode: NerMode) -> &IndexSide {
        match mode {
            NerMode::Include => &self.include,
            NerMode::Exclude => &self.exclude,
        }
    }

    pub fn preprocess_context(&self) -> Result<PreprocessContext> {
        self.resources.to_context()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let index: PlagiarismIndex = serde_json::from_str(&raw).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        if index.version != INDEX_VERSION {
            return Err(Error::InvalidConfig(format!(
                "index {} has version {} but this build reads version {}",
                path.display(),
                index.version,
                INDEX_VERSION
            )));
        }
        Ok(index)
    }
}

/// Preprocesses the extracted corpus under both NER modes and builds the
/// full index.
pub fn build_index(
    texts: &[ExtractedText],
    config: &IndexConfig,
    ctx: &PreprocessContext,
    ocr_backend: &str,
) -> Result<PlagiarismIndex> {
    if texts.is_empty() {
        return Err(Error::EmptyCorpus("no documents extracted".to_string()));
    }
    let include_docs: Vec<PreprocessedDoc> = texts
        .iter()
        .map(|t| preprocess(t, config.preprocess_options(NerMode::Include), ctx))
        .collect();
    let exclude_docs: Vec<PreprocessedDoc> = texts
        .iter()
        .map(|t| preprocess(t, config.preprocess_options(NerMode::Exclude), ctx))
        .collect();
    let include = IndexSide::build(include_docs, config.lsa_rank)?;
    let exclude = IndexSide::build(exclude_docs, config.lsa_rank)?;
    let resources = IndexResources::from_context(ctx);
    let fingerprint = options_fingerprint(config, &resources);
    Ok(PlagiarismIndex {
        version: INDEX_VERSION,
        fingerprint,
        ocr_backend: ocr_backend.to_string(),
        config: config.clone(),
        resources,
        include,
        exclude,
    })
}
