//! Detects text-level plagiarism in document images (flowcharts, graphs,
//! tables, figure captions).
//!
//! The pipeline: OCR-extract every corpus image through a pluggable backend
//! (with a content-addressed cache and a monthly call quota), normalize the
//! text (reference stripping, tokenization, entity tagging, stopword
//! removal, lemmatization), build a persistent vector-space index (term
//! frequencies, tf-idf, a truncated-SVD latent space) over two corpus
//! views — entities included and excluded — then score a suspicious image
//! against the corpus with six similarity algorithms: Jaccard sets, raw
//! term-count cosine, tf-idf cosine, latent-space cosine, hashed-embedding
//! cosine and a taxonomy-based word relatedness measure.
//!
//! Entry points: [`ingest::scan_corpus`] + [`ingest::extract_corpus`] to
//! OCR a directory, [`index::build_index`] to build and persist the index,
//! [`report::build_report`] to score a query, [`selftest::run_selftest`]
//! for the built-in verification suite.

pub mod embed;
pub mod error;
pub mod index;
pub mod ingest;
pub mod ner;
mod parallel;
pub mod preprocess;
pub mod report;
pub mod selftest;
pub mod similarity;
pub mod vectorspace;
pub mod wordnet;

pub use error::{Error, Result};
