//! Bag-of-words vector space: vocabulary with document frequencies, raw term
//! frequency and TF-IDF vectors, and a truncated SVD used for latent semantic
//! scoring.

use std::collections::{BTreeMap, HashMap, HashSet};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::PreprocessedDoc;

/// Convergence tolerance on successive singular-value estimates.
pub const DEFAULT_SVD_TOL: f64 = 1e-10;
/// Iteration cap per component.
pub const SVD_MAX_ITERATIONS: usize = 10_000;
/// Components with a singular value below this fraction of the largest are
/// treated as numerically rank-deficient and discarded.
pub const SVD_RANK_CUTOFF: f64 = 1e-9;
/// Seed for power-iteration start vectors; fixed so index builds reproduce
/// bit-for-bit.
pub const SVD_SEED: u64 = 42;
/// Default cap on the latent rank.
pub const DEFAULT_LSA_RANK_CAP: usize = 50;

/// Terms in first-appearance order plus per-term document frequencies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<u32>,
    n_docs: usize,
    #[allow(clippy::type_complexity)]
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize, Clone)]
struct VocabularyRepr {
    terms: Vec<String>,
    df: Vec<u32>,
    n_docs: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let index = r
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            terms: r.terms,
            df: r.df,
            n_docs: r.n_docs,
            index,
        }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            df: v.df,
            n_docs: v.n_docs,
        }
    }
}

impl Vocabulary {
    /// Vocabulary with no terms, for a corpus side whose documents all came
    /// out empty (every comparison against it scores 0.0 with a warning).
    pub fn empty(n_docs: usize) -> Self {
        Vocabulary {
            terms: Vec::new(),
            df: Vec::new(),
            n_docs,
            index: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn df(&self, index: usize) -> u32 {
        self.df[index]
    }

    pub fn df_slice(&self) -> &[u32] {
        &self.df
    }

    /// `ln(n_docs / df)`; zero for terms present in every document.
    pub fn idf(&self, index: usize) -> f64 {
        (self.n_docs as f64 / self.df[index] as f64).ln()
    }
}

/// Assigns term indices in order of first appearance (document order, then
/// token position) and counts per-term document frequencies over lemmas.
pub fn build_vocabulary(docs: &[PreprocessedDoc]) -> Result<Vocabulary> {
    if docs.iter().all(|d| d.tokens.is_empty()) {
        return Err(Error::EmptyCorpus(
            "all documents are empty after preprocessing".to_string(),
        ));
    }
    let mut terms: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for doc in docs {
        for token in &doc.tokens {
            if !index.contains_key(&token.lemma) {
                index.insert(token.lemma.clone(), terms.len());
                terms.push(token.lemma.clone());
            }
        }
    }
    let mut df = vec![0u32; terms.len()];
    for doc in docs {
        let seen: HashSet<&str> = doc.tokens.iter().map(|t| t.lemma.as_str()).collect();
        for lemma in seen {
            df[index[lemma]] += 1;
        }
    }
    Ok(Vocabulary {
        terms,
        df,
        n_docs: docs.len(),
        index,
    })
}

/// Sparse non-negative-index vector with no explicitly stored zeros and a
/// cached Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TermVectorRepr", into = "TermVectorRepr")]
pub struct TermVector {
    entries: BTreeMap<usize, f64>,
    norm: f64,
}

#[derive(Serialize, Deserialize, Clone)]
struct TermVectorRepr {
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl From<TermVectorRepr> for TermVector {
    fn from(r: TermVectorRepr) -> Self {
        TermVector::from_entries(r.indices.into_iter().zip(r.weights))
    }
}

impl From<TermVector> for TermVectorRepr {
    fn from(v: TermVector) -> Self {
        TermVectorRepr {
            indices: v.entries.keys().copied().collect(),
            weights: v.entries.values().copied().collect(),
        }
    }
}

impl TermVector {
    pub fn from_entries(entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let entries: BTreeMap<usize, f64> =
            entries.into_iter().filter(|(_, w)| *w != 0.0).collect();
        let norm = entries.values().map(|w| w * w).sum::<f64>().sqrt();
        TermVector { entries, norm }
    }

    pub fn zero() -> Self {
        TermVector {
            entries: BTreeMap::new(),
            norm: 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries.get(&index).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(i, w)| (*i, *w))
    }

    pub fn dot(&self, other: &TermVector) -> f64 {
        let (small, large) = if self.entries.len() <= other.entries.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.entries.iter().map(|(i, w)| w * large.get(*i)).sum()
    }
}

/// Raw term counts of a document's lemmas over the vocabulary; lemmas outside
/// the vocabulary are ignored.
pub fn tf_vector(doc: &PreprocessedDoc, vocab: &Vocabulary) -> TermVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for token in &doc.tokens {
        if let Some(i) = vocab.index_of(&token.lemma) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    TermVector::from_entries(counts)
}

/// Raw term counts of an arbitrary lemma stream (used for pooled scoring).
pub fn tf_vector_of_lemmas<S: AsRef<str>>(lemmas: &[S], vocab: &Vocabulary) -> TermVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for lemma in lemmas {
        if let Some(i) = vocab.index_of(lemma.as_ref()) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    TermVector::from_entries(counts)
}

/// Weights a TF vector by `ln(n_docs / df)`. Terms appearing in every
/// document get weight zero and drop out of the sparse vector.
pub fn tfidf_from_tf(tf: &TermVector, vocab: &Vocabulary) -> TermVector {
    TermVector::from_entries(tf.iter().map(|(i, w)| (i, w * vocab.idf(i))))
}

pub fn tfidf_vector(doc: &PreprocessedDoc, vocab: &Vocabulary) -> TermVector {
    tfidf_from_tf(&tf_vector(doc, vocab), vocab)
}

pub fn tfidf_vectors(docs: &[PreprocessedDoc], vocab: &Vocabulary) -> Vec<TermVector> {
    docs.iter().map(|d| tfidf_vector(d, vocab)).collect()
}

/// Dense `docs x terms` matrix from sparse rows.
pub fn doc_term_matrix(rows: &[TermVector], n_terms: usize) -> Array2<f64> {
    let mut m = Array2::zeros((rows.len(), n_terms));
    for (r, vec) in rows.iter().enumerate() {
        for (c, w) in vec.iter() {
            m[[r, c]] = w;
        }
    }
    m
}

/// Row-major dense matrix with explicit dimensions; the serialized form of
/// the latent factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FactorMatrix {
    fn from_columns(columns: &[Array1<f64>], rows: usize) -> Self {
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (c, col) in columns.iter().enumerate() {
            for r in 0..rows {
                data[r * cols + c] = col[r];
            }
        }
        FactorMatrix { rows, cols, data }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }
}

/// Truncated SVD of a document-term matrix.
///
/// `term_factors` holds the term-side orthonormal columns, `doc_latent` the
/// per-document latent vectors, and `singular_values` the non-increasing
/// positive spectrum. For matrix row `a_i`,
/// `doc_latent[i] = diag(1/sigma) * term_factors^T * a_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentIndex {
    pub k: usize,
    pub singular_values: Vec<f64>,
    pub term_factors: FactorMatrix,
    pub doc_latent: Vec<Vec<f64>>,
}

impl LatentIndex {
    /// Rank-zero latent space for a degenerate (all-empty) corpus side.
    pub fn empty(n_docs: usize, n_terms: usize) -> Self {
        LatentIndex {
            k: 0,
            singular_values: Vec::new(),
            term_factors: FactorMatrix {
                rows: n_terms,
                cols: 0,
                data: Vec::new(),
            },
            doc_latent: vec![Vec::new(); n_docs],
        }
    }
}

/// Default truncated rank: `min(50, n_docs - 1, n_terms)`, clamped to at
/// least 1.
pub fn default_rank(n_docs: usize, n_terms: usize) -> usize {
    DEFAULT_LSA_RANK_CAP
        .min(n_docs.saturating_sub(1))
        .min(n_terms)
        .max(1)
}

/// Rank-`k` truncated SVD via deflated power iteration on the Gram operator.
///
/// Each component runs `v <- normalize(A^T A v)` from a seeded random start
/// until the singular-value estimate moves less than `tol`, re-orthogonalizing
/// against accepted components to keep the factor columns orthonormal. The
/// matrix is then deflated by `sigma * u * v^T`. Components below
/// `SVD_RANK_CUTOFF * sigma_1` are discarded as numerical rank deficiency.
pub fn truncated_svd(matrix: &Array2<f64>, k: usize, tol: f64) -> Result<LatentIndex> {
    let (m, n) = matrix.dim();
    if matrix.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let k = k.max(1).min(m).min(n);

    let mut rng = ChaCha8Rng::seed_from_u64(SVD_SEED);
    let mut work = matrix.clone();
    let mut sigmas: Vec<f64> = Vec::new();
    let mut us: Vec<Array1<f64>> = Vec::new();
    let mut vs: Vec<Array1<f64>> = Vec::new();

    for _ in 0..k {
        let Some((sigma, u, v)) = dominant_component(&work, &vs, tol, &mut rng) else {
            break; // residual is numerically zero
        };
        work.scaled_add(-sigma, &outer(&u, &v));
        sigmas.push(sigma);
        us.push(u);
        vs.push(v);
    }

    // Deflation yields a non-increasing spectrum up to rounding; enforce it.
    let mut order: Vec<usize> = (0..sigmas.len()).collect();
    order.sort_by(|&a, &b| sigmas[b].partial_cmp(&sigmas[a]).unwrap());
    let sigma_max = order.first().map(|&i| sigmas[i]).unwrap_or(0.0);
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| sigmas[i] >= SVD_RANK_CUTOFF * sigma_max && sigmas[i] > 0.0)
        .collect();

    let singular_values: Vec<f64> = kept.iter().map(|&i| sigmas[i]).collect();
    let v_cols: Vec<Array1<f64>> = kept.iter().map(|&i| vs[i].clone()).collect();
    let u_cols: Vec<Array1<f64>> = kept.iter().map(|&i| us[i].clone()).collect();
    let rank = singular_values.len();

    let doc_latent: Vec<Vec<f64>> = (0..m)
        .map(|r| (0..rank).map(|j| u_cols[j][r]).collect())
        .collect();

    Ok(LatentIndex {
        k: rank,
        singular_values,
        term_factors: FactorMatrix::from_columns(&v_cols, n),
        doc_latent,
    })
}

/// One deflated power-iteration component; `None` when the working matrix has
/// no energy left in directions orthogonal to the accepted ones.
fn dominant_component(
    work: &Array2<f64>,
    accepted: &[Array1<f64>],
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Option<(f64, Array1<f64>, Array1<f64>)> {
    let n = work.dim().1;
    let mut v = Array1::from_iter((0..n).map(|_| rng.gen_range(-1.0..1.0)));
    orthogonalize(&mut v, accepted);
    let norm = l2(&v);
    if norm == 0.0 {
        return None;
    }
    v /= norm;

    let mut sigma_prev = 0.0;
    for _ in 0..SVD_MAX_ITERATIONS {
        let au = work.dot(&v);
        let mut w = work.t().dot(&au);
        orthogonalize(&mut w, accepted);
        let wn = l2(&w);
        if wn == 0.0 {
            break;
        }
        v = w / wn;
        let sigma = l2(&work.dot(&v));
        if (sigma - sigma_prev).abs() <= tol * sigma.max(1.0) {
            sigma_prev = sigma;
            break;
        }
        sigma_prev = sigma;
    }

    let sigma = sigma_prev;
    if sigma == 0.0 {
        return None;
    }
    let u = work.dot(&v) / sigma;
    Some((sigma, u, v))
}

fn orthogonalize(v: &mut Array1<f64>, basis: &[Array1<f64>]) {
    for b in basis {
        let proj = v.dot(b);
        v.scaled_add(-proj, b);
    }
}

fn l2(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn outer(u: &Array1<f64>, v: &Array1<f64>) -> Array2<f64> {
    let (m, n) = (u.len(), v.len());
    let mut out = Array2::zeros((m, n));
    for r in 0..m {
        for c in 0..n {
            out[[r, c]] = u[r] * v[c];
        }
    }
    out
}

/// Folds a query vector into latent space:
/// `diag(1/sigma) * term_factors^T * q`. A zero query maps to the zero
/// latent vector.
pub fn project_query(q: &TermVector, latent: &LatentIndex) -> Vec<f64> {
    let mut out = vec![0.0; latent.k];
    for (j, out_j) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, w) in q.iter() {
            if i < latent.term_factors.rows {
                acc += w * latent.term_factors.get(i, j);
            }
        }
        *out_j = acc / latent.singular_values[j];
    }
    out
}
