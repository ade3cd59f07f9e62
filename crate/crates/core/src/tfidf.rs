//! TF-IDF features and positive sampling.

use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::text::word_tokens;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl SparseVector {
    /// Builds a vector from `(index, value)` entries, summing duplicates and
    /// dropping non-positive values.
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, v) in entries {
            if i >= dim {
                return Err(Error::ShapeMismatch(format!("index {i} out of range for dim {dim}")));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("sparse value at index {i}")));
            }
            *acc.entry(i).or_default() += v;
        }
        let (indices, values) = acc.into_iter().filter(|&(_, v)| v > 0.0).unzip();
        Ok(SparseVector { indices, values, dim })
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// True when no vocabulary token survived (e.g. an all-OOV document).
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Dot product by merged walk over the sorted index lists.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }
}

/// Cosine similarity, defined as 0 when either side has zero norm and
/// clamped to `[-1, 1]`.
pub trait CosineSimilarity {
    fn cosine(&self, other: &Self) -> f64;
}

fn finish_cosine(dot: f64, na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

impl CosineSimilarity for SparseVector {
    fn cosine(&self, other: &Self) -> f64 {
        finish_cosine(self.dot(other), self.norm(), other.norm())
    }
}

impl CosineSimilarity for [f64] {
    fn cosine(&self, other: &Self) -> f64 {
        let dot: f64 = self.iter().zip(other).map(|(a, b)| a * b).sum();
        let na = self.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = other.iter().map(|v| v * v).sum::<f64>().sqrt();
        finish_cosine(dot, na, nb)
    }
}

impl CosineSimilarity for Vec<f64> {
    fn cosine(&self, other: &Self) -> f64 {
        self.as_slice().cosine(other.as_slice())
    }
}

pub fn cosine_similarity<V: CosineSimilarity + ?Sized>(a: &V, b: &V) -> f64 {
    a.cosine(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    pub vocabulary: HashMap<String, usize>,
    pub idf: Vec<f64>,
    pub num_docs: usize,
}

/// Fits a smoothed-idf model: `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
/// Vocabulary indices follow lexicographic token order.
pub fn fit_tfidf(corpus: &Corpus) -> Result<TfIdfModel> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("cannot fit TF-IDF on an empty corpus".into()));
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for d in &corpus.documents {
        let mut toks = word_tokens(&d.text);
        toks.sort_unstable();
        toks.dedup();
        for t in toks {
            *df.entry(t).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::NoTokens);
    }
    let n = corpus.len() as f64;
    let mut vocabulary = HashMap::with_capacity(df.len());
    let mut idf = Vec::with_capacity(df.len());
    for (i, (tok, count)) in df.into_iter().enumerate() {
        vocabulary.insert(tok, i);
        idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
    }
    Ok(TfIdfModel {
        vocabulary,
        idf,
        num_docs: corpus.len(),
    })
}

impl TfIdfModel {
    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    /// Raw term counts times idf, L2-normalised. Out-of-vocabulary tokens are
    /// ignored; a document with no known token yields an empty vector.
    pub fn transform(&self, text: &str) -> SparseVector {
        let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
        for tok in word_tokens(text) {
            if let Some(&i) = self.vocabulary.get(&tok) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let (indices, mut values): (Vec<usize>, Vec<f64>) =
            tf.into_iter().map(|(i, c)| (i, c * self.idf[i])).unzip();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        SparseVector {
            indices,
            values,
            dim: self.dim(),
        }
    }

    pub fn transform_document(&self, doc: &Document) -> SparseVector {
        self.transform(&doc.text)
    }

    pub fn transform_corpus(&self, corpus: &Corpus) -> Vec<SparseVector> {
        corpus.documents.par_iter().map(|d| self.transform(&d.text)).collect()
    }

    /// Token for each vocabulary index.
    pub fn index_to_token(&self) -> Vec<&str> {
        let mut out = vec![""; self.dim()];
        for (t, &i) in &self.vocabulary {
            out[i] = t.as_str();
        }
        out
    }
}

/// Full pairwise cosine matrix, computed row-parallel. Each entry is computed
/// independently, so the result does not depend on the thread count.
pub fn similarity_matrix<V>(vectors: &[V]) -> Array2<f64>
where
    V: CosineSimilarity + Sync,
{
    let n = vectors.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| vectors.iter().map(|v| vectors[i].cosine(v)).collect())
        .collect();
    let mut out = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivePairing {
    pub partner: Vec<usize>,
    pub similarity: Vec<f64>,
}

impl PositivePairing {
    pub fn len(&self) -> usize {
        self.partner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partner.is_empty()
    }
}

/// Top-1 partner per row of a similarity matrix, excluding the diagonal.
/// Ties go to the smallest index.
pub fn top1_from_similarity(sim: &Array2<f64>) -> Result<PositivePairing> {
    let (n, m) = sim.dim();
    if n != m {
        return Err(Error::ShapeMismatch(format!("similarity matrix is {n}x{m}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "positive sampling needs at least 2 documents, got {n}"
        )));
    }
    let mut partner = Vec::with_capacity(n);
    let mut similarity = Vec::with_capacity(n);
    for (i, row) in sim.outer_iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, &s) in row.iter().enumerate() {
            if j == i {
                continue;
            }
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("similarity[{i}][{j}]")));
            }
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        let (j, s) = best.expect("n >= 2");
        partner.push(j);
        similarity.push(s);
    }
    Ok(PositivePairing { partner, similarity })
}

pub fn top1_positive_sampling<V>(vectors: &[V]) -> Result<PositivePairing>
where
    V: CosineSimilarity + Sync,
{
    if vectors.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "positive sampling needs at least 2 documents, got {}",
            vectors.len()
        )));
    }
    top1_from_similarity(&similarity_matrix(vectors))
}

/// `alpha^(epoch-1) * sim_tfidf + (1 - alpha^(epoch-1)) * sim_model`.
///
/// Weights of exactly 1 or 0 return a copy of the corresponding input, so
/// epoch 1 reproduces the TF-IDF matrix bit for bit.
pub fn blended_similarity(
    sim_tfidf: &Array2<f64>,
    sim_model: &Array2<f64>,
    alpha: f64,
    epoch: usize,
) -> Result<Array2<f64>> {
    if sim_tfidf.dim() != sim_model.dim() {
        return Err(Error::ShapeMismatch(format!(
            "tfidf similarity {:?} vs model similarity {:?}",
            sim_tfidf.dim(),
            sim_model.dim()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    if epoch == 0 {
        return Err(Error::InvalidArgument("epochs are numbered from 1".into()));
    }
    let w = alpha.powi(i32::try_from(epoch - 1).unwrap_or(i32::MAX));
    if w == 1.0 {
        return Ok(sim_tfidf.clone());
    }
    if w == 0.0 {
        return Ok(sim_model.clone());
    }
    Ok(sim_tfidf * w + sim_model * (1.0 - w))
}

/// Fraction of documents whose partner carries the same gold label.
/// Diagnostic only; labels never feed back into training.
pub fn label_match_rate(pairing: &PositivePairing, labels: &[Option<usize>]) -> Result<f64> {
    if labels.len() != pairing.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} pairings",
            labels.len(),
            pairing.len()
        )));
    }
    if pairing.is_empty() {
        return Err(Error::InvalidArgument("empty pairing".into()));
    }
    let mut hits = 0usize;
    for (n, &m) in pairing.partner.iter().enumerate() {
        let ln = labels[n].ok_or_else(|| Error::MissingLabel(format!("#{n}")))?;
        let lm = labels[m].ok_or_else(|| Error::MissingLabel(format!("#{m}")))?;
        hits += usize::from(ln == lm);
    }
    Ok(hits as f64 / pairing.len() as f64)
}
