//! Shuffle & Divide augmentation.
//!
//! A document's sentences are permuted uniformly at random and the shuffled
//! sequence is cut in two; the halves form a positive pair. Odd sentence
//! counts give the extra sentence to the first half.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::rng::{self, Key};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentViewPair {
    pub source_id: String,
    pub view_a: String,
    pub view_b: String,
    pub sentence_ids_a: Vec<usize>,
    pub sentence_ids_b: Vec<usize>,
}

/// In-place Fisher-Yates shuffle (Durstenfeld form).
pub fn fisher_yates<T, R: Rng + ?Sized>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Splits a permutation of sentence indices into the two views.
pub fn divide(doc: &Document, permutation: &[usize]) -> Result<DocumentViewPair> {
    let m = doc.sentences.len();
    if m < 2 {
        return Err(Error::TooFewSentences {
            id: doc.id.clone(),
            found: m,
            required: 2,
        });
    }
    if permutation.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "permutation of length {} for {m} sentences",
            permutation.len()
        )));
    }
    let (a, b) = permutation.split_at(m.div_ceil(2));
    let join = |ids: &[usize]| {
        ids.iter()
            .map(|&i| doc.sentences[i].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    Ok(DocumentViewPair {
        source_id: doc.id.clone(),
        view_a: join(a),
        view_b: join(b),
        sentence_ids_a: a.to_vec(),
        sentence_ids_b: b.to_vec(),
    })
}

pub fn shuffle_divide<R: Rng + ?Sized>(doc: &Document, rng: &mut R) -> Result<DocumentViewPair> {
    let m = doc.sentences.len();
    if m < 2 {
        return Err(Error::TooFewSentences {
            id: doc.id.clone(),
            found: m,
            required: 2,
        });
    }
    let mut perm: Vec<usize> = (0..m).collect();
    fisher_yates(&mut perm, rng);
    divide(doc, &perm)
}

/// Random stream used for one document in one epoch.
pub fn document_stream(seed: u64, epoch: usize, doc_id: &str) -> rng::StreamRng {
    rng::stream(seed, "shuffle-divide", &[Key::from(epoch), Key::Name(doc_id)])
}

/// One view pair per document. Each document draws from its own stream keyed
/// by `(seed, epoch, id)`, so the result does not depend on evaluation order.
pub fn shuffle_divide_epoch(corpus: &Corpus, seed: u64, epoch: usize) -> Result<Vec<DocumentViewPair>> {
    corpus
        .documents
        .iter()
        .map(|d| shuffle_divide(d, &mut document_stream(seed, epoch, &d.id)))
        .collect()
}
