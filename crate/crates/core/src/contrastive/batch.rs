//! Positive-pair batches. Views `2i` and `2i + 1` always form a pair.

use std::collections::HashSet;

use rand::Rng;

use crate::augment::{document_stream, shuffle_divide, DocumentViewPair};
use crate::corpus::Document;
use crate::encoder::{tokenize, TokenSequence, Vocabulary};
use crate::error::{Error, Result};
use crate::tfidf::PositivePairing;

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    pub views: Vec<TokenSequence>,
    pub source_ids: Vec<String>,
}

impl ContrastiveBatch {
    pub fn num_pairs(&self) -> usize {
        self.views.len() / 2
    }
}

/// Shuffle & Divide batch. Each document draws its permutation from the
/// `(seed, epoch, id)` stream, so a batch is independent of which other
/// documents it is grouped with.
pub fn build_batch_sad(
    docs: &[&Document],
    seed: u64,
    epoch: usize,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<(ContrastiveBatch, Vec<DocumentViewPair>)> {
    let mut views = Vec::with_capacity(2 * docs.len());
    let mut source_ids = Vec::with_capacity(2 * docs.len());
    let mut pairs = Vec::with_capacity(docs.len());
    for doc in docs {
        let pair = shuffle_divide(doc, &mut document_stream(seed, epoch, &doc.id))?;
        views.push(tokenize(&pair.view_a, vocab, max_len)?);
        views.push(tokenize(&pair.view_b, vocab, max_len)?);
        source_ids.push(doc.id.clone());
        source_ids.push(doc.id.clone());
        pairs.push(pair);
    }
    Ok((ContrastiveBatch { views, source_ids }, pairs))
}

/// TF-IDF positive batch from `(anchor, partner)` document index pairs. A
/// document may appear only once per batch, otherwise it would be its own
/// negative.
pub fn build_batch_tps(
    pairs: &[(usize, usize)],
    docs: &[Document],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<ContrastiveBatch> {
    let mut seen = HashSet::new();
    let mut views = Vec::with_capacity(2 * pairs.len());
    let mut source_ids = Vec::with_capacity(2 * pairs.len());
    for &(n, m) in pairs {
        for i in [n, m] {
            let doc = docs
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("document index {i} out of range")))?;
            if !seen.insert(i) {
                return Err(Error::PartnerCollision(doc.id.clone()));
            }
            views.push(tokenize(&doc.text, vocab, max_len)?);
            source_ids.push(doc.id.clone());
        }
    }
    Ok(ContrastiveBatch { views, source_ids })
}

/// Splits a pairing into batches of at most `batch_size` pairs with no
/// document repeated inside a batch.
///
/// Unordered pairs are deduplicated, so mutual nearest neighbours train once.
/// Pairs are visited in a shuffled order and placed first-fit into the
/// earliest open batch that has room and no shared document. Batches with
/// fewer than two pairs are dropped.
pub fn plan_tps_batches<R: Rng + ?Sized>(
    pairing: &PositivePairing,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<(usize, usize)>>> {
    if batch_size < 2 {
        return Err(Error::InvalidArgument(format!("batch size {batch_size} < 2")));
    }
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    for (n, &m) in pairing.partner.iter().enumerate() {
        if n == m {
            return Err(Error::PartnerCollision(format!("#{n} paired with itself")));
        }
        if seen.insert((n.min(m), n.max(m))) {
            pairs.push((n, m));
        }
    }
    crate::augment::fisher_yates(&mut pairs, rng);

    let mut batches: Vec<(Vec<(usize, usize)>, HashSet<usize>)> = Vec::new();
    for (n, m) in pairs {
        let slot = batches
            .iter()
            .position(|(b, used)| b.len() < batch_size && !used.contains(&n) && !used.contains(&m));
        let slot = match slot {
            Some(s) => s,
            None => {
                batches.push((Vec::new(), HashSet::new()));
                batches.len() - 1
            }
        };
        batches[slot].0.push((n, m));
        batches[slot].1.extend([n, m]);
    }
    Ok(batches
        .into_iter()
        .map(|(b, _)| b)
        .filter(|b| b.len() >= 2)
        .collect())
}
