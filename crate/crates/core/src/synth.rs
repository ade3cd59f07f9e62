//! Seeded synthetic topic corpora.
//!
//! Topic `t` owns a block of pseudo-words; every token of a topic-`t`
//! document is drawn from that block, except that with probability `overlap`
//! it comes from a pool shared by all topics instead. Word ranks within a
//! block follow `rank^-s` (Zipf), with separate exponents for topic blocks
//! and for the shared pool.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::rng::{self, Key};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub topics: usize,
    pub docs_per_topic: usize,
    pub vocab_per_topic: usize,
    pub sentences_per_doc: usize,
    /// Inclusive range of words per sentence.
    pub words_per_sentence: (usize, usize),
    /// Probability that a token is drawn from the shared pool.
    pub overlap: f64,
    pub shared_vocab: usize,
    pub topic_zipf: f64,
    pub shared_zipf: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            topics: 4,
            docs_per_topic: 50,
            vocab_per_topic: 500,
            sentences_per_doc: 8,
            words_per_sentence: (6, 12),
            overlap: 0.2,
            shared_vocab: 20,
            topic_zipf: 0.0,
            shared_zipf: 1.0,
            seed: 0,
        }
    }
}

const ONSETS: [&str; 15] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// Pronounceable word for a global word index; distinct indices give
/// distinct words.
pub fn pseudo_word(index: usize) -> String {
    let base = ONSETS.len() * VOWELS.len();
    // Offsetting by `base` gives every word at least two syllables, so no
    // word is a common abbreviation.
    let mut rest = index + base;
    let mut syllables = Vec::new();
    while rest > 0 {
        let s = rest % base;
        syllables.push(format!("{}{}", ONSETS[s / VOWELS.len()], VOWELS[s % VOWELS.len()]));
        rest /= base;
    }
    syllables.concat()
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<Corpus> {
    let bad = |m: String| Err(Error::InvalidArgument(m));
    if config.topics < 2 {
        return bad(format!("need at least 2 topics, got {}", config.topics));
    }
    if config.docs_per_topic == 0 || config.vocab_per_topic == 0 || config.sentences_per_doc == 0 {
        return bad("docs, vocabulary and sentences per topic must be >= 1".into());
    }
    let (lo, hi) = config.words_per_sentence;
    if lo == 0 || lo > hi {
        return bad(format!("invalid words-per-sentence range {lo}..={hi}"));
    }
    if !(0.0..=1.0).contains(&config.overlap) {
        return bad(format!("overlap {} outside [0, 1]", config.overlap));
    }
    if config.shared_vocab == 0 && config.overlap > 0.0 {
        return bad("a positive overlap needs a non-empty shared vocabulary".into());
    }
    let zipf = |n: usize, s: f64| {
        WeightedIndex::new((1..=n.max(1)).map(|r| (r as f64).powf(-s)))
            .map_err(|e| Error::InvalidArgument(e.to_string()))
    };
    let topic_dist = zipf(config.vocab_per_topic, config.topic_zipf)?;
    let shared_dist = zipf(config.shared_vocab, config.shared_zipf)?;
    let shared_offset = config.topics * config.vocab_per_topic;

    let mut docs = Vec::with_capacity(config.topics * config.docs_per_topic);
    for t in 0..config.topics {
        for i in 0..config.docs_per_topic {
            let mut r = rng::stream(config.seed, "synth", &[Key::from(t), Key::from(i)]);
            let sentences: Vec<String> = (0..config.sentences_per_doc)
                .map(|_| {
                    let len = r.random_range(lo..=hi);
                    let words: Vec<String> = (0..len)
                        .map(|_| {
                            if r.random::<f64>() < config.overlap {
                                pseudo_word(shared_offset + shared_dist.sample(&mut r))
                            } else {
                                pseudo_word(t * config.vocab_per_topic + topic_dist.sample(&mut r))
                            }
                        })
                        .collect();
                    let mut s = words.join(" ");
                    if let Some(first) = s.get_mut(0..1) {
                        first.make_ascii_uppercase();
                    }
                    s.push('.');
                    s
                })
                .collect();
            docs.push(Document::new(format!("topic{t}-{i:04}"), sentences.join(" "), Some(t)));
        }
    }
    let names = (0..config.topics).map(|t| format!("topic{t}")).collect();
    Corpus::new(docs, Some(names), Some(config.topics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tfidf::{fit_tfidf, label_match_rate, top1_positive_sampling};
    use std::collections::HashSet;

    #[test]
    fn pseudo_words_are_distinct() {
        let words: HashSet<String> = (0..20_000).map(pseudo_word).collect();
        assert_eq!(words.len(), 20_000);
        assert!(words.iter().all(|w| w.chars().all(|c| c.is_ascii_lowercase())));
    }

    #[test]
    fn counts_and_balance() {
        let c = generate_synthetic(&SynthConfig::default()).unwrap();
        assert_eq!(c.len(), 200);
        assert_eq!(c.class_histogram().unwrap(), [50, 50, 50, 50]);
        assert!(c.documents.iter().all(|d| d.sentences.len() == 8));
    }

    #[test]
    fn same_seed_same_corpus() {
        let cfg = SynthConfig {
            docs_per_topic: 5,
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
        let other = SynthConfig { seed: 1, ..cfg.clone() };
        assert_ne!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn disjoint_topics_pair_within_topic() {
        let cfg = SynthConfig {
            overlap: 0.0,
            docs_per_topic: 10,
            ..Default::default()
        };
        let c = generate_synthetic(&cfg).unwrap();
        let model = fit_tfidf(&c).unwrap();
        let pairing = top1_positive_sampling(&model.transform_corpus(&c)).unwrap();
        let labels: Vec<Option<usize>> = c.documents.iter().map(|d| d.label).collect();
        assert_eq!(label_match_rate(&pairing, &labels).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            SynthConfig { topics: 1, ..Default::default() },
            SynthConfig { overlap: 1.5, ..Default::default() },
            SynthConfig { words_per_sentence: (5, 2), ..Default::default() },
        ] {
            assert!(generate_synthetic(&cfg).is_err());
        }
    }
}
