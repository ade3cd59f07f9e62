//! Contrastive training loop with per-epoch clustering and
//! silhouette-based checkpoint selection.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batch::{build_batch_sad, build_batch_tps, plan_tps_batches, ContrastiveBatch};
use super::loss::nt_xent;
use super::optim::{Optimizer, OptimizerConfig};
use crate::augment::{fisher_yates, DocumentViewPair};
use crate::cluster::{spherical_kmeans, ClusterModel, KMeansConfig};
use crate::corpus::{Corpus, Document};
use crate::encoder::{build_vocab, embed_texts, Checkpoint, EncoderConfig, EncoderGrads, EncoderParams, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{adjusted_mutual_information, clustering_accuracy, silhouette_score};
use crate::rng::{self, Key};
use crate::text::word_tokens;
use crate::tfidf::{blended_similarity, fit_tfidf, label_match_rate, similarity_matrix, top1_from_similarity, PositivePairing};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sad,
    Tps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub batch_size: usize,
    pub temperature: f64,
    pub optimizer: OptimizerConfig,
    /// `None` selects the method default: `ceil(n / B)` for SaD, 3 for TPS.
    pub epochs: Option<usize>,
    /// Decay base of the TF-IDF/model similarity blend (TPS only).
    pub alpha: f64,
    pub seed: u64,
    pub max_len_train: usize,
    pub max_len_test: usize,
    pub encoder: EncoderConfig,
    pub max_vocab: usize,
    /// Number of clusters used for per-epoch model selection.
    pub k: usize,
    pub kmeans_restarts: usize,
    /// Silhouette is computed on a seeded subsample above this many documents.
    pub silhouette_cap: Option<usize>,
}

pub const DEFAULT_SILHOUETTE_CAP: usize = 2000;

impl TrainConfig {
    /// Reference hyperparameters: AdamW at 3e-5, B = 320, tau = 0.5.
    pub fn new(method: Method, k: usize) -> Self {
        let (max_len_train, max_len_test) = match method {
            Method::Sad => (128, 256),
            Method::Tps => (256, 256),
        };
        TrainConfig {
            method,
            batch_size: 320,
            temperature: 0.5,
            optimizer: OptimizerConfig::default(),
            epochs: None,
            alpha: 0.5,
            seed: 0,
            max_len_train,
            max_len_test,
            encoder: EncoderConfig::default(),
            max_vocab: 30_000,
            k,
            kmeans_restarts: 10,
            silhouette_cap: Some(DEFAULT_SILHOUETTE_CAP),
        }
    }

    /// Settings for the built-in encoder trained from scratch on small
    /// corpora: smaller batches and a learning rate suited to a randomly
    /// initialised embedding table.
    pub fn desk(method: Method, k: usize) -> Self {
        TrainConfig {
            batch_size: 32,
            optimizer: OptimizerConfig::adamw(DESK_LEARNING_RATE, 0.01),
            ..TrainConfig::new(method, k)
        }
    }

    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            restarts: self.kmeans_restarts,
            ..KMeansConfig::new(self.k, self.seed)
        }
    }

    pub fn epochs_for(&self, num_docs: usize) -> usize {
        self.epochs.unwrap_or(match self.method {
            Method::Sad => num_docs.div_ceil(self.batch_size).max(1),
            Method::Tps => 3,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.batch_size < 2 {
            return bad(format!("batch size {} < 2", self.batch_size));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature {} must be > 0", self.temperature));
        }
        if !(self.optimizer.learning_rate > 0.0 && self.optimizer.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be > 0", self.optimizer.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if self.epochs == Some(0) {
            return bad("epochs must be >= 1".into());
        }
        if self.max_len_train == 0 || self.max_len_test == 0 {
            return bad("sequence lengths must be >= 1".into());
        }
        if self.k < 2 {
            return bad(format!("k must be >= 2, got {}", self.k));
        }
        Ok(())
    }
}

pub const DESK_LEARNING_RATE: f64 = 5e-3;

/// Clustering quality of one encoder state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub silhouette: f64,
    pub objective: f64,
    pub acc: Option<f64>,
    pub ami: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean NT-Xent over the epoch's batches.
    pub loss: f64,
    pub batch_losses: Vec<f64>,
    #[serde(flatten)]
    pub eval: EvalSummary,
    /// TPS only, when every document is labelled.
    pub label_match_rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub vocab: Vocabulary,
    /// Parameters after the epoch with the highest silhouette.
    pub best_params: EncoderParams,
    pub best_epoch: usize,
    pub final_params: EncoderParams,
    pub history: Vec<EpochRecord>,
    /// The freshly initialised encoder, scored the same way.
    pub initial: EvalSummary,
    pub max_len_test: usize,
}

impl TrainOutcome {
    pub fn best_record(&self) -> &EpochRecord {
        &self.history[self.best_epoch - 1]
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            vocab: self.vocab.clone(),
            params: self.best_params.clone(),
            max_len_test: self.max_len_test,
        }
    }
}

/// Hooks for progress reporting and artefact dumps.
pub trait TrainObserver {
    fn on_sad_pairs(&mut self, _epoch: usize, _pairs: &[DocumentViewPair]) {}
    fn on_tps_pairing(&mut self, _epoch: usize, _pairing: &PositivePairing) {}
    fn on_epoch(&mut self, _record: &EpochRecord) {}
}

impl TrainObserver for () {}

/// Embeddings of every document at `max_len` plus their clustering.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub embeddings: Array2<f64>,
    pub clusters: ClusterModel,
    pub summary: EvalSummary,
}

/// Embeds the corpus, clusters it and scores the result. Labels are used
/// only for the reported ACC/AMI.
pub fn evaluate_encoder(
    params: &EncoderParams,
    vocab: &Vocabulary,
    corpus: &Corpus,
    max_len: usize,
    kmeans: &KMeansConfig,
    silhouette_cap: Option<usize>,
) -> Result<Evaluation> {
    let embeddings = embed_texts(params, vocab, corpus.documents.iter().map(|d| d.text.as_str()), max_len)?;
    let clusters = spherical_kmeans(&embeddings, kmeans)?;
    let silhouette = silhouette_score(&embeddings, &clusters.assignments, silhouette_cap, kmeans.seed)?;
    let (acc, ami) = if corpus.is_fully_labeled() {
        let labels = corpus.labels()?;
        (
            Some(clustering_accuracy(&labels, &clusters.assignments)?.acc),
            Some(adjusted_mutual_information(&labels, &clusters.assignments)?),
        )
    } else {
        (None, None)
    };
    let summary = EvalSummary {
        silhouette,
        objective: clusters.objective,
        acc,
        ami,
    };
    Ok(Evaluation {
        embeddings,
        clusters,
        summary,
    })
}

/// Copy of `doc` without sentences that contain no word tokens, so that every
/// Shuffle & Divide half is non-empty.
pub(crate) fn token_bearing(doc: &Document) -> Document {
    let mut d = doc.clone();
    d.sentences.retain(|s| !word_tokens(s).is_empty());
    d
}

/// One optimizer step on a contrastive batch; returns the batch loss.
pub(crate) fn contrastive_step(
    params: &mut EncoderParams,
    optimizer: &mut Optimizer,
    batch: &ContrastiveBatch,
    temperature: f64,
) -> Result<f64> {
    let caches = batch
        .views
        .par_iter()
        .enumerate()
        .map(|(i, v)| params.forward(v).map_err(|e| Error::at(i, e)))
        .collect::<Result<Vec<_>>>()?;
    let dim = params.output_dim();
    let mut outputs = Array2::<f64>::zeros((caches.len(), dim));
    for (i, c) in caches.iter().enumerate() {
        outputs.row_mut(i).assign(&c.output);
    }
    let (loss, grad) = nt_xent(&outputs, temperature)?;
    let mut grads = EncoderGrads::zeros_like(params);
    for (i, (view, cache)) in batch.views.iter().zip(&caches).enumerate() {
        params.backward(view, cache, grad.row(i), &mut grads)?;
    }
    optimizer.step(params.tensors_mut(), grads.tensors())?;
    if !params.is_finite() {
        return Err(Error::NonFinite("encoder parameters after update".into()));
    }
    Ok(loss)
}

pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_observer(corpus, config, &mut ())
}

pub fn train_with_observer(
    corpus: &Corpus,
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    config.validate()?;
    if corpus.len() < config.k {
        return Err(Error::InvalidArgument(format!(
            "{} documents cannot form {} clusters",
            corpus.len(),
            config.k
        )));
    }
    let vocab = build_vocab(corpus, config.max_vocab)?;
    let mut params = EncoderParams::init(vocab.len(), config.encoder, config.seed)?;
    let mut optimizer = Optimizer::new(config.optimizer);
    let kmeans = config.kmeans();
    let evaluate = |p: &EncoderParams| {
        evaluate_encoder(p, &vocab, corpus, config.max_len_test, &kmeans, config.silhouette_cap)
    };
    let initial = evaluate(&params)?;

    let sad_docs: Vec<Document> = match config.method {
        Method::Sad => {
            let docs: Vec<Document> = corpus
                .documents
                .iter()
                .map(token_bearing)
                .filter(|d| d.sentences.len() >= 2)
                .collect();
            if docs.len() < 2 {
                return Err(Error::InvalidArgument(
                    "Shuffle & Divide needs at least two documents with two or more sentences".into(),
                ));
            }
            docs
        }
        Method::Tps => Vec::new(),
    };
    let (sim_tfidf, labels) = match config.method {
        Method::Tps => {
            let tfidf = fit_tfidf(corpus)?;
            let vectors = tfidf.transform_corpus(corpus);
            let labels: Vec<Option<usize>> = corpus.documents.iter().map(|d| d.label).collect();
            (Some(similarity_matrix(&vectors)), labels)
        }
        Method::Sad => (None, Vec::new()),
    };

    let num_epochs = match config.method {
        Method::Sad => config.epochs_for(sad_docs.len()),
        Method::Tps => config.epochs_for(corpus.len()),
    };
    let mut history = Vec::with_capacity(num_epochs);
    let mut best: Option<(usize, f64, EncoderParams)> = None;
    let mut current_embeddings = initial.embeddings.clone();

    for epoch in 1..=num_epochs {
        let wrap = |batch: usize| move |e: Error| Error::Training {
            epoch,
            batch,
            source: Box::new(e),
        };
        let mut batch_losses = Vec::new();
        let mut match_rate = None;
        match config.method {
            Method::Sad => {
                let mut order: Vec<usize> = (0..sad_docs.len()).collect();
                fisher_yates(&mut order, &mut rng::stream(config.seed, "epoch-order", &[Key::from(epoch)]));
                let mut epoch_pairs = Vec::with_capacity(order.len());
                for (b, chunk) in order.chunks(config.batch_size).enumerate() {
                    if chunk.len() < 2 {
                        continue;
                    }
                    let docs: Vec<&Document> = chunk.iter().map(|&i| &sad_docs[i]).collect();
                    let (batch, pairs) =
                        build_batch_sad(&docs, config.seed, epoch, &vocab, config.max_len_train).map_err(wrap(b))?;
                    epoch_pairs.extend(pairs);
                    let loss = contrastive_step(&mut params, &mut optimizer, &batch, config.temperature)
                        .map_err(wrap(b))?;
                    batch_losses.push(loss);
                }
                observer.on_sad_pairs(epoch, &epoch_pairs);
            }
            Method::Tps => {
                let sim_tfidf = sim_tfidf.as_ref().expect("fitted for tps");
                let rows: Vec<Vec<f64>> = current_embeddings.outer_iter().map(|r| r.to_vec()).collect();
                let sim_model = similarity_matrix(&rows);
                let blended = blended_similarity(sim_tfidf, &sim_model, config.alpha, epoch).map_err(wrap(0))?;
                let pairing = top1_from_similarity(&blended).map_err(wrap(0))?;
                if labels.iter().all(Option::is_some) {
                    match_rate = Some(label_match_rate(&pairing, &labels).map_err(wrap(0))?);
                }
                observer.on_tps_pairing(epoch, &pairing);
                let mut plan_rng = rng::stream(config.seed, "tps-batches", &[Key::from(epoch)]);
                let plan = plan_tps_batches(&pairing, config.batch_size, &mut plan_rng).map_err(wrap(0))?;
                for (b, pairs) in plan.iter().enumerate() {
                    let batch = build_batch_tps(pairs, &corpus.documents, &vocab, config.max_len_train)
                        .map_err(wrap(b))?;
                    let loss = contrastive_step(&mut params, &mut optimizer, &batch, config.temperature)
                        .map_err(wrap(b))?;
                    batch_losses.push(loss);
                }
            }
        }
        if batch_losses.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "epoch {epoch} produced no batch with at least two pairs"
            )));
        }
        let evaluation = evaluate(&params).map_err(wrap(batch_losses.len()))?;
        current_embeddings = evaluation.embeddings;
        let record = EpochRecord {
            epoch,
            loss: batch_losses.iter().sum::<f64>() / batch_losses.len() as f64,
            batch_losses,
            eval: evaluation.summary,
            label_match_rate: match_rate,
        };
        observer.on_epoch(&record);
        if best.as_ref().is_none_or(|(_, s, _)| record.eval.silhouette > *s) {
            best = Some((epoch, record.eval.silhouette, params.clone()));
        }
        history.push(record);
    }

    let (best_epoch, _, best_params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        vocab,
        best_params,
        best_epoch,
        final_params: params,
        history,
        initial: initial.summary,
        max_len_test: config.max_len_test,
    })
}
