//! Supervised fine-tuning: a linear softmax head on the encoder output,
//! trained jointly with the encoder.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optim::{Optimizer, OptimizerConfig};
use super::train::{token_bearing, DESK_LEARNING_RATE};
use crate::augment::{fisher_yates, shuffle_divide};
use crate::corpus::Corpus;
use crate::encoder::{tokenize, EncoderGrads, EncoderParams, Vocabulary};
use crate::error::{Error, Result};
use crate::rng::{self, Key};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub max_len_train: usize,
    pub max_len_test: usize,
    /// Replace each training document by one random Shuffle & Divide half,
    /// redrawn every epoch.
    pub use_sad: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: 5,
            batch_size: 16,
            optimizer: OptimizerConfig::adamw(DESK_LEARNING_RATE, 0.01),
            seed: 0,
            max_len_train: 128,
            max_len_test: 256,
            use_sad: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    /// `k x d'`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl ClassifierHead {
    /// Xavier-uniform weights, zero bias.
    pub fn init(num_classes: usize, dim: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, "head-init", &[]);
        let limit = (6.0 / (num_classes + dim) as f64).sqrt();
        ClassifierHead {
            weight: Array2::from_shape_fn((num_classes, dim), |_| r.random_range(-limit..limit)),
            bias: Array1::zeros(num_classes),
        }
    }

    pub fn logits(&self, z: &Array1<f64>) -> Array1<f64> {
        self.weight.dot(z) + &self.bias
    }

    /// Arg-max class; ties go to the smallest index.
    pub fn predict(&self, z: &Array1<f64>) -> usize {
        let l = self.logits(z);
        let mut best = 0;
        for (i, &v) in l.iter().enumerate() {
            if v > l[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub encoder: EncoderParams,
    pub head: ClassifierHead,
    pub test_accuracy: f64,
    /// Mean cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
}

fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = logits.mapv(|v| (v - max).exp());
    let s = e.sum();
    e / s
}

pub fn supervised_finetune(
    params: &EncoderParams,
    vocab: &Vocabulary,
    train: &Corpus,
    test: &Corpus,
    num_classes: usize,
    config: &FinetuneConfig,
) -> Result<FinetuneOutcome> {
    if config.batch_size == 0 || config.max_len_train == 0 || config.max_len_test == 0 {
        return Err(Error::InvalidArgument("batch size and sequence lengths must be >= 1".into()));
    }
    if num_classes < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 classes, got {num_classes}")));
    }
    let train_labels = train.labels()?;
    let test_labels = test.labels()?;
    if let Some(&l) = train_labels.iter().chain(&test_labels).find(|&&l| l >= num_classes) {
        return Err(Error::InvalidArgument(format!("label {l} >= {num_classes} classes")));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument("train and test splits must be non-empty".into()));
    }

    let mut encoder = params.clone();
    let mut head = ClassifierHead::init(num_classes, encoder.output_dim(), config.seed);
    let mut optimizer = Optimizer::new(config.optimizer);
    let docs: Vec<_> = train.documents.iter().map(token_bearing).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..docs.len()).collect();
        fisher_yates(&mut order, &mut rng::stream(config.seed, "finetune-order", &[Key::from(epoch)]));
        let mut total = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let wrap = |e: Error| Error::Training {
                epoch,
                batch: b,
                source: Box::new(e),
            };
            let texts = chunk
                .iter()
                .map(|&i| {
                    let d = &docs[i];
                    if config.use_sad && d.sentences.len() >= 2 {
                        let mut r = rng::stream(config.seed, "finetune-sad", &[Key::from(epoch), Key::Name(&d.id)]);
                        let pair = shuffle_divide(d, &mut r)?;
                        Ok(if r.random::<bool>() { pair.view_a } else { pair.view_b })
                    } else {
                        Ok(d.text.clone())
                    }
                })
                .collect::<Result<Vec<String>>>()
                .map_err(wrap)?;
            let seqs = texts
                .iter()
                .map(|t| tokenize(t, vocab, config.max_len_train))
                .collect::<Result<Vec<_>>>()
                .map_err(wrap)?;
            let caches = seqs
                .par_iter()
                .enumerate()
                .map(|(i, s)| encoder.forward(s).map_err(|e| Error::at(i, e)))
                .collect::<Result<Vec<_>>>()
                .map_err(wrap)?;

            let n = chunk.len() as f64;
            let mut grad_w = Array2::<f64>::zeros(head.weight.raw_dim());
            let mut grad_b = Array1::<f64>::zeros(head.bias.raw_dim());
            let mut grads = EncoderGrads::zeros_like(&encoder);
            for ((&i, seq), cache) in chunk.iter().zip(&seqs).zip(&caches) {
                let y = train_labels[i];
                let p = softmax(&head.logits(&cache.output));
                total += -p[y].max(f64::MIN_POSITIVE).ln();
                let mut d_logits = p / n;
                d_logits[y] -= 1.0 / n;
                grad_w += &d_logits
                    .view()
                    .insert_axis(Axis(1))
                    .dot(&cache.output.view().insert_axis(Axis(0)));
                grad_b += &d_logits;
                let d_z = head.weight.t().dot(&d_logits);
                encoder.backward(seq, cache, d_z.view(), &mut grads).map_err(wrap)?;
            }
            let mut tensors = encoder.tensors_mut();
            tensors.push(head.weight.as_slice_mut().expect("standard layout"));
            tensors.push(head.bias.as_slice_mut().expect("standard layout"));
            let mut g = grads.tensors();
            g.push(grad_w.as_slice().expect("standard layout"));
            g.push(grad_b.as_slice().expect("standard layout"));
            optimizer.step(tensors, g).map_err(wrap)?;
            if !encoder.is_finite() {
                return Err(wrap(Error::NonFinite("encoder parameters after update".into())));
            }
        }
        epoch_losses.push(total / docs.len() as f64);
    }

    let test_seqs = test
        .documents
        .iter()
        .map(|d| tokenize(&d.text, vocab, config.max_len_test))
        .collect::<Result<Vec<_>>>()?;
    let predictions = test_seqs
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            encoder
                .forward(s)
                .map(|c| head.predict(&c.output))
                .map_err(|e| Error::at(i, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let hits = predictions.iter().zip(&test_labels).filter(|(p, l)| p == l).count();
    Ok(FinetuneOutcome {
        encoder,
        head,
        test_accuracy: hits as f64 / test_labels.len() as f64,
        epoch_losses,
    })
}
