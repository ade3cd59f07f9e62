//! Fine-tunes a classifier head on top of an encoder, comparing a fresh
//! encoder with one pretrained by Shuffle & Divide.
//!
//! cargo run --release --example supervised_finetune -- [train docs per topic]

use sadcluster::contrastive::{supervised_finetune, train, FinetuneConfig, Method, TrainConfig};
use sadcluster::corpus::{Corpus, Document};
use sadcluster::encoder::EncoderParams;
use sadcluster::synth::{generate_synthetic, SynthConfig};

fn main() -> sadcluster::Result<()> {
    let per_topic: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let corpus = generate_synthetic(&SynthConfig::default())?;
    let index = |d: &Document| d.id.rsplit('-').next().and_then(|s| s.parse::<usize>().ok()).unwrap_or(0);
    let (train_docs, test_docs): (Vec<_>, Vec<_>) =
        corpus.documents.iter().cloned().partition(|d| index(d) < per_topic);
    let train_split = Corpus::new(train_docs, None, Some(4))?;
    let test_split = Corpus::new(test_docs, None, Some(4))?;

    let config = TrainConfig {
        epochs: Some(10),
        ..TrainConfig::desk(Method::Sad, 4)
    };
    let pretrained = train(&corpus, &config)?;
    let fresh = EncoderParams::init(pretrained.vocab.len(), config.encoder, config.seed)?;

    let finetune = FinetuneConfig {
        use_sad: true,
        ..Default::default()
    };
    for (name, params) in [("fresh", &fresh), ("pretrained", &pretrained.best_params)] {
        let out = supervised_finetune(params, &pretrained.vocab, &train_split, &test_split, 4, &finetune)?;
        println!(
            "{name:<10} {} labeled docs: test accuracy {:.3}, losses {:?}",
            train_split.len(),
            out.test_accuracy,
            out.epoch_losses.iter().map(|l| format!("{l:.3}")).collect::<Vec<_>>()
        );
    }
    Ok(())
}
