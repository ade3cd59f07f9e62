//! TF-IDF positive sampling training. Partners start from TF-IDF and move
//! towards the encoder's own similarity as epochs advance.
//!
//! cargo run --release --example train_tps -- [seed] [epochs]

use sadcluster::contrastive::{train, Method, TrainConfig};
use sadcluster::synth::{generate_synthetic, SynthConfig};

fn main() -> sadcluster::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);

    let corpus = generate_synthetic(&SynthConfig {
        seed,
        ..Default::default()
    })?;
    let config = TrainConfig {
        seed,
        epochs: Some(epochs),
        ..TrainConfig::desk(Method::Tps, 4)
    };
    let out = train(&corpus, &config)?;

    println!("untrained  acc {:.4}", out.initial.acc.unwrap_or(f64::NAN));
    for r in &out.history {
        println!(
            "epoch {:>2}  loss {:.4}  partner label match {:.3}  silhouette {:.4}  acc {:.4}",
            r.epoch,
            r.loss,
            r.label_match_rate.unwrap_or(f64::NAN),
            r.eval.silhouette,
            r.eval.acc.unwrap_or(f64::NAN)
        );
    }
    println!("selected epoch {}", out.best_epoch);
    Ok(())
}
