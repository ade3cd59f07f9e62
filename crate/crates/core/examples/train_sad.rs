//! Shuffle & Divide training on a synthetic four-topic corpus, with the
//! per-epoch clustering history and the silhouette-selected checkpoint.
//!
//! cargo run --release --example train_sad -- [seed] [epochs]

use sadcluster::contrastive::{train, Method, TrainConfig};
use sadcluster::synth::{generate_synthetic, SynthConfig};

fn main() -> sadcluster::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(30);

    let corpus = generate_synthetic(&SynthConfig {
        seed,
        ..Default::default()
    })?;
    let config = TrainConfig {
        seed,
        epochs: Some(epochs),
        ..TrainConfig::desk(Method::Sad, 4)
    };
    let start = std::time::Instant::now();
    let out = train(&corpus, &config)?;

    println!(
        "untrained  silhouette {:.4}  acc {:.4}",
        out.initial.silhouette,
        out.initial.acc.unwrap_or(f64::NAN)
    );
    for r in &out.history {
        println!(
            "epoch {:>3}  loss {:.4}  silhouette {:.4}  acc {:.4}  ami {:.4}",
            r.epoch,
            r.loss,
            r.eval.silhouette,
            r.eval.acc.unwrap_or(f64::NAN),
            r.eval.ami.unwrap_or(f64::NAN)
        );
    }
    let best = out.best_record();
    println!(
        "selected epoch {}  acc {:.4}  ({:.1}s)",
        best.epoch,
        best.eval.acc.unwrap_or(f64::NAN),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
