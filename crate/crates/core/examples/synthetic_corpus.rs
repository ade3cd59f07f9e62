//! Generates a labeled multi-topic corpus and writes it as JSONL.
//!
//! cargo run --example synthetic_corpus -- [out.jsonl]

use sadcluster::corpus::{load_corpus, write_jsonl, CorpusFormat};
use sadcluster::synth::{generate_synthetic, SynthConfig};

fn main() -> sadcluster::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("synthetic.jsonl").display().to_string());

    let config = SynthConfig {
        topics: 3,
        docs_per_topic: 20,
        overlap: 0.3,
        seed: 7,
        ..Default::default()
    };
    let corpus = generate_synthetic(&config)?;
    write_jsonl(&corpus, &out)?;

    let reloaded = load_corpus(&out, CorpusFormat::Jsonl)?;
    assert_eq!(reloaded.len(), corpus.len());
    println!("wrote {} documents to {out}", corpus.len());
    println!("classes: {:?}", corpus.label_names.as_deref().unwrap_or_default());
    println!("histogram: {:?}", corpus.class_histogram().unwrap_or_default());

    let doc = &corpus.documents[0];
    println!("\n{} (label {:?}, {} sentences):", doc.id, doc.label, doc.sentences.len());
    for s in doc.sentences.iter().take(3) {
        println!("  {s}");
    }
    Ok(())
}
