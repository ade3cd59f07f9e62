//! TF-IDF top-1 partners, their label agreement, and how the blended
//! similarity hands over from TF-IDF to the model as epochs advance.

use ndarray::Array2;
use sadcluster::synth::{generate_synthetic, SynthConfig};
use sadcluster::tfidf::{
    blended_similarity, fit_tfidf, label_match_rate, similarity_matrix, top1_from_similarity,
};

fn main() -> sadcluster::Result<()> {
    let corpus = generate_synthetic(&SynthConfig {
        docs_per_topic: 25,
        ..Default::default()
    })?;
    let model = fit_tfidf(&corpus)?;
    println!("vocabulary size {}", model.dim());

    let vectors = model.transform_corpus(&corpus);
    let sim = similarity_matrix(&vectors);
    let pairing = top1_from_similarity(&sim)?;
    let labels: Vec<Option<usize>> = corpus.documents.iter().map(|d| d.label).collect();
    println!("top-1 label match rate {:.3}", label_match_rate(&pairing, &labels)?);
    for i in 0..3 {
        let j = pairing.partner[i];
        println!(
            "  {} -> {} (cos {:.3})",
            corpus.documents[i].id, corpus.documents[j].id, pairing.similarity[i]
        );
    }

    // A stand-in model similarity that knows nothing: all zeros.
    let blank = Array2::zeros(sim.dim());
    for epoch in 1..=4 {
        let blended = blended_similarity(&sim, &blank, 0.5, epoch)?;
        println!("epoch {epoch}: weight on TF-IDF {:.3}", blended[[0, pairing.partner[0]]] / pairing.similarity[0]);
    }
    Ok(())
}
