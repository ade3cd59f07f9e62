//! Spherical k-means on TF-IDF vectors, scored with ACC, AMI and the cosine
//! silhouette.

use ndarray::Array2;
use sadcluster::cluster::{spherical_kmeans, KMeansConfig};
use sadcluster::eval::evaluate;
use sadcluster::synth::{generate_synthetic, SynthConfig};
use sadcluster::tfidf::fit_tfidf;

fn main() -> sadcluster::Result<()> {
    let corpus = generate_synthetic(&SynthConfig::default())?;
    let model = fit_tfidf(&corpus)?;
    let rows: Vec<f64> = model
        .transform_corpus(&corpus)
        .iter()
        .flat_map(|v| v.to_dense())
        .collect();
    let x = Array2::from_shape_vec((corpus.len(), model.dim()), rows).expect("rows have model.dim() entries");

    let clusters = spherical_kmeans(&x, &KMeansConfig::new(4, 0))?;
    println!(
        "objective {:.3} after {} iterations (restart {})",
        clusters.objective, clusters.iterations_run, clusters.restart
    );
    println!("trace {:?}", clusters.objective_trace.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());

    let labels = corpus.labels()?;
    let report = evaluate(&labels, &clusters.assignments, Some(&x), Some(2000), 0)?;
    println!(
        "ACC {:.4}  AMI {:.4}  silhouette {:.4}",
        report.acc,
        report.ami,
        report.silhouette.unwrap_or(f64::NAN)
    );
    println!("cluster -> label {:?}", report.mapping);
    println!("confusion (label x cluster) {:?}", report.confusion);
    Ok(())
}
