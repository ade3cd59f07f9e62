//! Clusters precomputed embeddings stored in the plain-text format
//! (`dim=<d>` header, then `<id> <values...>` per line).

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use sadcluster::cluster::{spherical_kmeans, KMeansConfig};
use sadcluster::encoder::{load_external_embeddings, ExternalEmbeddings};
use sadcluster::eval::{adjusted_mutual_information, clustering_accuracy, silhouette_score};
use sadcluster::rng::StreamRng;

fn main() -> sadcluster::Result<()> {
    // Three noisy directions in 16 dimensions stand in for a real encoder.
    let mut rng = StreamRng::seed_from_u64(3);
    let (k, per, dim) = (3, 40, 16);
    let centers = Array2::from_shape_fn((k, dim), |_| rng.random_range(-1.0..1.0));
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let vectors = Array2::from_shape_fn((k * per, dim), |(i, j)| centers[[i / per, j]] + rng.random_range(-0.6..0.6));
    for i in 0..k * per {
        ids.push(format!("doc{i:03}"));
        labels.push(i / per);
    }
    let path = std::env::temp_dir().join("external_embeddings.txt");
    ExternalEmbeddings::new(ids, vectors)?.write(&path)?;

    let loaded = load_external_embeddings(&path)?;
    println!("loaded {} vectors of dim {} from {}", loaded.len(), loaded.dim, path.display());
    let model = spherical_kmeans(&loaded.vectors, &KMeansConfig::new(k, 0))?;
    let acc = clustering_accuracy(&labels, &model.assignments)?;
    let ami = adjusted_mutual_information(&labels, &model.assignments)?;
    let ss = silhouette_score(&loaded.vectors, &model.assignments, Some(2000), 0)?;
    println!("ACC {:.4}  AMI {:.4}  silhouette {:.4}", acc.acc, ami, ss);
    Ok(())
}
