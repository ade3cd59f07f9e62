//! Unsupervised text classification by contrastive representation learning.
//!
//! The pipeline: clean and sentence-split a corpus, build positive pairs
//! either with Shuffle & Divide (two halves of a sentence-shuffled document)
//! or with TF-IDF top-1 positive sampling, train a mean-pooling encoder with
//! the NT-Xent loss, cluster the document embeddings with spherical k-means
//! and pick the checkpoint with the best silhouette score. Hungarian-matched
//! accuracy and AMI are available when gold labels exist.

pub mod augment;
pub mod cli;
pub mod cluster;
pub mod contrastive;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod rng;
pub mod synth;
pub mod text;
pub mod tfidf;

pub use error::{Error, Result};
