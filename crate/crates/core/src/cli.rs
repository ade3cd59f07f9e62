//! Command-line front end: `sadcluster {synth, preprocess, train, embed,
//! cluster, eval}`.
//!
//! Every command reads and writes plain files so stages can be run
//! separately; running embed, cluster and eval on a training checkpoint with
//! the training seed reproduces the metrics recorded during training.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cluster::{spherical_kmeans, KMeansConfig};
use crate::contrastive::{
    train_with_observer, EpochRecord, EvalSummary, Method, OptimizerKind, TrainConfig, TrainObserver,
    DEFAULT_SILHOUETTE_CAP,
};
use crate::corpus::{
    filter_min_sentences, load_corpus, preprocess_newsgroup_style, preprocess_reuters_style, write_jsonl, Corpus,
    CorpusFormat,
};
use crate::encoder::{embed_texts, load_external_embeddings, Checkpoint, EncoderConfig, ExternalEmbeddings};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::synth::{generate_synthetic, SynthConfig};
use crate::tfidf::{fit_tfidf, label_match_rate, top1_positive_sampling, PositivePairing};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "sadcluster", version, about = "Contrastive document embeddings and spherical k-means clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic topic corpus.
    Synth(SynthArgs),
    /// Clean, filter and sentence-split a corpus.
    Preprocess(PreprocessArgs),
    /// Train an encoder with Shuffle & Divide or TF-IDF positive sampling.
    Train(TrainArgs),
    /// Embed a corpus with a trained checkpoint.
    Embed(EmbedArgs),
    /// Spherical k-means over an embeddings file.
    Cluster(ClusterArgs),
    /// Score cluster assignments.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    pub topics: usize,
    #[arg(long, default_value_t = 50)]
    pub docs_per_topic: usize,
    #[arg(long, default_value_t = 500)]
    pub vocab_per_topic: usize,
    #[arg(long, default_value_t = 8)]
    pub sentences: usize,
    #[arg(long, default_value_t = 6)]
    pub min_words: usize,
    #[arg(long, default_value_t = 12)]
    pub max_words: usize,
    /// Probability that a token comes from the shared pool.
    #[arg(long, default_value_t = 0.2)]
    pub overlap: f64,
    #[arg(long, default_value_t = 20)]
    pub shared_vocab: usize,
    /// Zipf exponent of word ranks within a topic (0 = uniform).
    #[arg(long, default_value_t = 0.0)]
    pub topic_zipf: f64,
    #[arg(long, default_value_t = 1.0)]
    pub shared_zipf: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Newsgroup,
    Reuters,
    None,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Jsonl)]
    pub format: FormatArg,
    #[arg(long, value_enum, default_value_t = Profile::None)]
    pub profile: Profile,
    /// Newsgroup profile: minimum words per document.
    #[arg(long, default_value_t = 10)]
    pub min_words: usize,
    /// Reuters profile: number of most frequent classes kept.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Drop documents with fewer sentences (1 keeps everything non-empty).
    #[arg(long, default_value_t = 1)]
    pub min_sentences: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Statistics file; defaults to `<out>.stats.json`.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    DirPerClass,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => CorpusFormat::Jsonl,
            FormatArg::DirPerClass => CorpusFormat::DirPerClass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Reference hyperparameters (B = 320, AdamW lr 3e-5).
    Reference,
    /// Built-in encoder from scratch (B = 32, AdamW lr 5e-3).
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adamw,
    Sgd,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Preprocessed jsonl corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Sad)]
    pub method: Method,
    /// Number of clusters used for per-epoch model selection.
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = Preset::Reference)]
    pub preset: Preset,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_len_train: Option<usize>,
    #[arg(long)]
    pub max_len_test: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub output_dim: Option<usize>,
    /// Use mean-pooled token embeddings without the tanh projection.
    #[arg(long)]
    pub no_projection: bool,
    #[arg(long)]
    pub max_vocab: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = DEFAULT_SILHOUETTE_CAP)]
    pub silhouette_cap: usize,
    /// Receives checkpoint.json and metrics.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write the positive pairs of every epoch to pairs.jsonl.
    #[arg(long)]
    pub dump_pairs: bool,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Defaults to the checkpoint's test length.
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Embeddings file (`dim=<d>` header, then `id v1 .. vd` lines).
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub assignments: PathBuf,
    /// Labelled jsonl corpus; needed for ACC and AMI.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Embeddings for the silhouette score.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SILHOUETTE_CAP)]
    pub silhouette_cap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also report the label agreement of TF-IDF top-1 neighbours.
    #[arg(long)]
    pub tfidf_match: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Preprocess(a) => cmd_preprocess(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Embed(a) => cmd_embed(&a),
        Command::Cluster(a) => cmd_cluster(&a),
        Command::Eval(a) => cmd_eval(&a),
    }
}

/// `{"error": <kind>, "message": <text>}` for stderr.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({ "error": err.kind(), "message": err.to_string() }).to_string()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let corpus = generate_synthetic(&SynthConfig {
        topics: a.topics,
        docs_per_topic: a.docs_per_topic,
        vocab_per_topic: a.vocab_per_topic,
        sentences_per_doc: a.sentences,
        words_per_sentence: (a.min_words, a.max_words),
        overlap: a.overlap,
        shared_vocab: a.shared_vocab,
        topic_zipf: a.topic_zipf,
        shared_zipf: a.shared_zipf,
        seed: a.seed,
    })?;
    write_jsonl(&corpus, &a.out)
}

#[derive(Debug, Serialize)]
pub struct PreprocessStats {
    pub schema_version: u32,
    pub profile: Profile,
    pub documents_before: usize,
    pub documents_after: usize,
    pub num_classes: Option<usize>,
    pub label_names: Option<Vec<String>>,
    pub class_histogram: Option<Vec<usize>>,
}

pub fn cmd_preprocess(a: &PreprocessArgs) -> Result<()> {
    let raw = load_corpus(&a.input, a.format.into())?;
    let cleaned = match a.profile {
        Profile::Newsgroup => preprocess_newsgroup_style(&raw, a.min_words)?,
        Profile::Reuters => preprocess_reuters_style(&raw, a.top_k)?,
        Profile::None => raw.clone(),
    };
    let out = filter_min_sentences(&cleaned, a.min_sentences)?;
    write_jsonl(&out, &a.out)?;
    let stats = PreprocessStats {
        schema_version: SCHEMA_VERSION,
        profile: a.profile,
        documents_before: raw.len(),
        documents_after: out.len(),
        num_classes: out.num_classes,
        label_names: out.label_names.clone(),
        class_histogram: out.class_histogram(),
    };
    let stats_path = a.stats.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".stats.json");
        PathBuf::from(p)
    });
    write_json(&stats_path, &stats)
}

pub fn train_config(a: &TrainArgs) -> TrainConfig {
    let mut c = match a.preset {
        Preset::Reference => TrainConfig::new(a.method, a.k),
        Preset::Desk => TrainConfig::desk(a.method, a.k),
    };
    c.seed = a.seed;
    c.epochs = a.epochs;
    c.kmeans_restarts = a.restarts;
    c.silhouette_cap = Some(a.silhouette_cap);
    if let Some(v) = a.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = a.lr {
        c.optimizer.learning_rate = v;
    }
    if let Some(v) = a.weight_decay {
        c.optimizer.weight_decay = v;
    }
    if let Some(o) = a.optimizer {
        c.optimizer.kind = match o {
            OptimizerArg::Adamw => OptimizerKind::AdamW,
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        };
    }
    if let Some(v) = a.temperature {
        c.temperature = v;
    }
    if let Some(v) = a.alpha {
        c.alpha = v;
    }
    if let Some(v) = a.max_len_train {
        c.max_len_train = v;
    }
    if let Some(v) = a.max_len_test {
        c.max_len_test = v;
    }
    if let Some(v) = a.max_vocab {
        c.max_vocab = v;
    }
    let defaults = EncoderConfig::default();
    c.encoder = EncoderConfig {
        embed_dim: a.embed_dim.unwrap_or(defaults.embed_dim),
        output_dim: if a.no_projection {
            None
        } else {
            Some(a.output_dim.unwrap_or(defaults.output_dim.unwrap_or(defaults.embed_dim)))
        },
    };
    c
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub schema_version: u32,
    pub config: TrainConfig,
    pub num_documents: usize,
    pub best_epoch: usize,
    pub initial: EvalSummary,
    pub history: Vec<EpochRecord>,
}

#[derive(Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
enum PairDump<'a> {
    Sad {
        epoch: usize,
        source_id: &'a str,
        view_a: &'a str,
        view_b: &'a str,
        sentence_ids_a: &'a [usize],
        sentence_ids_b: &'a [usize],
    },
    Tps {
        epoch: usize,
        id: &'a str,
        partner_id: &'a str,
        similarity: f64,
    },
}

struct CliObserver<'a> {
    ids: Vec<&'a str>,
    pairs: Option<BufWriter<fs::File>>,
    error: Option<Error>,
    path: PathBuf,
}

impl CliObserver<'_> {
    fn emit(&mut self, record: PairDump<'_>) {
        if self.error.is_some() {
            return;
        }
        if let Some(w) = &mut self.pairs {
            let res = serde_json::to_writer(&mut *w, &record)
                .map_err(Error::from)
                .and_then(|_| w.write_all(b"\n").map_err(|e| Error::io(&self.path, e)));
            if let Err(e) = res {
                self.error = Some(e);
            }
        }
    }
}

impl TrainObserver for CliObserver<'_> {
    fn on_sad_pairs(&mut self, epoch: usize, pairs: &[crate::augment::DocumentViewPair]) {
        for p in pairs {
            self.emit(PairDump::Sad {
                epoch,
                source_id: &p.source_id,
                view_a: &p.view_a,
                view_b: &p.view_b,
                sentence_ids_a: &p.sentence_ids_a,
                sentence_ids_b: &p.sentence_ids_b,
            });
        }
    }

    fn on_tps_pairing(&mut self, epoch: usize, pairing: &PositivePairing) {
        let ids = self.ids.clone();
        for (n, (&m, &s)) in pairing.partner.iter().zip(&pairing.similarity).enumerate() {
            self.emit(PairDump::Tps {
                epoch,
                id: ids[n],
                partner_id: ids[m],
                similarity: s,
            });
        }
    }

    fn on_epoch(&mut self, r: &EpochRecord) {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        eprintln!(
            "epoch {:>3}  loss {:.5}  silhouette {:.4}  acc {}  ami {}",
            r.epoch,
            r.loss,
            r.eval.silhouette,
            fmt(r.eval.acc),
            fmt(r.eval.ami)
        );
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let config = train_config(a);
    let corpus = load_corpus(&a.corpus, CorpusFormat::Jsonl)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let pairs_path = a.out_dir.join("pairs.jsonl");
    let pairs = if a.dump_pairs {
        let f = fs::File::create(&pairs_path).map_err(|e| Error::io(&pairs_path, e))?;
        Some(BufWriter::new(f))
    } else {
        None
    };
    let mut observer = CliObserver {
        ids: corpus.documents.iter().map(|d| d.id.as_str()).collect(),
        pairs,
        error: None,
        path: pairs_path.clone(),
    };
    let outcome = train_with_observer(&corpus, &config, &mut observer)?;
    if let Some(e) = observer.error.take() {
        return Err(e);
    }
    if let Some(mut w) = observer.pairs.take() {
        w.flush().map_err(|e| Error::io(&pairs_path, e))?;
    }
    outcome.checkpoint().save(a.out_dir.join("checkpoint.json"))?;
    let metrics = TrainMetrics {
        schema_version: SCHEMA_VERSION,
        config,
        num_documents: corpus.len(),
        best_epoch: outcome.best_epoch,
        initial: outcome.initial.clone(),
        history: outcome.history.clone(),
    };
    write_json(&a.out_dir.join("metrics.json"), &metrics)
}

pub fn cmd_embed(a: &EmbedArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let corpus = load_corpus(&a.corpus, CorpusFormat::Jsonl)?;
    let max_len = a.max_len.unwrap_or(ckpt.max_len_test);
    let vectors = embed_texts(&ckpt.params, &ckpt.vocab, corpus.documents.iter().map(|d| d.text.as_str()), max_len)?;
    let ids = corpus.documents.iter().map(|d| d.id.clone()).collect();
    ExternalEmbeddings::new(ids, vectors)?.write(&a.out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentsFile {
    pub schema_version: u32,
    pub k: usize,
    pub seed: u64,
    pub objective: f64,
    pub iterations_run: usize,
    pub restart: usize,
    pub objective_trace: Vec<f64>,
    pub ids: Vec<String>,
    pub assignments: Vec<usize>,
}

pub fn cmd_cluster(a: &ClusterArgs) -> Result<()> {
    let emb = load_external_embeddings(&a.embeddings)?;
    let config = KMeansConfig {
        k: a.k,
        max_iter: a.max_iter,
        tol: a.tol,
        restarts: a.restarts,
        seed: a.seed,
    };
    let model = spherical_kmeans(&emb.vectors, &config)?;
    write_json(
        &a.out,
        &AssignmentsFile {
            schema_version: SCHEMA_VERSION,
            k: a.k,
            seed: a.seed,
            objective: model.objective,
            iterations_run: model.iterations_run,
            restart: model.restart,
            objective_trace: model.objective_trace,
            ids: emb.ids,
            assignments: model.assignments,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub schema_version: u32,
    pub num_documents: usize,
    pub acc: Option<f64>,
    pub ami: Option<f64>,
    pub silhouette: Option<f64>,
    /// Cluster id -> label id.
    pub mapping: Option<std::collections::BTreeMap<usize, usize>>,
    pub confusion: Option<Vec<Vec<usize>>>,
    pub tfidf_label_match_rate: Option<f64>,
}

/// Corpus documents reordered to follow `ids`.
fn align<'a>(corpus: &'a Corpus, ids: &[String]) -> Result<Vec<&'a crate::corpus::Document>> {
    let index: std::collections::HashMap<&str, usize> =
        corpus.documents.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .map(|&i| &corpus.documents[i])
                .ok_or_else(|| Error::UnknownId(id.clone()))
        })
        .collect()
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let assigned: AssignmentsFile = read_json(&a.assignments)?;
    if assigned.ids.len() != assigned.assignments.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} ids vs {} assignments",
            assigned.ids.len(),
            assigned.assignments.len()
        )));
    }
    let embeddings = a
        .embeddings
        .as_ref()
        .map(|p| load_external_embeddings(p).and_then(|e| e.matrix_for(assigned.ids.iter().map(String::as_str))))
        .transpose()?;
    let corpus = a.corpus.as_ref().map(|p| load_corpus(p, CorpusFormat::Jsonl)).transpose()?;
    let cap = Some(a.silhouette_cap);

    let mut metrics = EvalMetrics {
        schema_version: SCHEMA_VERSION,
        num_documents: assigned.ids.len(),
        acc: None,
        ami: None,
        silhouette: None,
        mapping: None,
        confusion: None,
        tfidf_label_match_rate: None,
    };
    match &corpus {
        Some(corpus) => {
            let docs = align(corpus, &assigned.ids)?;
            let labels = docs
                .iter()
                .map(|d| d.label.ok_or_else(|| Error::MissingLabel(d.id.clone())))
                .collect::<Result<Vec<_>>>()?;
            let report = evaluate(&labels, &assigned.assignments, embeddings.as_ref(), cap, a.seed)?;
            metrics.acc = Some(report.acc);
            metrics.ami = Some(report.ami);
            metrics.silhouette = report.silhouette;
            metrics.mapping = Some(report.mapping);
            metrics.confusion = Some(report.confusion);
            if a.tfidf_match {
                let model = fit_tfidf(corpus)?;
                let pairing = top1_positive_sampling(&model.transform_corpus(corpus))?;
                let labels: Vec<Option<usize>> = corpus.documents.iter().map(|d| d.label).collect();
                metrics.tfidf_label_match_rate = Some(label_match_rate(&pairing, &labels)?);
            }
        }
        None => {
            if a.tfidf_match {
                return Err(Error::InvalidArgument("--tfidf-match needs --corpus".into()));
            }
            if let Some(e) = &embeddings {
                metrics.silhouette = Some(crate::eval::silhouette_score(e, &assigned.assignments, cap, a.seed)?);
            }
        }
    }
    write_json(&a.out, &metrics)
}
