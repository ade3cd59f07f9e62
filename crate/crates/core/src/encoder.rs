//! Built-in document encoder: token embedding table, masked mean pooling and
//! an optional `tanh` affine projection.
//!
//! The forward pass for a sequence with non-pad ids `t_1..t_L` is
//!
//! ```text
//! h = (1/L) * sum_k E[t_k]            (mean pooling over real tokens)
//! z = tanh(W^T h + b)                 (when a projection is configured)
//! ```
//!
//! [`EncoderParams::backward`] accumulates exact gradients of a downstream
//! scalar loss given `dL/dz`.
//!
//! Precomputed vectors from any other model can be used instead via
//! [`load_external_embeddings`].

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rng;
use crate::text::word_tokens;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
const PAD_TOKEN: &str = "[PAD]";
const UNK_TOKEN: &str = "[UNK]";

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from regular tokens; the two special ids are
    /// prepended.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(tokens);
        let mut index = HashMap::with_capacity(all.len());
        for (i, t) in all.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens: all, index })
    }

    /// Total size including the special ids.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn pad_id(&self) -> usize {
        PAD_ID
    }

    pub fn unk_id(&self) -> usize {
        UNK_ID
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Regular tokens, in id order (specials excluded).
    pub fn regular_tokens(&self) -> &[String] {
        &self.tokens[2..]
    }
}

/// Keeps the `max_vocab` most frequent tokens; equal counts are ordered
/// lexicographically.
pub fn build_vocab(corpus: &Corpus, max_vocab: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("cannot build a vocabulary from an empty corpus".into()));
    }
    if max_vocab == 0 {
        return Err(Error::InvalidArgument("max_vocab must be >= 1".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for d in &corpus.documents {
        for t in word_tokens(&d.text) {
            *counts.entry(t).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::NoTokens);
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_vocab);
    Vocabulary::from_tokens(ranked.into_iter().map(|(t, _)| t))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    /// Token ids padded with [`PAD_ID`] up to `max_len`.
    pub ids: Vec<usize>,
    /// Number of non-pad ids.
    pub length: usize,
    pub max_len: usize,
}

impl TokenSequence {
    pub fn tokens(&self) -> &[usize] {
        &self.ids[..self.length]
    }
}

/// Word-tokenizes, truncates to `max_len`, maps OOV to unk and pads.
pub fn tokenize(text: &str, vocab: &Vocabulary, max_len: usize) -> Result<TokenSequence> {
    if max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be >= 1".into()));
    }
    let mut ids: Vec<usize> = word_tokens(text)
        .iter()
        .take(max_len)
        .map(|t| vocab.id(t))
        .collect();
    let length = ids.len();
    ids.resize(max_len, PAD_ID);
    Ok(TokenSequence { ids, length, max_len })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    /// Output width of the `tanh` projection; `None` disables the projection
    /// and the pooled vector is the output.
    pub output_dim: Option<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            embed_dim: 64,
            output_dim: Some(64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `embed_dim x output_dim`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// `vocab_size x embed_dim`.
    pub embedding: Array2<f64>,
    pub projection: Option<Projection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Intermediate values of one forward pass, reused by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub pooled: Array1<f64>,
    pub output: Array1<f64>,
}

impl EncoderParams {
    /// Embedding rows ~ U(-0.05, 0.05); projection Xavier-uniform; zero bias.
    pub fn init(vocab_size: usize, config: EncoderConfig, seed: u64) -> Result<Self> {
        if vocab_size == 0 || config.embed_dim == 0 || config.output_dim == Some(0) {
            return Err(Error::InvalidArgument("encoder dimensions must be positive".into()));
        }
        let mut rng = rng::stream(seed, "encoder-init", &[]);
        let d = config.embed_dim;
        let embedding =
            Array2::from_shape_fn((vocab_size, d), |_| rng.random_range(-0.05..0.05));
        let projection = config.output_dim.map(|out| {
            let limit = (6.0 / (d + out) as f64).sqrt();
            Projection {
                weight: Array2::from_shape_fn((d, out), |_| rng.random_range(-limit..limit)),
                bias: Array1::zeros(out),
            }
        });
        Ok(EncoderParams {
            embedding,
            projection,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.projection
            .as_ref()
            .map_or(self.embed_dim(), |p| p.weight.ncols())
    }

    pub fn config(&self) -> EncoderConfig {
        EncoderConfig {
            embed_dim: self.embed_dim(),
            output_dim: self.projection.as_ref().map(|p| p.weight.ncols()),
        }
    }

    pub fn forward(&self, seq: &TokenSequence) -> Result<ForwardCache> {
        let toks = seq.tokens();
        if toks.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut pooled = Array1::<f64>::zeros(self.embed_dim());
        for &t in toks {
            if t >= self.vocab_size() {
                return Err(Error::ShapeMismatch(format!(
                    "token id {t} outside vocabulary of {}",
                    self.vocab_size()
                )));
            }
            pooled += &self.embedding.row(t);
        }
        pooled /= toks.len() as f64;
        let output = match &self.projection {
            Some(p) => (p.weight.t().dot(&pooled) + &p.bias).mapv(f64::tanh),
            None => pooled.clone(),
        };
        Ok(ForwardCache { pooled, output })
    }

    pub fn encode(&self, seq: &TokenSequence) -> Result<Embedding> {
        Ok(Embedding {
            values: self.forward(seq)?.output.to_vec(),
        })
    }

    /// Accumulates parameter gradients into `grads` given `dL/d output`.
    pub fn backward(
        &self,
        seq: &TokenSequence,
        cache: &ForwardCache,
        grad_output: ArrayView1<'_, f64>,
        grads: &mut EncoderGrads,
    ) -> Result<()> {
        if grad_output.len() != self.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "output gradient of dim {} for encoder output dim {}",
                grad_output.len(),
                self.output_dim()
            )));
        }
        let grad_pooled = match (&self.projection, &mut grads.projection) {
            (Some(p), Some((gw, gb))) => {
                let grad_pre = &grad_output * &cache.output.mapv(|z| 1.0 - z * z);
                let outer = cache
                    .pooled
                    .view()
                    .insert_axis(Axis(1))
                    .dot(&grad_pre.view().insert_axis(Axis(0)));
                *gw += &outer;
                *gb += &grad_pre;
                p.weight.dot(&grad_pre)
            }
            (None, None) => grad_output.to_owned(),
            _ => return Err(Error::ShapeMismatch("gradient/parameter layout differs".into())),
        };
        let toks = seq.tokens();
        let scale = 1.0 / toks.len() as f64;
        for &t in toks {
            grads
                .embedding
                .row_mut(t)
                .scaled_add(scale, &grad_pooled);
        }
        Ok(())
    }

    /// Flat mutable views of every tensor, in a fixed order shared with
    /// [`EncoderGrads::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self
            .embedding
            .as_slice_mut()
            .expect("standard layout")];
        if let Some(p) = &mut self.projection {
            out.push(p.weight.as_slice_mut().expect("standard layout"));
            out.push(p.bias.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embedding.as_slice().expect("standard layout")];
        if let Some(p) = &self.projection {
            out.push(p.weight.as_slice().expect("standard layout"));
            out.push(p.bias.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub embedding: Array2<f64>,
    pub projection: Option<(Array2<f64>, Array1<f64>)>,
}

impl EncoderGrads {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        EncoderGrads {
            embedding: Array2::zeros(params.embedding.raw_dim()),
            projection: params
                .projection
                .as_ref()
                .map(|p| (Array2::zeros(p.weight.raw_dim()), Array1::zeros(p.bias.raw_dim()))),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embedding.as_slice().expect("standard layout")];
        if let Some((w, b)) = &self.projection {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }
}

/// Encodes every sequence (in parallel); output order matches input order.
pub fn encode_batch(params: &EncoderParams, seqs: &[TokenSequence]) -> Result<Vec<Embedding>> {
    seqs.par_iter()
        .enumerate()
        .map(|(i, s)| params.encode(s).map_err(|e| Error::at(i, e)))
        .collect()
}

/// Embeds raw texts at `max_len` as rows of a matrix.
pub fn embed_texts<'a>(
    params: &EncoderParams,
    vocab: &Vocabulary,
    texts: impl IntoIterator<Item = &'a str>,
    max_len: usize,
) -> Result<Array2<f64>> {
    let seqs = texts
        .into_iter()
        .map(|t| tokenize(t, vocab, max_len))
        .collect::<Result<Vec<_>>>()?;
    let embs = encode_batch(params, &seqs)?;
    rows_to_matrix(embs.iter().map(|e| e.values.as_slice()), params.output_dim())
}

pub(crate) fn rows_to_matrix<'a>(
    rows: impl IntoIterator<Item = &'a [f64]>,
    dim: usize,
) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        if r.len() != dim {
            return Err(Error::ShapeMismatch(format!("row {n} has dim {} (expected {dim})", r.len())));
        }
        data.extend_from_slice(r);
        n += 1;
    }
    Array2::from_shape_vec((n, dim), data).map_err(|e| Error::ShapeMismatch(e.to_string()))
}

/// Id-keyed dense vectors in the plain-text embedding format:
///
/// ```text
/// dim=<d>
/// <id> <v_1> ... <v_d>
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalEmbeddings {
    pub dim: usize,
    pub ids: Vec<String>,
    pub vectors: Array2<f64>,
    index: HashMap<String, usize>,
}

impl ExternalEmbeddings {
    pub fn new(ids: Vec<String>, vectors: Array2<f64>) -> Result<Self> {
        if ids.len() != vectors.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} ids for {} vectors",
                ids.len(),
                vectors.nrows()
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if id.is_empty() || id.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!(
                    "embedding id {id:?} must be non-empty without whitespace"
                )));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate embedding id {id:?}")));
            }
        }
        Ok(ExternalEmbeddings {
            dim: vectors.ncols(),
            ids,
            vectors,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<Embedding> {
        let &i = self.index.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))?;
        Ok(Embedding {
            values: self.vectors.row(i).to_vec(),
        })
    }

    /// Rows for `ids`, in that order.
    pub fn matrix_for<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Array2<f64>> {
        let mut data = Vec::new();
        let mut n = 0;
        for id in ids {
            let &i = self.index.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))?;
            data.extend(self.vectors.row(i).iter().copied());
            n += 1;
        }
        Array2::from_shape_vec((n, self.dim), data).map_err(|e| Error::ShapeMismatch(e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "dim={}", self.dim).map_err(io)?;
        for (id, row) in self.ids.iter().zip(self.vectors.outer_iter()) {
            write!(w, "{id}").map_err(io)?;
            for v in row {
                write!(w, " {v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

pub fn load_external_embeddings(path: impl AsRef<Path>) -> Result<ExternalEmbeddings> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines().enumerate();
    let dim = loop {
        let Some((i, line)) = lines.next() else {
            return Err(parse_err(1, "missing dim=<d> header".into()));
        };
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        break line
            .trim()
            .strip_prefix("dim=")
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| parse_err(i + 1, format!("expected dim=<d> header, got {line:?}")))?;
    };
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(id) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|e| parse_err(i + 1, format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "{}:{}: id {id:?} has {} values, header says dim={dim}",
                path.display(),
                i + 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(i + 1, format!("non-finite value for id {id:?}")));
        }
        ids.push(id.to_string());
        data.extend(values);
    }
    let vectors = Array2::from_shape_vec((ids.len(), dim), data)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    ExternalEmbeddings::new(ids, vectors)
}

pub const CHECKPOINT_FORMAT: &str = "sadcluster-encoder";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorRecord {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    vocab: Vec<String>,
    max_len_test: usize,
    tensors: std::collections::BTreeMap<String, TensorRecord>,
}

/// A trained encoder together with the vocabulary it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vocab: Vocabulary,
    pub params: EncoderParams,
    /// Sequence length used when embedding documents for clustering.
    pub max_len_test: usize,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut tensors = std::collections::BTreeMap::new();
        let rec2 = |a: &Array2<f64>| TensorRecord {
            shape: a.shape().to_vec(),
            data: a.iter().copied().collect(),
        };
        tensors.insert("embedding".to_string(), rec2(&self.params.embedding));
        if let Some(p) = &self.params.projection {
            tensors.insert("projection.weight".to_string(), rec2(&p.weight));
            tensors.insert(
                "projection.bias".to_string(),
                TensorRecord {
                    shape: vec![p.bias.len()],
                    data: p.bias.to_vec(),
                },
            );
        }
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            vocab: self.vocab.regular_tokens().to_vec(),
            max_len_test: self.max_len_test,
            tensors,
        };
        let out = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(out);
        serde_json::to_writer(&mut w, &file)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: CheckpointFile = serde_json::from_slice(&bytes)?;
        if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint {} v{}",
                file.format, file.version
            )));
        }
        let vocab = Vocabulary::from_tokens(file.vocab)?;
        let mut tensors = file.tensors;
        let mut take2 = |name: &str| -> Result<Option<Array2<f64>>> {
            let Some(t) = tensors.remove(name) else { return Ok(None) };
            let [r, c] = t.shape[..] else {
                return Err(Error::ShapeMismatch(format!("{name} must be 2-d")));
            };
            Array2::from_shape_vec((r, c), t.data)
                .map(Some)
                .map_err(|e| Error::ShapeMismatch(format!("{name}: {e}")))
        };
        let embedding = take2("embedding")?
            .ok_or_else(|| Error::InvalidArgument("checkpoint has no embedding tensor".into()))?;
        let weight = take2("projection.weight")?;
        let projection = match (weight, tensors.remove("projection.bias")) {
            (Some(weight), Some(b)) if b.shape == [weight.ncols()] && b.data.len() == weight.ncols() => {
                Some(Projection {
                    weight,
                    bias: Array1::from(b.data),
                })
            }
            (None, None) => None,
            _ => return Err(Error::ShapeMismatch("inconsistent projection tensors".into())),
        };
        if embedding.nrows() != vocab.len()
            || projection.as_ref().is_some_and(|p| p.weight.nrows() != embedding.ncols())
        {
            return Err(Error::ShapeMismatch("checkpoint tensors do not match vocabulary".into()));
        }
        let params = EncoderParams {
            embedding,
            projection,
        };
        if !params.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(Checkpoint {
            vocab,
            params,
            max_len_test: file.max_len_test,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use ndarray::array;
    use proptest::prelude::*;

    fn corpus(texts: &[&str]) -> Corpus {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), *t, None))
            .collect();
        Corpus::new(docs, None, None).unwrap()
    }

    #[test]
    fn vocab_examples() {
        let v = build_vocab(&corpus(&["a a b"]), 10).unwrap();
        assert_eq!(v.regular_tokens(), ["a", "b"]);
        assert_eq!(v.len(), 4);
        assert_ne!(v.pad_id(), v.unk_id());

        let v = build_vocab(&corpus(&["a a b"]), 1).unwrap();
        assert_eq!(v.regular_tokens(), ["a"]);

        let v = build_vocab(&corpus(&["b a"]), 1).unwrap();
        assert_eq!(v.regular_tokens(), ["a"]);

        assert!(matches!(build_vocab(&corpus(&["..."]), 5), Err(Error::NoTokens)));
    }

    #[test]
    fn tokenize_pads_and_truncates() {
        let v = build_vocab(&corpus(&["a b"]), 10).unwrap();
        let s = tokenize("a b", &v, 4).unwrap();
        assert_eq!(s.ids, [v.id("a"), v.id("b"), PAD_ID, PAD_ID]);
        assert_eq!(s.length, 2);

        let long = vec!["a"; 300].join(" ");
        let s = tokenize(&long, &v, 256).unwrap();
        assert_eq!(s.length, 256);
        assert_eq!(s.ids.len(), 256);

        let s = tokenize("zzz a", &v, 3).unwrap();
        assert_eq!(s.tokens(), [UNK_ID, v.id("a")]);
    }

    fn plain_params(rows: Array2<f64>) -> EncoderParams {
        EncoderParams {
            embedding: rows,
            projection: None,
        }
    }

    fn seq(ids: &[usize], max_len: usize) -> TokenSequence {
        let mut v = ids.to_vec();
        v.resize(max_len, PAD_ID);
        TokenSequence {
            ids: v,
            length: ids.len(),
            max_len,
        }
    }

    #[test]
    fn encode_is_mean_of_rows() {
        let p = plain_params(array![[0.0, 0.0], [0.0, 0.0], [1.0, 2.0], [3.0, -2.0]]);
        assert_eq!(p.encode(&seq(&[2], 3)).unwrap().values, [1.0, 2.0]);
        assert_eq!(p.encode(&seq(&[2, 3], 3)).unwrap().values, [2.0, 0.0]);
        assert_eq!(
            p.encode(&seq(&[3, 2], 2)).unwrap(),
            p.encode(&seq(&[2, 3], 5)).unwrap()
        );
        assert!(matches!(p.encode(&seq(&[], 3)), Err(Error::EmptySequence)));
    }

    #[test]
    fn single_token_goes_through_projection() {
        let mut p = EncoderParams::init(4, EncoderConfig { embed_dim: 3, output_dim: Some(2) }, 1).unwrap();
        p.projection.as_mut().unwrap().bias = array![0.1, -0.2];
        let pr = p.projection.as_ref().unwrap();
        let expected = (pr.weight.t().dot(&p.embedding.row(2)) + &pr.bias).mapv(f64::tanh);
        let got = p.encode(&seq(&[2], 4)).unwrap().values;
        for (g, e) in got.iter().zip(expected.iter()) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_errors_carry_index() {
        let p = plain_params(array![[0.0], [0.0], [1.0]]);
        let err = encode_batch(&p, &[seq(&[2], 2), seq(&[], 2)]).unwrap_err();
        assert!(matches!(err, Error::Indexed { index: 1, .. }));
        let ok = encode_batch(&p, &[seq(&[2], 2), seq(&[2, 2], 2)]).unwrap();
        assert_eq!(ok.len(), 2);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let cfg = EncoderConfig::default();
        let a = EncoderParams::init(10, cfg, 5).unwrap();
        assert_eq!(a, EncoderParams::init(10, cfg, 5).unwrap());
        assert_ne!(a, EncoderParams::init(10, cfg, 6).unwrap());
        assert!(a.embedding.iter().all(|v| v.abs() <= 0.05));
        assert_eq!(a.output_dim(), 64);
    }

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let vocab = build_vocab(&corpus(&["alpha beta gamma"]), 10).unwrap();
        let params = EncoderParams::init(vocab.len(), EncoderConfig { embed_dim: 4, output_dim: Some(3) }, 9).unwrap();
        let ck = Checkpoint { vocab, params, max_len_test: 17 };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.json");
        ck.save(&p).unwrap();
        assert_eq!(Checkpoint::load(&p).unwrap(), ck);
    }

    #[test]
    fn external_embedding_examples() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        fs::write(&p, "dim=4\na 1 2 3 4\nb 0.5 0 0 -1e-3\n").unwrap();
        let e = load_external_embeddings(&p).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.get("b").unwrap().values, [0.5, 0.0, 0.0, -1e-3]);
        match e.get("zzz") {
            Err(Error::UnknownId(id)) => assert_eq!(id, "zzz"),
            other => panic!("unexpected {other:?}"),
        }

        fs::write(&p, "dim=4\na 1 2 3 4\nb 1 2 3\n").unwrap();
        assert!(matches!(load_external_embeddings(&p), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn external_embedding_write_roundtrip() {
        let e = ExternalEmbeddings::new(
            vec!["x".into(), "y".into()],
            array![[0.1, 1.0 / 3.0], [-2.5e-300, 7.0]],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        e.write(&p).unwrap();
        assert_eq!(load_external_embeddings(&p).unwrap(), e);
    }

    proptest! {
        #[test]
        fn encode_ignores_order_and_padding(
            ids in proptest::collection::vec(2usize..12, 1..10),
            extra_pad in 0usize..5,
            seed in any::<u64>(),
        ) {
            let p = EncoderParams::init(12, EncoderConfig { embed_dim: 5, output_dim: Some(3) }, seed).unwrap();
            let mut rev = ids.clone();
            rev.reverse();
            let a = p.encode(&seq(&ids, ids.len())).unwrap();
            let b = p.encode(&seq(&rev, ids.len() + extra_pad)).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
