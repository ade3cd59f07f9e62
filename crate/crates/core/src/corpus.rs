//! Corpus ingestion, cleaning and sentence segmentation.
//!
//! Two ingestion formats are supported:
//!
//! * `jsonl`: one object per line with `id`, `text` and optionally `label`
//!   (integer) or `labels` (integer list, used by multi-label sources).
//! * `dir-per-class`: `<root>/<class_name>/<file>.txt`; classes are indexed
//!   in lexicographic order of their directory names.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::whitespace_word_count;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub sentences: Vec<String>,
    /// Single gold class, if known. Only used for diagnostics and evaluation.
    pub label: Option<usize>,
    /// Raw label list as ingested (multi-label sources may carry several).
    pub labels: Vec<usize>,
    pub word_count: usize,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<usize>) -> Self {
        Self::with_labels(id, text, label.into_iter().collect())
    }

    /// Builds a document from a raw label list; `label` is set only when the
    /// list holds exactly one class.
    pub fn with_labels(id: impl Into<String>, text: impl Into<String>, labels: Vec<usize>) -> Self {
        let text = text.into();
        let sentences = split_sentences(&text);
        let word_count = whitespace_word_count(&text);
        let label = match labels.as_slice() {
            [l] => Some(*l),
            _ => None,
        };
        Document {
            id: id.into(),
            text,
            sentences,
            label,
            labels,
            word_count,
        }
    }

    fn with_text(&self, text: String) -> Self {
        Document {
            sentences: split_sentences(&text),
            word_count: whitespace_word_count(&text),
            text,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub label_names: Option<Vec<String>>,
    pub num_classes: Option<usize>,
}

impl Corpus {
    /// Builds a corpus, checking id uniqueness and label ranges. When
    /// `num_classes` is `None` it is inferred from the largest label.
    pub fn new(
        documents: Vec<Document>,
        label_names: Option<Vec<String>>,
        num_classes: Option<usize>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate document id {:?}", d.id)));
            }
        }
        let max_label = documents
            .iter()
            .flat_map(|d| d.labels.iter().chain(d.label.iter()))
            .max()
            .copied();
        let num_classes = match (num_classes, max_label) {
            (Some(k), Some(m)) if m >= k => {
                return Err(Error::InvalidArgument(format!(
                    "label {m} out of range for {k} classes"
                )))
            }
            (Some(k), _) => Some(k),
            (None, Some(m)) => Some(label_names.as_ref().map_or(m + 1, |n| n.len().max(m + 1))),
            (None, None) => label_names.as_ref().map(Vec::len).filter(|&n| n > 0),
        };
        Ok(Corpus {
            documents,
            label_names,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Gold labels of every document, or an error naming the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.documents
            .iter()
            .map(|d| d.label.ok_or_else(|| Error::MissingLabel(d.id.clone())))
            .collect()
    }

    pub fn is_fully_labeled(&self) -> bool {
        !self.documents.is_empty() && self.documents.iter().all(|d| d.label.is_some())
    }

    /// Per-class document counts (index = class), when the class count is known.
    pub fn class_histogram(&self) -> Option<Vec<usize>> {
        let k = self.num_classes?;
        let mut hist = vec![0usize; k];
        for l in self.documents.iter().filter_map(|d| d.label) {
            hist[l] += 1;
        }
        Some(hist)
    }

    fn retain_documents(&self, documents: Vec<Document>) -> Corpus {
        Corpus {
            documents,
            label_names: self.label_names.clone(),
            num_classes: self.num_classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    Jsonl,
    DirPerClass,
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: String,
    text: String,
    #[serde(default)]
    label: Option<usize>,
    #[serde(default)]
    labels: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct JsonlOut<'a> {
    id: &'a str,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<&'a [usize]>,
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    match format {
        CorpusFormat::Jsonl => load_jsonl(path.as_ref()),
        CorpusFormat::DirPerClass => load_dir_per_class(path.as_ref()),
    }
}

fn load_jsonl(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut documents = Vec::new();
    let mut first_seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(&first_line) = first_seen.get(&rec.id) {
            return Err(Error::DuplicateId {
                id: rec.id,
                line: line_no,
                first_line,
            });
        }
        first_seen.insert(rec.id.clone(), line_no);
        let labels = match (rec.labels, rec.label) {
            (Some(ls), _) => ls,
            (None, Some(l)) => vec![l],
            (None, None) => Vec::new(),
        };
        documents.push(Document::with_labels(rec.id, rec.text, labels));
    }
    Corpus::new(documents, None, None)
}

fn load_dir_per_class(root: &Path) -> Result<Corpus> {
    let mut classes: Vec<PathBuf> = read_dir_sorted(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    classes.sort();
    let mut names = Vec::with_capacity(classes.len());
    let mut documents = Vec::new();
    for (class_idx, class_dir) in classes.iter().enumerate() {
        let class_name = class_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        for file in read_dir_sorted(class_dir)? {
            if !file.is_file() || file.extension().is_none_or(|e| e != "txt") {
                continue;
            }
            let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
            let text = String::from_utf8_lossy(&bytes).into_owned();
            let file_name = file.file_name().unwrap_or_default().to_string_lossy();
            let id = format!("{class_name}/{file_name}");
            documents.push(Document::new(id, text, Some(class_idx)));
        }
        names.push(class_name);
    }
    let k = names.len();
    Corpus::new(documents, Some(names), (k > 0).then_some(k))
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Writes the corpus in the canonical jsonl format.
pub fn write_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for d in &corpus.documents {
        let rec = JsonlOut {
            id: &d.id,
            text: &d.text,
            label: d.label,
            labels: (d.labels.len() > 1).then_some(d.labels.as_slice()),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "vs.", "e.g.", "i.e.", "u.s.",
    "u.k.", "u.n.", "fig.", "approx.", "cf.", "gen.", "gov.", "sen.", "rep.", "capt.", "lt.",
    "col.", "sgt.", "mt.", "a.m.", "p.m.",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '\u{201d}' | '\u{2019}' | '\u{bb}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '{' | '\u{201c}' | '\u{2018}' | '\u{ab}')
}

/// `word` is the whitespace-delimited token that ends with the terminator.
fn is_guarded_abbreviation(word: &str) -> bool {
    let w = word.trim_start_matches(is_opener).to_lowercase();
    ABBREVIATIONS.contains(&w.as_str())
}

/// Rule-based sentence segmentation.
///
/// A boundary is a run of `.`/`!`/`?` (plus trailing closing quotes or
/// brackets) followed by whitespace or end of input. A single `.` ending a
/// known abbreviation is not a boundary. Decimal points never qualify because
/// they are followed by a digit. Terminators stay with their sentence and
/// segments are trimmed; empty segments are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminator(chars[j].1) {
            j += 1;
        }
        let run_terms = j - i;
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
        let at_boundary = chars.get(j).is_none_or(|&(_, c)| c.is_whitespace());
        if at_boundary {
            let guarded = run_terms == 1 && c == '.' && {
                let word_start = text[..pos]
                    .char_indices()
                    .rev()
                    .find(|&(_, ch)| ch.is_whitespace())
                    .map_or(0, |(p, ch)| p + ch.len_utf8());
                is_guarded_abbreviation(&text[word_start..pos + 1])
            };
            if !guarded {
                let seg = text[start..end].trim();
                if !seg.is_empty() {
                    out.push(seg.to_string());
                }
                start = end;
            }
        }
        i = j.max(i + 1);
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:(?:https?|ftp)://|www\.)\S+").unwrap());
static EMAIL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[\w.+-]+@[\w-]+(?:\.[\w-]+)+").unwrap());
static HEADER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z][A-Za-z0-9-]*:(?:\s|$)").unwrap());

/// Removes leading `Key: value` lines (with indented continuations) when they
/// are terminated by a blank line.
fn strip_header(text: &str) -> &str {
    let mut offset = 0;
    let mut saw_field = false;
    for line in text.split_inclusive('\n') {
        let content = line.trim_end_matches(['\n', '\r']);
        if content.trim().is_empty() {
            return if saw_field { &text[offset..] } else { text };
        }
        let continuation = saw_field && content.starts_with([' ', '\t']);
        if !HEADER_RE.is_match(content) && !continuation {
            return text;
        }
        saw_field = true;
        offset += line.len();
    }
    text
}

fn clean_newsgroup_text_once(text: &str) -> String {
    let body = strip_header(text);
    let mut kept = Vec::new();
    for line in body.lines() {
        if line.trim() == "--" {
            break;
        }
        if line.trim_start().starts_with('>') {
            continue;
        }
        kept.push(line);
    }
    let joined = kept.join("\n");
    let no_urls = URL_RE.replace_all(&joined, " ");
    let no_emails = EMAIL_RE.replace_all(&no_urls, " ");
    no_emails.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Newsgroup-style cleaning of one text: header block, quoted lines, the
/// signature after a `--` line, URLs and e-mail addresses are removed and
/// whitespace is collapsed. Applied to a fixpoint, so it is idempotent.
pub fn clean_newsgroup_text(text: &str) -> String {
    let mut cur = clean_newsgroup_text_once(text);
    for _ in 0..8 {
        let next = clean_newsgroup_text_once(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

/// Cleans every document and drops those left with fewer than `min_words`
/// whitespace words.
pub fn preprocess_newsgroup_style(corpus: &Corpus, min_words: usize) -> Result<Corpus> {
    if min_words == 0 {
        return Err(Error::InvalidArgument("min_words must be >= 1".into()));
    }
    let documents: Vec<Document> = corpus
        .documents
        .par_iter()
        .map(|d| d.with_text(clean_newsgroup_text(&d.text)))
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|d| d.word_count >= min_words)
        .collect();
    Ok(corpus.retain_documents(documents))
}

fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Reuters-style filtering: drops multi-labeled, unlabeled, empty and
/// duplicate documents, then keeps the `top_k_classes` most frequent classes
/// relabeled `0..k` by descending frequency (ties: lower original index).
pub fn preprocess_reuters_style(corpus: &Corpus, top_k_classes: usize) -> Result<Corpus> {
    if top_k_classes == 0 {
        return Err(Error::InvalidArgument("top_k_classes must be >= 1".into()));
    }
    let mut seen_texts = HashSet::new();
    let mut single: Vec<(&Document, usize)> = Vec::new();
    for d in &corpus.documents {
        let label = match (d.labels.as_slice(), d.label) {
            ([l], _) => *l,
            ([], Some(l)) => l,
            _ => continue,
        };
        let norm = normalize_ws(&d.text);
        if norm.is_empty() || !seen_texts.insert(norm) {
            continue;
        }
        single.push((d, label));
    }

    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &(_, l) in &single {
        *counts.entry(l).or_default() += 1;
    }
    let mut ranked: Vec<(usize, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(top_k_classes);
    let remap: HashMap<usize, usize> = ranked
        .iter()
        .enumerate()
        .map(|(new, &(old, _))| (old, new))
        .collect();

    let documents: Vec<Document> = single
        .into_iter()
        .filter_map(|(d, l)| {
            let new = *remap.get(&l)?;
            let mut doc = d.clone();
            doc.label = Some(new);
            doc.labels = vec![new];
            Some(doc)
        })
        .collect();
    let label_names = corpus.label_names.as_ref().map(|names| {
        ranked
            .iter()
            .map(|&(old, _)| names.get(old).cloned().unwrap_or_else(|| old.to_string()))
            .collect()
    });
    Ok(Corpus {
        documents,
        label_names,
        num_classes: (!ranked.is_empty()).then_some(ranked.len()),
    })
}

/// Keeps documents with at least `min_sentences` sentences, in order.
pub fn filter_min_sentences(corpus: &Corpus, min_sentences: usize) -> Result<Corpus> {
    if min_sentences == 0 {
        return Err(Error::InvalidArgument("min_sentences must be >= 1".into()));
    }
    let documents = corpus
        .documents
        .iter()
        .filter(|d| d.sentences.len() >= min_sentences)
        .cloned()
        .collect();
    Ok(corpus.retain_documents(documents))
}
