//! Inverted index with stop-word filtering and TF-IDF ranked retrieval.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default English stop-word list, one word per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

pub type StopWords = BTreeSet<String>;

/// Parses a stop-word file (one word per line, lowercased on load).
pub fn parse_stopwords(text: &str) -> StopWords {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

pub fn default_stopwords() -> StopWords {
    parse_stopwords(DEFAULT_STOPWORDS)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            title: title.into(),
            body: body.into(),
        }
    }
}

/// Lowercases, splits on every non-alphanumeric character and drops stop words.
pub fn tokenize_filter(text: &str, stopwords: &StopWords) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !stopwords.contains(t))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Posting {
    pub doc_id: String,
    pub term_frequency: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: BTreeMap<String, usize>,
    stopwords: StopWords,
}

fn valid_doc_id(id: &str) -> bool {
    !id.is_empty() && !id.contains(['\t', '\n', '\r'])
}

/// Builds the index over `title + " " + body` of every document.
pub fn index_documents(docs: &[Document], stopwords: &StopWords) -> Result<InvertedIndex> {
    let mut doc_lengths = BTreeMap::new();
    let mut counts: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
    for doc in docs {
        if !valid_doc_id(&doc.doc_id) {
            return Err(Error::Indexing(format!("invalid doc id {:?}", doc.doc_id)));
        }
        if doc.body.is_empty() {
            return Err(Error::Indexing(format!(
                "document {:?} has an empty body",
                doc.doc_id
            )));
        }
        if doc_lengths.contains_key(&doc.doc_id) {
            return Err(Error::Indexing(format!("duplicate doc id {:?}", doc.doc_id)));
        }
        let tokens = tokenize_filter(&format!("{} {}", doc.title, doc.body), stopwords);
        doc_lengths.insert(doc.doc_id.clone(), tokens.len());
        for t in tokens {
            *counts
                .entry(t)
                .or_default()
                .entry(doc.doc_id.clone())
                .or_default() += 1;
        }
    }
    let postings = counts
        .into_iter()
        .map(|(term, docs)| {
            let list = docs
                .into_iter()
                .map(|(doc_id, term_frequency)| Posting {
                    doc_id,
                    term_frequency,
                })
                .collect();
            (term, list)
        })
        .collect();
    Ok(InvertedIndex {
        postings,
        doc_lengths,
        stopwords: stopwords.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// One query's results: descending score, ties by ascending doc id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<ScoredDoc>,
    pub query_terms: Vec<String>,
}

impl RankedList {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.entries.iter().any(|e| e.doc_id == doc_id)
    }
}

/// Smoothed inverse document frequency `ln(1 + N / df)`.
pub fn idf(doc_count: usize, df: usize) -> f64 {
    (1.0 + doc_count as f64 / df as f64).ln()
}

/// Descending score, ascending doc id.
pub(crate) fn sort_scored(entries: &mut [ScoredDoc]) {
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
}

impl InvertedIndex {
    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<usize> {
        self.doc_lengths.get(doc_id).copied()
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.doc_lengths.contains_key(doc_id)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.doc_lengths.keys().map(String::as_str)
    }

    pub fn stopwords(&self) -> &StopWords {
        &self.stopwords
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    /// Distinct filtered query terms in first-occurrence order.
    pub fn query_terms(&self, query: &str) -> Vec<String> {
        let mut seen = BTreeSet::new();
        tokenize_filter(query, &self.stopwords)
            .into_iter()
            .filter(|t| seen.insert(t.clone()))
            .collect()
    }

    /// TF-IDF search: `score(d) = sum_t tf(t, d) * ln(1 + N / df(t))` over
    /// the distinct filtered query terms. Zero-score documents are omitted.
    pub fn search(&self, query: &str, top_k: usize) -> RankedList {
        let query_terms = self.query_terms(query);
        let n = self.doc_count();
        let mut scores: HashMap<&str, f64> = HashMap::new();
        for term in &query_terms {
            let postings = self.postings(term);
            if postings.is_empty() {
                continue;
            }
            let weight = idf(n, postings.len());
            for p in postings {
                *scores.entry(p.doc_id.as_str()).or_insert(0.0) += f64::from(p.term_frequency) * weight;
            }
        }
        let mut entries: Vec<ScoredDoc> = scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(doc_id, score)| ScoredDoc {
                doc_id: doc_id.to_string(),
                score,
            })
            .collect();
        sort_scored(&mut entries);
        entries.truncate(top_k);
        RankedList { entries, query_terms }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("vircis-index 1\n");
        let _ = writeln!(out, "stopwords {}", self.stopwords.len());
        for w in &self.stopwords {
            let _ = writeln!(out, "{w}");
        }
        let _ = writeln!(out, "docs {}", self.doc_lengths.len());
        for (id, len) in &self.doc_lengths {
            let _ = writeln!(out, "{id}\t{len}");
        }
        let _ = writeln!(out, "terms {}", self.postings.len());
        for (term, list) in &self.postings {
            let _ = writeln!(out, "{term} {}", list.len());
            for p in list {
                let _ = writeln!(out, "{}\t{}", p.doc_id, p.term_frequency);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("unexpected end of index, expected {what}")))
        };
        let (n, header) = next("header")?;
        if header != "vircis-index 1" {
            return Err(Error::parse(n, "not a version-1 index file"));
        }
        let section = |(n, line): (usize, &str), name: &str| -> Result<usize> {
            line.strip_prefix(name)
                .and_then(|rest| rest.strip_prefix(' '))
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| Error::parse(n, format!("expected `{name} <count>`")))
        };

        let k = section(next("stopwords")?, "stopwords")?;
        let mut stopwords = StopWords::new();
        for _ in 0..k {
            stopwords.insert(next("stop word")?.1.to_string());
        }

        let d = section(next("docs")?, "docs")?;
        let mut doc_lengths = BTreeMap::new();
        for _ in 0..d {
            let (n, line) = next("doc")?;
            let (id, len) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(n, "expected `doc_id<TAB>length`"))?;
            let len = len.parse().map_err(|_| Error::parse(n, "bad doc length"))?;
            if doc_lengths.insert(id.to_string(), len).is_some() {
                return Err(Error::parse(n, format!("duplicate doc {id:?}")));
            }
        }

        let t = section(next("terms")?, "terms")?;
        let mut postings = BTreeMap::new();
        for _ in 0..t {
            let (n, line) = next("term")?;
            let (term, df) = line
                .split_once(' ')
                .ok_or_else(|| Error::parse(n, "expected `term df`"))?;
            let df: usize = df.parse().map_err(|_| Error::parse(n, "bad df"))?;
            let mut list = Vec::with_capacity(df);
            for _ in 0..df {
                let (n, line) = next("posting")?;
                let (id, tf) = line
                    .rsplit_once('\t')
                    .ok_or_else(|| Error::parse(n, "expected `doc_id<TAB>tf`"))?;
                if !doc_lengths.contains_key(id) {
                    return Err(Error::parse(n, format!("posting for unknown doc {id:?}")));
                }
                list.push(Posting {
                    doc_id: id.to_string(),
                    term_frequency: tf.parse().map_err(|_| Error::parse(n, "bad tf"))?,
                });
            }
            if !list.windows(2).all(|w| w[0].doc_id < w[1].doc_id) {
                return Err(Error::parse(n, format!("postings of {term:?} not sorted")));
            }
            postings.insert(term.to_string(), list);
        }
        Ok(Self {
            postings,
            doc_lengths,
            stopwords,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

pub fn search(index: &InvertedIndex, query: &str, top_k: usize) -> RankedList {
    index.search(query, top_k)
}

// First non-blank line becomes the title; a one-line file keeps its text as body.
fn split_title(text: &str) -> (&str, &str) {
    let trimmed = text.trim_start();
    match trimmed.split_once('\n') {
        Some((first, rest)) if !rest.trim().is_empty() => (first.trim(), rest.trim()),
        _ => ("", trimmed.trim()),
    }
}

/// Reads every regular file under `dir`. The doc id is the `/`-separated
/// relative path and the title is the first non-blank line.
pub fn load_corpus_dir(dir: impl AsRef<Path>) -> Result<Vec<Document>> {
    let dir = dir.as_ref();
    let mut docs = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(dir)
            .expect("walkdir yields paths under its root");
        let doc_id = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let text = std::fs::read_to_string(entry.path())?;
        let (title, body) = split_title(&text);
        docs.push(Document::new(doc_id, title, body));
    }
    Ok(docs)
}

/// Reads a `doc_id<TAB>title<TAB>body-path` manifest; relative body paths
/// resolve against the manifest's directory.
pub fn load_corpus_manifest(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let text = std::fs::read_to_string(path)?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [doc_id, title, body_path] = fields.as_slice() else {
            return Err(Error::parse(i + 1, "expected `doc_id<TAB>title<TAB>body-path`"));
        };
        let body = std::fs::read_to_string(base.join(body_path))?;
        docs.push(Document::new(*doc_id, *title, body));
    }
    Ok(docs)
}

/// Loads a corpus from a directory or, for a regular file, a manifest.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    if path.is_dir() {
        load_corpus_dir(path)
    } else {
        load_corpus_manifest(path)
    }
}
