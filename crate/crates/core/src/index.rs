//! Immutable inverted index with Dirichlet-smoothed document models and the
//! exponential recency prior.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

/// Dirichlet prior strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub mu: f64,
}

impl SmoothingParams {
    pub fn new(mu: f64) -> Result<Self> {
        if mu > 0.0 && mu.is_finite() {
            Ok(SmoothingParams { mu })
        } else {
            Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")))
        }
    }
}

impl Default for SmoothingParams {
    fn default() -> Self {
        SmoothingParams { mu: 100.0 }
    }
}

/// Internal document number. Documents are numbered in ascending id order,
/// so ordering by `DocNo` is ordering by id.
pub type DocNo = u32;

#[derive(Debug, Clone, Default)]
pub struct TermStats {
    pub collection_count: u64,
    /// Sorted by doc number.
    pub postings: Vec<(DocNo, u32)>,
}

#[derive(Debug, Clone, Default)]
pub struct Index {
    docs: Vec<Document>,
    doc_lookup: HashMap<String, DocNo>,
    terms: BTreeMap<String, TermStats>,
    collection_length: u64,
}

impl Index {
    pub fn build(docs: impl IntoIterator<Item = Document>) -> Result<Self> {
        let mut docs: Vec<Document> = docs.into_iter().collect();
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = docs.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateDocument(w[0].id.clone()));
        }

        let mut terms: BTreeMap<String, TermStats> = BTreeMap::new();
        let mut doc_lookup = HashMap::with_capacity(docs.len());
        let mut collection_length = 0;
        for (no, doc) in docs.iter().enumerate() {
            let no = no as DocNo;
            doc_lookup.insert(doc.id.clone(), no);
            collection_length += doc.length;
            for (term, &count) in &doc.term_counts {
                let stats = terms.entry(term.clone()).or_default();
                stats.collection_count += count as u64;
                stats.postings.push((no, count));
            }
        }

        Ok(Index {
            docs,
            doc_lookup,
            terms,
            collection_length,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn collection_length(&self) -> u64 {
        self.collection_length
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    /// Terms in lexicographic order.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }

    pub fn term_stats(&self, term: &str) -> Option<&TermStats> {
        self.terms.get(term)
    }

    pub fn collection_count(&self, term: &str) -> u64 {
        self.terms.get(term).map_or(0, |s| s.collection_count)
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn doc_no(&self, id: &str) -> Option<DocNo> {
        self.doc_lookup.get(id).copied()
    }

    pub fn doc(&self, no: DocNo) -> &Document {
        &self.docs[no as usize]
    }

    pub fn document(&self, id: &str) -> Result<&Document> {
        self.doc_no(id)
            .map(|n| self.doc(n))
            .ok_or_else(|| Error::UnknownDocument(id.to_string()))
    }

    /// Maximum-likelihood collection model; zero for unseen terms.
    pub fn collection_prob(&self, term: &str) -> Result<f64> {
        if self.collection_length == 0 {
            return Err(Error::EmptyIndex);
        }
        Ok(self.collection_count(term) as f64 / self.collection_length as f64)
    }

    pub fn doc_prob(&self, doc_id: &str, term: &str, s: SmoothingParams) -> Result<f64> {
        let doc = self.document(doc_id)?;
        Ok(self.smoothed(doc, term, s))
    }

    pub(crate) fn smoothed(&self, doc: &Document, term: &str, s: SmoothingParams) -> f64 {
        let background = if self.collection_length == 0 {
            0.0
        } else {
            self.collection_count(term) as f64 / self.collection_length as f64
        };
        (doc.count(term) as f64 + s.mu * background) / (doc.length as f64 + s.mu)
    }

    /// Writes the forward documents; loading rebuilds the inverted side.
    pub fn save(&self, path: impl AsRef<Path>, stopwords: &[String]) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let snapshot = SnapshotRef {
            format: SNAPSHOT_FORMAT,
            stopwords,
            documents: &self.docs,
        };
        serde_json::to_writer(&mut w, &snapshot).map_err(|e| Error::Snapshot(e.to_string()))?;
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Returns the index and the stopword list it was built with.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Vec<String>)> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let snapshot: Snapshot = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
        if snapshot.format != SNAPSHOT_FORMAT {
            return Err(Error::Snapshot(format!(
                "unsupported snapshot format {}",
                snapshot.format
            )));
        }
        for d in &snapshot.documents {
            let total: u64 = d.term_counts.values().map(|&c| c as u64).sum();
            if total != d.length {
                return Err(Error::Snapshot(format!("length mismatch for `{}`", d.id)));
            }
        }
        Ok((Index::build(snapshot.documents)?, snapshot.stopwords))
    }
}

const SNAPSHOT_FORMAT: u32 = 1;

#[derive(Serialize)]
struct SnapshotRef<'a> {
    format: u32,
    stopwords: &'a [String],
    documents: &'a [Document],
}

#[derive(Deserialize)]
struct Snapshot {
    format: u32,
    stopwords: Vec<String>,
    documents: Vec<Document>,
}

/// Exponential recency density `r * exp(-r * (query_time - doc_time))`.
pub fn temporal_prior(query_time: f64, doc_time: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::InvalidParameter(format!("rate must be positive, got {rate}")));
    }
    if doc_time >= query_time {
        return Err(Error::FutureEvidence {
            doc_time,
            query_time,
        });
    }
    Ok(rate * (-rate * (query_time - doc_time)).exp())
}
