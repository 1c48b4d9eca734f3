//! Tweet ingestion and text normalization.
//!
//! Raw records are read from a JSON-lines file, retweets and (optionally)
//! non-English posts are rejected, and the remaining text plus any resolved
//! URL titles are folded into one bag of stemmed, stopword-free terms.

mod stem;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use stem::porter_stem;

static DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Minimum share of ASCII letters among all letters for the heuristic
/// English filter to accept a post.
pub const ASCII_LETTER_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTweet {
    pub id: String,
    pub text: String,
    pub post_time: f64,
    #[serde(default)]
    pub url_titles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub term_counts: BTreeMap<String, u32>,
    pub length: u64,
    pub post_time: f64,
}

impl Document {
    /// Builds a document from already-normalized terms.
    pub fn from_terms<I, S>(id: impl Into<String>, post_time: f64, terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut term_counts = BTreeMap::new();
        let mut length = 0;
        for t in terms {
            *term_counts.entry(t.into()).or_insert(0) += 1;
            length += 1;
        }
        Document {
            id: id.into(),
            term_counts,
            length,
            post_time,
        }
    }

    pub fn count(&self, term: &str) -> u32 {
        self.term_counts.get(term).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnglishFilter {
    #[default]
    Off,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub stopwords: HashSet<String>,
    pub retweet_prefix: String,
    pub english_filter: EnglishFilter,
    pub merge_url_titles: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: default_stopwords(),
            retweet_prefix: "RT".to_string(),
            english_filter: EnglishFilter::Off,
            merge_url_titles: true,
        }
    }
}

pub fn default_stopwords() -> HashSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS)
}

/// One word per line; blank lines and `#` comments are ignored.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn load_stopwords(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stopwords(&text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    Retweet,
    NonEnglish,
    EmptyAfterPreprocess,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rejection::Retweet => "retweet",
            Rejection::NonEnglish => "non_english",
            Rejection::EmptyAfterPreprocess => "empty_after_preprocess",
        })
    }
}

/// Splits on Unicode whitespace, lowercases, trims non-alphanumeric
/// characters from both ends (which removes `@` and `#` prefixes) and drops
/// empty tokens and anything starting with `http`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let lower = raw.to_lowercase();
            let token = lower.trim_matches(|c: char| !c.is_alphanumeric());
            if token.is_empty() || token.starts_with("http") {
                None
            } else {
                Some(token.to_string())
            }
        })
        .collect()
}

fn is_english_like(text: &str) -> bool {
    let (mut letters, mut ascii) = (0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        letters += 1;
        if c.is_ascii_alphabetic() {
            ascii += 1;
        }
    }
    letters == 0 || ascii as f64 / letters as f64 >= ASCII_LETTER_THRESHOLD
}

/// Text analysis shared by documents, queries and concept properties.
#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    config: PreprocessConfig,
}

impl Preprocessor {
    pub fn new(config: PreprocessConfig) -> Self {
        Preprocessor { config }
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    /// tokenize, drop stopwords (surface forms), then stem.
    pub fn analyze(&self, text: &str) -> Vec<String> {
        tokenize(text)
            .into_iter()
            .filter(|t| !self.config.stopwords.contains(t))
            .map(|t| porter_stem(&t))
            .collect()
    }

    pub fn preprocess(&self, raw: &RawTweet) -> std::result::Result<Document, Rejection> {
        let cfg = &self.config;
        if !cfg.retweet_prefix.is_empty()
            && raw.text.trim_start().starts_with(cfg.retweet_prefix.as_str())
        {
            return Err(Rejection::Retweet);
        }
        if cfg.english_filter == EnglishFilter::Heuristic && !is_english_like(&raw.text) {
            return Err(Rejection::NonEnglish);
        }
        let mut terms = self.analyze(&raw.text);
        if cfg.merge_url_titles {
            for title in &raw.url_titles {
                terms.extend(self.analyze(title));
            }
        }
        if terms.is_empty() {
            return Err(Rejection::EmptyAfterPreprocess);
        }
        Ok(Document::from_terms(raw.id.clone(), raw.post_time, terms))
    }
}

/// Streams [`RawTweet`]s from a JSON-lines corpus file. Lines that fail to
/// parse or violate the record invariants are skipped and counted.
pub struct CorpusReader<R> {
    lines: std::io::Lines<R>,
    source: String,
    line_no: usize,
    skipped: usize,
}

impl CorpusReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(CorpusReader::new(
            BufReader::new(file),
            path.display().to_string(),
        ))
    }
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, source: impl Into<String>) -> Self {
        CorpusReader {
            lines: reader.lines(),
            source: source.into(),
            line_no: 0,
            skipped: 0,
        }
    }

    /// Number of malformed lines seen so far.
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<RawTweet>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.source, e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<RawTweet>(&line) {
                Ok(t) if !t.id.is_empty() && t.post_time.is_finite() && t.post_time >= 0.0 => {
                    return Some(Ok(t))
                }
                Ok(_) => {
                    log::warn!("{}:{}: record violates id/post_time invariants", self.source, self.line_no);
                    self.skipped += 1;
                }
                Err(e) => {
                    log::warn!("{}:{}: skipping malformed record: {e}", self.source, self.line_no);
                    self.skipped += 1;
                }
            }
        }
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<CorpusReader<BufReader<File>>> {
    CorpusReader::open(path)
}

/// Counts produced while turning a corpus file into documents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub read: usize,
    pub malformed: usize,
    pub rejected: BTreeMap<Rejection, usize>,
    pub accepted: usize,
}

/// Reads and preprocesses a whole corpus.
pub fn ingest<R: BufRead>(
    reader: CorpusReader<R>,
    pre: &Preprocessor,
) -> Result<(Vec<Document>, IngestStats)> {
    let mut reader = reader;
    let mut stats = IngestStats::default();
    let mut docs = Vec::new();
    for raw in reader.by_ref() {
        let raw = raw?;
        stats.read += 1;
        match pre.preprocess(&raw) {
            Ok(d) => docs.push(d),
            Err(r) => *stats.rejected.entry(r).or_insert(0) += 1,
        }
    }
    stats.malformed = reader.skipped();
    stats.accepted = docs.len();
    Ok((docs, stats))
}
