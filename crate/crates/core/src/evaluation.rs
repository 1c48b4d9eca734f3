//! TREC-style run scoring: average precision, precision at N and a paired
//! t-test between systems.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::retrieval::{RankedList, ScoredDoc, DEFAULT_DEPTH};

pub const DEFAULT_N_VALUES: [usize; 4] = [1, 5, 10, 30];

/// Graded judgments, grade in {0, 1, 2}.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u8>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, topic_id: &str, doc_id: &str, grade: u8) -> Result<()> {
        if grade > 2 {
            return Err(Error::InvalidParameter(format!("grade {grade} outside 0..=2")));
        }
        self.judgments
            .entry(topic_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), grade);
        Ok(())
    }

    /// `topic_id iteration doc_id grade` per line.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut qrels = Qrels::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let [topic, _, doc, grade] = fields[..] else {
                return Err(Error::parse(source, i + 1, format!("expected 4 fields, found {}", fields.len())));
            };
            let grade: u8 = grade
                .parse()
                .ok()
                .filter(|g| *g <= 2)
                .ok_or_else(|| Error::parse(source, i + 1, format!("grade `{grade}` is not 0, 1 or 2")))?;
            qrels.insert(topic, doc, grade)?;
        }
        Ok(qrels)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Qrels::parse(&text, &path.display().to_string())
    }

    /// Unjudged documents count as grade 0.
    pub fn grade(&self, topic_id: &str, doc_id: &str) -> u8 {
        self.judgments
            .get(topic_id)
            .and_then(|t| t.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn num_relevant(&self, topic_id: &str, threshold: u8) -> usize {
        self.judgments
            .get(topic_id)
            .map_or(0, |t| t.values().filter(|&&g| g >= threshold).count())
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RelevanceMode {
    #[default]
    AllRel,
    HighRel,
}

impl RelevanceMode {
    pub fn threshold(self) -> u8 {
        match self {
            RelevanceMode::AllRel => 1,
            RelevanceMode::HighRel => 2,
        }
    }
}

impl FromStr for RelevanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "allrel" => Ok(RelevanceMode::AllRel),
            "highrel" => Ok(RelevanceMode::HighRel),
            _ => Err(Error::InvalidParameter(format!("unknown relevance mode `{s}`"))),
        }
    }
}

impl fmt::Display for RelevanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelevanceMode::AllRel => "allrel",
            RelevanceMode::HighRel => "highrel",
        })
    }
}

/// `None` when the topic has no relevant documents at `threshold`.
pub fn average_precision(
    ranked: &RankedList,
    qrels: &Qrels,
    topic_id: &str,
    threshold: u8,
    cutoff: usize,
) -> Option<f64> {
    let r = qrels.num_relevant(topic_id, threshold);
    if r == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, doc) in ranked.doc_ids().take(cutoff).enumerate() {
        if qrels.grade(topic_id, doc) >= threshold {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Some(sum / r as f64)
}

/// Short lists are padded with non-relevant documents.
pub fn precision_at_n(ranked: &RankedList, qrels: &Qrels, topic_id: &str, n: usize, threshold: u8) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let hits = ranked
        .doc_ids()
        .take(n)
        .filter(|d| qrels.grade(topic_id, d) >= threshold)
        .count();
    hits as f64 / n as f64
}

/// Two-tailed paired t-test, `df = n - 1`. Returns `(t, p)`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidParameter("paired t-test needs at least 2 topics".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().all(|&x| x == 0.0) {
        return Ok((0.0, 1.0));
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    if se == 0.0 {
        return Ok((mean.signum() * f64::INFINITY, 0.0));
    }
    let t = mean / se;
    let df = n - 1.0;
    // P(|T| > t) = I_{df / (df + t^2)}(df / 2, 1 / 2)
    let p = statrs::function::beta::beta_reg(df / 2.0, 0.5, df / (df + t * t));
    Ok((t, p.clamp(0.0, 1.0)))
}

/// Run entries grouped by topic, each sorted by descending score then
/// ascending doc id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Run {
    pub topics: BTreeMap<String, RankedList>,
}

impl Run {
    pub fn from_lists(lists: impl IntoIterator<Item = RankedList>) -> Self {
        let mut run = Run::default();
        for list in lists {
            run.topics
                .entry(list.topic_id.clone())
                .or_insert_with(|| RankedList::default().with_topic(list.topic_id.clone()))
                .entries
                .extend(list.entries);
        }
        run.sort();
        run
    }

    /// `topic Q0 doc rank score tag` per line; rank and tag are ignored.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut run = Run::default();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let [topic, _, doc, rank, score, _] = fields[..] else {
                return Err(Error::parse(source, i + 1, format!("expected 6 fields, found {}", fields.len())));
            };
            rank.parse::<u64>()
                .map_err(|_| Error::parse(source, i + 1, format!("bad rank `{rank}`")))?;
            let score: f64 = score
                .parse()
                .ok()
                .filter(|s: &f64| !s.is_nan())
                .ok_or_else(|| Error::parse(source, i + 1, format!("bad score `{score}`")))?;
            run.topics
                .entry(topic.to_string())
                .or_insert_with(|| RankedList::default().with_topic(topic))
                .entries
                .push(ScoredDoc {
                    doc_id: doc.to_string(),
                    score,
                });
        }
        run.sort();
        Ok(run)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Run::parse(&text, &path.display().to_string())
    }

    fn sort(&mut self) {
        for list in self.topics.values_mut() {
            list.entries
                .sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicScores {
    pub ap: f64,
    pub p_at: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: RelevanceMode,
    pub per_topic: BTreeMap<String, TopicScores>,
    pub map_score: f64,
    pub p_at_n: BTreeMap<usize, f64>,
    /// Judged topics with no relevant document at the active threshold.
    pub excluded: Vec<String>,
}

impl EvalReport {
    pub fn num_topics(&self) -> usize {
        self.per_topic.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let ns: Vec<usize> = self.p_at_n.keys().copied().collect();
        let _ = write!(out, "{:<12} {:>8}", "topic", "AP");
        for n in &ns {
            let _ = write!(out, " {:>8}", format!("P@{n}"));
        }
        out.push('\n');
        let row = |out: &mut String, label: &str, ap: f64, ps: &BTreeMap<usize, f64>| {
            let _ = write!(out, "{label:<12} {ap:>8.4}");
            for n in &ns {
                let _ = write!(out, " {:>8.4}", ps.get(n).copied().unwrap_or(0.0));
            }
            out.push('\n');
        };
        for (topic, s) in &self.per_topic {
            row(&mut out, topic, s.ap, &s.p_at);
        }
        row(&mut out, "all", self.map_score, &self.p_at_n);
        let _ = writeln!(out, "# mode={} topics={} excluded={}", self.mode, self.num_topics(), self.excluded.len());
        out
    }
}

/// Scores every judged topic with at least one relevant document; such a
/// topic absent from the run scores zero. Run topics without judgments are
/// ignored.
pub fn evaluate_run(run: &Run, qrels: &Qrels, mode: RelevanceMode, n_values: &[usize]) -> EvalReport {
    let threshold = mode.threshold();
    let empty = RankedList::default();
    let mut per_topic = BTreeMap::new();
    let mut excluded = Vec::new();
    for topic in qrels.topics() {
        let ranked = run.topics.get(topic).unwrap_or(&empty);
        let Some(ap) = average_precision(ranked, qrels, topic, threshold, DEFAULT_DEPTH) else {
            excluded.push(topic.to_string());
            continue;
        };
        let p_at = n_values
            .iter()
            .map(|&n| (n, precision_at_n(ranked, qrels, topic, n, threshold)))
            .collect();
        per_topic.insert(topic.to_string(), TopicScores { ap, p_at });
    }
    for topic in run.topics.keys().filter(|t| qrels.num_relevant(t, 0) == 0) {
        log::warn!("topic {topic} has no judgments; ignored");
    }

    let n = per_topic.len();
    let mean = |f: &dyn Fn(&TopicScores) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_topic.values().map(f).sum::<f64>() / n as f64
        }
    };
    let map_score = mean(&|s| s.ap);
    let p_at_n = n_values.iter().map(|&k| (k, mean(&|s| s.p_at[&k]))).collect();
    EvalReport {
        mode,
        per_topic,
        map_score,
        p_at_n,
        excluded,
    }
}
