//! Query language models and negative-KL ranking.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{DocNo, Index, SmoothingParams};

pub const DEFAULT_DEPTH: usize = 1000;

const MASS_TOLERANCE: f64 = 1e-9;

/// Sparse term distribution. Every stored probability is strictly positive
/// and the total mass is 1 within 1e-9.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LanguageModel {
    probs: BTreeMap<String, f64>,
}

impl LanguageModel {
    pub fn from_probs(probs: BTreeMap<String, f64>) -> Result<Self> {
        if let Some((t, p)) = probs.iter().find(|(_, &p)| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidModel(format!("term `{t}` has probability {p}")));
        }
        let mass: f64 = probs.values().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidModel(format!("total mass {mass}")));
        }
        Ok(LanguageModel { probs })
    }

    /// Maximum-likelihood estimate from a token list.
    pub fn mle<S: AsRef<str>>(terms: &[S]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in terms {
            *counts.entry(t.as_ref().to_string()).or_insert(0) += 1;
        }
        let n = terms.len() as f64;
        Ok(LanguageModel {
            probs: counts
                .into_iter()
                .map(|(t, c)| (t, c as f64 / n))
                .collect(),
        })
    }

    /// Uniform over the distinct terms given.
    pub fn uniform<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = terms.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let p = 1.0 / set.len() as f64;
        Ok(LanguageModel {
            probs: set.into_iter().map(|t| (t, p)).collect(),
        })
    }

    pub fn prob(&self, term: &str) -> f64 {
        self.probs.get(term).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(t, &p)| (t.as_str(), p))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn probs(&self) -> &BTreeMap<String, f64> {
        &self.probs
    }

    /// `(1 - weight) * self + weight * other`; zero entries are dropped.
    pub fn interpolate(&self, other: &LanguageModel, weight: f64) -> Result<LanguageModel> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter(format!(
                "interpolation weight {weight} outside [0, 1]"
            )));
        }
        let mut probs = BTreeMap::new();
        let terms: BTreeSet<&String> = self.probs.keys().chain(other.probs.keys()).collect();
        for t in terms {
            let p = (1.0 - weight) * self.prob(t) + weight * other.prob(t);
            if p > 0.0 {
                probs.insert(t.clone(), p);
            }
        }
        Ok(LanguageModel { probs })
    }

    /// Keeps the `n` most probable terms (ties by ascending term) and
    /// renormalizes.
    pub fn truncate(&self, n: usize) -> LanguageModel {
        let mut ranked: Vec<(&String, f64)> = self.probs.iter().map(|(t, &p)| (t, p)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(n);
        let mass: f64 = ranked.iter().map(|(_, p)| p).sum();
        LanguageModel {
            probs: ranked
                .into_iter()
                .map(|(t, p)| (t.clone(), p / mass))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: String,
    #[serde(rename = "query")]
    pub query_text: String,
    pub query_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// Ranked results for one topic: descending score, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RankedList {
    pub topic_id: String,
    pub entries: Vec<ScoredDoc>,
}

impl RankedList {
    pub fn with_topic(mut self, topic_id: impl Into<String>) -> Self {
        self.topic_id = topic_id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    /// Appends TREC run lines: `topic Q0 doc rank score tag`.
    pub fn write_trec(&self, tag: &str, out: &mut String) {
        for (rank, e) in self.entries.iter().enumerate() {
            let _ = writeln!(
                out,
                "{} Q0 {} {} {} {}",
                self.topic_id,
                e.doc_id,
                rank + 1,
                format_score(e.score),
                tag
            );
        }
    }
}

/// Fixed-point rendering with at least six significant digits.
pub fn format_score(score: f64) -> String {
    if score == 0.0 || !score.is_finite() {
        return format!("{score:.6}");
    }
    let magnitude = score.abs().log10().floor() as i64;
    let decimals = (5 - magnitude).clamp(6, 17) as usize;
    format!("{score:.decimals$}")
}

/// Query terms that carry mass and occur somewhere in the collection.
fn scorable_terms<'a>(qm: &'a LanguageModel, index: &Index) -> Vec<(&'a str, f64)> {
    qm.iter()
        .filter(|&(t, _)| {
            let seen = index.collection_count(t) > 0;
            if !seen {
                log::debug!("query term `{t}` absent from collection; skipped");
            }
            seen
        })
        .collect()
}

/// Cross-entropy form of negative KL divergence:
/// `sum_w qm(w) * ln p(w | doc)` over terms seen in the collection.
pub fn kl_score(qm: &LanguageModel, doc_id: &str, index: &Index, s: SmoothingParams) -> Result<f64> {
    let doc = index.document(doc_id)?;
    Ok(scorable_terms(qm, index)
        .into_iter()
        .map(|(t, p)| p * index.smoothed(doc, t, s).ln())
        .sum())
}

/// `prod_i p(q_i | doc)`, accumulated in log space.
pub fn query_likelihood<S: AsRef<str>>(
    query_terms: &[S],
    doc_id: &str,
    index: &Index,
    s: SmoothingParams,
) -> Result<f64> {
    let doc = index.document(doc_id)?;
    let mut log_p = 0.0;
    for q in query_terms {
        let p = index.smoothed(doc, q.as_ref(), s);
        if p == 0.0 {
            return Ok(0.0);
        }
        log_p += p.ln();
    }
    Ok(log_p.exp())
}

/// Ranks every document posted strictly before `query_time`; empty when no
/// query term occurs in the collection.
///
/// Documents matching no query term still differ through their length, so
/// all of them are scored.
pub fn search(
    index: &Index,
    qm: &LanguageModel,
    query_time: f64,
    depth: usize,
    s: SmoothingParams,
) -> RankedList {
    let terms = scorable_terms(qm, index);
    if terms.is_empty() {
        return RankedList::default();
    }

    let mut scored: Vec<(DocNo, f64)> = (0..index.num_docs() as DocNo)
        .filter(|&no| index.doc(no).post_time < query_time)
        .map(|no| {
            let doc = index.doc(no);
            let score = terms
                .iter()
                .map(|&(t, p)| p * index.smoothed(doc, t, s).ln())
                .sum();
            (no, score)
        })
        .collect();

    // doc numbers follow id order, so they double as the tie-break
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(depth);

    RankedList {
        topic_id: String::new(),
        entries: scored
            .into_iter()
            .map(|(no, score)| ScoredDoc {
                doc_id: index.doc(no).id.clone(),
                score,
            })
            .collect(),
    }
}
