//! Knowledge query construction from matched concepts.
//!
//! Meta properties (name, aliases, notable_for, notable_types) are added
//! verbatim. Long-text properties (description and domain-specific text)
//! supply candidates that are scored against the pseudo-relevance set:
//!
//! ```text
//! score(w) = sum_{D in PRD} P(D) * p(w | D) * prod_i p(q_i | D)
//! ```
//!
//! where `P(D)` is either the exponential recency prior normalized over the
//! set, or uniform.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::Preprocessor;
use crate::error::{Error, Result};
use crate::index::{temporal_prior, Index, SmoothingParams};
use crate::knowledge::Concept;
use crate::retrieval::{LanguageModel, RankedList};

/// How many scored candidates survive selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermLimit {
    Top(usize),
    /// Every candidate with a positive score.
    All,
}

impl FromStr for TermLimit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("max") {
            return Ok(TermLimit::All);
        }
        s.parse()
            .map(TermLimit::Top)
            .map_err(|_| Error::InvalidParameter(format!("term limit `{s}` is neither a count nor MAX")))
    }
}

impl fmt::Display for TermLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermLimit::Top(k) => write!(f, "{k}"),
            TermLimit::All => f.write_str("MAX"),
        }
    }
}

/// Document prior used when scoring candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DocPrior {
    Temporal { rate: f64 },
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionParams {
    pub alpha: f64,
    pub terms: TermLimit,
    pub prd_depth: usize,
    pub rate: f64,
}

impl Default for ExpansionParams {
    fn default() -> Self {
        ExpansionParams {
            alpha: 0.5,
            terms: TermLimit::Top(5),
            prd_depth: 100,
            rate: 0.1,
        }
    }
}

impl ExpansionParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.prd_depth == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        if !(self.rate > 0.0) {
            return Err(Error::InvalidParameter(format!("r must be positive, got {}", self.rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredTerm {
    pub term: String,
    pub score: f64,
}

pub fn meta_terms(c: &Concept, pre: &Preprocessor) -> Vec<String> {
    std::iter::once(&c.name)
        .chain(&c.aliases)
        .chain(&c.notable_for)
        .chain(&c.notable_types)
        .flat_map(|text| pre.analyze(text))
        .collect()
}

pub fn candidate_terms(c: &Concept, pre: &Preprocessor) -> Vec<String> {
    std::iter::once(&c.description)
        .chain(c.domain_properties.values())
        .flat_map(|text| pre.analyze(text))
        .collect()
}

/// Normalized document priors for the PRD entries, in list order.
fn prd_priors(prd: &RankedList, index: &Index, query_time: f64, prior: DocPrior) -> Result<Vec<f64>> {
    let n = prd.len();
    match prior {
        DocPrior::Uniform => Ok(vec![1.0 / n as f64; n]),
        DocPrior::Temporal { rate } => {
            let mut ages = Vec::with_capacity(n);
            for e in &prd.entries {
                let t = index.document(&e.doc_id)?.post_time;
                // validates rate and the time gate
                temporal_prior(query_time, t, rate)?;
                ages.push(query_time - t);
            }
            // r*exp(-r*age) / sum, shifted by the youngest age so that large
            // rates do not underflow
            let youngest = ages.iter().copied().fold(f64::INFINITY, f64::min);
            let weights: Vec<f64> = ages.iter().map(|a| (-rate * (a - youngest)).exp()).collect();
            let total: f64 = weights.iter().sum();
            Ok(weights.into_iter().map(|w| w / total).collect())
        }
    }
}

/// Scores each candidate over the PRD. `query_terms` are the analyzed query
/// tokens; those absent from the collection are left out of the query
/// likelihood, as they are during retrieval. Sorted by descending score,
/// ties by ascending term.
pub fn score_candidates(
    candidates: &BTreeSet<String>,
    query_terms: &[String],
    query_time: f64,
    prd: &RankedList,
    index: &Index,
    prior: DocPrior,
    s: SmoothingParams,
) -> Result<Vec<ScoredTerm>> {
    if prd.is_empty() {
        return Err(Error::EmptyFeedbackSet);
    }
    let priors = prd_priors(prd, index, query_time, prior)?;
    let query: Vec<&String> = query_terms
        .iter()
        .filter(|q| index.collection_count(q) > 0)
        .collect();

    // P(D) * prod_i p(q_i | D), per PRD document
    let mut doc_weights = Vec::with_capacity(prd.len());
    for (e, p_d) in prd.entries.iter().zip(&priors) {
        let doc = index.document(&e.doc_id)?;
        let log_ql: f64 = query.iter().map(|q| index.smoothed(doc, q, s).ln()).sum();
        doc_weights.push((doc, p_d * log_ql.exp()));
    }

    let mut scored: Vec<ScoredTerm> = candidates
        .iter()
        .map(|w| ScoredTerm {
            term: w.clone(),
            score: doc_weights
                .iter()
                .map(|(doc, weight)| weight * index.smoothed(doc, w, s))
                .sum(),
        })
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
    Ok(scored)
}

/// Everything that went into one knowledge query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnowledgeQuery {
    pub concepts: Vec<String>,
    pub meta_terms: Vec<String>,
    pub selected: Vec<ScoredTerm>,
    pub model: LanguageModel,
}

/// Pools long-text candidates over all concepts, keeps the top terms with a
/// positive score, adds every meta term and returns the uniform model over
/// the distinct result. `None` when there is nothing to expand with.
#[allow(clippy::too_many_arguments)]
pub fn build_knowledge_query(
    concepts: &[&Concept],
    query_terms: &[String],
    query_time: f64,
    prd: &RankedList,
    index: &Index,
    params: &ExpansionParams,
    prior: DocPrior,
    pre: &Preprocessor,
    s: SmoothingParams,
) -> Result<Option<KnowledgeQuery>> {
    if concepts.is_empty() {
        return Ok(None);
    }
    let meta: Vec<String> = concepts.iter().flat_map(|c| meta_terms(c, pre)).collect();
    let candidates: BTreeSet<String> = concepts.iter().flat_map(|c| candidate_terms(c, pre)).collect();

    let limit = match params.terms {
        TermLimit::Top(k) => k,
        TermLimit::All => usize::MAX,
    };
    let selected: Vec<ScoredTerm> = if limit == 0 || candidates.is_empty() {
        Vec::new()
    } else {
        match score_candidates(&candidates, query_terms, query_time, prd, index, prior, s) {
            Ok(scored) => scored.into_iter().filter(|t| t.score > 0.0).take(limit).collect(),
            Err(Error::EmptyFeedbackSet) => {
                log::debug!("empty PRD; knowledge query uses meta terms only");
                Vec::new()
            }
            Err(e) => return Err(e),
        }
    };

    let terms: BTreeSet<&str> = meta
        .iter()
        .map(String::as_str)
        .chain(selected.iter().map(|t| t.term.as_str()))
        .collect();
    if terms.is_empty() {
        return Ok(None);
    }
    let model = LanguageModel::uniform(terms)?;
    Ok(Some(KnowledgeQuery {
        concepts: concepts.iter().map(|c| c.concept_id.clone()).collect(),
        meta_terms: meta,
        selected,
        model,
    }))
}

/// Convex combination `(1 - weight) * base + weight * other`.
pub fn interpolate(base: &LanguageModel, other: &LanguageModel, weight: f64) -> Result<LanguageModel> {
    base.interpolate(other, weight)
}

pub(crate) fn describe(kq: &KnowledgeQuery) -> BTreeMap<&'static str, String> {
    let mut out = BTreeMap::new();
    out.insert("concepts", kq.concepts.join(" "));
    out.insert("meta_terms", kq.meta_terms.join(" "));
    out.insert(
        "selected",
        kq.selected
            .iter()
            .map(|t| format!("{}:{:.6e}", t.term, t.score))
            .collect::<Vec<_>>()
            .join(" "),
    );
    out.insert(
        "model",
        kq.model
            .iter()
            .map(|(t, p)| format!("{t}:{p:.6}"))
            .collect::<Vec<_>>()
            .join(" "),
    );
    out
}
