//! Simple mixture-model feedback.
//!
//! Feedback text is assumed to be drawn from `(1 - lambda) * theta_F +
//! lambda * theta_C` with the collection model fixed; `theta_F` is fit by EM
//! and then mixed into the query model.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::Index;
use crate::retrieval::{LanguageModel, RankedList};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackParams {
    pub beta: f64,
    pub lambda: f64,
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for FeedbackParams {
    fn default() -> Self {
        FeedbackParams {
            beta: 0.6,
            lambda: 0.5,
            fb_docs: 7,
            fb_terms: 5,
            max_iters: 50,
            tol: 1e-6,
        }
    }
}

impl FeedbackParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!("beta {} outside [0, 1]", self.beta)));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidParameter(format!("lambda {} outside (0, 1)", self.lambda)));
        }
        if self.fb_docs == 0 || self.fb_terms == 0 {
            return Err(Error::InvalidParameter("fb_docs and fb_terms must be at least 1".into()));
        }
        Ok(())
    }
}

/// Feedback term counts aligned with their collection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSample {
    terms: Vec<String>,
    counts: Vec<f64>,
    background: Vec<f64>,
}

impl FeedbackSample {
    /// Every term must have positive collection probability; a term absent
    /// from both components has no defined likelihood.
    pub fn new(counts: &BTreeMap<String, u64>, collection: impl Fn(&str) -> f64) -> Result<Self> {
        let mut sample = FeedbackSample {
            terms: Vec::with_capacity(counts.len()),
            counts: Vec::with_capacity(counts.len()),
            background: Vec::with_capacity(counts.len()),
        };
        for (t, &c) in counts.iter().filter(|(_, &c)| c > 0) {
            let bg = collection(t);
            if !(bg > 0.0) {
                return Err(Error::ZeroMixtureProbability(t.clone()));
            }
            sample.terms.push(t.clone());
            sample.counts.push(c as f64);
            sample.background.push(bg);
        }
        Ok(sample)
    }

    /// Sums the term counts of the given documents.
    pub fn from_documents<'a>(index: &Index, doc_ids: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for id in doc_ids {
            for (t, &c) in &index.document(id)?.term_counts {
                *counts.entry(t.clone()).or_insert(0) += c as u64;
            }
        }
        FeedbackSample::new(&counts, |t| index.collection_prob(t).unwrap_or(0.0))
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn loglik(&self, theta: &[f64], lambda: f64) -> f64 {
        self.counts
            .iter()
            .zip(theta)
            .zip(&self.background)
            .map(|((c, f), bg)| c * ((1.0 - lambda) * f + lambda * bg).ln())
            .sum()
    }
}

/// `sum_w c(w, F) * ln((1 - lambda) * theta_F(w) + lambda * theta_C(w))`.
pub fn feedback_loglik(
    theta_f: &LanguageModel,
    counts: &BTreeMap<String, u64>,
    collection: impl Fn(&str) -> f64,
    lambda: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (t, &c) in counts {
        let mixed = (1.0 - lambda) * theta_f.prob(t) + lambda * collection(t);
        if !(mixed > 0.0) {
            return Err(Error::ZeroMixtureProbability(t.clone()));
        }
        total += c as f64 * mixed.ln();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmFit {
    /// Truncated to `fb_terms` and renormalized.
    pub model: LanguageModel,
    /// Converged distribution over every feedback term.
    pub full: LanguageModel,
    pub iterations: usize,
    /// Log-likelihood at initialization and after each iteration.
    pub loglik_trace: Vec<f64>,
}

impl EmFit {
    pub fn final_loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace holds the initial value")
    }
}

pub fn em_fit(sample: &FeedbackSample, params: &FeedbackParams) -> Result<EmFit> {
    if sample.is_empty() {
        return Err(Error::EmptyFeedbackSet);
    }
    let lambda = params.lambda;
    let n = sample.terms.len();
    let mut theta = vec![1.0 / n as f64; n];
    let mut trace = vec![sample.loglik(&theta, lambda)];
    let mut iterations = 0;
    let mut weighted = vec![0.0; n];

    while iterations < params.max_iters {
        // E-step: posterior that an occurrence came from the topic model;
        // M-step: renormalize the expected topic counts
        for i in 0..n {
            let topic = (1.0 - lambda) * theta[i];
            let z = topic / (topic + lambda * sample.background[i]);
            weighted[i] = sample.counts[i] * z;
        }
        let total: f64 = weighted.iter().sum();
        for i in 0..n {
            theta[i] = weighted[i] / total;
        }
        iterations += 1;
        let ll = sample.loglik(&theta, lambda);
        let prev = *trace.last().unwrap();
        trace.push(ll);
        if (ll - prev).abs() < params.tol {
            break;
        }
    }

    let probs: BTreeMap<String, f64> = sample
        .terms
        .iter()
        .cloned()
        .zip(theta)
        .filter(|(_, p)| *p > 0.0)
        .collect();
    let mass: f64 = probs.values().sum();
    let full = LanguageModel::from_probs(probs.into_iter().map(|(t, p)| (t, p / mass)).collect())?;
    let model = full.truncate(params.fb_terms);
    Ok(EmFit {
        model,
        full,
        iterations,
        loglik_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackOutcome {
    pub model: LanguageModel,
    pub feedback_docs: Vec<String>,
    pub fit: Option<EmFit>,
}

/// Fits the feedback model on the top `fb_docs` entries of `ranked` and
/// mixes it into `query` with weight `beta`. An empty list leaves the query
/// unchanged.
pub fn apply_feedback(
    query: &LanguageModel,
    ranked: &RankedList,
    index: &Index,
    params: &FeedbackParams,
) -> Result<FeedbackOutcome> {
    let docs: Vec<String> = ranked
        .doc_ids()
        .take(params.fb_docs)
        .map(String::from)
        .collect();
    if docs.is_empty() {
        return Ok(FeedbackOutcome {
            model: query.clone(),
            feedback_docs: docs,
            fit: None,
        });
    }
    let sample = FeedbackSample::from_documents(index, docs.iter().map(String::as_str))?;
    let fit = em_fit(&sample, params)?;
    let model = query.interpolate(&fit.model, params.beta)?;
    Ok(FeedbackOutcome {
        model,
        feedback_docs: docs,
        fit: Some(fit),
    })
}
