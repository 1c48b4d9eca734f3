//! System variants and per-topic stage wiring.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{PreprocessConfig, Preprocessor};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_run, EvalReport, Qrels, RelevanceMode, Run};
use crate::expansion::{self, build_knowledge_query, DocPrior, ExpansionParams, KnowledgeQuery, TermLimit};
use crate::feedback::{apply_feedback, FeedbackOutcome, FeedbackParams};
use crate::index::{Index, SmoothingParams};
use crate::knowledge::{match_concepts, Concept, ConceptStore, LexiconTagger};
use crate::retrieval::{search, LanguageModel, RankedList, Topic, DEFAULT_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum Variant {
    SimpleKl,
    Qesmm,
    Qefb,
    Qefbnt,
    #[default]
    QefbSmm,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::SimpleKl,
        Variant::Qesmm,
        Variant::Qefb,
        Variant::Qefbnt,
        Variant::QefbSmm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SimpleKl => "simplekl",
            Variant::Qesmm => "qesmm",
            Variant::Qefb => "qefb",
            Variant::Qefbnt => "qefbnt",
            Variant::QefbSmm => "qefb_smm",
        }
    }

    pub fn uses_knowledge(self) -> bool {
        matches!(self, Variant::Qefb | Variant::Qefbnt | Variant::QefbSmm)
    }

    pub fn uses_feedback(self) -> bool {
        matches!(self, Variant::Qesmm | Variant::QefbSmm)
    }

    fn prior(self, rate: f64) -> DocPrior {
        match self {
            Variant::Qefbnt => DocPrior::Uniform,
            _ => DocPrior::Temporal { rate },
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['+', '-'], "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown variant `{s}`")))
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub variant: Variant,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: TermLimit,
    pub n: usize,
    pub r: f64,
    pub lambda: f64,
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub depth: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            variant: Variant::default(),
            mu: 100.0,
            alpha: 0.5,
            beta: 0.6,
            k: TermLimit::Top(5),
            n: 100,
            r: 0.1,
            lambda: 0.5,
            fb_docs: 7,
            fb_terms: 5,
            depth: DEFAULT_DEPTH,
        }
    }
}

pub const CONFIG_KEYS: [&str; 11] = [
    "variant", "mu", "alpha", "beta", "k", "n", "r", "lambda", "fb_docs", "fb_terms", "depth",
];

impl SystemConfig {
    /// Defaults with the variant's own feedback weight.
    pub fn for_variant(variant: Variant) -> Self {
        let beta = if variant == Variant::Qesmm { 0.9 } else { 0.6 };
        SystemConfig {
            variant,
            beta,
            ..Default::default()
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse `{value}`")))
        }
        match key.to_ascii_lowercase().as_str() {
            "variant" => self.variant = value.parse()?,
            "mu" => self.mu = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "k" => self.k = value.parse()?,
            "n" => self.n = num(key, value)?,
            "r" => self.r = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "fb_docs" => self.fb_docs = num(key, value)?,
            "fb_terms" => self.fb_terms = num(key, value)?,
            "depth" => self.depth = num(key, value)?,
            other => return Err(Error::InvalidParameter(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies settings in order on top of the defaults of the last
    /// `variant` given, so a variant's own defaults never override an
    /// explicit value.
    pub fn from_pairs<K, V>(pairs: &[(K, V)]) -> Result<Self>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let variant = pairs
            .iter()
            .rev()
            .find(|(k, _)| k.as_ref().eq_ignore_ascii_case("variant"))
            .map(|(_, v)| v.as_ref().parse())
            .transpose()?
            .unwrap_or_default();
        let mut cfg = SystemConfig::for_variant(variant);
        for (k, v) in pairs {
            cfg.set(k.as_ref(), v.as_ref())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn parse_pairs(text: &str, source: &str) -> Result<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, i + 1, "expected key = value"))?;
            let k = k.trim().to_ascii_lowercase();
            if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(Error::parse(source, i + 1, format!("unknown key `{k}`")));
            }
            pairs.push((k, v.trim().to_string()));
        }
        Ok(pairs)
    }

    pub fn validate(&self) -> Result<()> {
        SmoothingParams::new(self.mu)?;
        self.expansion_params().validate()?;
        self.feedback_params().validate()?;
        if self.depth == 0 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        Ok(())
    }

    pub fn smoothing(&self) -> SmoothingParams {
        SmoothingParams { mu: self.mu }
    }

    pub fn expansion_params(&self) -> ExpansionParams {
        ExpansionParams {
            alpha: self.alpha,
            terms: self.k,
            prd_depth: self.n,
            rate: self.r,
        }
    }

    pub fn feedback_params(&self) -> FeedbackParams {
        FeedbackParams {
            beta: self.beta,
            lambda: self.lambda,
            fb_docs: self.fb_docs,
            fb_terms: self.fb_terms,
            ..FeedbackParams::default()
        }
    }
}

/// Per-topic concept ids: `topic_id concept_id...` per line.
pub fn parse_overrides(text: &str) -> BTreeMap<String, Vec<String>> {
    text.lines()
        .filter_map(|line| {
            let mut fields = line.split_whitespace();
            let topic = fields.next()?;
            if topic.starts_with('#') {
                return None;
            }
            Some((topic.to_string(), fields.map(String::from).collect()))
        })
        .collect()
}

/// One JSON object per line with `id`, `query` and `query_time`.
pub fn parse_topics<R: BufRead>(reader: R, source: &str) -> Result<Vec<Topic>> {
    let mut topics = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let topic: Topic =
            serde_json::from_str(&line).map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
        if !topic.query_time.is_finite() {
            return Err(Error::parse(source, i + 1, "query_time must be finite"));
        }
        topics.push(topic);
    }
    Ok(topics)
}

pub fn load_topics(path: impl AsRef<Path>) -> Result<Vec<Topic>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_topics(std::io::BufReader::new(file), &path.display().to_string())
}

/// What each stage saw and produced for one topic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicTrace {
    pub topic_id: String,
    pub query_time: f64,
    pub query_terms: Vec<String>,
    pub prd: Vec<String>,
    pub knowledge: Option<KnowledgeQuery>,
    pub feedback: Option<FeedbackOutcome>,
    pub final_model: LanguageModel,
}

impl TopicTrace {
    /// Every document id a stage used as evidence, plus the final results.
    pub fn consulted<'a>(&'a self, results: &'a RankedList) -> impl Iterator<Item = &'a str> {
        self.prd
            .iter()
            .map(String::as_str)
            .chain(self.feedback.iter().flat_map(|f| f.feedback_docs.iter().map(String::as_str)))
            .chain(results.doc_ids())
    }

    /// Line-oriented `topic key value` dump.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let id = &self.topic_id;
        let _ = writeln!(out, "{id} query_terms {}", self.query_terms.join(" "));
        let _ = writeln!(out, "{id} prd_size {}", self.prd.len());
        if let Some(kq) = &self.knowledge {
            for (k, v) in expansion::describe(kq) {
                let _ = writeln!(out, "{id} {k} {v}");
            }
        }
        if let Some(fb) = &self.feedback {
            let _ = writeln!(out, "{id} feedback_docs {}", fb.feedback_docs.join(" "));
            if let Some(fit) = &fb.fit {
                let _ = writeln!(out, "{id} em_iterations {}", fit.iterations);
                let _ = writeln!(out, "{id} em_loglik {:.6}", fit.final_loglik());
                let terms: Vec<String> = fit.model.iter().map(|(t, p)| format!("{t}:{p:.6}")).collect();
                let _ = writeln!(out, "{id} theta_f {}", terms.join(" "));
            }
        }
        let terms: Vec<String> = self.final_model.iter().map(|(t, p)| format!("{t}:{p:.6}")).collect();
        let _ = writeln!(out, "{id} final_model {}", terms.join(" "));
        out
    }
}

pub struct Engine {
    pub index: Index,
    pub store: Option<ConceptStore>,
    pub preprocessor: Preprocessor,
    pub tagger: LexiconTagger,
    pub overrides: BTreeMap<String, Vec<String>>,
}

impl Engine {
    pub fn new(index: Index, preprocessor: Preprocessor) -> Self {
        Engine {
            index,
            store: None,
            preprocessor,
            tagger: LexiconTagger::default(),
            overrides: BTreeMap::new(),
        }
    }

    /// Rebuilds the preprocessor from the stopwords stored with the index.
    pub fn from_snapshot(path: impl AsRef<Path>) -> Result<Self> {
        let (index, stopwords) = Index::load(path)?;
        let pre = Preprocessor::new(PreprocessConfig {
            stopwords: stopwords.into_iter().collect(),
            ..PreprocessConfig::default()
        });
        Ok(Engine::new(index, pre))
    }

    pub fn with_store(mut self, store: ConceptStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn with_overrides(mut self, overrides: BTreeMap<String, Vec<String>>) -> Self {
        self.overrides = overrides;
        self
    }

    fn concepts_for<'s>(&self, store: &'s ConceptStore, topic: &Topic) -> Vec<&'s Concept> {
        match self.overrides.get(&topic.id) {
            Some(ids) => ids
                .iter()
                .filter_map(|id| {
                    let c = store.get(id);
                    if c.is_none() {
                        log::warn!("topic {}: override concept `{id}` not in store", topic.id);
                    }
                    c
                })
                .collect(),
            None => match_concepts(store, &topic.query_text, &self.tagger),
        }
    }

    /// `None` when the query has no terms left after preprocessing.
    pub fn run_topic(&self, topic: &Topic, cfg: &SystemConfig) -> Result<Option<(RankedList, TopicTrace)>> {
        let query_terms = self.preprocessor.analyze(&topic.query_text);
        if query_terms.is_empty() {
            log::warn!("topic {}: query is empty after preprocessing; skipped", topic.id);
            return Ok(None);
        }
        let s = cfg.smoothing();
        let tq = topic.query_time;
        let theta_q = LanguageModel::mle(&query_terms)?;
        let mut model = theta_q.clone();
        let mut prd = Vec::new();
        let mut knowledge = None;
        let mut feedback = None;

        if cfg.variant.uses_knowledge() {
            let store = self
                .store
                .as_ref()
                .ok_or_else(|| Error::MissingConceptStore(cfg.variant.to_string()))?;
            let concepts = self.concepts_for(store, topic);
            let params = cfg.expansion_params();
            let ranked = search(&self.index, &theta_q, tq, params.prd_depth, s);
            prd = ranked.doc_ids().map(String::from).collect();
            knowledge = build_knowledge_query(
                &concepts,
                &query_terms,
                tq,
                &ranked,
                &self.index,
                &params,
                cfg.variant.prior(cfg.r),
                &self.preprocessor,
                s,
            )?;
            if let Some(kq) = &knowledge {
                model = model.interpolate(&kq.model, params.alpha)?;
            }
        }

        if cfg.variant.uses_feedback() {
            let params = cfg.feedback_params();
            let ranked = search(&self.index, &model, tq, params.fb_docs, s);
            let outcome = apply_feedback(&model, &ranked, &self.index, &params)?;
            model = outcome.model.clone();
            feedback = Some(outcome);
        }

        let results = search(&self.index, &model, tq, cfg.depth, s).with_topic(&topic.id);
        let trace = TopicTrace {
            topic_id: topic.id.clone(),
            query_time: tq,
            query_terms,
            prd,
            knowledge,
            feedback,
            final_model: model,
        };
        Ok(Some((results, trace)))
    }

    /// Topics run in parallel; results keep the input order.
    pub fn run_topics(&self, topics: &[Topic], cfg: &SystemConfig) -> Result<Vec<(RankedList, TopicTrace)>> {
        cfg.validate()?;
        if cfg.variant.uses_knowledge() && self.store.is_none() {
            return Err(Error::MissingConceptStore(cfg.variant.to_string()));
        }
        let results: Vec<Option<(RankedList, TopicTrace)>> = topics
            .par_iter()
            .map(|t| self.run_topic(t, cfg))
            .collect::<Result<_>>()?;
        Ok(results.into_iter().flatten().collect())
    }
}

/// TREC run text tagged with the variant name.
pub fn render_run<'a>(lists: impl IntoIterator<Item = &'a RankedList>, tag: &str) -> String {
    let mut out = String::new();
    for list in lists {
        list.write_trec(tag, &mut out);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    Beta,
    K,
    N,
    R,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alpha" => Ok(SweepParam::Alpha),
            "beta" => Ok(SweepParam::Beta),
            "k" => Ok(SweepParam::K),
            "n" => Ok(SweepParam::N),
            "r" => Ok(SweepParam::R),
            _ => Err(Error::InvalidParameter(format!(
                "cannot sweep `{s}`; expected alpha, beta, K, N or r"
            ))),
        }
    }
}

impl SweepParam {
    fn key(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::K => "k",
            SweepParam::N => "n",
            SweepParam::R => "r",
        }
    }

    pub fn n_values(self) -> &'static [usize] {
        match self {
            SweepParam::R => &[1, 5, 10, 30],
            _ => &[30],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub map: f64,
    pub p_at: BTreeMap<usize, f64>,
}

/// Runs and evaluates once per value. Each run goes through its TREC text,
/// so a row matches a standalone run followed by an evaluation.
pub fn sweep(
    engine: &Engine,
    topics: &[Topic],
    qrels: &Qrels,
    base: &SystemConfig,
    param: SweepParam,
    values: &[String],
    mode: RelevanceMode,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut cfg = base.clone();
        cfg.set(param.key(), value)?;
        let report = run_and_evaluate(engine, topics, qrels, &cfg, mode, param.n_values())?;
        rows.push(SweepRow {
            value: value.clone(),
            map: report.map_score,
            p_at: report.p_at_n,
        });
    }
    Ok(rows)
}

pub fn run_and_evaluate(
    engine: &Engine,
    topics: &[Topic],
    qrels: &Qrels,
    cfg: &SystemConfig,
    mode: RelevanceMode,
    n_values: &[usize],
) -> Result<EvalReport> {
    let results = engine.run_topics(topics, cfg)?;
    let text = render_run(results.iter().map(|(l, _)| l), cfg.variant.name());
    let run = Run::parse(&text, "in-memory run")?;
    Ok(evaluate_run(&run, qrels, mode, n_values))
}

pub fn sweep_table(param: SweepParam, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<8} {:>8}", param.key(), "MAP");
    for n in param.n_values() {
        let _ = write!(out, " {:>8}", format!("P@{n}"));
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{:<8} {:>8.4}", row.value, row.map);
        for n in param.n_values() {
            let _ = write!(out, " {:>8.4}", row.p_at.get(n).copied().unwrap_or(0.0));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    #[test]
    fn defaults() {
        let c = SystemConfig::default();
        assert_eq!(c.mu, 100.0);
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.beta, 0.6);
        assert_eq!(c.k, TermLimit::Top(5));
        assert_eq!(c.n, 100);
        assert_eq!(c.r, 0.1);
        assert_eq!(c.lambda, 0.5);
        assert_eq!((c.fb_docs, c.fb_terms, c.depth), (7, 5, 1000));
        assert_eq!(SystemConfig::for_variant(Variant::Qesmm).beta, 0.9);
        assert_eq!(SystemConfig::for_variant(Variant::Qefb).beta, 0.6);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("QEFB+SMM".parse::<Variant>().unwrap(), Variant::QefbSmm);
        assert!("qewiki".parse::<Variant>().is_err());
    }

    #[test]
    fn config_precedence() {
        let file = SystemConfig::parse_pairs("# c\nvariant = qesmm\nalpha=0.3\n", "cfg").unwrap();
        let cfg = SystemConfig::from_pairs(&file).unwrap();
        assert_eq!((cfg.variant, cfg.beta, cfg.alpha), (Variant::Qesmm, 0.9, 0.3));
        let mut pairs = file.clone();
        pairs.push(("beta".into(), "0.2".into()));
        assert_eq!(SystemConfig::from_pairs(&pairs).unwrap().beta, 0.2);
        pairs.push(("k".into(), "MAX".into()));
        assert_eq!(SystemConfig::from_pairs(&pairs).unwrap().k, TermLimit::All);
        assert!(SystemConfig::parse_pairs("gamma = 1\n", "cfg").is_err());
        assert!(SystemConfig::from_pairs(&[("alpha", "1.5")]).is_err());
    }

    #[test]
    fn overrides_and_topics() {
        let o = parse_overrides("MB001 m.a m.b\n# x\n\nMB002\n");
        assert_eq!(o["MB001"], vec!["m.a", "m.b"]);
        assert!(o["MB002"].is_empty());
        let t = parse_topics(
            "{\"id\":\"MB001\",\"query\":\"wine\",\"query_time\":3.5}\n\n".as_bytes(),
            "t",
        )
        .unwrap();
        assert_eq!(t[0].query_text, "wine");
        assert!(parse_topics("{\"id\":1}\n".as_bytes(), "t").is_err());
    }

    fn engine() -> Engine {
        let docs = vec![
            Document::from_terms("a", 1.0, ["wine", "industri", "grape"]),
            Document::from_terms("b", 2.0, ["wine", "tast"]),
            Document::from_terms("c", 3.0, ["grape", "harvest", "vineyard"]),
            Document::from_terms("d", 9.0, ["wine", "wine"]),
        ];
        Engine::new(Index::build(docs).unwrap(), Preprocessor::default())
    }

    #[test]
    fn simplekl_is_plain_search() {
        let e = engine();
        let topic = Topic { id: "t".into(), query_text: "wine industry".into(), query_time: 5.0 };
        let cfg = SystemConfig::for_variant(Variant::SimpleKl);
        let (list, trace) = e.run_topic(&topic, &cfg).unwrap().unwrap();
        let q = LanguageModel::mle(&["wine", "industri"]).unwrap();
        assert_eq!(list, search(&e.index, &q, 5.0, 1000, cfg.smoothing()).with_topic("t"));
        assert!(trace.prd.is_empty());
        assert!(list.doc_ids().all(|d| d != "d"));
    }

    #[test]
    fn knowledge_variants_need_a_store() {
        let e = engine();
        let topic = Topic { id: "t".into(), query_text: "wine".into(), query_time: 5.0 };
        let err = e.run_topics(&[topic], &SystemConfig::for_variant(Variant::Qefb));
        assert!(matches!(err, Err(Error::MissingConceptStore(_))));
    }

    #[test]
    fn empty_queries_are_skipped() {
        let e = engine();
        let topics = vec![
            Topic { id: "t1".into(), query_text: "the of".into(), query_time: 5.0 },
            Topic { id: "t2".into(), query_text: "grape".into(), query_time: 5.0 },
        ];
        let out = e.run_topics(&topics, &SystemConfig::for_variant(Variant::Qesmm)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0.topic_id, "t2");
        assert!(out[0].1.dump().contains("t2 em_iterations"));
    }

    #[test]
    fn sweep_param_parsing() {
        assert_eq!("K".parse::<SweepParam>().unwrap(), SweepParam::K);
        assert!("mu".parse::<SweepParam>().is_err());
    }
}
