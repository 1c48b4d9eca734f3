//! Concept store lookup and recursive maximum-match concept resolution.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static DEFAULT_LEXICON: &str = include_str!("../data/lexicon.tsv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub concept_id: String,
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub notable_for: Vec<String>,
    #[serde(default)]
    pub notable_types: Vec<String>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub domain_properties: BTreeMap<String, String>,
}

/// Lowercase, drop punctuation, collapse whitespace. No stemming: names
/// must match as written.
pub fn normalize_phrase(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Default)]
pub struct ConceptStore {
    concepts: BTreeMap<String, Concept>,
    lookup: HashMap<String, String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StoreLoadStats {
    pub loaded: usize,
    pub malformed: usize,
    pub collisions: usize,
}

impl ConceptStore {
    pub fn from_concepts(concepts: impl IntoIterator<Item = Concept>) -> Result<(Self, usize)> {
        let mut store = ConceptStore::default();
        for c in concepts {
            if store.concepts.contains_key(&c.concept_id) {
                return Err(Error::DuplicateConcept(c.concept_id));
            }
            store.concepts.insert(c.concept_id.clone(), c);
        }
        let collisions = store.rebuild_lookup();
        Ok((store, collisions))
    }

    /// Returns the number of surface-string collisions resolved.
    fn rebuild_lookup(&mut self) -> usize {
        let mut collisions = 0;
        self.lookup.clear();
        // ascending id order, so first writer is the lexicographically smallest
        for c in self.concepts.values() {
            let surfaces = std::iter::once(&c.name).chain(c.aliases.iter());
            for s in surfaces {
                let key = normalize_phrase(s);
                if key.is_empty() {
                    continue;
                }
                match self.lookup.get(&key) {
                    Some(owner) if owner != &c.concept_id => {
                        log::warn!(
                            "concept surface `{key}` claimed by `{owner}` and `{}`; keeping `{owner}`",
                            c.concept_id
                        );
                        collisions += 1;
                    }
                    Some(_) => {}
                    None => {
                        self.lookup.insert(key, c.concept_id.clone());
                    }
                }
            }
        }
        collisions
    }

    pub fn from_reader<R: BufRead>(reader: R, source: &str) -> Result<(Self, StoreLoadStats)> {
        let mut records = Vec::new();
        let mut stats = StoreLoadStats::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Concept>(&line) {
                Ok(c) if !c.concept_id.is_empty() && !c.name.trim().is_empty() => records.push(c),
                Ok(_) => {
                    log::warn!("{source}:{}: concept without id or name", i + 1);
                    stats.malformed += 1;
                }
                Err(e) => {
                    log::warn!("{source}:{}: skipping malformed concept: {e}", i + 1);
                    stats.malformed += 1;
                }
            }
        }
        stats.loaded = records.len();
        let (store, collisions) = ConceptStore::from_concepts(records)?;
        stats.collisions = collisions;
        Ok((store, stats))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, StoreLoadStats)> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        ConceptStore::from_reader(BufReader::new(file), &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, concept_id: &str) -> Option<&Concept> {
        self.concepts.get(concept_id)
    }

    /// Exact match of the normalized phrase against names and aliases.
    pub fn search(&self, phrase: &str) -> Option<&Concept> {
        self.lookup
            .get(&normalize_phrase(phrase))
            .and_then(|id| self.concepts.get(id))
    }
}

pub fn load_concept_store(path: impl AsRef<Path>) -> Result<(ConceptStore, StoreLoadStats)> {
    ConceptStore::load(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Noun,
    Proper,
    Adj,
    Other,
}

impl Tag {
    fn is_nominal(self) -> bool {
        matches!(self, Tag::Noun | Tag::Proper)
    }
}

impl std::str::FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NOUN" => Ok(Tag::Noun),
            "PROPER" => Ok(Tag::Proper),
            "ADJ" => Ok(Tag::Adj),
            "OTHER" => Ok(Tag::Other),
            other => Err(Error::InvalidParameter(format!("unknown tag `{other}`"))),
        }
    }
}

pub trait PosTagger {
    /// Tags one whitespace-delimited token in its original casing.
    fn tag(&self, token: &str) -> Tag;
}

/// Word-to-most-frequent-tag lookup. Unknown capitalized words are proper
/// nouns, other unknowns are common nouns.
#[derive(Debug, Clone)]
pub struct LexiconTagger {
    lexicon: HashMap<String, Tag>,
}

impl LexiconTagger {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lexicon = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source, i + 1, "expected word<TAB>tag"))?;
            let tag = tag
                .trim()
                .parse()
                .map_err(|e: Error| Error::parse(source, i + 1, e.to_string()))?;
            lexicon.insert(normalize_phrase(word), tag);
        }
        Ok(LexiconTagger { lexicon })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        LexiconTagger::parse(&text, &path.display().to_string())
    }
}

impl Default for LexiconTagger {
    fn default() -> Self {
        LexiconTagger::parse(DEFAULT_LEXICON, "bundled lexicon").expect("bundled lexicon is well-formed")
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, token: &str) -> Tag {
        let key = normalize_phrase(token);
        if key.is_empty() {
            return Tag::Other;
        }
        if let Some(&t) = self.lexicon.get(&key) {
            return t;
        }
        let first_alpha = token.chars().find(|c| c.is_alphabetic());
        match first_alpha {
            Some(c) if c.is_uppercase() => Tag::Proper,
            Some(_) => Tag::Noun,
            None => Tag::Other,
        }
    }
}

/// Normalized words of one noun phrase, in query order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NounPhrase {
    pub words: Vec<String>,
}

impl NounPhrase {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        NounPhrase {
            words: words.into_iter().map(Into::into).collect(),
        }
    }

    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}

/// Chunks maximal runs of (ADJ | NOUN | PROPER)+ and trims trailing
/// adjectives; runs with no noun are dropped.
pub fn detect_noun_phrases(query_text: &str, tagger: &impl PosTagger) -> Vec<NounPhrase> {
    let mut phrases = Vec::new();
    let mut run: Vec<(String, Tag)> = Vec::new();

    let mut flush = |run: &mut Vec<(String, Tag)>| {
        while run.last().is_some_and(|(_, t)| !t.is_nominal()) {
            run.pop();
        }
        if !run.is_empty() {
            phrases.push(NounPhrase::new(run.drain(..).map(|(w, _)| w)));
        }
        run.clear();
    };

    for token in query_text.split_whitespace() {
        let tag = tagger.tag(token);
        let word = normalize_phrase(token);
        if tag == Tag::Other || word.is_empty() {
            flush(&mut run);
        } else {
            run.push((word, tag));
        }
    }
    flush(&mut run);
    phrases
}

/// Results of sub-phrase resolution, keyed by phrase text, plus a count of
/// store lookups actually issued.
#[derive(Debug, Default)]
pub struct ConceptMemo {
    results: HashMap<String, BTreeSet<String>>,
    searches: usize,
}

impl ConceptMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn searches(&self) -> usize {
        self.searches
    }
}

/// Maximum match: search the whole phrase; on a miss, recurse on the phrase
/// without its last word and without its first word and union the results.
/// Returns concept ids.
pub fn get_concepts(store: &ConceptStore, words: &[String], memo: &mut ConceptMemo) -> BTreeSet<String> {
    if words.is_empty() {
        return BTreeSet::new();
    }
    let key = words.join(" ");
    if let Some(hit) = memo.results.get(&key) {
        return hit.clone();
    }
    memo.searches += 1;
    let found = match store.search(&key) {
        Some(c) => BTreeSet::from([c.concept_id.clone()]),
        None if words.len() == 1 => BTreeSet::new(),
        None => {
            let n = words.len();
            let mut left = get_concepts(store, &words[..n - 1], memo);
            let right = get_concepts(store, &words[1..], memo);
            left.extend(right);
            left
        }
    };
    memo.results.insert(key, found.clone());
    found
}

/// Runs phrase detection and maximum match per phrase, with one memo shared
/// across the query's phrases.
pub fn match_concepts<'s>(
    store: &'s ConceptStore,
    query_text: &str,
    tagger: &impl PosTagger,
) -> Vec<&'s Concept> {
    let mut memo = ConceptMemo::new();
    let mut ids = BTreeSet::new();
    for np in detect_noun_phrases(query_text, tagger) {
        ids.extend(get_concepts(store, &np.words, &mut memo));
    }
    ids.iter().filter_map(|id| store.get(id)).collect()
}
