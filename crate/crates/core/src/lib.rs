//! Language-model retrieval for short timestamped documents, with
//! knowledge-based query expansion, mixture-model feedback and TREC-style
//! evaluation.

pub mod corpus;
mod error;
pub mod evaluation;
pub mod expansion;
pub mod feedback;
pub mod index;
pub mod knowledge;
pub mod pipeline;
pub mod retrieval;

pub use corpus::{Document, Preprocessor, RawTweet};
pub use error::{Error, Result};
pub use evaluation::{EvalReport, Qrels, RelevanceMode, Run};
pub use index::{Index, SmoothingParams};
pub use knowledge::{Concept, ConceptStore};
pub use pipeline::{Engine, SystemConfig, Variant};
pub use retrieval::{LanguageModel, RankedList, Topic};
