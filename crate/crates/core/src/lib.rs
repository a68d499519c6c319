//! Cross-domain symptom event extraction.
//!
//! A miniature span-based joint entity and relation extractor, trained from
//! scratch, together with the two domain generalization procedures it is
//! built to study: adaptive masked-language-model pretraining and dynamic
//! masking of frequent source-domain trigger words. Scoring, frequency-binned
//! evaluation, multi-seed significance tests and domain-shift diagnostics
//! complete the toolkit, and a synthetic corpus generator provides
//! source/target domain pairs with exact gold annotations.

pub mod analysis;
pub mod corpus;
pub mod decode;
pub mod error;
pub mod eval;
pub mod masking;
pub mod model;
pub mod rng;
pub mod schema;
pub mod synthgen;

pub use error::{Error, Result};

/// Runs the guide's code samples as doc tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/schema.md")]
    mod schema {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/masking.md")]
    mod masking {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
