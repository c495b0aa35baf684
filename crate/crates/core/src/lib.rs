pub mod corpus;
pub mod error;
pub mod text;

pub use error::{Error, Result};
pub mod classifiers;
pub mod ensemble;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod word2vec;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    mod classifier {}
    #[doc = include_str!("../../../book/src/ensemble.md")]
    mod ensemble {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
}
