//! Related-table recommendation.
//!
//! Tables are decomposed into topic, headings, core-column entities and data;
//! each element is represented in word, graph-embedding and entity-adjacency
//! spaces and matched against the candidate's elements. The resulting
//! similarity features, optionally joined with table-level statistics or
//! literature baselines, feed a random-forest ranker evaluated with NDCG.
//!
//! The numeric core is generic over [`scalar::Scalar`]; the aliases below fix
//! it to `f32` or `f64`.

pub mod assets;
pub mod baselines;
pub mod config;
pub mod engine;
pub mod error;
pub mod eval;
pub mod index;
pub mod kb;
pub mod matching;
pub mod ranker;
pub mod repr;
pub mod scalar;
pub mod synth;
pub mod table;
pub mod text;

pub use engine::{Engine32, Engine64};
pub use error::{Error, Result};

pub type EmbeddingStore32 = repr::EmbeddingStore<f32>;
pub type EmbeddingStore64 = repr::EmbeddingStore<f64>;
pub type SemanticVector32 = repr::SemanticVector<f32>;
pub type SemanticVector64 = repr::SemanticVector<f64>;
