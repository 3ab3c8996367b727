//! Data model and pipeline stages for building labeled question/proof
//! datasets and the RL verifier training signals derived from them.

pub mod bok;
pub mod fixtures;
pub mod fluency;
pub mod gate;
pub mod genmethods;
pub mod jsonl;
mod jsontext;
pub mod manifest;
pub mod model;
pub mod reward;
pub mod seed;
pub mod store;
pub mod verifier;
pub mod weights;

pub use manifest::{compute_manifest, DatasetManifest, LabelCounts, ProvenanceGroup};
pub use model::{
    CombinationKey, KeyParseError, Label, LabelProvenance, Method, ModelId, QpcItem,
    QuestionRecord, Source, Split,
};
pub use seed::Seed;
pub use store::{JsonlStore, StoreError};
