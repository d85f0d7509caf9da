//! Loading, validating and persisting embeddings, anchors, labels and
//! pipeline artifacts.

mod anchors;
pub mod bundle;
mod embeddings;
pub mod lfme;

pub use anchors::{load_anchors, load_labels, save_anchors, save_labels, shared_classes, AnchorSet, LabelAssignment};
pub use embeddings::{load_embeddings, save_embeddings, EmbeddingFormat, EmbeddingSet};
pub use bundle::{load_bundle, save_bundle, Artifact, BundleKind, BundleMeta, BundleProvenance};
