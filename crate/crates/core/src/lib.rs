//! Topical expertise ranking.
//!
//! The crate turns multi-network social events into sparse per-(user, topic)
//! feature vectors, learns a non-negative linear scoring model from pairwise
//! ground truth, and builds per-topic ranked indexes.
//!
//! Pipeline order: [`ontology`] → [`ingest`] → [`features`] → [`normalize`]
//! → [`groundtruth`] → [`model`] (backed by [`nnls`]) → [`rank`], with
//! [`eval`] producing metrics and distribution reports along the way.

use std::path::PathBuf;

pub mod catalog;
pub mod eval;
pub mod features;
pub mod groundtruth;
pub mod ingest;
pub mod model;
pub mod nnls;
pub mod normalize;
pub mod ontology;
pub mod rank;
pub mod tsv;

pub use catalog::{Attribution, FeatureId, Network, Source, CATALOG_LEN};

pub type UserId = String;
pub type TopicId = String;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Nnls(#[from] nnls::NnlsError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
