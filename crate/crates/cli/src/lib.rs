//! Synthetic data generation and the file-based pipeline stages behind the
//! `expertise` binary.

pub mod pipeline;
pub mod synth;

use std::path::PathBuf;

/// Artifact file names shared by all stages.
pub mod files {
    pub const ONTOLOGY: &str = "ontology.tsv";
    pub const DICTIONARY: &str = "dictionary.tsv";
    pub const EVENTS: &str = "events.jsonl";
    pub const GROUNDTRUTH: &str = "groundtruth.tsv";
    pub const CONNECTIVITY: &str = "connectivity.tsv";
    pub const LATENT: &str = "latent.tsv";
    pub const USERS: &str = "users.tsv";
    pub const SYNTH_CONFIG: &str = "synth_config.json";
    pub const INGESTED: &str = "ingested.jsonl";
    pub const REJECTS: &str = "rejects.tsv";
    pub const CORPUS_USERS: &str = "corpus_users.tsv";
    pub const FEATURES_RAW: &str = "features_raw.tsv";
    pub const CONNECTIVITY_EXTRACTED: &str = "connectivity_extracted.tsv";
    pub const FEATURES_NORM: &str = "features_norm.tsv";
    pub const LABELS: &str = "labels.tsv";
    pub const LABELS_TRAIN: &str = "labels_train.tsv";
    pub const LABELS_TEST: &str = "labels_test.tsv";
    pub const CONSENSUS_BY_VOTES: &str = "consensus_by_votes.tsv";
    pub const CONSENSUS_BY_CONNECTIVITY: &str = "consensus_by_connectivity.tsv";
    pub const MODEL: &str = "model.tsv";
    pub const SCORES: &str = "scores.tsv";
    pub const INDEX: &str = "index";
    pub const REPORTS: &str = "reports";
}

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("{stage}: missing input artifact {} (produce it with `{producer}` first)", path.display())]
    Missing {
        stage: &'static str,
        producer: &'static str,
        path: PathBuf,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] expertise::Error),
}
