//! Experiment tooling: synthetic rule classifiers, categorizers, exhaustive
//! minimal-rule search and CSV ingestion.

mod categorize;
mod experiment;
mod minimal;
mod synthetic;
mod table;

use thiserror::Error;

use crate::cf::CfError;
use crate::classifier::ModelError;
use crate::explain::ExplainError;
use crate::schema::SchemaError;

pub use categorize::{categorize_real, categorize_synthetic, RealCategory, SyntheticCategory};
pub use experiment::{
    run_synthetic_experiment, Algorithm, AlgorithmReport, CategoryBreakdown, ExperimentReport, RuntimeSummary,
    TrialRecord,
};
pub use minimal::{minimal_rule_search, MinimalSearch, DEFAULT_MINIMAL_CAP};
pub use synthetic::{
    desk_schema, gen_synthetic_classifier, grid_schema, relevant_form, uniform_dataset, SyntheticSpec,
    SyntheticTrial, DESK_FEATURES, DESK_ROWS,
};
pub use table::{ingest_csv, ingest_reader, write_csv, IngestOptions, OneHotGroup, TableError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("instance already has a good outcome (score {score})")]
    AnchorNotBad { score: f64 },
    #[error("minimal rule search stopped at cardinality {cap}")]
    CapReached { cap: usize },
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Cf(#[from] CfError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Table(#[from] TableError),
}
