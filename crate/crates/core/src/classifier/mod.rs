//! Black-box classifiers returning a score in `[0, 1]`.
//!
//! A score `<= 0.5` is the undesired ("bad") outcome. Every evaluation through
//! [`Classifier`] bumps an atomic call counter so experiment reports can audit
//! how many model calls a search spent.

mod io;
mod net;
mod tree;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::schema::{Instance, Rule};

pub use io::{load_model, parse_model, write_model};
pub use net::{Layer, NetModel};
pub use tree::{TreeModel, TreeNode};

pub const BAD_THRESHOLD: f64 = 0.5;

pub fn is_bad(score: f64) -> bool {
    score <= BAD_THRESHOLD
}

pub fn is_good(score: f64) -> bool {
    score > BAD_THRESHOLD
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: unknown model kind `{tag}`")]
    UnknownKind { line: usize, tag: String },
    #[error("line {line}: dimension mismatch: {detail}")]
    DimensionMismatch { line: usize, detail: String },
    #[error("line {line}, token {token}: malformed number `{text}`")]
    BadNumber {
        line: usize,
        token: usize,
        text: String,
    },
    #[error("line {line}: {detail}")]
    Syntax { line: usize, detail: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("model expects {expected} features, instance has {got}")]
    Arity { expected: usize, got: usize },
}

/// Classifier defined by a ground-truth rule: bad (0.0) exactly when the rule holds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RuleClassifierModel {
    pub ground_truth: Rule,
}

impl RuleClassifierModel {
    pub fn new(ground_truth: Rule) -> Self {
        Self { ground_truth }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        if self.ground_truth.eval(x) {
            0.0
        } else {
            1.0
        }
    }

    pub fn min_features(&self) -> usize {
        self.ground_truth
            .components()
            .iter()
            .map(|c| c.feature + 1)
            .max()
            .unwrap_or(0)
    }
}

type ScoreFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum ModelKind {
    Rule(RuleClassifierModel),
    Tree(TreeModel),
    Net(NetModel),
    /// Arbitrary scoring closure, for tests and embedding.
    Custom {
        n_features: usize,
        score: Arc<ScoreFn>,
    },
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Rule(m) => f.debug_tuple("Rule").field(m).finish(),
            ModelKind::Tree(m) => f.debug_tuple("Tree").field(m).finish(),
            ModelKind::Net(m) => f.debug_tuple("Net").field(m).finish(),
            ModelKind::Custom { n_features, .. } => f
                .debug_struct("Custom")
                .field("n_features", n_features)
                .finish_non_exhaustive(),
        }
    }
}

impl ModelKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::Rule(_) => "rule",
            ModelKind::Tree(_) => "tree",
            ModelKind::Net(_) => "net",
            ModelKind::Custom { .. } => "custom",
        }
    }

    fn score(&self, x: &[f64]) -> f64 {
        match self {
            ModelKind::Rule(m) => m.score(x),
            ModelKind::Tree(m) => m.score(x),
            ModelKind::Net(m) => m.score(x),
            ModelKind::Custom { score, .. } => score(x).clamp(0.0, 1.0),
        }
    }

    /// Exact feature count when the model fixes one, else the minimum it reads.
    fn arity(&self) -> Arity {
        match self {
            ModelKind::Rule(m) => Arity::AtLeast(m.min_features()),
            ModelKind::Tree(m) => Arity::AtLeast(m.min_features()),
            ModelKind::Net(m) => Arity::Exactly(m.n_inputs()),
            ModelKind::Custom { n_features, .. } => Arity::Exactly(*n_features),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Arity {
    Exactly(usize),
    AtLeast(usize),
}

/// A model plus a monotone evaluation counter.
#[derive(Debug)]
pub struct Classifier {
    kind: ModelKind,
    calls: AtomicU64,
}

impl Classifier {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            calls: AtomicU64::new(0),
        }
    }

    pub fn from_rule(ground_truth: Rule) -> Self {
        Self::new(ModelKind::Rule(RuleClassifierModel::new(ground_truth)))
    }

    pub fn from_fn(
        n_features: usize,
        score: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(ModelKind::Custom {
            n_features,
            score: Arc::new(score),
        })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Checked prediction.
    pub fn predict(&self, x: &Instance) -> Result<f64, ModelError> {
        let got = x.len();
        match self.kind.arity() {
            Arity::Exactly(expected) if got != expected => {
                return Err(ModelError::Arity { expected, got })
            }
            Arity::AtLeast(expected) if got < expected => {
                return Err(ModelError::Arity { expected, got })
            }
            _ => {}
        }
        Ok(self.score(x.values()))
    }

    /// Unchecked prediction on a raw value slice; still counted.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.kind.score(x)
    }

    pub fn is_bad_at(&self, x: &[f64]) -> bool {
        is_bad(self.score(x))
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset_calls(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl Clone for Classifier {
    /// Clones the model with a fresh counter.
    fn clone(&self) -> Self {
        Self::new(self.kind.clone())
    }
}
