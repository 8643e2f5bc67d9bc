//! The `.bt` text format for trees and experiments.
//!
//! ```text
//! # Three noisy actions under an absolute synchronized parallel.
//! parallel_abs barriers=[0.5, 1.0] {
//!   action a1 alpha=0.01 omega=0.02
//!   action a2 alpha=0.02 omega=0.02
//!   action a3 model=profile_straight increment=0.1
//! }
//!
//! [experiment]
//! trials = 1000
//! base_seed = 7
//! metric = progress_distance
//! sweep root.barrier_count = [0, 1, 2, 5, 10]
//! sweep *.omega = [0, 0.01, 0.02, 0.05]
//! ```
//!
//! Tree grammar:
//!
//! ```text
//! node      := composite | leaf
//! composite := ("sequence" | "fallback" | "parallel"
//!              | "parallel_abs" "barriers" "=" numlist
//!              | "parallel_rel" "delta" "=" num) "{" node+ "}"
//! leaf      := ("action" | "condition") ident (param "=" value)*
//! value     := num | ident | numlist
//! ```
//!
//! Action models are selected with `model=` (`noisy_linear`, `profile_straight`,
//! `profile_sigmoid`, `perpetual`, `constant`); `alpha=` alone implies
//! `noisy_linear` and `handle=` binds an external behavior. Conditions take
//! `value=true|false` or `handle=`.

mod lexer;
mod parser;
mod printer;
mod validate;

use thiserror::Error;

use crate::engine::NodeDef;
use crate::harness::{ExperimentConfig, MetricSpec, SweepAxis};
use crate::scalar::Scalar;

pub use parser::parse_tree;
pub use printer::{print_node, print_tree};
pub use validate::{validate_semantics, Diagnostic, Severity};

pub const EXPERIMENT_HEADER: &str = "[experiment]";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedCharacter(char),
    #[error("unknown keyword `{0}`")]
    UnknownKeyword(String),
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unexpected end of input, expected {0}")]
    UnexpectedEof(&'static str),
    #[error("nodes nested deeper than {0} levels")]
    TooDeep(usize),
    #[error("input continues after the root node")]
    TrailingInput,
    #[error("invalid number `{0}`")]
    InvalidNumber(String),
    #[error("barrier outside (0, 1]")]
    BarrierOutOfRange,
    #[error("barriers must be strictly increasing")]
    BarriersNotIncreasing,
    #[error("delta outside [0, 1]")]
    DeltaOutOfRange,
    #[error("composite node has no children")]
    EmptyComposite,
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("leaf needs a `model=`, `alpha=` or `handle=` parameter")]
    MissingModel,
    #[error("model `{model}` has no parameter `{param}`")]
    UnknownParam { model: String, param: String },
    #[error("model `{model}` requires parameter `{param}`")]
    MissingParam { model: String, param: &'static str },
    #[error("parameter `{0}` given twice")]
    DuplicateParam(String),
    #[error("invalid value for `{param}`: {reason}")]
    InvalidParam { param: String, reason: String },
    #[error("leaf name `{0}` is used more than once")]
    DuplicateLeaf(String),
    #[error("unknown experiment setting `{0}`")]
    UnknownSetting(String),
    #[error("setting `{0}` given twice")]
    DuplicateSetting(String),
    #[error("invalid experiment setting `{key}`: {reason}")]
    InvalidSetting { key: String, reason: String },
}

/// Parse failure located in the source (1-based line and column).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind} (near `{token}`)")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub token: String,
}

/// Experiment settings from the `[experiment]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSection<S> {
    pub trials: usize,
    pub base_seed: u64,
    pub dt: f64,
    pub max_ticks: u64,
    pub metric: MetricSpec<S>,
    pub sweep: Vec<SweepAxis<S>>,
}

/// A parsed `.bt` file.
#[derive(Debug, Clone)]
pub struct TreeDocument<S> {
    pub source: String,
    pub root: NodeDef<S>,
    pub experiment: Option<ExperimentSection<S>>,
}

impl<S: Scalar> TreeDocument<S> {
    /// Structural equality of tree and experiment; ignores source text and spans.
    pub fn same_structure(&self, other: &Self) -> bool {
        self.root == other.root && self.experiment == other.experiment
    }

    pub fn experiment_config(&self) -> Option<ExperimentConfig<S>> {
        self.experiment.as_ref().map(|e| ExperimentConfig {
            tree: self.root.clone(),
            trials: e.trials,
            base_seed: e.base_seed,
            dt: e.dt,
            max_ticks: e.max_ticks,
            sweep: e.sweep.clone(),
            metric: e.metric.clone(),
        })
    }
}
