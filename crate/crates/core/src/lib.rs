//! Behavior trees with progress-synchronized parallel nodes.
//!
//! The engine implements the classical node set (Sequence, Fallback,
//! Parallel, Action, Condition) plus two synchronized parallels:
//!
//! * **absolute**: children pause at each progress barrier until every
//!   sibling has reached it;
//! * **relative**: a child pauses while its progress leads the slowest
//!   sibling by more than a threshold `delta`.
//!
//! On top of the engine sit progress-aware leaf models, the progress and
//! predictability distance metrics, a seeded Monte-Carlo sweep harness, and a
//! small text format (`.bt`) for trees and experiments.
//!
//! All numeric code is generic over [`Scalar`]; the aliases below fix the
//! common instantiations.

pub mod dsl;
pub mod engine;
pub mod harness;
pub mod metrics;
pub mod progress;
pub mod scalar;
pub mod scenarios;
pub mod seed;
pub mod sync;
pub mod trace;

pub use engine::{
    run_episode, ActionModel, Behavior, BuildError, ConditionModel, NodeDef, NodeId, NodeKind,
    NodeStatus, Predicate, Registry, TickResult, Tree,
};
pub use progress::Progress;
pub use scalar::Scalar;
pub use sync::{BarrierSet, RelThreshold};
pub use trace::TrialTrace;

pub use num_rational::Rational64;

pub type NodeDef64 = NodeDef<f64>;
pub type Tree64 = Tree<f64>;
pub type Trace64 = TrialTrace<f64>;
pub type Progress64 = Progress<f64>;

pub type NodeDef32 = NodeDef<f32>;
pub type Tree32 = Tree<f32>;
pub type Trace32 = TrialTrace<f32>;

/// Exact rational arithmetic, used for deterministic oracle checks.
pub type ExactNodeDef = NodeDef<Rational64>;
pub type ExactTree = Tree<Rational64>;
pub type ExactTrace = TrialTrace<Rational64>;
