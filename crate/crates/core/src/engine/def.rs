use crate::engine::NodeStatus;
use crate::progress::{NoisyLinearParams, PerpetualParams, ProfileParams};
use crate::scalar::Scalar;
use crate::sync::{BarrierSet, RelThreshold};

/// Source location of a node in a `.bt` document (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

/// Behavior model of an Action leaf.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionModel<S> {
    NoisyLinear(NoisyLinearParams<S>),
    Profile(ProfileParams<S>),
    Perpetual {
        params: PerpetualParams<S>,
        initial_error: S,
    },
    /// Returns the same status on every tick.
    Constant(NodeStatus),
    /// Externally supplied behavior, bound by name through a [`Registry`](crate::engine::Registry).
    Handle(String),
}

impl<S: Scalar> ActionModel<S> {
    /// Whether the model reports progress. `None` for handles, which are only
    /// known once bound.
    pub fn is_progress_aware(&self) -> Option<bool> {
        match self {
            ActionModel::NoisyLinear(_) | ActionModel::Profile(_) | ActionModel::Perpetual { .. } => {
                Some(true)
            }
            ActionModel::Constant(_) => Some(false),
            ActionModel::Handle(_) => None,
        }
    }

    pub fn is_noisy(&self) -> bool {
        match self {
            ActionModel::NoisyLinear(p) => p.omega_bar() > S::zero(),
            ActionModel::Perpetual { params, .. } => params.drift_rate() > S::zero(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConditionModel {
    Constant(bool),
    Handle(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind<S> {
    Sequence,
    Fallback,
    Parallel,
    AbsSyncParallel(BarrierSet<S>),
    RelSyncParallel(RelThreshold<S>),
    Action { name: String, model: ActionModel<S> },
    Condition { name: String, model: ConditionModel },
}

impl<S> NodeKind<S> {
    pub fn is_leaf(&self) -> bool {
        matches!(self, NodeKind::Action { .. } | NodeKind::Condition { .. })
    }

    pub fn is_parallel(&self) -> bool {
        matches!(
            self,
            NodeKind::Parallel | NodeKind::AbsSyncParallel(_) | NodeKind::RelSyncParallel(_)
        )
    }

    pub fn is_synchronized(&self) -> bool {
        matches!(self, NodeKind::AbsSyncParallel(_) | NodeKind::RelSyncParallel(_))
    }

    pub fn leaf_name(&self) -> Option<&str> {
        match self {
            NodeKind::Action { name, .. } | NodeKind::Condition { name, .. } => Some(name),
            _ => None,
        }
    }
}

/// Immutable tree definition. A [`Tree`](crate::engine::Tree) is instantiated from it.
///
/// Equality is structural and ignores source spans.
#[derive(Debug, Clone)]
pub struct NodeDef<S> {
    pub kind: NodeKind<S>,
    pub children: Vec<NodeDef<S>>,
    pub span: Option<Span>,
}

impl<S: PartialEq> PartialEq for NodeDef<S> {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.children == other.children
    }
}

impl<S: Scalar> NodeDef<S> {
    pub fn composite(kind: NodeKind<S>, children: Vec<NodeDef<S>>) -> Self {
        Self {
            kind,
            children,
            span: None,
        }
    }

    pub fn sequence(children: Vec<NodeDef<S>>) -> Self {
        Self::composite(NodeKind::Sequence, children)
    }

    pub fn fallback(children: Vec<NodeDef<S>>) -> Self {
        Self::composite(NodeKind::Fallback, children)
    }

    pub fn parallel(children: Vec<NodeDef<S>>) -> Self {
        Self::composite(NodeKind::Parallel, children)
    }

    pub fn abs_sync(barriers: BarrierSet<S>, children: Vec<NodeDef<S>>) -> Self {
        Self::composite(NodeKind::AbsSyncParallel(barriers), children)
    }

    pub fn rel_sync(delta: RelThreshold<S>, children: Vec<NodeDef<S>>) -> Self {
        Self::composite(NodeKind::RelSyncParallel(delta), children)
    }

    pub fn action(name: impl Into<String>, model: ActionModel<S>) -> Self {
        Self::composite(
            NodeKind::Action {
                name: name.into(),
                model,
            },
            Vec::new(),
        )
    }

    pub fn noisy(name: impl Into<String>, params: NoisyLinearParams<S>) -> Self {
        Self::action(name, ActionModel::NoisyLinear(params))
    }

    pub fn condition(name: impl Into<String>, model: ConditionModel) -> Self {
        Self::composite(
            NodeKind::Condition {
                name: name.into(),
                model,
            },
            Vec::new(),
        )
    }

    /// Preorder walk.
    pub fn walk(&self) -> Vec<&NodeDef<S>> {
        fn visit<'a, S>(node: &'a NodeDef<S>, out: &mut Vec<&'a NodeDef<S>>) {
            out.push(node);
            for child in &node.children {
                visit(child, out);
            }
        }
        let mut out = Vec::new();
        visit(self, &mut out);
        out
    }

    /// Node at the given child-index path from this node.
    pub fn at_path(&self, path: &[usize]) -> Option<&NodeDef<S>> {
        path.iter().try_fold(self, |n, &i| n.children.get(i))
    }

    pub fn at_path_mut(&mut self, path: &[usize]) -> Option<&mut NodeDef<S>> {
        path.iter().try_fold(self, |n, &i| n.children.get_mut(i))
    }

    pub fn leaves_mut(&mut self) -> Vec<&mut NodeDef<S>> {
        if self.kind.is_leaf() {
            return vec![self];
        }
        self.children.iter_mut().flat_map(|c| c.leaves_mut()).collect()
    }
}
