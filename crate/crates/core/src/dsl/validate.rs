use serde::Serialize;

use crate::dsl::TreeDocument;
use crate::engine::{NodeDef, NodeKind};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{}:{}: {level}: {}", self.line, self.column, self.message)
    }
}

fn at<S>(node: &NodeDef<S>, severity: Severity, message: String) -> Diagnostic {
    let span = node.span.unwrap_or_default();
    Diagnostic {
        severity,
        message,
        line: span.line.max(1),
        column: span.column.max(1),
    }
}

/// Semantic checks beyond the grammar. Errors make the tree unusable;
/// warnings flag configurations that run but probably misbehave.
pub fn validate_semantics<S: Scalar>(doc: &TreeDocument<S>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for node in doc.root.walk() {
        if !node.kind.is_synchronized() {
            continue;
        }
        for child in &node.children {
            match &child.kind {
                NodeKind::Action { name, model } => match model.is_progress_aware() {
                    Some(true) => {}
                    Some(false) => out.push(at(
                        child,
                        Severity::Error,
                        format!("action `{name}` has no progress function but sits under a synchronized parallel"),
                    )),
                    None => out.push(at(
                        child,
                        Severity::Warning,
                        format!("handle action `{name}` must report progress once bound"),
                    )),
                },
                NodeKind::Condition { name, .. } => out.push(at(
                    child,
                    Severity::Error,
                    format!("condition `{name}` has no progress function but sits under a synchronized parallel"),
                )),
                _ => out.push(at(
                    child,
                    Severity::Error,
                    "composite child of a synchronized parallel has no progress function".into(),
                )),
            }
        }
        match &node.kind {
            NodeKind::AbsSyncParallel(b) if !b.is_empty() && !b.contains_one() => out.push(at(
                node,
                Severity::Warning,
                "barriers do not include 1.0; completion relies on the exhausted-barrier rule".into(),
            )),
            NodeKind::RelSyncParallel(d) if d.get() == S::zero() => {
                let noisy = node.children.iter().any(|c| match &c.kind {
                    NodeKind::Action { model, .. } => model.is_noisy(),
                    _ => false,
                });
                if noisy {
                    out.push(at(
                        node,
                        Severity::Warning,
                        "delta = 0 with noisy children may cause highly intermittent execution".into(),
                    ));
                }
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_tree;

    fn diags(text: &str) -> Vec<Diagnostic> {
        validate_semantics(&parse_tree::<f64>(text).unwrap())
    }

    #[test]
    fn condition_under_sync_is_an_error() {
        let d = diags("parallel_abs barriers=[1.0] {\n  action a alpha=0.1\n  condition c value=true\n}");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].severity, Severity::Error);
        assert_eq!((d[0].line, d[0].column), (3, 3));
    }

    #[test]
    fn missing_unit_barrier_warns() {
        let d = diags("parallel_abs barriers=[0.5] { action a alpha=0.1 action b alpha=0.2 }");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].severity, Severity::Warning);
    }

    #[test]
    fn zero_delta_with_noise_warns() {
        let d = diags("parallel_rel delta=0 { action a alpha=0.1 omega=0.05 action b alpha=0.2 }");
        assert_eq!(d.len(), 1);
        assert!(diags("parallel_rel delta=0 { action a alpha=0.1 action b alpha=0.2 }").is_empty());
    }

    #[test]
    fn example_five_is_clean() {
        let d = diags(
            "parallel_abs barriers=[0.2, 0.4, 0.6, 0.8, 1.0] {
               action a1 alpha=0.01 omega=0.02
               action a2 alpha=0.02 omega=0.02
               action a3 alpha=0.05 omega=0.02
             }",
        );
        assert!(d.is_empty());
    }
}
