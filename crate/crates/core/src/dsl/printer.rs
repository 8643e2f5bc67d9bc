use std::fmt::Write;

use crate::dsl::{ExperimentSection, TreeDocument, EXPERIMENT_HEADER};
use crate::engine::{ActionModel, ConditionModel, NodeDef, NodeKind};
use crate::harness::MetricSpec;
use crate::progress::ProfileParams;
use crate::scalar::Scalar;

/// Canonical text of a document: two-space indentation, one leaf per line,
/// every parameter explicit.
pub fn print_tree<S: Scalar>(doc: &TreeDocument<S>) -> String {
    let mut out = print_node(&doc.root);
    if let Some(exp) = &doc.experiment {
        out.push('\n');
        print_experiment(exp, &mut out);
    }
    out
}

pub fn print_node<S: Scalar>(node: &NodeDef<S>) -> String {
    let mut out = String::new();
    write_node(node, 0, &mut out);
    out
}

fn list<S: Scalar>(values: &[S]) -> String {
    let items: Vec<_> = values.iter().map(Scalar::to_decimal).collect();
    format!("[{}]", items.join(", "))
}

fn write_node<S: Scalar>(node: &NodeDef<S>, depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    let header = match &node.kind {
        NodeKind::Sequence => "sequence".to_string(),
        NodeKind::Fallback => "fallback".to_string(),
        NodeKind::Parallel => "parallel".to_string(),
        NodeKind::AbsSyncParallel(b) => format!("parallel_abs barriers={}", list(b.values())),
        NodeKind::RelSyncParallel(d) => format!("parallel_rel delta={}", d.get().to_decimal()),
        NodeKind::Action { name, model } => {
            let _ = writeln!(out, "{indent}action {name} {}", action_params(model));
            return;
        }
        NodeKind::Condition { name, model } => {
            let params = match model {
                ConditionModel::Constant(v) => format!("value={v}"),
                ConditionModel::Handle(h) => format!("handle={h}"),
            };
            let _ = writeln!(out, "{indent}condition {name} {params}");
            return;
        }
    };
    let _ = writeln!(out, "{indent}{header} {{");
    for child in &node.children {
        write_node(child, depth + 1, out);
    }
    let _ = writeln!(out, "{indent}}}");
}

fn action_params<S: Scalar>(model: &ActionModel<S>) -> String {
    match model {
        ActionModel::NoisyLinear(p) => format!(
            "model=noisy_linear alpha={} omega={}",
            p.alpha().to_decimal(),
            p.omega_bar().to_decimal()
        ),
        ActionModel::Profile(ProfileParams::Straight { increment }) => {
            format!("model=profile_straight increment={}", increment.to_decimal())
        }
        ActionModel::Profile(ProfileParams::Sigmoid { midpoint, steepness }) => format!(
            "model=profile_sigmoid midpoint={} steepness={}",
            midpoint.to_decimal(),
            steepness.to_decimal()
        ),
        ActionModel::Perpetual { params, initial_error } => format!(
            "model=perpetual bound={} drift={} correction={} error={}",
            params.error_bound().to_decimal(),
            params.drift_rate().to_decimal(),
            params.correction_rate().to_decimal(),
            initial_error.to_decimal()
        ),
        ActionModel::Constant(status) => format!("model=constant status={status}"),
        ActionModel::Handle(h) => format!("handle={h}"),
    }
}

fn print_experiment<S: Scalar>(exp: &ExperimentSection<S>, out: &mut String) {
    let _ = writeln!(out, "{EXPERIMENT_HEADER}");
    let _ = writeln!(out, "trials = {}", exp.trials);
    let _ = writeln!(out, "base_seed = {}", exp.base_seed);
    let _ = writeln!(out, "dt = {}", exp.dt.to_decimal());
    let _ = writeln!(out, "max_ticks = {}", exp.max_ticks);
    match &exp.metric {
        MetricSpec::ProgressDistance { window } => {
            let _ = writeln!(out, "metric = progress_distance");
            if let Some((k1, k2)) = window {
                let _ = writeln!(out, "window = [{k1}, {k2}]");
            }
        }
        MetricSpec::PredictabilityDistance { channel, p_bar, t_expected } => {
            let _ = writeln!(out, "metric = predictability_distance");
            let _ = writeln!(out, "channel = {channel}");
            let _ = writeln!(out, "p_bar = {}", p_bar.to_decimal());
            let _ = writeln!(out, "t_expected = {}", t_expected.to_decimal());
        }
    }
    for axis in &exp.sweep {
        let _ = writeln!(out, "sweep {} = {}", axis.path, list(&axis.values));
    }
}

#[cfg(test)]
mod tests {
    use crate::dsl::{parse_tree, print_tree};

    #[test]
    fn canonical_form() {
        let doc = parse_tree::<f64>("parallel_abs barriers=[0.5,1] { action a alpha=0.01 omega=0 action b alpha=0.02 }").unwrap();
        assert_eq!(
            print_tree(&doc),
            "parallel_abs barriers=[0.5, 1.0] {\n  action a model=noisy_linear alpha=0.01 omega=0.0\n  action b model=noisy_linear alpha=0.02 omega=0.0\n}\n"
        );
    }

    #[test]
    fn nested_round_trip() {
        let text = "parallel {\n  sequence {\n    condition c value=false\n    action a alpha=0.3\n  }\n  action b model=profile_sigmoid midpoint=10 steepness=0.5\n}\n[experiment]\nmetric = predictability_distance\nchannel = b\np_bar = 0.6\nt_expected = 6\nsweep a.alpha = [0.1, 0.2]\n";
        let doc = parse_tree::<f64>(text).unwrap();
        let again = parse_tree::<f64>(&print_tree(&doc)).unwrap();
        assert!(doc.same_structure(&again));
        assert_eq!(print_tree(&again), print_tree(&doc));
    }
}
