//! Ready-made trees for the sensitivity studies.
//!
//! Progress is normalized to `[0, 1]`; integer per-tick increments of the
//! original studies are read as percent points (`alpha = 1, 2, 5` becomes
//! `0.01, 0.02, 0.05`).

use crate::engine::{ActionModel, NodeDef};
use crate::harness::{ExperimentConfig, MetricSpec, ParamPath, SweepAxis};
use crate::progress::{NoisyLinearParams, PerpetualParams, ProfileParams};
use crate::scalar::Scalar;
use crate::sync::{BarrierSet, RelThreshold};

/// Per-tick increments of the three noisy actions.
pub const NOISY_ALPHAS: [f64; 3] = [0.01, 0.02, 0.05];
/// Noise half-widths swept in the distance studies.
pub const OMEGA_GRID: [f64; 4] = [0.0, 0.01, 0.02, 0.05];
/// Barrier counts swept for absolute synchronization.
pub const BARRIER_COUNTS: [usize; 5] = [0, 1, 2, 5, 10];
/// Thresholds swept for relative synchronization.
pub const DELTA_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.5, 1.0];

/// Increment of the artificial profile action.
pub const PROFILE_INCREMENT: f64 = 0.1;
/// Increment of the constrained action: twice the profile rate.
pub const FAST_INCREMENT: f64 = 0.2;
pub const TARGET_PROGRESS: f64 = 0.6;

/// Reads a constant through its decimal text so rationals stay exact.
fn s<S: Scalar>(v: f64) -> S {
    S::parse_decimal(&v.to_string()).unwrap_or_else(|| S::from_f64_lossy(v))
}

fn noisy_children<S: Scalar>(alphas: &[S], omega: S) -> Vec<NodeDef<S>> {
    alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            NodeDef::noisy(
                format!("a{}", i + 1),
                NoisyLinearParams::new(alpha, omega).expect("valid noisy params"),
            )
        })
        .collect()
}

fn default_alphas<S: Scalar>() -> Vec<S> {
    NOISY_ALPHAS.iter().map(|&a| s(a)).collect()
}

/// Three noisy actions under an absolute synchronized parallel with
/// `barrier_count` equidistant barriers.
pub fn noisy_abs_sync<S: Scalar>(omega: S, barrier_count: usize) -> NodeDef<S> {
    NodeDef::abs_sync(
        BarrierSet::equidistant(barrier_count),
        noisy_children(&default_alphas(), omega),
    )
}

/// Same actions under a relative synchronized parallel.
pub fn noisy_rel_sync<S: Scalar>(omega: S, delta: S) -> NodeDef<S> {
    NodeDef::rel_sync(
        RelThreshold::new(delta).expect("delta in [0, 1]"),
        noisy_children(&default_alphas(), omega),
    )
}

/// Same actions under a plain parallel.
pub fn noisy_parallel<S: Scalar>(omega: S) -> NodeDef<S> {
    NodeDef::parallel(noisy_children(&default_alphas(), omega))
}

/// Artificial straight-line profile `profile` paced against a faster noisy
/// action `task`, under an absolute synchronized parallel.
pub fn paced_task<S: Scalar>(omega: S, barrier_count: usize) -> NodeDef<S> {
    NodeDef::abs_sync(
        BarrierSet::equidistant(barrier_count),
        vec![
            NodeDef::action(
                "profile",
                ActionModel::Profile(ProfileParams::straight(s(PROFILE_INCREMENT)).expect("positive")),
            ),
            NodeDef::noisy("task", NoisyLinearParams::new(s(FAST_INCREMENT), omega).expect("valid")),
        ],
    )
}

/// Time of the profile sample nearest to `p_bar`. The profile only exists at
/// ticks, so the quotient is rounded (`0.6 / 0.1` is not exactly 6 in `f64`).
pub fn profile_time(p_bar: f64, dt: f64) -> f64 {
    (p_bar / PROFILE_INCREMENT).round() * dt
}

/// Cart pushing: `hold_cart` corrects a drifting cart, `follow_path` drives
/// the base. Both are perpetual; relative synchronization with `delta`
/// stops the base whenever the cart is out of bound.
pub fn cart_pushing<S: Scalar>(delta: S) -> NodeDef<S> {
    let perpetual = |name: &str, bound: f64, drift: f64, correction: f64| {
        NodeDef::action(
            name,
            ActionModel::Perpetual {
                params: PerpetualParams::new(s(bound), s(drift), s(correction)).expect("valid"),
                initial_error: S::zero(),
            },
        )
    };
    NodeDef::rel_sync(
        RelThreshold::new(delta).expect("delta in [0, 1]"),
        vec![
            perpetual("hold_cart", 0.1, 0.15, 0.1),
            perpetual("follow_path", 0.1, 0.05, 0.05),
        ],
    )
}

/// Progress-distance sweep over barrier counts and noise levels.
pub fn barrier_sweep<S: Scalar>(trials: usize, base_seed: u64) -> ExperimentConfig<S> {
    let mut cfg = ExperimentConfig::new(
        noisy_abs_sync(S::zero(), 0),
        MetricSpec::ProgressDistance { window: None },
    );
    cfg.trials = trials;
    cfg.base_seed = base_seed;
    cfg.sweep = vec![
        SweepAxis {
            path: ParamPath::parse("root.barrier_count").expect("valid path"),
            values: BARRIER_COUNTS.iter().map(|&n| S::from_usize_lossy(n)).collect(),
        },
        SweepAxis {
            path: ParamPath::parse("*.omega").expect("valid path"),
            values: OMEGA_GRID.iter().map(|&w| s(w)).collect(),
        },
    ];
    cfg
}

/// Progress-distance sweep over thresholds and noise levels.
pub fn delta_sweep<S: Scalar>(trials: usize, base_seed: u64) -> ExperimentConfig<S> {
    let mut cfg = ExperimentConfig::new(
        noisy_rel_sync(S::zero(), S::one()),
        MetricSpec::ProgressDistance { window: None },
    );
    cfg.trials = trials;
    cfg.base_seed = base_seed;
    cfg.sweep = vec![
        SweepAxis {
            path: ParamPath::parse("root.delta").expect("valid path"),
            values: DELTA_GRID.iter().map(|&d| s(d)).collect(),
        },
        SweepAxis {
            path: ParamPath::parse("*.omega").expect("valid path"),
            values: OMEGA_GRID.iter().map(|&w| s(w)).collect(),
        },
    ];
    cfg
}

/// Predictability sweep of the paced task at the given noise levels.
pub fn pacing_sweep<S: Scalar>(
    trials: usize,
    base_seed: u64,
    barrier_counts: &[usize],
    omegas: &[f64],
) -> ExperimentConfig<S> {
    let mut cfg = ExperimentConfig::new(
        paced_task(S::zero(), 0),
        MetricSpec::PredictabilityDistance {
            channel: "task".into(),
            p_bar: s(TARGET_PROGRESS),
            t_expected: profile_time(TARGET_PROGRESS, 1.0),
        },
    );
    cfg.trials = trials;
    cfg.base_seed = base_seed;
    cfg.sweep = vec![
        SweepAxis {
            path: ParamPath::parse("root.barrier_count").expect("valid path"),
            values: barrier_counts.iter().map(|&n| S::from_usize_lossy(n)).collect(),
        },
        SweepAxis {
            path: ParamPath::parse("task.omega").expect("valid path"),
            values: omegas.iter().map(|&w| s(w)).collect(),
        },
    ];
    cfg
}
