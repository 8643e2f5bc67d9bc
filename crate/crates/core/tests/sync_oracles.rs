use proptest::prelude::*;
use syncbt::progress::NoisyLinearParams;
use syncbt::sync::CurrentBarrier;
use syncbt::{run_episode, BarrierSet, NodeDef, NodeStatus, Rational64, RelThreshold, Scalar, Tree, TrialTrace};

const ALPHAS: [&str; 3] = ["0.01", "0.02", "0.05"];

fn dec<S: Scalar>(text: &str) -> S {
    S::parse_decimal(text).unwrap()
}

#[derive(Clone, Debug)]
enum Guard<S> {
    Absolute(Vec<S>),
    Relative(S),
}

/// Step of the reference simulation.
#[derive(Clone, Debug, PartialEq)]
struct OracleTick<S> {
    progress: Vec<S>,
    ticked: Vec<bool>,
    status: Vec<NodeStatus>,
    root: NodeStatus,
}

/// Straight-line simulation of deterministic linear actions under a
/// synchronized parallel, written directly from the pseudocode.
fn oracle<S: Scalar>(alphas: &[S], guard: &Guard<S>, max_ticks: usize) -> Vec<OracleTick<S>> {
    let n = alphas.len();
    let one = S::one();
    let done_at = one - S::from_f64_lossy(1e-9);
    let mut p = vec![S::zero(); n];
    let mut status = vec![NodeStatus::Running; n];
    let mut out = Vec::new();
    for _ in 0..max_ticks {
        let mut min = one;
        for &x in &p {
            if x < min {
                min = x;
            }
        }
        let ticked: Vec<bool> = match guard {
            Guard::Absolute(barriers) => match barriers.iter().find(|&&b| b > min) {
                Some(&b) => p.iter().map(|&x| x <= b).collect(),
                None => vec![true; n],
            },
            Guard::Relative(delta) => p.iter().map(|&x| x <= min + *delta).collect(),
        };
        for i in 0..n {
            if !ticked[i] {
                continue;
            }
            if status[i] == NodeStatus::Success {
                continue;
            }
            let mut next = p[i] + alphas[i];
            if next > one {
                next = one;
            }
            if next >= done_at {
                next = one;
                status[i] = NodeStatus::Success;
            }
            p[i] = next;
        }
        let root = if status.iter().all(|&s| s == NodeStatus::Success) {
            NodeStatus::Success
        } else {
            NodeStatus::Running
        };
        out.push(OracleTick {
            progress: p.clone(),
            ticked,
            status: status.clone(),
            root,
        });
        if root != NodeStatus::Running {
            break;
        }
    }
    out
}

fn engine_tree<S: Scalar>(alphas: &[S], guard: &Guard<S>) -> NodeDef<S> {
    let children = alphas
        .iter()
        .enumerate()
        .map(|(i, &a)| NodeDef::noisy(format!("a{i}"), NoisyLinearParams::new(a, S::zero()).unwrap()))
        .collect();
    match guard {
        Guard::Absolute(b) => NodeDef::abs_sync(BarrierSet::new(b.clone()).unwrap(), children),
        Guard::Relative(d) => NodeDef::rel_sync(RelThreshold::new(*d).unwrap(), children),
    }
}

fn observed<S: Scalar>(trace: &TrialTrace<S>) -> Vec<OracleTick<S>> {
    trace
        .entries
        .iter()
        .map(|e| OracleTick {
            progress: e.progress.iter().map(|p| p.unwrap()).collect(),
            ticked: e.ticked.clone(),
            status: e.status.iter().map(|s| s.unwrap_or(NodeStatus::Running)).collect(),
            root: e.root,
        })
        .collect()
}

fn guards<S: Scalar>() -> Vec<Guard<S>> {
    let equidistant: Vec<S> = (1..=5).map(|i| S::from_usize_lossy(i) / S::from_usize_lossy(5)).collect();
    vec![
        Guard::Absolute(vec![]),
        Guard::Absolute(vec![dec("0.5"), dec("1.0")]),
        Guard::Absolute(equidistant),
        Guard::Relative(dec("0.01")),
        Guard::Relative(dec("0.1")),
        Guard::Relative(dec("1")),
    ]
}

fn check_against_oracle<S: Scalar>() {
    let alphas: Vec<S> = ALPHAS.iter().map(|a| dec(a)).collect();
    for guard in guards::<S>() {
        let expected = oracle(&alphas, &guard, 10_000);
        let trace = run_episode(&engine_tree(&alphas, &guard), 1.0, 10_000, 0).unwrap();
        assert!(!trace.truncated, "{guard:?}");
        let got = observed(&trace);
        assert_eq!(got.len(), expected.len(), "{guard:?}");
        for (k, (g, e)) in got.iter().zip(&expected).enumerate() {
            assert_eq!(g, e, "{guard:?} tick {}", k + 1);
        }
    }
}

#[test]
fn engine_matches_reference_simulation_in_f64() {
    check_against_oracle::<f64>();
}

#[test]
fn engine_matches_reference_simulation_exactly() {
    check_against_oracle::<Rational64>();
}

#[test]
fn exact_episode_lengths() {
    // Without synchronization the slowest action needs 100 ticks.
    let alphas: Vec<Rational64> = ALPHAS.iter().map(|a| dec(a)).collect();
    for guard in guards::<Rational64>() {
        let trace = run_episode(&engine_tree(&alphas, &guard), 1.0, 10_000, 0).unwrap();
        assert_eq!(trace.last_tick(), 100, "{guard:?}");
    }
}

#[test]
fn tight_delta_keeps_progress_in_lockstep() {
    let alphas: Vec<Rational64> = ALPHAS.iter().map(|a| dec(a)).collect();
    let delta: Rational64 = dec("0.01");
    let trace = run_episode(&engine_tree(&alphas, &Guard::Relative(delta)), 1.0, 10_000, 0).unwrap();
    for e in &trace.entries {
        let p: Vec<_> = e.progress.iter().map(|p| p.unwrap()).collect();
        let lo = *p.iter().min().unwrap();
        let hi = *p.iter().max().unwrap();
        // Lead is at most delta plus one step of the fastest action.
        assert!(hi - lo <= delta + dec::<Rational64>("0.05"));
    }
}

fn noisy_children(omega: f64) -> Vec<NodeDef<f64>> {
    [0.01, 0.02, 0.05]
        .iter()
        .enumerate()
        .map(|(i, &a)| NodeDef::noisy(format!("a{i}"), NoisyLinearParams::new(a, omega).unwrap()))
        .collect()
}

#[test]
fn unsynchronized_limits_match_plain_parallel() {
    let plain = NodeDef::parallel(noisy_children(0.02));
    let no_barriers = NodeDef::abs_sync(BarrierSet::new(vec![]).unwrap(), noisy_children(0.02));
    let full_delta = NodeDef::rel_sync(RelThreshold::new(1.0).unwrap(), noisy_children(0.02));
    for seed in 0..100 {
        let reference = run_episode(&plain, 1.0, 10_000, seed).unwrap();
        assert_eq!(run_episode(&no_barriers, 1.0, 10_000, seed).unwrap(), reference);
        assert_eq!(run_episode(&full_delta, 1.0, 10_000, seed).unwrap(), reference);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Holds for monotone children: noise never exceeds the smallest increment.
    #[test]
    fn relative_lead_is_capped(
        alphas in prop::collection::vec(0.005f64..0.2, 2..5),
        noise_share in 0.0f64..=1.0,
        delta in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let omega = noise_share * alphas.iter().cloned().fold(1.0, f64::min);
        let children = alphas
            .iter()
            .enumerate()
            .map(|(i, &a)| NodeDef::noisy(format!("a{i}"), NoisyLinearParams::new(a, omega).unwrap()))
            .collect();
        let def = NodeDef::rel_sync(RelThreshold::new(delta).unwrap(), children);
        let trace = run_episode(&def, 1.0, 20_000, seed).unwrap();
        let step = alphas.iter().fold(0.0f64, |m, &a| m.max(a)) + omega;
        for e in &trace.entries {
            let p: Vec<f64> = e.progress.iter().map(|p| p.unwrap()).collect();
            let lo = p.iter().cloned().fold(1.0, f64::min);
            let hi = p.iter().cloned().fold(0.0, f64::max);
            prop_assert!(hi - lo <= delta + step + 1e-12);
        }
    }

    #[test]
    fn synchronized_parallels_terminate(
        alphas in prop::collection::vec(0.01f64..0.2, 2..5),
        omega in 0.0f64..0.05,
        barriers in 0usize..12,
        delta in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let children = |omega| -> Vec<NodeDef<f64>> {
            alphas
                .iter()
                .enumerate()
                .map(|(i, &a)| NodeDef::noisy(format!("a{i}"), NoisyLinearParams::new(a, omega).unwrap()))
                .collect()
        };
        for def in [
            NodeDef::abs_sync(BarrierSet::equidistant(barriers), children(omega)),
            NodeDef::rel_sync(RelThreshold::new(delta).unwrap(), children(omega)),
        ] {
            let trace = run_episode(&def, 1.0, 100_000, seed).unwrap();
            prop_assert!(!trace.truncated);
            prop_assert_eq!(trace.final_status(), Some(NodeStatus::Success));
        }
    }

    #[test]
    fn absolute_barrier_is_never_overtaken_by_a_paused_child(
        omega in 0.0f64..0.05,
        barriers in 1usize..12,
        seed in any::<u64>(),
    ) {
        let def = NodeDef::abs_sync(BarrierSet::equidistant(barriers), noisy_children(omega));
        let trace = run_episode(&def, 1.0, 100_000, seed).unwrap();
        let set: BarrierSet<f64> = BarrierSet::equidistant(barriers);
        let mut prev: Vec<f64> = vec![0.0; 3];
        for e in &trace.entries {
            let min = prev.iter().cloned().fold(1.0, f64::min);
            let barrier = set.values().iter().find(|&&b| b > min).copied();
            for (c, &before) in prev.iter().enumerate() {
                let admitted = barrier.is_none_or(|b| before <= b);
                prop_assert_eq!(e.ticked[c], admitted);
                if !e.ticked[c] {
                    prop_assert_eq!(e.progress[c].unwrap(), before);
                }
            }
            prev = e.progress.iter().map(|p| p.unwrap()).collect();
        }
    }

    #[test]
    fn barrier_never_moves_back_for_monotone_children(
        noise_share in 0.0f64..=1.0,
        barriers in 1usize..12,
        seed in any::<u64>(),
    ) {
        let def = NodeDef::abs_sync(BarrierSet::equidistant(barriers), noisy_children(noise_share * 0.01));
        let mut tree = Tree::build(&def).unwrap();
        tree.reset(seed);
        let root = tree.root();
        let mut last = None;
        while tree.tick().status == NodeStatus::Running {
            let now = tree.sync_state(root).unwrap().current_barrier;
            // Exhausted ranks above every barrier.
            let rank = |b: Option<CurrentBarrier<f64>>| match b {
                Some(CurrentBarrier::At(v)) => v,
                Some(CurrentBarrier::Exhausted) => f64::INFINITY,
                None => f64::NEG_INFINITY,
            };
            prop_assert!(rank(now) >= rank(last));
            last = now;
        }
    }
}
