use proptest::prelude::*;
use syncbt::metrics::{step_length_bound, ticked_steps};
use syncbt::progress::{NoisyLinearParams, PerpetualParams, ProfileParams};
use syncbt::{run_episode, scenarios, ActionModel, BarrierSet, NodeDef, RelThreshold, Tree};

fn progress_rows(trace: &syncbt::Trace64) -> impl Iterator<Item = Vec<f64>> + '_ {
    trace.entries.iter().map(|e| e.progress.iter().map(|p| p.unwrap()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn noisy_progress_is_clamped_and_step_bounded(
        alpha in 0.001f64..0.5,
        omega in 0.0f64..0.5,
        barriers in 0usize..8,
        seed in any::<u64>(),
    ) {
        let leaf = |name: &str, a: f64| NodeDef::noisy(name, NoisyLinearParams::new(a, omega).unwrap());
        let def = NodeDef::abs_sync(
            BarrierSet::equidistant(barriers),
            vec![leaf("a", alpha), leaf("b", alpha * 2.0)],
        );
        let trace = run_episode(&def, 1.0, 50_000, seed).unwrap();
        for row in progress_rows(&trace) {
            prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
        }
        prop_assert!(step_length_bound(&trace, 0, alpha + omega));
        prop_assert!(step_length_bound(&trace, 1, 2.0 * alpha + omega));
    }

    #[test]
    fn noisy_progress_is_monotone_when_noise_is_small(
        alpha in 0.001f64..0.5,
        share in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let def = NodeDef::parallel(vec![NodeDef::noisy("a", NoisyLinearParams::new(alpha, share * alpha).unwrap())]);
        let trace = run_episode(&def, 1.0, 50_000, seed).unwrap();
        let mut prev = 0.0;
        for row in progress_rows(&trace) {
            prop_assert!(row[0] >= prev);
            prev = row[0];
        }
    }

    #[test]
    fn profiles_are_monotone_and_saturate(midpoint in 0.5f64..50.0, steepness in 0.01f64..3.0, increment in 0.001f64..1.0) {
        for params in [
            ProfileParams::sigmoid(midpoint, steepness).unwrap(),
            ProfileParams::straight(increment).unwrap(),
        ] {
            let def = NodeDef::parallel(vec![NodeDef::action("p", ActionModel::Profile(params))]);
            let trace = run_episode(&def, 1.0, 5_000, 0).unwrap();
            prop_assert!(!trace.truncated);
            let mut prev = 0.0;
            for row in progress_rows(&trace) {
                prop_assert!((0.0..=1.0).contains(&row[0]) && row[0] >= prev);
                prev = row[0];
            }
            prop_assert_eq!(prev, 1.0);
        }
    }

    #[test]
    fn paused_leaves_are_frozen(omega in 0.0f64..0.05, delta in 0.0f64..0.3, seed in any::<u64>()) {
        let def = scenarios::noisy_rel_sync(omega, delta);
        let mut tree = Tree::build(&def).unwrap();
        tree.reset(seed);
        let leaves = tree.leaves().to_vec();
        loop {
            let before: Vec<f64> = leaves.iter().map(|&l| tree.progress(l).unwrap().get()).collect();
            let result = tree.tick();
            for (i, &l) in leaves.iter().enumerate() {
                if !result.was_ticked(l) {
                    prop_assert_eq!(tree.progress(l).unwrap().get(), before[i]);
                }
            }
            if result.status != syncbt::NodeStatus::Running {
                break;
            }
        }
    }

    #[test]
    fn perpetual_progress_tracks_the_error_bound(
        bound in 0.0f64..0.3,
        drift in 0.0f64..0.3,
        correction in 0.0f64..0.3,
        seed in any::<u64>(),
    ) {
        let def = NodeDef::parallel(vec![NodeDef::action(
            "p",
            ActionModel::Perpetual { params: PerpetualParams::new(bound, drift, correction).unwrap(), initial_error: 0.0 },
        )]);
        let trace = run_episode(&def, 1.0, 500, seed).unwrap();
        prop_assert!(trace.truncated);
        for row in progress_rows(&trace) {
            prop_assert!(row[0] == 0.0 || row[0] == 1.0);
        }
    }
}

#[test]
fn noise_is_drawn_only_on_ticked_cycles() {
    // Pausing a child must not advance its stream: its step sequence is the
    // same whether or not it was held at barriers.
    let steps = |barriers| {
        let def = NodeDef::abs_sync(
            BarrierSet::equidistant(barriers),
            vec![
                NodeDef::noisy("slow", NoisyLinearParams::new(0.01, 0.005).unwrap()),
                NodeDef::noisy("fast", NoisyLinearParams::new(0.05, 0.02).unwrap()),
            ],
        );
        let trace = run_episode(&def, 1.0, 10_000, 42).unwrap();
        ticked_steps(&trace, 1)
    };
    let free = steps(0);
    let held = steps(10);
    let n = free.len().min(held.len()) - 1;
    assert!(n > 5);
    assert_eq!(free[..n], held[..n]);
}

#[test]
fn cart_base_waits_while_the_cart_is_out_of_bound() {
    let def = scenarios::cart_pushing::<f64>(0.0);
    let trace = run_episode(&def, 1.0, 10_000, 5).unwrap();
    assert_eq!(trace.last_tick(), 10_000);
    let hold = trace.channel("hold_cart").unwrap();
    let follow = trace.channel("follow_path").unwrap();
    let mut out_of_bound = 0;
    for e in &trace.entries {
        let before = trace.progress_at(e.k - 1, hold).unwrap();
        if before == 0.0 {
            out_of_bound += 1;
            assert!(!e.ticked[follow], "tick {}", e.k);
        }
    }
    assert!(out_of_bound > 100);
}

#[test]
fn relative_sync_accepts_the_full_range() {
    assert!(RelThreshold::new(0.0).is_ok());
    assert!(RelThreshold::new(1.0).is_ok());
    assert!(RelThreshold::new(1.01).is_err());
    assert!(RelThreshold::new(-0.01).is_err());
}
