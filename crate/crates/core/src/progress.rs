//! Progress-aware leaf behaviors.
//!
//! Each model has a pure step function (`step_*`) and a leaf type wrapping it
//! as a [`Behavior`]. Leaves only advance when ticked, so a paused leaf
//! reports the same progress on the next read and draws no noise.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Behavior, NodeStatus};
use crate::scalar::Scalar;
use crate::seed::LeafRng;

/// A progress-aware action completes on the first tick with progress at or
/// above `1 - DONE_EPSILON`.
pub const DONE_EPSILON: f64 = 1e-9;

/// Normalized progress, always inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Progress<S>(S);

impl<S: Scalar> Progress<S> {
    /// Clamps `value` into `[0, 1]`.
    pub fn new(value: S) -> Self {
        Self(value.clamp_unit())
    }

    pub fn zero() -> Self {
        Self(S::zero())
    }

    pub fn one() -> Self {
        Self(S::one())
    }

    pub fn get(self) -> S {
        self.0
    }

    pub fn is_complete(self) -> bool {
        self.0 >= S::one() - S::from_f64_lossy(DONE_EPSILON)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("{name} must be positive")]
    NotPositive { name: &'static str },
    #[error("{name} must be non-negative")]
    Negative { name: &'static str },
}

fn positive<S: Scalar>(name: &'static str, v: S) -> Result<S, ParamError> {
    if v > S::zero() {
        Ok(v)
    } else {
        Err(ParamError::NotPositive { name })
    }
}

fn non_negative<S: Scalar>(name: &'static str, v: S) -> Result<S, ParamError> {
    if v >= S::zero() {
        Ok(v)
    } else {
        Err(ParamError::Negative { name })
    }
}

/// Fixed increment plus uniform noise in `[-omega_bar, omega_bar]` per tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyLinearParams<S> {
    alpha: S,
    omega_bar: S,
}

impl<S: Scalar> NoisyLinearParams<S> {
    pub fn new(alpha: S, omega_bar: S) -> Result<Self, ParamError> {
        Ok(Self {
            alpha: positive("alpha", alpha)?,
            omega_bar: non_negative("omega", omega_bar)?,
        })
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    pub fn omega_bar(&self) -> S {
        self.omega_bar
    }
}

/// Deterministic progress profile indexed by the number of ticks received.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileParams<S> {
    /// `min(k * increment, 1)`.
    Straight { increment: S },
    /// Logistic curve through 0 at `k = 0`, 1/2 at `midpoint`, 1 from `2 * midpoint` on.
    Sigmoid { midpoint: S, steepness: S },
}

impl<S: Scalar> ProfileParams<S> {
    pub fn straight(increment: S) -> Result<Self, ParamError> {
        Ok(Self::Straight {
            increment: positive("increment", increment)?,
        })
    }

    pub fn sigmoid(midpoint: S, steepness: S) -> Result<Self, ParamError> {
        Ok(Self::Sigmoid {
            midpoint: positive("midpoint", midpoint)?,
            steepness: positive("steepness", steepness)?,
        })
    }
}

/// Abstract error process of an action with no finite duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerpetualParams<S> {
    error_bound: S,
    drift_rate: S,
    correction_rate: S,
}

impl<S: Scalar> PerpetualParams<S> {
    pub fn new(error_bound: S, drift_rate: S, correction_rate: S) -> Result<Self, ParamError> {
        Ok(Self {
            error_bound: non_negative("bound", error_bound)?,
            drift_rate: non_negative("drift", drift_rate)?,
            correction_rate: non_negative("correction", correction_rate)?,
        })
    }

    pub fn error_bound(&self) -> S {
        self.error_bound
    }

    pub fn drift_rate(&self) -> S {
        self.drift_rate
    }

    pub fn correction_rate(&self) -> S {
        self.correction_rate
    }

    /// Binary progress: 1 while the error is within the bound (inclusive).
    pub fn progress_for(&self, error: S) -> Progress<S> {
        if error <= self.error_bound {
            Progress::one()
        } else {
            Progress::zero()
        }
    }
}

/// Draws uniformly from `[-half_width, half_width]`; no draw when the width is zero.
fn uniform_symmetric<S: Scalar>(half_width: S, rng: &mut LeafRng) -> S {
    if half_width == S::zero() {
        return S::zero();
    }
    let w = half_width.to_f64_lossy();
    S::from_f64_lossy(rng.random_range(-w..=w))
}

/// One ticked update of the noisy linear model: `clamp(prev + alpha + u)`.
pub fn step_noisy_linear<S: Scalar>(
    params: &NoisyLinearParams<S>,
    prev: Progress<S>,
    rng: &mut LeafRng,
) -> Progress<S> {
    let noise = uniform_symmetric(params.omega_bar, rng);
    Progress::new(prev.get() + params.alpha + noise)
}

/// Progress of a profile after `k` ticks.
pub fn step_profile<S: Scalar>(params: &ProfileParams<S>, k: u64) -> Progress<S> {
    if k == 0 {
        return Progress::zero();
    }
    match *params {
        ProfileParams::Straight { increment } => {
            let ticks = S::from_u64(k).expect("tick count fits the scalar");
            Progress::new(ticks * increment)
        }
        ProfileParams::Sigmoid {
            midpoint,
            steepness,
        } => {
            let m = midpoint.to_f64_lossy();
            let s = steepness.to_f64_lossy();
            let k = k as f64;
            if k >= 2.0 * m {
                return Progress::one();
            }
            let logistic = |x: f64| 1.0 / (1.0 + (-s * (x - m)).exp());
            let low = logistic(0.0);
            let value = (logistic(k) - low) / (1.0 - 2.0 * low);
            Progress::new(S::from_f64_lossy(value))
        }
    }
}

/// One ticked update of a perpetual action: correct toward zero, then drift.
pub fn step_perpetual<S: Scalar>(
    params: &PerpetualParams<S>,
    error: S,
    rng: &mut LeafRng,
) -> (S, Progress<S>) {
    let corrected = (error - params.correction_rate).max_of(S::zero());
    let drift = if params.drift_rate == S::zero() {
        S::zero()
    } else {
        let d = params.drift_rate.to_f64_lossy();
        S::from_f64_lossy(rng.random_range(0.0..=d))
    };
    let next = corrected + drift;
    (next, params.progress_for(next))
}

/// Pure read of a leaf's progress; `None` when the leaf is not progress-aware.
pub fn progress_of<S: Scalar>(leaf: &dyn Behavior<S>) -> Option<Progress<S>> {
    leaf.progress()
}

#[derive(Debug, Clone)]
pub struct NoisyLinearAction<S> {
    params: NoisyLinearParams<S>,
    progress: Progress<S>,
    done: bool,
}

impl<S: Scalar> NoisyLinearAction<S> {
    pub fn new(params: NoisyLinearParams<S>) -> Self {
        Self {
            params,
            progress: Progress::zero(),
            done: false,
        }
    }
}

impl<S: Scalar> Behavior<S> for NoisyLinearAction<S> {
    fn tick(&mut self, rng: &mut LeafRng) -> NodeStatus {
        if self.done {
            return NodeStatus::Success;
        }
        self.progress = step_noisy_linear(&self.params, self.progress, rng);
        if self.progress.is_complete() {
            self.progress = Progress::one();
            self.done = true;
            NodeStatus::Success
        } else {
            NodeStatus::Running
        }
    }

    fn progress(&self) -> Option<Progress<S>> {
        Some(self.progress)
    }

    fn halt(&mut self) {
        self.progress = Progress::zero();
        self.done = false;
    }
}

#[derive(Debug, Clone)]
pub struct ProfileAction<S> {
    params: ProfileParams<S>,
    ticks: u64,
    progress: Progress<S>,
}

impl<S: Scalar> ProfileAction<S> {
    pub fn new(params: ProfileParams<S>) -> Self {
        Self {
            params,
            ticks: 0,
            progress: Progress::zero(),
        }
    }
}

impl<S: Scalar> Behavior<S> for ProfileAction<S> {
    fn tick(&mut self, _rng: &mut LeafRng) -> NodeStatus {
        if self.progress == Progress::one() {
            return NodeStatus::Success;
        }
        self.ticks += 1;
        self.progress = step_profile(&self.params, self.ticks);
        if self.progress.is_complete() {
            self.progress = Progress::one();
            NodeStatus::Success
        } else {
            NodeStatus::Running
        }
    }

    fn progress(&self) -> Option<Progress<S>> {
        Some(self.progress)
    }

    fn halt(&mut self) {
        self.ticks = 0;
        self.progress = Progress::zero();
    }
}

/// Never completes; progress flags whether the tracked error is within bound.
#[derive(Debug, Clone)]
pub struct PerpetualAction<S> {
    params: PerpetualParams<S>,
    initial_error: S,
    error: S,
}

impl<S: Scalar> PerpetualAction<S> {
    pub fn new(params: PerpetualParams<S>, initial_error: S) -> Self {
        Self {
            params,
            initial_error,
            error: initial_error,
        }
    }

    pub fn error(&self) -> S {
        self.error
    }
}

impl<S: Scalar> Behavior<S> for PerpetualAction<S> {
    fn tick(&mut self, rng: &mut LeafRng) -> NodeStatus {
        self.error = step_perpetual(&self.params, self.error, rng).0;
        NodeStatus::Running
    }

    fn progress(&self) -> Option<Progress<S>> {
        Some(self.params.progress_for(self.error))
    }

    fn halt(&mut self) {
        self.error = self.initial_error;
    }
}

/// Returns the same status on every tick. Not progress-aware.
#[derive(Debug, Clone)]
pub struct ConstantAction {
    status: NodeStatus,
}

impl ConstantAction {
    pub fn new(status: NodeStatus) -> Self {
        Self { status }
    }
}

impl<S: Scalar> Behavior<S> for ConstantAction {
    fn tick(&mut self, _rng: &mut LeafRng) -> NodeStatus {
        self.status
    }

    fn halt(&mut self) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::leaf_rng;
    use num_rational::Rational64;

    #[test]
    fn noiseless_increment_is_exact() {
        let p = NoisyLinearParams::new(0.01, 0.0).unwrap();
        let mut rng = leaf_rng(0, "a");
        assert_eq!(step_noisy_linear(&p, Progress::new(0.5), &mut rng).get(), 0.51);
    }

    #[test]
    fn noisy_step_stays_in_band_and_unit_interval() {
        let p = NoisyLinearParams::new(0.02, 0.05).unwrap();
        let mut rng = leaf_rng(3, "a");
        let mut prev = Progress::<f64>::zero();
        for _ in 0..10_000 {
            let next = step_noisy_linear(&p, prev, &mut rng);
            assert!((0.0..=1.0).contains(&next.get()));
            assert!((next.get() - prev.get()).abs() <= 0.07 + 1e-12);
            prev = if next.get() >= 1.0 { Progress::zero() } else { next };
        }
    }

    #[test]
    fn noise_mean_matches_uniform_law() {
        // Increment = alpha + U[-w, w]: mean alpha, sd w / sqrt(3).
        let p = NoisyLinearParams::new(0.02, 0.02).unwrap();
        let mut rng = leaf_rng(11, "mean");
        let n = 100_000;
        let prev = Progress::new(0.5);
        let sum: f64 = (0..n)
            .map(|_| step_noisy_linear(&p, prev, &mut rng).get() - 0.5)
            .sum();
        let mean = sum / n as f64;
        let sigma = 0.02 / 3f64.sqrt();
        assert!((mean - 0.02).abs() <= 3.0 * sigma / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn invalid_params_rejected() {
        assert_eq!(
            NoisyLinearParams::new(0.0, 0.0),
            Err(ParamError::NotPositive { name: "alpha" })
        );
        assert!(NoisyLinearParams::new(0.1, -0.1).is_err());
        assert!(ProfileParams::straight(0.0).is_err());
        assert!(PerpetualParams::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn straight_profile_values() {
        let p = ProfileParams::straight(Rational64::new(1, 10)).unwrap();
        assert_eq!(step_profile(&p, 0).get(), Rational64::new(0, 1));
        assert_eq!(step_profile(&p, 6).get(), Rational64::new(6, 10));
        assert_eq!(step_profile(&p, 40).get(), Rational64::new(1, 1));
        let pf = ProfileParams::straight(0.1).unwrap();
        assert!((step_profile(&pf, 6).get() - 0.6f64).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_profile_shape() {
        let p = ProfileParams::sigmoid(20.0, 0.3).unwrap();
        assert_eq!(step_profile(&p, 0).get(), 0.0);
        assert_eq!(step_profile(&p, 20).get(), 0.5);
        assert_eq!(step_profile(&p, 40).get(), 1.0);
        let mut last = 0.0;
        for k in 0..60 {
            let v = step_profile(&p, k).get();
            assert!(v >= last);
            last = v;
        }
        // Slow, fast, slow.
        let d = |k| step_profile(&p, k + 1).get() - step_profile(&p, k).get();
        assert!(d(1) < d(19) && d(38) < d(19));
    }

    #[test]
    fn perpetual_progress_is_binary_and_inclusive() {
        let p = PerpetualParams::new(0.1, 0.0, 0.0).unwrap();
        assert_eq!(p.progress_for(0.0).get(), 1.0);
        assert_eq!(p.progress_for(0.1).get(), 1.0);
        assert_eq!(p.progress_for(0.1000001).get(), 0.0);
        let p = PerpetualParams::new(0.1, 0.3, 0.05).unwrap();
        let mut rng = leaf_rng(5, "cart");
        let mut err = 0.0;
        for _ in 0..1000 {
            let (e, prog) = step_perpetual(&p, err, &mut rng);
            assert!(e >= 0.0);
            assert!(prog.get() == 0.0 || prog.get() == 1.0);
            err = e;
        }
    }

    #[test]
    fn leaves_report_progress_and_reset() {
        let mut rng = leaf_rng(0, "x");
        let mut a = NoisyLinearAction::new(NoisyLinearParams::new(0.5, 0.0).unwrap());
        assert_eq!(progress_of(&a).unwrap().get(), 0.0);
        assert_eq!(a.tick(&mut rng), NodeStatus::Running);
        assert_eq!(a.tick(&mut rng), NodeStatus::Success);
        assert_eq!(progress_of(&a).unwrap().get(), 1.0);
        assert_eq!(a.tick(&mut rng), NodeStatus::Success);
        a.halt();
        assert_eq!(progress_of(&a).unwrap().get(), 0.0);
        let c = ConstantAction::new(NodeStatus::Failure);
        assert!(progress_of::<f64>(&c).is_none());
    }
}
