//! Seeded Monte-Carlo batches and parameter sweeps.
//!
//! Trial `i` at grid point `p` runs with seed `derive_seed(base_seed, key(p), i)`,
//! so a batch is a pure function of the configuration and the point, trials
//! can run in any order or in parallel, and growing `trials` keeps the
//! existing prefix intact.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{run_episode, ActionModel, EpisodeError, NodeDef, NodeKind};
use crate::metrics::{self, MetricsError, MetricsSummary};
use crate::progress::{NoisyLinearParams, PerpetualParams, ProfileParams};
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::sync::{BarrierSet, RelThreshold};

pub const DEFAULT_DT: f64 = 1.0;
pub const DEFAULT_MAX_TICKS: u64 = 10_000;
pub const DEFAULT_TRIALS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("sweep over `{0}` has no values")]
    EmptyAxis(String),
    #[error("parameter path `{path}` does not resolve: {reason}")]
    UnresolvedPath { path: String, reason: String },
    #[error("invalid value {value} for `{path}`: {reason}")]
    InvalidValue {
        path: String,
        value: String,
        reason: String,
    },
    #[error("no leaf named `{0}` with a progress function")]
    UnknownChannel(String),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// What a parameter path addresses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    /// Every leaf that has the parameter (`*`).
    AllLeaves,
    /// The leaf with this name.
    Leaf(String),
    /// Node at a child-index path from the root (`root`, `root/0/1`).
    Node(Vec<usize>),
}

/// `target.param`, e.g. `*.omega`, `a.alpha`, `root.barrier_count`, `root/1.delta`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParamPath {
    pub target: Target,
    pub param: String,
}

impl ParamPath {
    pub fn parse(text: &str) -> Option<Self> {
        let (target, param) = text.rsplit_once('.')?;
        if param.is_empty() || !param.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
            return None;
        }
        let target = if target == "*" {
            Target::AllLeaves
        } else if let Some(rest) = target.strip_prefix("root") {
            if rest.is_empty() {
                Target::Node(Vec::new())
            } else {
                let indices = rest
                    .strip_prefix('/')?
                    .split('/')
                    .map(|s| s.parse().ok())
                    .collect::<Option<Vec<usize>>>()?;
                Target::Node(indices)
            }
        } else if !target.is_empty()
            && target
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
        {
            Target::Leaf(target.to_string())
        } else {
            return None;
        };
        Some(Self {
            target,
            param: param.to_string(),
        })
    }
}

impl std::fmt::Display for ParamPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.target {
            Target::AllLeaves => write!(f, "*")?,
            Target::Leaf(name) => write!(f, "{name}")?,
            Target::Node(path) => {
                write!(f, "root")?;
                for i in path {
                    write!(f, "/{i}")?;
                }
            }
        }
        write!(f, ".{}", self.param)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis<S> {
    pub path: ParamPath,
    pub values: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec<S> {
    /// Progress distance over `window`, or over the whole episode.
    ProgressDistance { window: Option<(u64, u64)> },
    /// Per-trial `hit_time(channel, p_bar) - t_expected`; the batch mean is
    /// the predictability distance.
    PredictabilityDistance {
        channel: String,
        p_bar: S,
        t_expected: f64,
    },
}

impl<S> MetricSpec<S> {
    pub fn name(&self) -> &'static str {
        match self {
            MetricSpec::ProgressDistance { .. } => "progress_distance",
            MetricSpec::PredictabilityDistance { .. } => "predictability_distance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<S> {
    pub tree: NodeDef<S>,
    pub trials: usize,
    pub base_seed: u64,
    pub dt: f64,
    pub max_ticks: u64,
    pub sweep: Vec<SweepAxis<S>>,
    pub metric: MetricSpec<S>,
}

impl<S: Scalar> ExperimentConfig<S> {
    pub fn new(tree: NodeDef<S>, metric: MetricSpec<S>) -> Self {
        Self {
            tree,
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            dt: DEFAULT_DT,
            max_ticks: DEFAULT_MAX_TICKS,
            sweep: Vec::new(),
            metric,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::NoTrials);
        }
        for axis in &self.sweep {
            let first = axis
                .values
                .first()
                .ok_or_else(|| HarnessError::EmptyAxis(axis.path.to_string()))?;
            apply_param(&mut self.tree.clone(), &axis.path, *first)?;
        }
        Ok(())
    }

    /// Cartesian product of the sweep axes; the first axis varies slowest.
    pub fn grid(&self) -> Vec<SweepPoint<S>> {
        let mut points = vec![SweepPoint { params: Vec::new() }];
        for axis in &self.sweep {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |&v| {
                        let mut params = p.params.clone();
                        params.push((axis.path.clone(), v));
                        SweepPoint { params }
                    })
                })
                .collect();
        }
        points
    }
}

/// One grid point: a value for every swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint<S> {
    pub params: Vec<(ParamPath, S)>,
}

impl<S: Scalar> SweepPoint<S> {
    /// Canonical text identifying the point; keys the trial seeds.
    pub fn key(&self) -> String {
        self.params
            .iter()
            .map(|(p, v)| format!("{p}={}", v.to_decimal()))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// The tree with this point's parameters applied.
    pub fn apply(&self, tree: &NodeDef<S>) -> Result<NodeDef<S>, HarnessError> {
        let mut tree = tree.clone();
        for (path, value) in &self.params {
            apply_param(&mut tree, path, *value)?;
        }
        Ok(tree)
    }
}

fn invalid<S: Scalar>(path: &ParamPath, value: S, reason: impl ToString) -> HarnessError {
    HarnessError::InvalidValue {
        path: path.to_string(),
        value: value.to_decimal(),
        reason: reason.to_string(),
    }
}

fn unresolved(path: &ParamPath, reason: impl Into<String>) -> HarnessError {
    HarnessError::UnresolvedPath {
        path: path.to_string(),
        reason: reason.into(),
    }
}

/// Sets one parameter of a tree definition.
pub fn apply_param<S: Scalar>(
    tree: &mut NodeDef<S>,
    path: &ParamPath,
    value: S,
) -> Result<(), HarnessError> {
    match &path.target {
        Target::Node(indices) => {
            let node = tree
                .at_path_mut(indices)
                .ok_or_else(|| unresolved(path, "no node at this position"))?;
            match (&mut node.kind, path.param.as_str()) {
                (NodeKind::AbsSyncParallel(barriers), "barrier_count") => {
                    let n = value
                        .to_usize()
                        .filter(|&n| S::from_usize_lossy(n) == value)
                        .ok_or_else(|| invalid(path, value, "expected a non-negative integer"))?;
                    *barriers = BarrierSet::equidistant(n);
                    Ok(())
                }
                (NodeKind::RelSyncParallel(delta), "delta") => {
                    *delta = RelThreshold::new(value).map_err(|e| invalid(path, value, e))?;
                    Ok(())
                }
                (NodeKind::Action { model, .. }, param) => {
                    match set_leaf_param(model, param, value, path)? {
                        true => Ok(()),
                        false => Err(unresolved(path, "leaf has no such parameter")),
                    }
                }
                _ => Err(unresolved(path, "node has no such parameter")),
            }
        }
        Target::Leaf(name) => {
            let leaf = tree
                .leaves_mut()
                .into_iter()
                .find(|l| l.kind.leaf_name() == Some(name))
                .ok_or_else(|| unresolved(path, "no such leaf"))?;
            match &mut leaf.kind {
                NodeKind::Action { model, .. } => {
                    if set_leaf_param(model, &path.param, value, path)? {
                        Ok(())
                    } else {
                        Err(unresolved(path, "leaf has no such parameter"))
                    }
                }
                _ => Err(unresolved(path, "conditions have no numeric parameters")),
            }
        }
        Target::AllLeaves => {
            let mut hits = 0;
            for leaf in tree.leaves_mut() {
                if let NodeKind::Action { model, .. } = &mut leaf.kind {
                    if set_leaf_param(model, &path.param, value, path)? {
                        hits += 1;
                    }
                }
            }
            if hits == 0 {
                Err(unresolved(path, "no leaf has this parameter"))
            } else {
                Ok(())
            }
        }
    }
}

/// Returns `Ok(false)` when the model has no such parameter.
fn set_leaf_param<S: Scalar>(
    model: &mut ActionModel<S>,
    param: &str,
    value: S,
    path: &ParamPath,
) -> Result<bool, HarnessError> {
    let err = |e: crate::progress::ParamError| invalid(path, value, e);
    match (model, param) {
        (ActionModel::NoisyLinear(p), "alpha") => *p = NoisyLinearParams::new(value, p.omega_bar()).map_err(err)?,
        (ActionModel::NoisyLinear(p), "omega") => *p = NoisyLinearParams::new(p.alpha(), value).map_err(err)?,
        (ActionModel::Profile(p @ ProfileParams::Straight { .. }), "increment") => {
            *p = ProfileParams::straight(value).map_err(err)?
        }
        (ActionModel::Profile(p), "midpoint" | "steepness") => {
            let ProfileParams::Sigmoid { midpoint, steepness } = *p else {
                return Ok(false);
            };
            *p = if param == "midpoint" {
                ProfileParams::sigmoid(value, steepness)
            } else {
                ProfileParams::sigmoid(midpoint, value)
            }
            .map_err(err)?;
        }
        (ActionModel::Perpetual { params, .. }, "bound") => {
            *params = PerpetualParams::new(value, params.drift_rate(), params.correction_rate()).map_err(err)?
        }
        (ActionModel::Perpetual { params, .. }, "drift") => {
            *params = PerpetualParams::new(params.error_bound(), value, params.correction_rate()).map_err(err)?
        }
        (ActionModel::Perpetual { params, .. }, "correction") => {
            *params = PerpetualParams::new(params.error_bound(), params.drift_rate(), value).map_err(err)?
        }
        (ActionModel::Perpetual { initial_error, .. }, "error") => {
            if value < S::zero() {
                return Err(invalid(path, value, "error must be non-negative"));
            }
            *initial_error = value;
        }
        _ => return Ok(false),
    }
    Ok(true)
}

/// Metric value of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub value: f64,
    pub truncated: bool,
}

fn trial_value<S: Scalar>(
    tree: &NodeDef<S>,
    config: &ExperimentConfig<S>,
    seed: u64,
) -> Result<(f64, bool), HarnessError> {
    let trace = run_episode(tree, config.dt, config.max_ticks, seed)?;
    let value = match &config.metric {
        MetricSpec::ProgressDistance { window } => {
            let (k1, k2) = window.unwrap_or_else(|| metrics::default_window(&trace));
            // A fixed window is cut at the end of a shorter episode.
            let k2 = k2.min(trace.last_tick());
            metrics::progress_distance(&trace, k1.min(k2), k2)?.value.to_f64_lossy()
        }
        MetricSpec::PredictabilityDistance {
            channel,
            p_bar,
            t_expected,
        } => {
            let c = trace
                .channel(channel)
                .filter(|&c| trace.channels[c].progress_aware)
                .ok_or_else(|| HarnessError::UnknownChannel(channel.clone()))?;
            metrics::hit_time(&trace, c, *p_bar)? - t_expected
        }
    };
    Ok((value, trace.truncated))
}

/// Runs `config.trials` seeded trials at `point`.
pub fn run_batch<S: Scalar>(
    config: &ExperimentConfig<S>,
    point: &SweepPoint<S>,
) -> Result<Vec<TrialOutcome>, HarnessError> {
    if config.trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    let tree = point.apply(&config.tree)?;
    let key = point.key();
    (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(config.base_seed, &key, trial as u64);
            let (value, truncated) = trial_value(&tree, config, seed)?;
            Ok(TrialOutcome {
                trial,
                seed,
                value,
                truncated,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult<S> {
    pub point: SweepPoint<S>,
    pub summary: MetricsSummary<f64>,
    pub outcomes: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<S> {
    pub metric: &'static str,
    pub points: Vec<PointResult<S>>,
}

/// Runs every grid point. Points are independent of each other.
pub fn run_sweep<S: Scalar>(config: &ExperimentConfig<S>) -> Result<SweepResult<S>, HarnessError> {
    config.validate()?;
    let points = config
        .grid()
        .into_par_iter()
        .map(|point| {
            let outcomes = run_batch(config, &point)?;
            let values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
            let summary = metrics::summarize(&values)?;
            Ok(PointResult {
                point,
                summary,
                outcomes,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(SweepResult {
        metric: config.metric.name(),
        points,
    })
}

pub fn equidistant_barriers<S: Scalar>(n: usize) -> BarrierSet<S> {
    BarrierSet::equidistant(n)
}
