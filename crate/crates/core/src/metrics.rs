//! Progress-synchronization and predictability measures over trial traces.

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::trace::TrialTrace;

/// Slack on step-length comparisons.
pub const STEP_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("window [{k1}, {k2}] is outside the trace (last tick {last})")]
    WindowOutOfRange { k1: u64, k2: u64, last: u64 },
    #[error("channel {0} does not exist or has no progress")]
    NoProgress(usize),
    #[error("no values to summarize")]
    Empty,
    #[error("trace has no ticks")]
    EmptyTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "S: Serialize")]
pub struct ProgressDistance<S> {
    pub value: S,
    pub window: (u64, u64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "S: Serialize")]
pub struct PredictabilityDistance<S> {
    /// `mean(samples) - t_expected`, in seconds.
    pub value: f64,
    pub p_bar: S,
    pub t_expected: f64,
    /// Hit time of every trace, in seconds.
    pub samples: Vec<f64>,
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "S: Serialize")]
pub struct MetricsSummary<S> {
    pub min: S,
    pub q1: S,
    pub median: S,
    pub q3: S,
    pub max: S,
    pub n: usize,
}

/// Window from the first tick to the tick where the episode stopped.
pub fn default_window<S: Copy>(trace: &TrialTrace<S>) -> (u64, u64) {
    let last = trace.last_tick();
    (last.min(1), last)
}

/// Sum over ticks `k1..=k2` of `|p_i - p_j|` over unordered pairs of the
/// trace's monitored channels.
pub fn progress_distance<S: Scalar>(
    trace: &TrialTrace<S>,
    k1: u64,
    k2: u64,
) -> Result<ProgressDistance<S>, MetricsError> {
    progress_distance_of(trace, &trace.monitored, k1, k2)
}

pub fn progress_distance_of<S: Scalar>(
    trace: &TrialTrace<S>,
    channels: &[usize],
    k1: u64,
    k2: u64,
) -> Result<ProgressDistance<S>, MetricsError> {
    let last = trace.last_tick();
    if k1 > k2 || k2 > last {
        return Err(MetricsError::WindowOutOfRange { k1, k2, last });
    }
    let mut total = S::zero();
    let mut row = Vec::with_capacity(channels.len());
    for k in k1..=k2 {
        row.clear();
        for &c in channels {
            row.push(trace.progress_at(k, c).ok_or(MetricsError::NoProgress(c))?);
        }
        for (i, &pi) in row.iter().enumerate() {
            for &pj in &row[i + 1..] {
                total = total + (pi - pj).abs();
            }
        }
    }
    Ok(ProgressDistance {
        value: total,
        window: (k1, k2),
    })
}

/// Time of the sample whose progress is closest to `p_bar`; ties go to the
/// earliest tick. Tick 0 (progress 0) is a candidate.
pub fn hit_time<S: Scalar>(
    trace: &TrialTrace<S>,
    channel: usize,
    p_bar: S,
) -> Result<f64, MetricsError> {
    let mut best: Option<(u64, S)> = None;
    for k in 0..=trace.last_tick() {
        let p = trace
            .progress_at(k, channel)
            .ok_or(MetricsError::NoProgress(channel))?;
        let gap = (p - p_bar).abs();
        if best.is_none_or(|(_, g)| gap < g) {
            best = Some((k, gap));
        }
    }
    let (k, _) = best.ok_or(MetricsError::EmptyTrace)?;
    Ok(trace.time_at(k))
}

/// Mean hit time of `p_bar` over a batch, minus the expected time.
pub fn predictability_distance<S: Scalar>(
    traces: &[TrialTrace<S>],
    channel: usize,
    p_bar: S,
    t_expected: f64,
) -> Result<PredictabilityDistance<S>, MetricsError> {
    if traces.is_empty() {
        return Err(MetricsError::Empty);
    }
    let samples = traces
        .iter()
        .map(|t| hit_time(t, channel, p_bar))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(PredictabilityDistance {
        value: mean - t_expected,
        p_bar,
        t_expected,
        samples,
    })
}

fn sort_values<S: Scalar>(values: &[S]) -> Vec<S> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    sorted
}

/// Quantile `num/den` of sorted data: linear interpolation between the
/// closest ranks at position `(n - 1) * num / den`.
fn quantile<S: Scalar>(sorted: &[S], num: usize, den: usize) -> S {
    let scaled = (sorted.len() - 1) * num;
    let lo = scaled / den;
    let rem = scaled % den;
    if rem == 0 {
        return sorted[lo];
    }
    let frac = S::from_usize_lossy(rem) / S::from_usize_lossy(den);
    sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac
}

pub fn summarize<S: Scalar>(values: &[S]) -> Result<MetricsSummary<S>, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sorted = sort_values(values);
    Ok(MetricsSummary {
        min: sorted[0],
        q1: quantile(&sorted, 1, 4),
        median: quantile(&sorted, 1, 2),
        q3: quantile(&sorted, 3, 4),
        max: sorted[sorted.len() - 1],
        n: sorted.len(),
    })
}

/// Absolute progress changes of `channel` on the cycles it was ticked.
pub fn ticked_steps<S: Scalar>(trace: &TrialTrace<S>, channel: usize) -> Vec<S> {
    trace
        .entries
        .iter()
        .filter(|e| e.ticked.get(channel).copied().unwrap_or(false))
        .filter_map(|e| {
            let now = trace.progress_at(e.k, channel)?;
            let before = trace.progress_at(e.k - 1, channel)?;
            Some((now - before).abs())
        })
        .collect()
}

/// Whether every ticked-cycle step of `channel` stays within `bound`.
pub fn step_length_bound<S: Scalar>(trace: &TrialTrace<S>, channel: usize, bound: S) -> bool {
    let limit = bound + S::from_f64_lossy(STEP_EPSILON);
    ticked_steps(trace, channel).into_iter().all(|d| d <= limit)
}
