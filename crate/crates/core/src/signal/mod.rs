//! Trajectory conditioning: low-pass filtering, numerical differentiation,
//! trimming to the push instant, and origin shifting.

mod butterworth;

pub use butterworth::{butterworth_lowpass, Biquad, Butterworth, FilterSpec};

use thiserror::Error;

use crate::trialdata::{TreadmillLog, Trial, TrialError};

/// Belt speed at or below which the treadmill counts as stopped, m/s.
pub const SPEED_EPSILON: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("sequence too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid filter spec: {0}")]
    InvalidSpec(String),
    #[error("treadmill never stops in the log")]
    NoStopDetected,
    #[error("treadmill stops at t={stop}s, after the trial ends")]
    EmptyResult { stop: f64 },
    #[error("index range {start}..{end} out of range for length {len}")]
    IndexOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error(transparent)]
    Trial(#[from] TrialError),
}

/// Central differences inside, second-order one-sided stencils at both ends.
pub fn differentiate(xs: &[f64], dt: f64) -> Result<Vec<f64>, SignalError> {
    let n = xs.len();
    if n < 3 {
        return Err(SignalError::TooShort { needed: 3, got: n });
    }
    let h2 = 2.0 * dt;
    let mut out = Vec::with_capacity(n);
    out.push((-3.0 * xs[0] + 4.0 * xs[1] - xs[2]) / h2);
    out.extend(xs.windows(3).map(|w| (w[2] - w[0]) / h2));
    out.push((3.0 * xs[n - 1] - 4.0 * xs[n - 2] + xs[n - 3]) / h2);
    Ok(out)
}

/// Filters position (when `filter` is given) and derives velocity and
/// acceleration from it, replacing any recorded columns.
pub fn derive_kinematics(trial: &Trial, filter: Option<&FilterSpec>) -> Result<Trial, SignalError> {
    let position = match filter {
        Some(spec) => butterworth_lowpass(trial.position(), spec)?,
        None => trial.position().to_vec(),
    };
    let dt = trial.dt();
    let velocity = differentiate(&position, dt)?;
    let acceleration = differentiate(&velocity, dt)?;
    Ok(trial.with_kinematics(position, Some(velocity), Some(acceleration))?)
}

/// Cuts the trial so it starts at the first sample at or after the moment
/// the belt stops.
pub fn trim_to_push(trial: &Trial, log: &TreadmillLog) -> Result<Trial, SignalError> {
    let speed = log.speed();
    let stop_idx = (1..speed.len())
        .find(|&i| speed[i] <= SPEED_EPSILON && speed[i - 1] > SPEED_EPSILON)
        .ok_or(SignalError::NoStopDetected)?;
    let stop = log.time()[stop_idx];
    // Absorb decimal noise in the two clocks.
    let tol = 1e-9 * trial.dt();
    let start = trial
        .time()
        .iter()
        .position(|&t| t >= stop - tol)
        .ok_or(SignalError::EmptyResult { stop })?;
    if trial.len() - start < 3 {
        return Err(SignalError::EmptyResult { stop });
    }
    Ok(trial.slice(start, trial.len())?)
}

/// Moves the origin to the first position sample; the removed offset is
/// accumulated in `origin_offset`.
pub fn shift_origin(trial: &Trial) -> Result<Trial, SignalError> {
    let p0 = trial.position()[0];
    let position: Vec<f64> = trial.position().iter().map(|p| p - p0).collect();
    let mut out = trial.with_kinematics(
        position,
        trial.velocity().map(<[f64]>::to_vec),
        trial.acceleration().map(<[f64]>::to_vec),
    )?;
    out.origin_offset = Some(trial.origin_offset.unwrap_or(0.0) + p0);
    Ok(out)
}

/// Keeps samples `[start, end)`.
pub fn manual_trim(trial: &Trial, start: usize, end: usize) -> Result<Trial, SignalError> {
    if start >= end || end > trial.len() {
        return Err(SignalError::IndexOutOfRange {
            start,
            end,
            len: trial.len(),
        });
    }
    Ok(trial.slice(start, end)?)
}
