//! Motion-primitive milestones and strategy classification.
//!
//! Zero crossings are located with a hysteresis band of [`HYSTERESIS`]: a
//! signal has to leave the band on one side before a crossing towards the
//! other side counts. The crossing instant is linearly interpolated between
//! the bracketing samples and snapped to the nearest sample.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trialdata::{StrategyTag, Trial, TrialError};

/// Half-width of the zero-crossing band, in the unit of the scanned signal.
pub const HYSTERESIS: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error("no {0} found")]
    NoMilestone(&'static str),
    #[error("milestone order violated: {second} is not after {first}")]
    OrderViolation { first: usize, second: usize },
    #[error("strategy {0} is not segmented")]
    UnsupportedStrategy(StrategyTag),
    #[error("trial has no strategy tag")]
    MissingStrategy,
    #[error("invalid segmentation: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub breakpoints: Vec<usize>,
    pub phase_labels: Vec<String>,
    pub strategy: StrategyTag,
}

pub const ANKLE_LABELS: [&str; 2] = ["lean_cross", "lean_recover"];
pub const TOE_LABELS: [&str; 3] = ["lift_to_tiptoe", "drop_to_sole", "lean_recover"];
pub const ONE_STEP_LABELS: [&str; 2] = ["step", "lean_after_step"];

/// Phase count produced by the segmenter of `tag`, if it has one.
pub fn expected_phases(tag: StrategyTag) -> Option<usize> {
    match tag {
        StrategyTag::Ankle | StrategyTag::OneStep => Some(2),
        StrategyTag::Toe => Some(3),
        StrategyTag::ToeToStep | StrategyTag::TwoStep => None,
    }
}

impl Segmentation {
    pub fn new(
        breakpoints: Vec<usize>,
        phase_labels: Vec<String>,
        strategy: StrategyTag,
        trial_len: usize,
    ) -> Result<Self, SegmentError> {
        if phase_labels.len() != breakpoints.len() + 1 {
            return Err(SegmentError::Invalid(format!(
                "{} labels for {} breakpoints",
                phase_labels.len(),
                breakpoints.len()
            )));
        }
        if let Some(n) = expected_phases(strategy) {
            if phase_labels.len() != n {
                return Err(SegmentError::Invalid(format!(
                    "{strategy} has {n} phases, got {}",
                    phase_labels.len()
                )));
            }
        }
        Self::check_breakpoints(&breakpoints, trial_len)?;
        Ok(Self {
            breakpoints,
            phase_labels,
            strategy,
        })
    }

    /// A single phase spanning the whole trial.
    pub fn whole(strategy: StrategyTag) -> Self {
        Self {
            breakpoints: vec![],
            phase_labels: vec!["whole".into()],
            strategy,
        }
    }

    fn check_breakpoints(breakpoints: &[usize], trial_len: usize) -> Result<(), SegmentError> {
        let ordered = breakpoints.windows(2).all(|w| w[0] < w[1]);
        let inside = breakpoints.iter().all(|&b| b > 0 && b < trial_len);
        if !(ordered && inside) {
            return Err(SegmentError::Invalid(format!(
                "breakpoints {breakpoints:?} must be strictly increasing within (0, {trial_len})"
            )));
        }
        Ok(())
    }

    /// Half-open sample ranges of each phase.
    pub fn phase_ranges(&self, trial_len: usize) -> Result<Vec<(usize, usize)>, SegmentError> {
        Self::check_breakpoints(&self.breakpoints, trial_len)?;
        let mut bounds = Vec::with_capacity(self.breakpoints.len() + 2);
        bounds.push(0);
        bounds.extend_from_slice(&self.breakpoints);
        bounds.push(trial_len);
        Ok(bounds.windows(2).map(|w| (w[0], w[1])).collect())
    }

    pub fn n_phases(&self) -> usize {
        self.phase_labels.len()
    }
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Below,
    Above,
}

/// Snapped sample of the zero crossing between `j - 1` and `j`.
fn interpolate(xs: &[f64], j: usize) -> usize {
    let (x0, x1) = (xs[j - 1], xs[j]);
    let frac = if x1 != x0 { x0 / (x0 - x1) } else { 0.5 };
    (j - 1) + (frac.clamp(0.0, 1.0) >= 0.5) as usize
}

/// First confirmed zero crossing at or after `from`.
///
/// With `leaving` set, the signal must first be beyond the band on that
/// side; otherwise whichever side it first leaves the band on arms the
/// detector. A crossing is confirmed once the signal passes the band on the
/// opposite side.
fn confirmed_crossing(xs: &[f64], from: usize, leaving: Option<Side>) -> Option<usize> {
    let mut armed: Option<(Side, usize)> = None;
    for (i, &x) in xs.iter().enumerate().skip(from) {
        let side = if x < -HYSTERESIS {
            Some(Side::Below)
        } else if x > HYSTERESIS {
            Some(Side::Above)
        } else {
            None
        };
        match (armed, side) {
            (None, Some(s)) if leaving.is_none_or(|l| l == s) => armed = Some((s, i)),
            (Some((a, _)), Some(s)) if s == a => armed = Some((s, i)),
            (Some((a, last)), Some(_)) => {
                // Last sign change between the armed sample and confirmation.
                let j = (last + 1..=i)
                    .rev()
                    .find(|&j| match a {
                        Side::Below => xs[j - 1] < 0.0 && xs[j] >= 0.0,
                        Side::Above => xs[j - 1] > 0.0 && xs[j] <= 0.0,
                    })
                    .unwrap_or(i);
                return Some(interpolate(xs, j));
            }
            _ => {}
        }
    }
    None
}

/// First time a signal that was above the band returns to it, taking the
/// sign change inside that visit when there is one and the sample closest
/// to zero otherwise.
fn reaches_zero_from_above(xs: &[f64], from: usize) -> Option<usize> {
    let armed_at = (from..xs.len()).find(|&i| xs[i] > HYSTERESIS)?;
    let entry = (armed_at..xs.len()).find(|&i| xs[i] <= HYSTERESIS)?;
    let exit = (entry..xs.len())
        .find(|&i| xs[i].abs() > HYSTERESIS)
        .unwrap_or(xs.len());
    let last = exit.min(xs.len() - 1);
    if let Some(j) = (entry..=last).find(|&j| xs[j - 1] > 0.0 && xs[j] <= 0.0) {
        return Some(interpolate(xs, j));
    }
    (entry..exit).min_by(|&a, &b| xs[a].abs().total_cmp(&xs[b].abs()))
}

fn nonzero(idx: usize, what: &'static str) -> Result<usize, SegmentError> {
    if idx == 0 {
        Err(SegmentError::NoMilestone(what))
    } else {
        Ok(idx)
    }
}

/// One breakpoint at the first negative-to-positive acceleration crossing.
pub fn segment_ankle(trial: &Trial) -> Result<Segmentation, SegmentError> {
    let a = trial.require_acceleration()?;
    let bp = confirmed_crossing(a, 0, Some(Side::Below))
        .ok_or(SegmentError::NoMilestone("acceleration upcrossing"))?;
    let bp = nonzero(bp, "acceleration upcrossing")?;
    Segmentation::new(
        vec![bp],
        labels(&ANKLE_LABELS),
        StrategyTag::Ankle,
        trial.len(),
    )
}

/// Breakpoints where velocity first reaches zero and where acceleration next
/// crosses zero.
pub fn segment_toe(trial: &Trial) -> Result<Segmentation, SegmentError> {
    let v = trial.require_velocity()?;
    let a = trial.require_acceleration()?;
    let bp1 = reaches_zero_from_above(v, 0).ok_or(SegmentError::NoMilestone("velocity zero"))?;
    let bp1 = nonzero(bp1, "velocity zero")?;
    let bp2 = confirmed_crossing(a, bp1, None)
        .ok_or(SegmentError::NoMilestone("acceleration crossing"))?;
    if bp2 <= bp1 {
        return Err(SegmentError::OrderViolation {
            first: bp1,
            second: bp2,
        });
    }
    Segmentation::new(
        vec![bp1, bp2],
        labels(&TOE_LABELS),
        StrategyTag::Toe,
        trial.len(),
    )
}

/// One breakpoint at the first acceleration upcrossing after the global
/// acceleration minimum.
pub fn segment_one_step(trial: &Trial) -> Result<Segmentation, SegmentError> {
    let a = trial.require_acceleration()?;
    let min_at = a
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let bp = confirmed_crossing(a, min_at, Some(Side::Below)).ok_or(SegmentError::NoMilestone(
        "acceleration upcrossing after the minimum",
    ))?;
    let bp = nonzero(bp, "acceleration upcrossing after the minimum")?;
    Segmentation::new(
        vec![bp],
        labels(&ONE_STEP_LABELS),
        StrategyTag::OneStep,
        trial.len(),
    )
}

/// Dispatches on the trial's strategy tag.
pub fn segment(trial: &Trial) -> Result<Segmentation, SegmentError> {
    match trial.strategy.ok_or(SegmentError::MissingStrategy)? {
        StrategyTag::Ankle => segment_ankle(trial),
        StrategyTag::Toe => segment_toe(trial),
        StrategyTag::OneStep => segment_one_step(trial),
        other => Err(SegmentError::UnsupportedStrategy(other)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    /// Acceleration below `-valley_depth` (m/s^2) forms a valley.
    pub valley_depth: f64,
    /// Velocity gain, m/s, that counts as a toe rise...
    pub rise_amount: f64,
    /// ...when reached within this many seconds.
    pub rise_window: f64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            valley_depth: 1.0,
            rise_amount: 0.5,
            rise_window: 0.2,
        }
    }
}

impl ClassifierParams {
    pub fn validate(&self) -> Result<(), SegmentError> {
        let ok = [self.valley_depth, self.rise_amount, self.rise_window]
            .iter()
            .all(|x| x.is_finite() && *x > 0.0);
        if ok {
            Ok(())
        } else {
            Err(SegmentError::Invalid(format!(
                "classifier parameters must be positive: {self:?}"
            )))
        }
    }
}

/// Trajectory features behind the classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Features {
    /// `(start, end)` of each maximal run below `-valley_depth`.
    pub valleys: Vec<(usize, usize)>,
    pub toe_rise: bool,
}

pub fn features(trial: &Trial, params: &ClassifierParams) -> Result<Features, SegmentError> {
    let v = trial.require_velocity()?;
    let a = trial.require_acceleration()?;
    let mut valleys = vec![];
    let mut start = None;
    for (i, &x) in a.iter().enumerate() {
        match (start, x < -params.valley_depth) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                valleys.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        valleys.push((s, a.len()));
    }

    let horizon = valleys.first().map_or(v.len(), |&(s, _)| s);
    let window = (params.rise_window / trial.dt() + 1e-9).floor() as usize;
    let toe_rise = (1..horizon).any(|j| {
        let lo = j.saturating_sub(window);
        let floor = v[lo..j].iter().copied().fold(f64::INFINITY, f64::min);
        v[j] - floor > params.rise_amount
    });
    Ok(Features { valleys, toe_rise })
}

/// Decision tree over valley count and toe rise.
pub fn classify_strategy(
    trial: &Trial,
    params: &ClassifierParams,
) -> Result<StrategyTag, SegmentError> {
    let f = features(trial, params)?;
    Ok(match (f.valleys.len(), f.toe_rise) {
        (n, _) if n >= 2 => StrategyTag::TwoStep,
        (1, false) => StrategyTag::OneStep,
        (1, true) => StrategyTag::ToeToStep,
        (_, true) => StrategyTag::Toe,
        _ => StrategyTag::Ankle,
    })
}
