//! Group statistics of fitted gains and strategy-selection statistics of
//! initial CoM states.

use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::fitlaw::FitResult;
use crate::trialdata::{StartMode, StrategyTag, Trial, TrialError};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("group {0:?} is empty")]
    EmptyGroup(String),
    #[error("group {key:?} mixes coefficient sets {first:?} and {other:?}")]
    MixedSpec {
        key: String,
        first: Vec<String>,
        other: Vec<String>,
    },
    #[error(transparent)]
    Trial(#[from] TrialError),
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Mean absolute deviation about the mean.
pub fn mean_abs_dev(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    mean(&xs.iter().map(|x| (x - m).abs()).collect::<Vec<_>>())
}

/// Median; the average of the two central values for even counts.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    })
}

/// Median absolute deviation about the median.
pub fn median_abs_dev(xs: &[f64]) -> Option<f64> {
    let m = median(xs)?;
    median(&xs.iter().map(|x| (x - m).abs()).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanMad {
    pub mean: f64,
    pub mad: f64,
}

impl MeanMad {
    pub fn of(xs: &[f64]) -> Option<Self> {
        Some(Self {
            mean: mean(xs)?,
            mad: mean_abs_dev(xs)?,
        })
    }
}

/// Named summaries in a fixed order; serialised as a JSON object.
#[derive(Debug, Clone, PartialEq)]
pub struct Summaries(pub Vec<(String, MeanMad)>);

impl Summaries {
    pub fn get(&self, name: &str) -> Option<MeanMad> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

impl Serialize for Summaries {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub key: String,
    pub n_trials: usize,
    pub gains: Summaries,
    pub rms: MeanMad,
    pub r2: MeanMad,
}

/// Mean and mean absolute deviation of every gain and metric per group key.
/// Groups come back sorted by key.
pub fn group_fit_stats<'a, I>(results: I) -> Result<Vec<GroupStats>, StatsError>
where
    I: IntoIterator<Item = (&'a str, &'a FitResult)>,
{
    let mut groups: BTreeMap<&str, Vec<&FitResult>> = BTreeMap::new();
    for (key, fit) in results {
        groups.entry(key).or_default().push(fit);
    }
    groups
        .into_iter()
        .map(|(key, fits)| summarise(key, &fits))
        .collect()
}

fn summarise(key: &str, fits: &[&FitResult]) -> Result<GroupStats, StatsError> {
    let first = fits
        .first()
        .ok_or_else(|| StatsError::EmptyGroup(key.into()))?;
    let names: Vec<String> = first.gains.names().map(String::from).collect();
    for fit in fits {
        let other: Vec<String> = fit.gains.names().map(String::from).collect();
        if other != names {
            return Err(StatsError::MixedSpec {
                key: key.into(),
                first: names,
                other,
            });
        }
    }
    let column = |f: &dyn Fn(&FitResult) -> f64| -> MeanMad {
        let xs: Vec<f64> = fits.iter().map(|r| f(r)).collect();
        MeanMad::of(&xs).expect("group is nonempty")
    };
    let gains = names
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), column(&|r| r.gains.0[j].1)))
        .collect();
    Ok(GroupStats {
        key: key.into(),
        n_trials: fits.len(),
        gains: Summaries(gains),
        rms: column(&|r| r.rms),
        r2: column(&|r| r.r2),
    })
}

/// First sample of position and velocity as stored in the trial.
pub fn initial_state(trial: &Trial) -> Result<(f64, f64), StatsError> {
    let v = trial.require_velocity()?;
    Ok((trial.position()[0], v[0]))
}

/// Initial state with any removed origin offset added back.
pub fn absolute_initial_state(trial: &Trial) -> Result<(f64, f64), StatsError> {
    let (p, v) = initial_state(trial)?;
    Ok((p + trial.origin_offset.unwrap_or(0.0), v))
}

/// Band `|v - slope * p| <= half_width` in the initial-state plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableRegion {
    pub slope: f64,
    pub half_width: f64,
}

impl Default for StableRegion {
    fn default() -> Self {
        Self {
            slope: -3.0,
            half_width: 0.3,
        }
    }
}

impl StableRegion {
    pub fn contains(&self, p: f64, v: f64) -> bool {
        in_stable_region(p, v, self)
    }
}

/// Boundary inclusive.
pub fn in_stable_region(p: f64, v: f64, region: &StableRegion) -> bool {
    let centre = region.slope * p;
    centre - region.half_width <= v && v <= centre + region.half_width
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CohortStats {
    pub n: usize,
    pub median: (f64, f64),
    pub mad: (f64, f64),
    /// Trials whose initial state lies in the stable band.
    pub n_stable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySelection {
    pub strategy: StrategyTag,
    pub all: Option<CohortStats>,
    pub informed: Option<CohortStats>,
    pub random: Option<CohortStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionStats {
    pub region: StableRegion,
    pub strategies: Vec<StrategySelection>,
    /// Trials left out for being abandoned or untagged.
    pub skipped: usize,
}

fn cohort(states: &[(f64, f64)], region: &StableRegion) -> Option<CohortStats> {
    let ps: Vec<f64> = states.iter().map(|s| s.0).collect();
    let vs: Vec<f64> = states.iter().map(|s| s.1).collect();
    Some(CohortStats {
        n: states.len(),
        median: (median(&ps)?, median(&vs)?),
        mad: (median_abs_dev(&ps)?, median_abs_dev(&vs)?),
        n_stable: states.iter().filter(|s| region.contains(s.0, s.1)).count(),
    })
}

type StartState = ((f64, f64), StartMode);

/// Componentwise median and median absolute deviation of initial states per
/// strategy, for all trials and for the informed and random start cohorts.
/// Abandoned and untagged trials are skipped.
pub fn selection_stats<'a, I>(
    trials: I,
    region: &StableRegion,
) -> Result<SelectionStats, StatsError>
where
    I: IntoIterator<Item = &'a Trial>,
{
    let mut by_tag: BTreeMap<StrategyTag, Vec<StartState>> = BTreeMap::new();
    let mut skipped = 0;
    for trial in trials {
        match (trial.abandoned, trial.strategy) {
            (false, Some(tag)) => {
                let state = absolute_initial_state(trial)?;
                by_tag
                    .entry(tag)
                    .or_default()
                    .push((state, trial.start_mode));
            }
            _ => skipped += 1,
        }
    }
    let strategies = StrategyTag::ALL
        .iter()
        .filter_map(|tag| {
            let rows = by_tag.get(tag)?;
            let pick = |mode: Option<StartMode>| -> Vec<(f64, f64)> {
                rows.iter()
                    .filter(|(_, m)| mode.is_none_or(|want| *m == want))
                    .map(|(s, _)| *s)
                    .collect()
            };
            Some(StrategySelection {
                strategy: *tag,
                all: cohort(&pick(None), region),
                informed: cohort(&pick(Some(StartMode::Informed)), region),
                random: cohort(&pick(Some(StartMode::Random)), region),
            })
        })
        .collect();
    Ok(SelectionStats {
        region: *region,
        strategies,
        skipped,
    })
}
