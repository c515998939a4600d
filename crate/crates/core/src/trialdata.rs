//! Trial data model and the CSV/sidecar formats used to move trials between
//! pipeline stages.
//!
//! A trial CSV looks like
//!
//! ```text
//! #id=p03_t12
//! #mass_kg=71.5
//! #strategy=ankle
//! #start_mode=informed
//! #abandoned=false
//! time_s,position_m,velocity_mps,acceleration_mps2
//! 0,0,0.12,-0.4
//! ...
//! ```
//!
//! Velocity and acceleration columns are optional. Metadata may also come from
//! a JSON sidecar; sidecar keys override comment keys.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance on sample-to-sample step variation.
pub const DT_REL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("non-uniform time step at row {row}: dt={dt}, expected {expected}")]
    NonUniformTimestep { row: usize, dt: f64, expected: f64 },
    #[error("non-finite value in column '{column}' at row {row}")]
    NonFiniteValue { column: String, row: usize },
    #[error("missing kinematics: {0}")]
    MissingKinematics(&'static str),
    #[error("invalid trial: {0}")]
    Invalid(String),
    #[error("bad metadata: {0}")]
    Metadata(String),
}

/// The five push-recovery strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyTag {
    Ankle,
    Toe,
    ToeToStep,
    OneStep,
    TwoStep,
}

impl StrategyTag {
    pub const ALL: [StrategyTag; 5] = [
        StrategyTag::Ankle,
        StrategyTag::Toe,
        StrategyTag::ToeToStep,
        StrategyTag::OneStep,
        StrategyTag::TwoStep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyTag::Ankle => "ankle",
            StrategyTag::Toe => "toe",
            StrategyTag::ToeToStep => "toe_to_step",
            StrategyTag::OneStep => "one_step",
            StrategyTag::TwoStep => "two_step",
        }
    }
}

impl fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyTag {
    type Err = TrialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        match norm.as_str() {
            "ankle" => Ok(StrategyTag::Ankle),
            "toe" => Ok(StrategyTag::Toe),
            "toe_to_step" | "toetostep" => Ok(StrategyTag::ToeToStep),
            "one_step" | "onestep" => Ok(StrategyTag::OneStep),
            "two_step" | "twostep" => Ok(StrategyTag::TwoStep),
            _ => Err(TrialError::Metadata(format!("unknown strategy '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    Informed,
    Random,
    #[default]
    Unknown,
}

impl StartMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StartMode::Informed => "informed",
            StartMode::Random => "random",
            StartMode::Unknown => "unknown",
        }
    }
}

impl FromStr for StartMode {
    type Err = TrialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "informed" | "well_informed" | "well-informed" => Ok(StartMode::Informed),
            "random" => Ok(StartMode::Random),
            "unknown" | "" => Ok(StartMode::Unknown),
            _ => Err(TrialError::Metadata(format!("unknown start mode '{s}'"))),
        }
    }
}

/// Steady-state reference `(p*, v*)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceState {
    pub p_star: f64,
    pub v_star: f64,
}

impl ReferenceState {
    pub const ORIGIN: ReferenceState = ReferenceState {
        p_star: 0.0,
        v_star: 0.0,
    };

    pub fn new(p_star: f64, v_star: f64) -> Self {
        Self { p_star, v_star }
    }
}

/// Timestamped one-dimensional CoM kinematics for a single push trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub id: String,
    time: Vec<f64>,
    position: Vec<f64>,
    velocity: Option<Vec<f64>>,
    acceleration: Option<Vec<f64>>,
    pub mass: f64,
    pub strategy: Option<StrategyTag>,
    pub start_mode: StartMode,
    pub abandoned: bool,
    /// Absolute position removed by origin shifting, if any.
    pub origin_offset: Option<f64>,
}

impl Trial {
    /// Validates and builds a trial.
    pub fn new(
        id: impl Into<String>,
        time: Vec<f64>,
        position: Vec<f64>,
        velocity: Option<Vec<f64>>,
        acceleration: Option<Vec<f64>>,
        mass: f64,
    ) -> Result<Self, TrialError> {
        let trial = Self {
            id: id.into(),
            time,
            position,
            velocity,
            acceleration,
            mass,
            strategy: None,
            start_mode: StartMode::Unknown,
            abandoned: false,
            origin_offset: None,
        };
        trial.validate()?;
        Ok(trial)
    }

    pub fn with_strategy(mut self, tag: StrategyTag) -> Self {
        self.strategy = Some(tag);
        self
    }

    pub fn with_start_mode(mut self, mode: StartMode) -> Self {
        self.start_mode = mode;
        self
    }

    fn validate(&self) -> Result<(), TrialError> {
        let n = self.time.len();
        if n < 3 {
            return Err(TrialError::Invalid(format!(
                "trial needs at least 3 samples, got {n}"
            )));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(TrialError::Invalid(format!(
                "mass must be positive, got {}",
                self.mass
            )));
        }
        check_finite("time_s", &self.time)?;
        check_len_finite("position_m", &self.position, n)?;
        if let Some(v) = &self.velocity {
            check_len_finite("velocity_mps", v, n)?;
        }
        if let Some(a) = &self.acceleration {
            check_len_finite("acceleration_mps2", a, n)?;
        }
        check_uniform(&self.time)
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    pub fn position(&self) -> &[f64] {
        &self.position
    }

    pub fn velocity(&self) -> Option<&[f64]> {
        self.velocity.as_deref()
    }

    pub fn acceleration(&self) -> Option<&[f64]> {
        self.acceleration.as_deref()
    }

    pub fn require_velocity(&self) -> Result<&[f64], TrialError> {
        self.velocity()
            .ok_or(TrialError::MissingKinematics("velocity"))
    }

    pub fn require_acceleration(&self) -> Result<&[f64], TrialError> {
        self.acceleration()
            .ok_or(TrialError::MissingKinematics("acceleration"))
    }

    /// Sample step, taken from the first interval.
    pub fn dt(&self) -> f64 {
        self.time[1] - self.time[0]
    }

    pub fn duration(&self) -> f64 {
        self.time[self.len() - 1] - self.time[0]
    }

    /// Returns a copy with the kinematic columns replaced. Metadata is kept.
    pub fn with_kinematics(
        &self,
        position: Vec<f64>,
        velocity: Option<Vec<f64>>,
        acceleration: Option<Vec<f64>>,
    ) -> Result<Self, TrialError> {
        let trial = Self {
            position,
            velocity,
            acceleration,
            ..self.clone()
        };
        trial.validate()?;
        Ok(trial)
    }

    /// Half-open sample range `[start, end)` with all columns cut consistently.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self, TrialError> {
        if start >= end || end > self.len() {
            return Err(TrialError::Invalid(format!(
                "range {start}..{end} invalid for length {}",
                self.len()
            )));
        }
        let trial = Self {
            time: self.time[start..end].to_vec(),
            position: self.position[start..end].to_vec(),
            velocity: self.velocity.as_ref().map(|v| v[start..end].to_vec()),
            acceleration: self.acceleration.as_ref().map(|a| a[start..end].to_vec()),
            ..self.clone()
        };
        trial.validate()?;
        Ok(trial)
    }
}

fn check_finite(column: &str, xs: &[f64]) -> Result<(), TrialError> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(row) => Err(TrialError::NonFiniteValue {
            column: column.to_string(),
            row,
        }),
        None => Ok(()),
    }
}

fn check_len_finite(column: &str, xs: &[f64], n: usize) -> Result<(), TrialError> {
    if xs.len() != n {
        return Err(TrialError::Invalid(format!(
            "column '{column}' has {} samples, time has {n}",
            xs.len()
        )));
    }
    check_finite(column, xs)
}

fn check_uniform(time: &[f64]) -> Result<(), TrialError> {
    let step = (time[time.len() - 1] - time[0]) / (time.len() - 1) as f64;
    for (i, w) in time.windows(2).enumerate() {
        let dt = w[1] - w[0];
        if dt <= 0.0 || (dt - step).abs() > DT_REL_TOLERANCE * step {
            return Err(TrialError::NonUniformTimestep {
                row: i + 1,
                dt,
                expected: step,
            });
        }
    }
    Ok(())
}

/// Speed trace of the treadmill belt, used to locate the push instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TreadmillLog {
    time: Vec<f64>,
    speed: Vec<f64>,
}

impl TreadmillLog {
    pub fn new(time: Vec<f64>, speed: Vec<f64>) -> Result<Self, TrialError> {
        if time.len() != speed.len() {
            return Err(TrialError::Invalid(format!(
                "treadmill log has {} times and {} speeds",
                time.len(),
                speed.len()
            )));
        }
        if time.len() < 2 {
            return Err(TrialError::Invalid("treadmill log needs 2+ samples".into()));
        }
        check_finite("time_s", &time)?;
        check_finite("speed_mps", &speed)?;
        if let Some(i) = time.windows(2).position(|w| w[1] <= w[0]) {
            return Err(TrialError::Invalid(format!(
                "treadmill time not increasing at row {}",
                i + 1
            )));
        }
        if speed[0] < 0.0 {
            return Err(TrialError::Invalid(
                "treadmill speed negative at start".into(),
            ));
        }
        Ok(Self { time, speed })
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    pub fn speed(&self) -> &[f64] {
        &self.speed
    }
}

/// Last sample of (position, velocity).
pub fn reference_state(trial: &Trial) -> Result<ReferenceState, TrialError> {
    let v = trial.require_velocity()?;
    let n = trial.len();
    Ok(ReferenceState {
        p_star: trial.position()[n - 1],
        v_star: v[n - 1],
    })
}

/// JSON sidecar carrying the same metadata as the `#key=value` lines.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrialMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_mode: Option<StartMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abandoned: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_offset_m: Option<f64>,
}

impl TrialMeta {
    fn set(&mut self, key: &str, value: &str) -> Result<(), TrialError> {
        let bad = |e: &dyn fmt::Display| TrialError::Metadata(format!("{key}={value}: {e}"));
        match key {
            "id" => self.id = Some(value.to_string()),
            "mass_kg" => self.mass_kg = Some(value.parse().map_err(|e| bad(&e))?),
            "strategy" => self.strategy = Some(value.parse()?),
            "start_mode" => self.start_mode = Some(value.parse()?),
            "abandoned" => self.abandoned = Some(value.parse().map_err(|e| bad(&e))?),
            "origin_offset_m" => self.origin_offset_m = Some(value.parse().map_err(|e| bad(&e))?),
            // Unknown keys are tolerated so other tools can annotate files.
            _ => {}
        }
        Ok(())
    }

    fn merge(&mut self, other: TrialMeta) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            id,
            mass_kg,
            strategy,
            start_mode,
            abandoned,
            origin_offset_m
        );
    }
}

const COLUMNS: [&str; 4] = ["time_s", "position_m", "velocity_mps", "acceleration_mps2"];

/// Parses trial CSV text. `fallback_id` is used when no `#id=` line exists.
pub fn parse_trial_csv(
    text: &str,
    fallback_id: &str,
    sidecar: Option<TrialMeta>,
) -> Result<Trial, TrialError> {
    let mut meta = TrialMeta::default();
    let mut header: Option<Vec<&str>> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                meta.set(k.trim(), v.trim())?;
            }
            continue;
        }
        match &header {
            None => {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                let optional = &cols[cols.len().min(2)..];
                let valid = cols.len() >= 2
                    && cols[..2] == COLUMNS[..2]
                    && optional.len() <= 2
                    && optional.iter().all(|c| COLUMNS[2..].contains(c))
                    && !(optional.len() == 2 && optional[0] == optional[1]);
                if !valid {
                    return Err(TrialError::MalformedCsv(format!(
                        "unexpected header '{line}'"
                    )));
                }
                columns = vec![Vec::new(); cols.len()];
                header = Some(cols);
            }
            Some(cols) => {
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != cols.len() {
                    return Err(TrialError::MalformedCsv(format!(
                        "line {}: expected {} fields, got {}",
                        lineno + 1,
                        cols.len(),
                        cells.len()
                    )));
                }
                let row = columns[0].len();
                for (j, cell) in cells.iter().enumerate() {
                    let x: f64 = cell.trim().parse().map_err(|_| {
                        TrialError::MalformedCsv(format!(
                            "line {}: cannot parse '{}' as a number",
                            lineno + 1,
                            cell.trim()
                        ))
                    })?;
                    if !x.is_finite() {
                        return Err(TrialError::NonFiniteValue {
                            column: cols[j].to_string(),
                            row,
                        });
                    }
                    columns[j].push(x);
                }
            }
        }
    }
    if header.is_none() {
        return Err(TrialError::MalformedCsv("missing header".into()));
    }
    if let Some(side) = sidecar {
        meta.merge(side);
    }

    let names = header.unwrap_or_default();
    let mut take = |name: &str| {
        names
            .iter()
            .position(|c| *c == name)
            .map(|j| std::mem::take(&mut columns[j]))
    };
    let time = take(COLUMNS[0]).unwrap_or_default();
    let position = take(COLUMNS[1]).unwrap_or_default();
    let velocity = take(COLUMNS[2]);
    let acceleration = take(COLUMNS[3]);
    let mass = meta
        .mass_kg
        .ok_or_else(|| TrialError::Metadata("mass_kg missing".into()))?;
    let mut trial = Trial::new(
        meta.id.unwrap_or_else(|| fallback_id.to_string()),
        time,
        position,
        velocity,
        acceleration,
        mass,
    )?;
    trial.strategy = meta.strategy;
    trial.start_mode = meta.start_mode.unwrap_or_default();
    trial.abandoned = meta.abandoned.unwrap_or(false);
    trial.origin_offset = meta.origin_offset_m;
    Ok(trial)
}

/// Loads a trial CSV, optionally merging a JSON sidecar.
pub fn load_trial(path: &Path, sidecar: Option<&Path>) -> Result<Trial, TrialError> {
    let io = |p: &Path| {
        let p = p.display().to_string();
        move |source| TrialError::Io { path: p, source }
    };
    let text = fs::read_to_string(path).map_err(io(path))?;
    let meta = match sidecar {
        Some(sp) => {
            let raw = fs::read_to_string(sp).map_err(io(sp))?;
            Some(
                serde_json::from_str::<TrialMeta>(&raw)
                    .map_err(|e| TrialError::Metadata(format!("{}: {e}", sp.display())))?,
            )
        }
        None => None,
    };
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trial".to_string());
    parse_trial_csv(&text, &stem, meta)
}

/// Renders a trial as CSV text. Floats use the shortest round-trip form, so
/// parsing the output reproduces every value bit for bit.
pub fn trial_to_csv(trial: &Trial) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#id={}", trial.id);
    let _ = writeln!(out, "#mass_kg={}", trial.mass);
    if let Some(s) = trial.strategy {
        let _ = writeln!(out, "#strategy={s}");
    }
    let _ = writeln!(out, "#start_mode={}", trial.start_mode.as_str());
    let _ = writeln!(out, "#abandoned={}", trial.abandoned);
    if let Some(off) = trial.origin_offset {
        let _ = writeln!(out, "#origin_offset_m={off}");
    }
    let extra: Vec<(&str, &Vec<f64>)> = [
        (COLUMNS[2], trial.velocity.as_ref()),
        (COLUMNS[3], trial.acceleration.as_ref()),
    ]
    .into_iter()
    .filter_map(|(name, col)| col.map(|c| (name, c)))
    .collect();
    out.push_str(&COLUMNS[..2].join(","));
    for (name, _) in &extra {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for i in 0..trial.len() {
        let _ = write!(out, "{},{}", trial.time[i], trial.position[i]);
        for (_, col) in &extra {
            let _ = write!(out, ",{}", col[i]);
        }
        out.push('\n');
    }
    out
}

pub fn save_trial(trial: &Trial, path: &Path) -> Result<(), TrialError> {
    fs::write(path, trial_to_csv(trial)).map_err(|source| TrialError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_treadmill_csv(text: &str) -> Result<TreadmillLog, TrialError> {
    let mut lines = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| TrialError::MalformedCsv("missing header".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["time_s", "speed_mps"] {
        return Err(TrialError::MalformedCsv(format!(
            "unexpected treadmill header '{header}'"
        )));
    }
    let (mut time, mut speed) = (Vec::new(), Vec::new());
    for (row, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 2 {
            return Err(TrialError::MalformedCsv(format!(
                "treadmill row {row}: expected 2 fields"
            )));
        }
        let parse = |s: &str, column: &str| -> Result<f64, TrialError> {
            let x: f64 = s
                .parse()
                .map_err(|_| TrialError::MalformedCsv(format!("cannot parse '{s}'")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(TrialError::NonFiniteValue {
                    column: column.into(),
                    row,
                })
            }
        };
        time.push(parse(cells[0], "time_s")?);
        speed.push(parse(cells[1], "speed_mps")?);
    }
    TreadmillLog::new(time, speed)
}

pub fn load_treadmill(path: &Path) -> Result<TreadmillLog, TrialError> {
    let text = fs::read_to_string(path).map_err(|source| TrialError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_treadmill_csv(&text)
}

/// Per-key metadata of a trial as an ordered map, for reports.
pub fn metadata_map(trial: &Trial) -> BTreeMap<&'static str, String> {
    let mut m = BTreeMap::new();
    m.insert("id", trial.id.clone());
    m.insert("mass_kg", trial.mass.to_string());
    m.insert(
        "strategy",
        trial.strategy.map(|s| s.to_string()).unwrap_or_default(),
    );
    m.insert("start_mode", trial.start_mode.as_str().to_string());
    m.insert("abandoned", trial.abandoned.to_string());
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv3() -> &'static str {
        "#mass_kg=70\ntime_s,position_m\n0,0\n0.01,0\n0.02,0\n"
    }

    #[test]
    fn loads_constant_three_rows() {
        let t = parse_trial_csv(csv3(), "t", None).unwrap();
        assert_eq!(t.len(), 3);
        assert!((t.dt() - 0.01).abs() < 1e-15);
        assert!(t.position().iter().all(|&p| p == 0.0));
        assert!(t.velocity().is_none());
        assert!(t.acceleration().is_none());
        assert_eq!(t.mass, 70.0);
    }

    #[test]
    fn nan_cell_is_rejected() {
        let text = "#mass_kg=70\ntime_s,position_m\n0,0\n0.01,NaN\n0.02,0\n";
        match parse_trial_csv(text, "t", None) {
            Err(TrialError::NonFiniteValue { column, row }) => {
                assert_eq!(column, "position_m");
                assert_eq!(row, 1);
            }
            other => panic!("expected NonFiniteValue, got {other:?}"),
        }
    }

    #[test]
    fn hundred_hz_three_seconds() {
        let mut text = String::from("#mass_kg=65\ntime_s,position_m\n");
        for i in 0..301 {
            text.push_str(&format!("{},{}\n", i as f64 * 0.01, 0.001 * i as f64));
        }
        let t = parse_trial_csv(&text, "t", None).unwrap();
        assert_eq!(t.len(), 301);
        assert!((t.dt() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn jittered_clock_rejected() {
        let text = "#mass_kg=70\ntime_s,position_m\n0,0\n0.01,0\n0.021,0\n0.03,0\n";
        assert!(matches!(
            parse_trial_csv(text, "t", None),
            Err(TrialError::NonUniformTimestep { .. })
        ));
    }

    #[test]
    fn header_and_arity_checks() {
        let bad_header = "#mass_kg=70\ntime,pos\n0,0\n0.01,0\n0.02,0\n";
        assert!(matches!(
            parse_trial_csv(bad_header, "t", None),
            Err(TrialError::MalformedCsv(_))
        ));
        let bad_row = "#mass_kg=70\ntime_s,position_m\n0,0\n0.01,0,3\n0.02,0\n";
        assert!(matches!(
            parse_trial_csv(bad_row, "t", None),
            Err(TrialError::MalformedCsv(_))
        ));
        let duplicate = "#mass_kg=70\ntime_s,position_m,velocity_mps,velocity_mps\n0,0,0,0\n";
        assert!(matches!(
            parse_trial_csv(duplicate, "t", None),
            Err(TrialError::MalformedCsv(_))
        ));
        let accel_only =
            "#mass_kg=70\ntime_s,position_m,acceleration_mps2\n0,0,1\n0.01,0,2\n0.02,0,3\n";
        let t = parse_trial_csv(accel_only, "t", None).unwrap();
        assert!(t.velocity().is_none());
        assert_eq!(t.acceleration().unwrap(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn metadata_from_comments_and_sidecar() {
        let text = "#id=abc\n#mass_kg=70\n#strategy=toe\n#start_mode=random\n#abandoned=true\n\
                    time_s,position_m,velocity_mps\n0,0,0\n0.01,0,0\n0.02,0,0\n";
        let t = parse_trial_csv(text, "fallback", None).unwrap();
        assert_eq!(t.id, "abc");
        assert_eq!(t.strategy, Some(StrategyTag::Toe));
        assert_eq!(t.start_mode, StartMode::Random);
        assert!(t.abandoned);

        let side = TrialMeta {
            strategy: Some(StrategyTag::OneStep),
            mass_kg: Some(80.0),
            ..Default::default()
        };
        let t = parse_trial_csv(text, "fallback", Some(side)).unwrap();
        assert_eq!(t.strategy, Some(StrategyTag::OneStep));
        assert_eq!(t.mass, 80.0);
    }

    #[test]
    fn missing_mass_is_an_error() {
        let text = "time_s,position_m\n0,0\n0.01,0\n0.02,0\n";
        assert!(matches!(
            parse_trial_csv(text, "t", None),
            Err(TrialError::Metadata(_))
        ));
    }

    #[test]
    fn reference_state_is_last_sample() {
        let t = Trial::new(
            "r",
            vec![0.0, 0.01, 0.02],
            vec![0.0, 0.02, 0.012],
            Some(vec![0.1, 0.0, 0.003]),
            None,
            70.0,
        )
        .unwrap();
        let r = reference_state(&t).unwrap();
        assert_eq!((r.p_star, r.v_star), (0.012, 0.003));

        let zero = Trial::new(
            "z",
            vec![0.0, 0.01, 0.02],
            vec![0.0; 3],
            Some(vec![0.0; 3]),
            None,
            70.0,
        )
        .unwrap();
        assert_eq!(reference_state(&zero).unwrap(), ReferenceState::ORIGIN);

        let nov = Trial::new("n", vec![0.0, 0.01, 0.02], vec![0.0; 3], None, None, 70.0).unwrap();
        assert!(matches!(
            reference_state(&nov),
            Err(TrialError::MissingKinematics("velocity"))
        ));
    }

    #[test]
    fn invariants_enforced_on_construction() {
        assert!(Trial::new("x", vec![0.0, 0.01], vec![0.0; 2], None, None, 70.0).is_err());
        assert!(Trial::new("x", vec![0.0, 0.01, 0.02], vec![0.0; 3], None, None, 0.0).is_err());
        assert!(Trial::new("x", vec![0.0, 0.01, 0.02], vec![0.0; 2], None, None, 70.0).is_err());
    }

    #[test]
    fn treadmill_csv() {
        let log = parse_treadmill_csv("time_s,speed_mps\n0,0.6\n0.5,0.3\n1.0,0\n").unwrap();
        assert_eq!(log.speed(), &[0.6, 0.3, 0.0]);
        assert!(parse_treadmill_csv("t,s\n0,1\n").is_err());
    }
}
