use std::path::Path;

use pushfit::fitlaw::{fit_segments, fit_trial, Aggregate, ControlLawSpec, FitError, PhaseFit};
use pushfit::segment::{segment, SegmentError};
use pushfit::stats::{group_fit_stats, GroupStats};
use pushfit::trialdata::{reference_state, ReferenceState, StrategyTag, Trial};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::analyze::strategy_of;
use super::Outcome;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{load_dir, parallel, write_json, write_text, Failure};
use crate::prepare::{prepare, Steps};
use crate::table::{num, Table};

pub const WHOLE_TRIAL: &str = "whole";

const NOTES: &[&str] = &[
    "gains are mass-normalised: accel = X * k",
    "the integral column is the running sum of position error without a dt factor, so ki is scaled by the sample interval",
    "the reference state is the last sample of each trial",
];

/// Fit of one law to one trial, over one or more phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub trial_id: String,
    pub strategy: Option<StrategyTag>,
    pub spec: String,
    pub lambda: f64,
    pub reference: ReferenceState,
    pub phases: Vec<PhaseFit>,
    pub aggregate: Aggregate,
    pub warnings: Vec<String>,
}

impl FitRecord {
    fn strategy_name(&self) -> String {
        self.strategy
            .map(|s| s.to_string())
            .unwrap_or_else(|| "untagged".into())
    }

    /// Group keys paired with the fit that belongs to each.
    pub fn group_entries(&self, per_phase: bool) -> Vec<(String, &pushfit::fitlaw::FitResult)> {
        self.phases
            .iter()
            .map(|p| {
                let key = if per_phase {
                    format!("{}/{}/{}", self.strategy_name(), p.label, self.spec)
                } else {
                    format!("{}/{}", self.strategy_name(), self.spec)
                };
                (key, &p.fit)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub command: String,
    pub config: RunConfig,
    pub notes: Vec<String>,
    pub records: Vec<FitRecord>,
    pub failures: Vec<Failure>,
    pub skipped: Vec<Failure>,
    #[serde(skip_deserializing, default)]
    pub groups: Vec<GroupStats>,
    pub errors: Vec<String>,
}

impl FitReport {
    pub fn per_phase(&self) -> bool {
        self.command == "segment-fit"
    }
}

#[derive(Debug, Error)]
enum TrialFitError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Whole,
    Segmented,
}

impl Mode {
    fn command(self) -> &'static str {
        match self {
            Mode::Whole => "fit",
            Mode::Segmented => "segment-fit",
        }
    }

    fn stem(self) -> &'static str {
        match self {
            Mode::Whole => "fit",
            Mode::Segmented => "segment_fit",
        }
    }

    fn dir(self) -> &'static str {
        match self {
            Mode::Whole => "fits",
            Mode::Segmented => "segment_fits",
        }
    }
}

fn whole(trial: &Trial, spec: &ControlLawSpec) -> Result<FitRecord, TrialFitError> {
    let fit = fit_trial(trial, spec)?;
    Ok(FitRecord {
        trial_id: trial.id.clone(),
        strategy: trial.strategy,
        spec: spec.label(),
        lambda: spec.lambda,
        reference: fit.reference,
        aggregate: Aggregate {
            rms: fit.rms,
            r2: fit.r2,
            n: fit.n_samples,
        },
        warnings: fit.warnings.clone(),
        phases: vec![PhaseFit {
            label: WHOLE_TRIAL.into(),
            start: 0,
            end: trial.len(),
            fit,
        }],
    })
}

fn segmented(
    trial: &Trial,
    spec: &ControlLawSpec,
    cfg: &RunConfig,
) -> Result<FitRecord, TrialFitError> {
    let (tag, _) = strategy_of(trial, cfg)?;
    let mut tagged = trial.clone();
    tagged.strategy = Some(tag);
    let seg = segment(&tagged)?;
    let fit = fit_segments(&tagged, &seg, spec)?;
    let reference = reference_state(trial).map_err(FitError::from)?;
    Ok(FitRecord {
        trial_id: trial.id.clone(),
        strategy: Some(tag),
        spec: spec.label(),
        lambda: spec.lambda,
        reference,
        warnings: fit.warnings(),
        aggregate: fit.aggregate,
        phases: fit.phases,
    })
}

pub fn cmd_fit(cfg: &RunConfig, input: &Path) -> Result<Outcome, CliError> {
    run(cfg, input, Mode::Whole)
}

pub fn cmd_segment_fit(cfg: &RunConfig, input: &Path) -> Result<Outcome, CliError> {
    run(cfg, input, Mode::Segmented)
}

fn run(cfg: &RunConfig, input: &Path, mode: Mode) -> Result<Outcome, CliError> {
    let specs = cfg.specs()?;
    let (loaded, mut failures) = load_dir(input, cfg.workers)?;
    let mut skipped = Vec::new();
    let mut trials = Vec::new();
    for t in loaded {
        if t.abandoned && !cfg.include_abandoned {
            skipped.push(Failure::new(t.id.clone(), "abandoned trial"));
        } else {
            trials.push(t);
        }
    }

    let steps = Steps::analysis(cfg);
    let results = parallel(cfg.workers, &trials, |t| {
        let t = prepare(t, cfg, steps)?;
        Ok::<_, String>(
            specs
                .iter()
                .map(|spec| match mode {
                    Mode::Whole => whole(&t, spec),
                    Mode::Segmented => segmented(&t, spec, cfg),
                })
                .collect::<Vec<_>>(),
        )
    });

    let mut outcome = Outcome::default();
    let mut records = Vec::new();
    let trial_dir = cfg.out_dir.join(mode.dir());
    for (t, result) in trials.iter().zip(results) {
        let per_spec = match result {
            Ok(r) => r,
            Err(e) => {
                failures.push(Failure::new(t.id.clone(), e));
                continue;
            }
        };
        let mut mine = Vec::new();
        for (spec, r) in specs.iter().zip(per_spec) {
            let source = format!("{} [{}]", t.id, spec.label());
            match r {
                Ok(rec) => mine.push(rec),
                Err(TrialFitError::Segment(e @ SegmentError::UnsupportedStrategy(_))) => {
                    skipped.push(Failure::new(t.id.clone(), e))
                }
                Err(e) => failures.push(Failure::new(source, e)),
            }
        }
        if !mine.is_empty() {
            let path = trial_dir.join(format!("{}.json", t.id));
            write_json(&path, &mine)?;
            outcome.outputs.push(path);
        }
        records.extend(mine);
    }
    skipped.dedup();

    let per_phase = mode == Mode::Segmented;
    let mut errors = Vec::new();
    let groups = match group_fit_stats(
        records
            .iter()
            .flat_map(|r| r.group_entries(per_phase))
            .collect::<Vec<_>>()
            .iter()
            .map(|(k, f)| (k.as_str(), *f)),
    ) {
        Ok(g) => g,
        Err(e) => {
            errors.push(e.to_string());
            vec![]
        }
    };
    let empty = records.is_empty();
    if empty {
        errors.push(
            pushfit::stats::StatsError::EmptyGroup(format!(
                "{} of {}",
                mode.command(),
                input.display()
            ))
            .to_string(),
        );
    }

    let report = FitReport {
        command: mode.command().into(),
        config: cfg.clone(),
        notes: NOTES.iter().map(|s| s.to_string()).collect(),
        records,
        failures: failures.clone(),
        skipped,
        groups,
        errors,
    };
    let report_path = cfg.out_dir.join(format!("{}_report.json", mode.stem()));
    write_json(&report_path, &report)?;
    let table_path = cfg.out_dir.join(format!("{}_table.txt", mode.stem()));
    write_text(&table_path, &group_table(&report.groups))?;
    outcome.outputs.extend([report_path, table_path]);

    if empty {
        return Err(CliError::EmptyInput(input.to_path_buf()));
    }
    outcome.summary = format!(
        "{} {} records over {} groups ({} failures, {} skipped)",
        mode.command(),
        report.records.len(),
        report.groups.len(),
        failures.len(),
        report.skipped.len()
    );
    outcome.failures = failures;
    Ok(outcome)
}

/// One row per group and parameter: mean and mean absolute deviation.
pub fn group_table(groups: &[GroupStats]) -> String {
    let mut table = Table::new(&["group", "parameter", "n", "mean", "mad"]);
    for g in groups {
        let rows = g
            .gains
            .0
            .iter()
            .map(|(n, s)| (n.as_str(), *s))
            .chain([("rms", g.rms), ("r2", g.r2)]);
        for (name, s) in rows {
            table.row(vec![
                g.key.clone(),
                name.into(),
                g.n_trials.to_string(),
                num(s.mean),
                num(s.mad),
            ]);
        }
    }
    table.render()
}
