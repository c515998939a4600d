use pushfit::trialdata::save_trial;
use serde::Serialize;

use super::Outcome;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{ensure_dir, load_dir, parallel, write_json, Failure};
use crate::prepare::{prepare, Steps};

#[derive(Serialize)]
struct Prepared {
    trial_id: String,
    samples_in: usize,
    samples_out: usize,
    start_time: f64,
    origin_offset: Option<f64>,
}

#[derive(Serialize)]
struct PreprocessReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    trials: Vec<Prepared>,
    failures: Vec<Failure>,
}

/// Trims to the belt stop, derives kinematics and shifts the origin for
/// every trial of `input`, writing to `<out_dir>/preprocessed`.
pub fn cmd_preprocess(cfg: &RunConfig, input: &std::path::Path) -> Result<Outcome, CliError> {
    let (trials, mut failures) = load_dir(input, cfg.workers)?;
    if trials.is_empty() && failures.is_empty() {
        return Err(CliError::EmptyInput(input.to_path_buf()));
    }
    let steps = Steps::full(cfg);
    let results = parallel(cfg.workers, &trials, |t| prepare(t, cfg, steps));

    let out_dir = cfg.out_dir.join("preprocessed");
    ensure_dir(&out_dir)?;
    let mut outcome = Outcome::default();
    let mut rows = Vec::new();
    for (raw, result) in trials.iter().zip(results) {
        match result {
            Ok(t) => {
                let path = out_dir.join(format!("{}.csv", t.id));
                save_trial(&t, &path)?;
                outcome.outputs.push(path);
                rows.push(Prepared {
                    trial_id: t.id.clone(),
                    samples_in: raw.len(),
                    samples_out: t.len(),
                    start_time: t.time()[0],
                    origin_offset: t.origin_offset,
                });
            }
            Err(e) => failures.push(Failure::new(raw.id.clone(), e)),
        }
    }
    let report = cfg.out_dir.join("preprocess_report.json");
    write_json(
        &report,
        &PreprocessReport {
            command: "preprocess",
            config: cfg,
            trials: rows,
            failures: failures.clone(),
        },
    )?;
    outcome.outputs.push(report);
    outcome.summary = format!(
        "preprocessed {} trials into {} ({} failures)",
        outcome.outputs.len() - 1,
        out_dir.display(),
        failures.len()
    );
    outcome.failures = failures;
    Ok(outcome)
}
