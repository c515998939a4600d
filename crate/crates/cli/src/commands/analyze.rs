use std::path::Path;

use pushfit::segment::{classify_strategy, features, segment, SegmentError};
use pushfit::trialdata::{StrategyTag, Trial};
use serde::{Deserialize, Serialize};

use super::Outcome;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{load_dir, parallel, write_json, write_text, Failure};
use crate::prepare::{prepare, Steps};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRecord {
    pub trial_id: String,
    pub strategy: StrategyTag,
    /// Tag carried by the trial file, if any.
    pub tagged: Option<StrategyTag>,
    pub agrees: Option<bool>,
    pub valleys: usize,
    pub toe_rise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub trial_id: String,
    pub strategy: StrategyTag,
    /// `tag` when the file names the strategy, `classified` otherwise.
    pub source: String,
    pub breakpoints: Vec<usize>,
    pub labels: Vec<String>,
}

#[derive(Serialize)]
struct Report<'a, R> {
    command: &'static str,
    config: &'a RunConfig,
    trials: Vec<R>,
    skipped: Vec<Failure>,
    failures: Vec<Failure>,
}

fn load_prepared(cfg: &RunConfig, input: &Path) -> Result<(Vec<Trial>, Vec<Failure>), CliError> {
    let (trials, mut failures) = load_dir(input, cfg.workers)?;
    if trials.is_empty() && failures.is_empty() {
        return Err(CliError::EmptyInput(input.to_path_buf()));
    }
    let steps = Steps::analysis(cfg);
    let prepared = parallel(cfg.workers, &trials, |t| prepare(t, cfg, steps));
    let mut ok = Vec::new();
    for (t, p) in trials.iter().zip(prepared) {
        match p {
            Ok(p) => ok.push(p),
            Err(e) => failures.push(Failure::new(t.id.clone(), e)),
        }
    }
    Ok((ok, failures))
}

/// The trial's own tag, or the classifier's verdict when it has none.
pub(crate) fn strategy_of(
    trial: &Trial,
    cfg: &RunConfig,
) -> Result<(StrategyTag, &'static str), SegmentError> {
    match trial.strategy {
        Some(tag) => Ok((tag, "tag")),
        None => classify_strategy(trial, &cfg.classifier).map(|t| (t, "classified")),
    }
}

pub fn cmd_classify(cfg: &RunConfig, input: &Path) -> Result<Outcome, CliError> {
    let (trials, mut failures) = load_prepared(cfg, input)?;
    let results = parallel(cfg.workers, &trials, |t| {
        let f = features(t, &cfg.classifier)?;
        let strategy = classify_strategy(t, &cfg.classifier)?;
        Ok::<_, SegmentError>(ClassifyRecord {
            trial_id: t.id.clone(),
            strategy,
            tagged: t.strategy,
            agrees: t.strategy.map(|tag| tag == strategy),
            valleys: f.valleys.len(),
            toe_rise: f.toe_rise,
        })
    });
    let mut records = Vec::new();
    for (t, r) in trials.iter().zip(results) {
        match r {
            Ok(r) => records.push(r),
            Err(e) => failures.push(Failure::new(t.id.clone(), e)),
        }
    }

    let mut table = Table::new(&["trial", "classified", "tagged", "valleys", "toe_rise"]);
    for r in &records {
        table.row(vec![
            r.trial_id.clone(),
            r.strategy.to_string(),
            r.tagged
                .map(|t| t.to_string())
                .unwrap_or_else(|| "-".into()),
            r.valleys.to_string(),
            r.toe_rise.to_string(),
        ]);
    }
    let disagreements = records.iter().filter(|r| r.agrees == Some(false)).count();
    let n = records.len();
    let json = cfg.out_dir.join("classify.json");
    write_json(
        &json,
        &Report {
            command: "classify",
            config: cfg,
            trials: records,
            skipped: vec![],
            failures: failures.clone(),
        },
    )?;
    let txt = cfg.out_dir.join("classify_table.txt");
    write_text(&txt, &table.render())?;
    Ok(Outcome {
        outputs: vec![json, txt],
        summary: format!("classified {n} trials, {disagreements} disagree with their tag"),
        failures,
    })
}

pub fn cmd_segment(cfg: &RunConfig, input: &Path) -> Result<Outcome, CliError> {
    let (trials, mut failures) = load_prepared(cfg, input)?;
    let results = parallel(cfg.workers, &trials, |t| {
        let (tag, source) = strategy_of(t, cfg)?;
        let mut tagged = t.clone();
        tagged.strategy = Some(tag);
        let seg = segment(&tagged)?;
        Ok::<_, SegmentError>(SegmentRecord {
            trial_id: t.id.clone(),
            strategy: tag,
            source: source.into(),
            breakpoints: seg.breakpoints,
            labels: seg.phase_labels,
        })
    });
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (t, r) in trials.iter().zip(results) {
        match r {
            Ok(r) => records.push(r),
            Err(e @ SegmentError::UnsupportedStrategy(_)) => {
                skipped.push(Failure::new(t.id.clone(), e))
            }
            Err(e) => failures.push(Failure::new(t.id.clone(), e)),
        }
    }

    let mut table = Table::new(&["trial", "strategy", "breakpoints", "labels"]);
    for r in &records {
        table.row(vec![
            r.trial_id.clone(),
            r.strategy.to_string(),
            format!("{:?}", r.breakpoints),
            r.labels.join(","),
        ]);
    }
    let n = records.len();
    let json = cfg.out_dir.join("segment.json");
    write_json(
        &json,
        &Report {
            command: "segment",
            config: cfg,
            trials: records,
            skipped: skipped.clone(),
            failures: failures.clone(),
        },
    )?;
    let txt = cfg.out_dir.join("segment_table.txt");
    write_text(&txt, &table.render())?;
    Ok(Outcome {
        outputs: vec![json, txt],
        summary: format!(
            "segmented {n} trials, skipped {} unsupported",
            skipped.len()
        ),
        failures,
    })
}
