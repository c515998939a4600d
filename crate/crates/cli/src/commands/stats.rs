use std::path::Path;

use pushfit::stats::{
    group_fit_stats, selection_stats, CohortStats, GroupStats, SelectionStats, StableRegion,
};
use serde::Serialize;

use super::fit::group_table;
use super::{FitReport, Outcome};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{load_dir, parallel, read_json, write_json, write_text, Failure};
use crate::prepare::{prepare, Steps};
use crate::table::{num, Table};

#[derive(Serialize)]
struct StatsReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    fits: Option<String>,
    groups: Vec<GroupStats>,
    selection: SelectionStats,
    failures: Vec<Failure>,
}

fn selection_table(sel: &SelectionStats) -> String {
    let mut table = Table::new(&[
        "strategy", "cohort", "n", "p_median", "p_mad", "v_median", "v_mad", "stable",
    ]);
    for s in &sel.strategies {
        let cohorts: [(&str, Option<CohortStats>); 3] = [
            ("all", s.all),
            ("informed", s.informed),
            ("random", s.random),
        ];
        for (name, c) in cohorts {
            let Some(c) = c else { continue };
            table.row(vec![
                s.strategy.to_string(),
                name.into(),
                c.n.to_string(),
                num(c.median.0),
                num(c.mad.0),
                num(c.median.1),
                num(c.mad.1),
                c.n_stable.to_string(),
            ]);
        }
    }
    table.render()
}

/// Group statistics of a fit report and strategy-selection statistics of
/// the trials of `input`.
pub fn cmd_stats(cfg: &RunConfig, input: &Path, fits: Option<&Path>) -> Result<Outcome, CliError> {
    let default_fits = cfg.out_dir.join("fit_report.json");
    let fits_path = match fits {
        Some(p) => Some(p.to_path_buf()),
        None => default_fits.is_file().then_some(default_fits),
    };
    let groups = match &fits_path {
        Some(p) => {
            let report: FitReport = read_json(p)?;
            let per_phase = report.per_phase();
            let entries: Vec<_> = report
                .records
                .iter()
                .flat_map(|r| r.group_entries(per_phase))
                .collect();
            group_fit_stats(entries.iter().map(|(k, f)| (k.as_str(), *f)))?
        }
        None => vec![],
    };

    let (loaded, mut failures) = load_dir(input, cfg.workers)?;
    if loaded.is_empty() && failures.is_empty() {
        return Err(CliError::EmptyInput(input.to_path_buf()));
    }
    let admitted: Vec<_> = loaded
        .into_iter()
        .filter(|t| cfg.cohort.admits(t.strategy, t.start_mode))
        .map(|mut t| {
            if cfg.include_abandoned {
                t.abandoned = false;
            }
            t
        })
        .collect();
    let steps = Steps::analysis(cfg);
    let prepared = parallel(cfg.workers, &admitted, |t| prepare(t, cfg, steps));
    let mut trials = Vec::new();
    for (t, p) in admitted.iter().zip(prepared) {
        match p {
            Ok(p) => trials.push(p),
            Err(e) => failures.push(Failure::new(t.id.clone(), e)),
        }
    }
    let selection = selection_stats(&trials, &StableRegion::default())?;

    let mut text = String::new();
    if !groups.is_empty() {
        text.push_str(&group_table(&groups));
        text.push('\n');
    }
    text.push_str(&selection_table(&selection));

    let json = cfg.out_dir.join("stats.json");
    let n_groups = groups.len();
    let n_strategies = selection.strategies.len();
    write_json(
        &json,
        &StatsReport {
            command: "stats",
            config: cfg,
            fits: fits_path.map(|p| p.display().to_string()),
            groups,
            selection,
            failures: failures.clone(),
        },
    )?;
    let txt = cfg.out_dir.join("stats_table.txt");
    write_text(&txt, &text)?;
    Ok(Outcome {
        outputs: vec![json, txt],
        summary: format!(
            "{n_groups} fit groups, selection statistics for {n_strategies} strategies"
        ),
        failures,
    })
}
