use pushfit::simulate::{synth_archetype, GroundTruth};
use pushfit::stats::{initial_state, StableRegion};
use pushfit::trialdata::{save_trial, StartMode, StrategyTag};
use serde::Serialize;

use super::Outcome;
use crate::config::{RunConfig, SimStartMode};
use crate::error::CliError;
use crate::io::{ensure_dir, parallel, write_json, write_text};
use crate::table::{num, Table};

/// Command-line values of `simulate` that override `[simulate]`.
#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub strategy: Option<String>,
    pub n: Option<usize>,
    pub dt: Option<f64>,
}

impl SimulateOptions {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = &self.strategy {
            cfg.simulate.strategy = s.clone();
        }
        if let Some(n) = self.n {
            cfg.simulate.n = n;
        }
        if let Some(dt) = self.dt {
            cfg.simulate.archetype.dt = dt;
        }
    }
}

#[derive(Serialize)]
struct SimulatedTrial {
    trial_id: String,
    strategy: StrategyTag,
    seed: u64,
    start_mode: StartMode,
    breakpoints: Vec<usize>,
    initial_state: (f64, f64),
    in_stable_region: bool,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    trials: Vec<SimulatedTrial>,
}

fn start_mode(mode: SimStartMode, index: usize) -> StartMode {
    match mode {
        SimStartMode::Unknown => StartMode::Unknown,
        SimStartMode::Informed => StartMode::Informed,
        SimStartMode::Random => StartMode::Random,
        SimStartMode::Alternate if index.is_multiple_of(2) => StartMode::Informed,
        SimStartMode::Alternate => StartMode::Random,
    }
}

/// Writes `n` archetype trials per strategy with their ground truth.
/// Trial `i` of every strategy uses seed `config.seed + i`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let tags = cfg.simulate.strategies()?;
    let jobs: Vec<(StrategyTag, usize)> = tags
        .iter()
        .flat_map(|&t| (0..cfg.simulate.n).map(move |i| (t, i)))
        .collect();
    let made = parallel(cfg.workers, &jobs, |&(tag, i)| {
        let seed = cfg.seed.wrapping_add(i as u64);
        synth_archetype(tag, seed, &cfg.simulate.archetype).map(|mut a| {
            a.trial.start_mode = start_mode(cfg.simulate.start_mode, i);
            a
        })
    });

    let trial_dir = cfg.out_dir.join("trials");
    let truth_dir = cfg.out_dir.join("truth");
    ensure_dir(&trial_dir)?;
    ensure_dir(&truth_dir)?;
    let region = StableRegion::default();
    let mut outcome = Outcome::default();
    let mut rows = Vec::new();
    for arc in made {
        let arc = arc?;
        let id = arc.trial.id.clone();
        let csv = trial_dir.join(format!("{id}.csv"));
        save_trial(&arc.trial, &csv)?;
        let truth_path = truth_dir.join(format!("{id}.json"));
        write_json::<GroundTruth>(&truth_path, &arc.truth)?;
        outcome.outputs.extend([csv, truth_path]);
        let (p, v) = initial_state(&arc.trial)?;
        rows.push(SimulatedTrial {
            trial_id: id,
            strategy: arc.truth.strategy,
            seed: arc.truth.seed,
            start_mode: arc.trial.start_mode,
            breakpoints: arc.truth.breakpoints.clone(),
            initial_state: (p, v),
            in_stable_region: region.contains(p, v),
        });
    }
    rows.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));

    let mut table = Table::new(&["trial", "strategy", "p0", "v0", "stable", "breakpoints"]);
    for r in &rows {
        table.row(vec![
            r.trial_id.clone(),
            r.strategy.to_string(),
            num(r.initial_state.0),
            num(r.initial_state.1),
            r.in_stable_region.to_string(),
            format!("{:?}", r.breakpoints),
        ]);
    }
    let n = rows.len();
    let report_path = cfg.out_dir.join("simulate_report.json");
    write_json(
        &report_path,
        &SimulateReport {
            command: "simulate",
            config: cfg,
            trials: rows,
        },
    )?;
    let table_path = cfg.out_dir.join("simulate_table.txt");
    write_text(&table_path, &table.render())?;
    outcome.outputs.extend([report_path, table_path]);
    outcome.summary = format!("simulated {n} trials into {}", trial_dir.display());
    Ok(outcome)
}
