use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use pushfit::fitlaw::{build_design, predict, ControlLawSpec, FitError};
use pushfit::segment::segment;
use pushfit::stats::{absolute_initial_state, StableRegion};
use pushfit::trialdata::Trial;
use serde::Serialize;

use super::analyze::strategy_of;
use super::{FitRecord, FitReport, Outcome};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{load_dir, parallel, read_json, write_json, write_text, Failure};
use crate::prepare::{prepare, Steps};
use crate::svg::{line_chart, scatter_with_lines, Point, Series};

#[derive(Serialize)]
struct Plotted {
    trial_id: String,
    spec: Option<String>,
    breakpoints: Vec<usize>,
    files: Vec<String>,
}

#[derive(Serialize)]
struct PlotReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    fits: String,
    trials: Vec<Plotted>,
    initial_states: String,
    failures: Vec<Failure>,
}

/// Predicted acceleration of `record` over the whole trial, phase by phase.
pub fn predicted(
    trial: &Trial,
    spec: &ControlLawSpec,
    record: &FitRecord,
) -> Result<Vec<f64>, FitError> {
    let e: Vec<f64> = trial
        .position()
        .iter()
        .map(|p| record.reference.p_star - p)
        .collect();
    let mut out = Vec::with_capacity(trial.len());
    let mut accumulated = 0.0;
    for phase in &record.phases {
        let part = trial.slice(phase.start, phase.end)?;
        let design = build_design(&part, spec, &record.reference, accumulated)?;
        out.extend(predict(&design, &phase.fit.gains.values())?);
        accumulated += e[phase.start..phase.end].iter().sum::<f64>();
    }
    if out.len() != trial.len() {
        return Err(FitError::DimensionMismatch {
            expected: trial.len(),
            got: out.len(),
        });
    }
    Ok(out)
}

fn breakpoints(trial: &Trial, record: Option<&FitRecord>, cfg: &RunConfig) -> Vec<usize> {
    if let Some(r) = record.filter(|r| r.phases.len() > 1) {
        return r.phases[1..].iter().map(|p| p.start).collect();
    }
    let Ok((tag, _)) = strategy_of(trial, cfg) else {
        return vec![];
    };
    let mut tagged = trial.clone();
    tagged.strategy = Some(tag);
    segment(&tagged).map(|s| s.breakpoints).unwrap_or_default()
}

struct Drawn {
    plotted: Plotted,
    files: Vec<(String, String)>,
}

fn draw(
    trial: &Trial,
    record: Option<&FitRecord>,
    spec: &ControlLawSpec,
    cfg: &RunConfig,
) -> Result<Drawn, String> {
    let v = trial.require_velocity().map_err(|e| e.to_string())?;
    let a = trial.require_acceleration().map_err(|e| e.to_string())?;
    let p = trial.position();
    let pred = match record {
        Some(r) => Some(predicted(trial, spec, r).map_err(|e| e.to_string())?),
        None => None,
    };
    let bps = breakpoints(trial, record, cfg);
    let (w, h) = (cfg.plot.width, cfg.plot.height);
    let id = &trial.id;

    let mut files = Vec::new();
    for (xname, xs) in [("position", p), ("velocity", v)] {
        let mut series = vec![Series {
            class: "observed",
            color: "#1f77b4",
            xs,
            ys: a,
        }];
        if let Some(pred) = &pred {
            series.push(Series {
                class: "predicted",
                color: "#d62728",
                xs,
                ys: pred,
            });
        }
        let markers: Vec<(f64, f64)> = bps.iter().map(|&i| (xs[i], a[i])).collect();
        let unit = if xname == "position" { "m" } else { "m/s" };
        let svg = line_chart(
            &format!("{id}: acceleration vs {xname} ({})", spec.label()),
            &format!("{xname} [{unit}]"),
            "acceleration [m/s^2]",
            &series,
            &markers,
            w,
            h,
        );
        files.push((format!("{id}_{xname}_accel.svg"), svg));
    }

    let mut csv =
        String::from("time_s,position_m,velocity_mps,acceleration_mps2,predicted_mps2,phase\n");
    for i in 0..trial.len() {
        let phase = bps.iter().filter(|&&b| b <= i).count();
        let pr = pred.as_ref().map(|x| x[i].to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{pr},{phase}",
            trial.time()[i],
            p[i],
            v[i],
            a[i]
        );
    }
    files.push((format!("{id}_series.csv"), csv));

    Ok(Drawn {
        plotted: Plotted {
            trial_id: id.clone(),
            spec: record.map(|r| r.spec.clone()),
            breakpoints: bps,
            files: files.iter().map(|f| f.0.clone()).collect(),
        },
        files,
    })
}

/// Per-trial phase-plane plots with the fitted prediction and an initial
/// state scatter against the stable band.
pub fn cmd_plot(cfg: &RunConfig, input: &Path, fits: Option<&Path>) -> Result<Outcome, CliError> {
    let fits_path = fits
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.out_dir.join("fit_report.json"));
    let report: FitReport = read_json(&fits_path)?;
    let spec = cfg.plot_spec()?;
    let label = spec.label();
    let by_id: BTreeMap<&str, &FitRecord> = report
        .records
        .iter()
        .filter(|r| r.spec == label)
        .map(|r| (r.trial_id.as_str(), r))
        .collect();

    let (loaded, mut failures) = load_dir(input, cfg.workers)?;
    let trials: Vec<Trial> = loaded
        .into_iter()
        .filter(|t| cfg.include_abandoned || !t.abandoned)
        .collect();
    if trials.is_empty() {
        return Err(CliError::EmptyPlot);
    }
    let steps = Steps::analysis(cfg);
    let drawn = parallel(cfg.workers, &trials, |t| {
        let t = prepare(t, cfg, steps)?;
        let d = draw(&t, by_id.get(t.id.as_str()).copied(), &spec, cfg)?;
        let state = absolute_initial_state(&t).map_err(|e| e.to_string())?;
        Ok::<_, String>((d, state))
    });

    let plot_dir = cfg.out_dir.join("plots");
    let mut outcome = Outcome::default();
    let mut rows = Vec::new();
    let mut states = Vec::new();
    for (t, d) in trials.iter().zip(drawn) {
        match d {
            Ok((d, state)) => {
                for (name, text) in &d.files {
                    let path = plot_dir.join(name);
                    write_text(&path, text)?;
                    outcome.outputs.push(path);
                }
                let group = t
                    .strategy
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "untagged".into());
                states.push((t.id.clone(), group, state));
                rows.push(d.plotted);
            }
            Err(e) => failures.push(Failure::new(t.id.clone(), e)),
        }
    }
    if rows.is_empty() {
        return Err(CliError::EmptyPlot);
    }

    let region = StableRegion::default();
    let points: Vec<Point> = states
        .iter()
        .map(|(id, group, (p, v))| Point {
            label: id,
            group,
            x: *p,
            y: *v,
        })
        .collect();
    let svg = scatter_with_lines(
        "initial CoM states",
        "position [m]",
        "velocity [m/s]",
        &points,
        region.slope,
        &[-region.half_width, region.half_width],
        cfg.plot.width,
        cfg.plot.height,
    );
    let scatter = plot_dir.join("initial_states.svg");
    write_text(&scatter, &svg)?;
    let mut csv = String::from("trial_id,strategy,position_m,velocity_mps,in_stable_region\n");
    for (id, group, (p, v)) in &states {
        let _ = writeln!(csv, "{id},{group},{p},{v},{}", region.contains(*p, *v));
    }
    let scatter_csv = plot_dir.join("initial_states.csv");
    write_text(&scatter_csv, &csv)?;

    let n = rows.len();
    let report_path = cfg.out_dir.join("plot_report.json");
    write_json(
        &report_path,
        &PlotReport {
            command: "plot",
            config: cfg,
            fits: fits_path.display().to_string(),
            trials: rows,
            initial_states: "initial_states.svg".into(),
            failures: failures.clone(),
        },
    )?;
    outcome.outputs.extend([scatter, scatter_csv, report_path]);
    outcome.summary = format!("plotted {n} trials into {}", plot_dir.display());
    outcome.failures = failures;
    Ok(outcome)
}
