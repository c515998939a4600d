use pushfit::signal::{
    butterworth_lowpass, derive_kinematics, shift_origin, trim_to_push, SignalError,
};
use pushfit::trialdata::{load_treadmill, Trial};

use crate::config::{DeriveMode, RunConfig};

/// Steps applied to a trial, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Steps {
    pub trim: bool,
    pub derive: DeriveMode,
    pub shift: bool,
}

impl Steps {
    /// Full conditioning chain of the `preprocess` command.
    pub fn full(cfg: &RunConfig) -> Self {
        Self {
            trim: cfg.preprocess.treadmill_dir.is_some(),
            derive: DeriveMode::Always,
            shift: cfg.preprocess.shift_origin,
        }
    }

    /// Only what analysis needs: kinematics per `preprocess.derive`.
    pub fn analysis(cfg: &RunConfig) -> Self {
        Self {
            trim: false,
            derive: cfg.preprocess.derive,
            shift: false,
        }
    }
}

/// Trims, derives kinematics and shifts the origin as configured.
pub fn prepare(trial: &Trial, cfg: &RunConfig, steps: Steps) -> Result<Trial, String> {
    let mut t = trial.clone();
    if steps.trim {
        if let Some(dir) = &cfg.preprocess.treadmill_dir {
            let log =
                load_treadmill(&dir.join(format!("{}.csv", t.id))).map_err(|e| e.to_string())?;
            t = trim_to_push(&t, &log).map_err(|e| e.to_string())?;
        }
    }
    let needs = t.velocity().is_none() || t.acceleration().is_none();
    if steps.derive == DeriveMode::Always || needs {
        t = derive(&t, cfg).map_err(|e| e.to_string())?;
    }
    if steps.shift {
        t = shift_origin(&t).map_err(|e| e.to_string())?;
    }
    Ok(t)
}

fn derive(t: &Trial, cfg: &RunConfig) -> Result<Trial, SignalError> {
    let rate = 1.0 / t.dt();
    let mut src = t.clone();
    if let Some(pre) = cfg.filter.pre_spec(rate) {
        let pos = butterworth_lowpass(t.position(), &pre)?;
        src = t.with_kinematics(pos, None, None)?;
    }
    let spec = cfg.filter.spec(rate);
    derive_kinematics(&src, cfg.filter.enabled.then_some(&spec))
}
