#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pushfit::simulate::{simulate_trial, GainSchedule, GainSet, Impulse, SimOptions};
use pushfit::trialdata::{save_trial, ReferenceState, StrategyTag, Trial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const KICK_START: f64 = 0.5;
pub const KICK_SPACING: f64 = 0.7;

/// A kicked Linear-PD trial with gains drawn from kp in [2, 15], kd in [1, 6].
pub struct PdCase {
    pub trial: Trial,
    pub kp: f64,
    pub kd: f64,
}

/// `amplitude` scales the initial state and kicks, `kicks` sets their
/// number and `noise` is the standard deviation added to acceleration.
pub fn pd_case(rng: &mut ChaCha8Rng, id: &str, amplitude: f64, kicks: usize, noise: f64) -> PdCase {
    let kp = rng.random_range(2.0..15.0);
    let kd = rng.random_range(1.0..6.0);
    let q0 = rng.random_range(0.1..0.3) * amplitude;
    let v0 = rng.random_range(0.3..0.8) * amplitude;
    let gains = GainSet::pd(kp, kd);
    let schedule = GainSchedule::constant(gains, ReferenceState::ORIGIN);
    let impulses = Impulse::alternating(KICK_START, KICK_SPACING, kicks, -0.6 * amplitude);
    let opts = SimOptions {
        duration: 20.0 / gains.slowest_decay_rate() + KICK_START + KICK_SPACING * kicks as f64,
        id: id.into(),
        ..SimOptions::default()
    };
    let mut trial = simulate_trial(q0, v0, &schedule, &opts, &impulses).unwrap();
    if noise > 0.0 {
        let normal = Normal::new(0.0, noise).unwrap();
        let acc: Vec<f64> = trial
            .acceleration()
            .unwrap()
            .iter()
            .map(|a| a + normal.sample(rng))
            .collect();
        let vel = trial.velocity().map(<[f64]>::to_vec);
        trial = trial
            .with_kinematics(trial.position().to_vec(), vel, Some(acc))
            .unwrap();
    }
    trial.strategy = Some(StrategyTag::Ankle);
    PdCase { trial, kp, kd }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Writes `n` PD trials named `pd_00..` into `dir`.
pub fn write_pd_dir(dir: &Path, n: usize, seed: u64, noise: f64) -> Vec<PdCase> {
    std::fs::create_dir_all(dir).unwrap();
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let case = pd_case(&mut r, &format!("pd_{i:02}"), 1.0, 4, noise);
            save_trial(&case.trial, &dir.join(format!("pd_{i:02}.csv"))).unwrap();
            case
        })
        .collect()
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_pushfit"))
}

/// Runs `pushfit` with `args` from working directory `cwd`.
pub fn pushfit(cwd: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(cwd)
        .args(args)
        .output()
        .unwrap()
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Mean R² of every record of `report` whose spec is `label`.
pub fn mean_r2(report: &serde_json::Value, label: &str) -> f64 {
    let r2: Vec<f64> = report["records"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["spec"] == label)
        .map(|r| r["aggregate"]["r2"].as_f64().unwrap())
        .collect();
    assert!(!r2.is_empty(), "no records for {label}");
    r2.iter().sum::<f64>() / r2.len() as f64
}
