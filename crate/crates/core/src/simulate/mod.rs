//! One-dimensional point-mass CoM dynamics under PID-family control.
//!
//! The simulator integrates `q'' = kp (p* - q) + ki E + kd (v* - v)` with
//! semi-implicit Euler, where the accumulated error `E` is a dt-weighted sum
//! (units m*s). The fitter's integral regressor is a plain sum over samples,
//! so a simulator `ki` shows up in a fit as `ki * dt_sample` when the output
//! is not decimated.

mod archetype;

pub use archetype::{synth_archetype, Archetype, ArchetypeParams, GroundTruth};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trialdata::{ReferenceState, Trial, TrialError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid simulation options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Trial(#[from] TrialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimState {
    pub q: f64,
    pub v: f64,
    pub t: f64,
}

/// Mass-normalised controller gains.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GainSet {
    pub kp_over_m: f64,
    pub ki_over_m: f64,
    pub kd_over_m: f64,
}

impl GainSet {
    pub fn pd(kp_over_m: f64, kd_over_m: f64) -> Self {
        Self {
            kp_over_m,
            ki_over_m: 0.0,
            kd_over_m,
        }
    }

    pub fn pid(kp_over_m: f64, ki_over_m: f64, kd_over_m: f64) -> Self {
        Self {
            kp_over_m,
            ki_over_m,
            kd_over_m,
        }
    }

    /// Commanded acceleration for a state and an (already updated) accumulated error.
    pub fn acceleration(
        &self,
        q: f64,
        v: f64,
        reference: &ReferenceState,
        accumulated: f64,
    ) -> f64 {
        self.kp_over_m * (reference.p_star - q)
            + self.ki_over_m * accumulated
            + self.kd_over_m * (reference.v_star - v)
    }

    /// Slowest decay rate of the PD part, 1/s. Zero when the loop does not converge.
    pub fn slowest_decay_rate(&self) -> f64 {
        let (kp, kd) = (self.kp_over_m, self.kd_over_m);
        if kp <= 0.0 || kd <= 0.0 {
            return 0.0;
        }
        let disc = kd * kd - 4.0 * kp;
        if disc >= 0.0 {
            (kd - disc.sqrt()) / 2.0
        } else {
            kd / 2.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub switch_time: f64,
    pub gains: GainSet,
    pub reference: ReferenceState,
}

/// Piecewise-constant gains, each entry active from its switch time onwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule {
    entries: Vec<ScheduleEntry>,
}

impl GainSchedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<Self, SimError> {
        let first = entries
            .first()
            .ok_or_else(|| SimError::InvalidSchedule("schedule is empty".into()))?;
        if first.switch_time != 0.0 {
            return Err(SimError::InvalidSchedule(format!(
                "first entry must start at 0, starts at {}",
                first.switch_time
            )));
        }
        if entries
            .windows(2)
            .any(|w| w[1].switch_time <= w[0].switch_time)
        {
            return Err(SimError::InvalidSchedule(
                "switch times must be strictly increasing".into(),
            ));
        }
        let finite = entries.iter().all(|e| {
            [
                e.switch_time,
                e.gains.kp_over_m,
                e.gains.ki_over_m,
                e.gains.kd_over_m,
                e.reference.p_star,
                e.reference.v_star,
            ]
            .iter()
            .all(|x| x.is_finite())
        });
        if !finite {
            return Err(SimError::InvalidSchedule("non-finite entry".into()));
        }
        Ok(Self { entries })
    }

    pub fn constant(gains: GainSet, reference: ReferenceState) -> Self {
        Self {
            entries: vec![ScheduleEntry {
                switch_time: 0.0,
                gains,
                reference,
            }],
        }
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }
}

/// Instantaneous velocity change, the model of a push.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub time: f64,
    pub delta_v: f64,
}

impl Impulse {
    /// `count` pushes every `spacing` seconds from `start`, alternating in
    /// sign and beginning with `delta_v`.
    pub fn alternating(start: f64, spacing: f64, count: usize, delta_v: f64) -> Vec<Impulse> {
        (0..count)
            .map(|i| Impulse {
                time: start + i as f64 * spacing,
                delta_v: if i % 2 == 0 { delta_v } else { -delta_v },
            })
            .collect()
    }
}

/// Result of one integrator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: SimState,
    pub accumulated_error: f64,
    /// Acceleration commanded at the start of the step.
    pub acceleration: f64,
}

/// Advances one semi-implicit Euler step.
///
/// The accumulated error is updated first with the current position error,
/// so the integral term includes the current sample.
pub fn step(
    state: SimState,
    gains: &GainSet,
    reference: &ReferenceState,
    accumulated_error: f64,
    dt: f64,
) -> Step {
    let accumulated = accumulated_error + (reference.p_star - state.q) * dt;
    let a = gains.acceleration(state.q, state.v, reference, accumulated);
    let v = state.v + a * dt;
    let q = state.q + v * dt;
    Step {
        state: SimState {
            q,
            v,
            t: state.t + dt,
        },
        accumulated_error: accumulated,
        acceleration: a,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub duration: f64,
    /// Integrator step, s.
    pub dt: f64,
    /// Record every n-th integrator step.
    pub record_every: usize,
    pub mass: f64,
    pub id: String,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            duration: 3.0,
            dt: 1e-3,
            record_every: 10,
            mass: 70.0,
            id: "sim".into(),
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidOptions(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(SimError::InvalidOptions(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if self.record_every == 0 {
            return Err(SimError::InvalidOptions("record_every must be >= 1".into()));
        }
        if self.steps() / self.record_every < 2 {
            return Err(SimError::InvalidOptions(
                "duration too short for three recorded samples".into(),
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn sample_dt(&self) -> f64 {
        self.dt * self.record_every as f64
    }
}

fn to_step(time: f64, dt: f64) -> usize {
    (time / dt).round().max(0.0) as usize
}

/// Simulates a trial and records `(q, v, a)` every `record_every` steps.
///
/// Impulses are applied at the integrator step nearest their time, before
/// that step's sample is recorded. The accumulated error is carried across
/// schedule switches.
pub fn simulate_trial(
    q0: f64,
    v0: f64,
    schedule: &GainSchedule,
    opts: &SimOptions,
    impulses: &[Impulse],
) -> Result<Trial, SimError> {
    opts.validate()?;
    let n_steps = opts.steps();
    let switch_steps: Vec<usize> = schedule
        .entries
        .iter()
        .map(|e| to_step(e.switch_time, opts.dt))
        .collect();
    let mut kicks: Vec<(usize, f64)> = impulses
        .iter()
        .map(|imp| (to_step(imp.time, opts.dt), imp.delta_v))
        .collect();
    kicks.sort_by_key(|k| k.0);

    let n_rec = n_steps / opts.record_every + 1;
    let mut time = Vec::with_capacity(n_rec);
    let mut position = Vec::with_capacity(n_rec);
    let mut velocity = Vec::with_capacity(n_rec);
    let mut acceleration = Vec::with_capacity(n_rec);

    let mut state = SimState {
        q: q0,
        v: v0,
        t: 0.0,
    };
    let mut accumulated = 0.0;
    let mut phase = 0;
    let mut kick = 0;
    for i in 0..=n_steps {
        while phase + 1 < switch_steps.len() && switch_steps[phase + 1] <= i {
            phase += 1;
        }
        while kick < kicks.len() && kicks[kick].0 <= i {
            state.v += kicks[kick].1;
            kick += 1;
        }
        let entry = &schedule.entries[phase];
        let next = step(state, &entry.gains, &entry.reference, accumulated, opts.dt);
        if i % opts.record_every == 0 {
            time.push(i as f64 * opts.dt);
            position.push(state.q);
            velocity.push(state.v);
            acceleration.push(next.acceleration);
        }
        state = SimState {
            t: (i + 1) as f64 * opts.dt,
            ..next.state
        };
        accumulated = next.accumulated_error;
    }
    Ok(Trial::new(
        opts.id.clone(),
        time,
        position,
        Some(velocity),
        Some(acceleration),
        opts.mass,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORIGIN: ReferenceState = ReferenceState::ORIGIN;

    #[test]
    fn zero_gains_drift() {
        let mut s = SimState {
            q: 0.0,
            v: 1.0,
            t: 0.0,
        };
        let mut e = 0.0;
        let dt = 0.01;
        for _ in 0..100 {
            let out = step(s, &GainSet::default(), &ORIGIN, e, dt);
            s = out.state;
            e = out.accumulated_error;
        }
        assert!((s.q - 100.0 * dt).abs() < 1e-12);
        assert_eq!(s.v, 1.0);
    }

    #[test]
    fn steady_state_is_fixed() {
        let r = ReferenceState::new(0.2, 0.0);
        let s = SimState {
            q: 0.2,
            v: 0.0,
            t: 0.0,
        };
        let out = step(s, &GainSet::pid(8.0, 1.0, 3.0), &r, 0.0, 1e-3);
        assert_eq!(out.acceleration, 0.0);
        assert_eq!(out.state.q, 0.2);
        assert_eq!(out.state.v, 0.0);
    }

    fn critically_damped_q(t_end: f64, dt: f64) -> f64 {
        let mut s = SimState {
            q: 1.0,
            v: 0.0,
            t: 0.0,
        };
        let g = GainSet::pd(1.0, 2.0);
        for _ in 0..(t_end / dt).round() as usize {
            s = step(s, &g, &ORIGIN, 0.0, dt).state;
        }
        s.q
    }

    #[test]
    fn critically_damped_matches_closed_form() {
        let q = critically_damped_q(1.0, 1e-3);
        let exact = 2.0 * (-1.0_f64).exp();
        assert!((q - exact).abs() < 1e-3, "{q} vs {exact}");
    }

    #[test]
    fn first_order_convergence_in_dt() {
        let exact = 2.0 * (-1.0_f64).exp();
        let e1 = (critically_damped_q(1.0, 2e-3) - exact).abs();
        let e2 = (critically_damped_q(1.0, 1e-3) - exact).abs();
        let order = (e1 / e2).log2();
        assert!(order >= 0.9, "observed order {order}");
    }

    #[test]
    fn lyapunov_non_increasing() {
        let (kp, kd, dt) = (8.0, 3.0, 1e-3);
        let g = GainSet::pd(kp, kd);
        let mut s = SimState {
            q: 0.1,
            v: 0.5,
            t: 0.0,
        };
        let energy = |s: &SimState| 0.5 * s.v * s.v + 0.5 * kp * s.q * s.q;
        let mut prev = energy(&s);
        for _ in 0..5000 {
            s = step(s, &g, &ORIGIN, 0.0, dt).state;
            let e = energy(&s);
            assert!(e <= prev + 1e-9 * dt, "energy rose: {prev} -> {e}");
            prev = e;
        }
    }

    #[test]
    fn empty_impulses_at_rest() {
        let sched = GainSchedule::constant(GainSet::pd(8.0, 3.0), ORIGIN);
        let t = simulate_trial(0.0, 0.0, &sched, &SimOptions::default(), &[]).unwrap();
        assert!(t.position().iter().all(|&x| x == 0.0));
        assert!(t.velocity().unwrap().iter().all(|&x| x == 0.0));
        assert!(t.acceleration().unwrap().iter().all(|&x| x == 0.0));
        assert_eq!(t.len(), 301);
        assert!((t.dt() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn overdamped_settles_monotonically() {
        // kd^2 > 4 kp: real roots, oracle q(t) = A e^{r1 t} + B e^{r2 t}
        let (kp, kd) = (4.0, 6.0);
        let sched = GainSchedule::constant(GainSet::pd(kp, kd), ORIGIN);
        let opts = SimOptions {
            duration: 20.0,
            ..SimOptions::default()
        };
        let t = simulate_trial(0.05, 0.4, &sched, &opts, &[]).unwrap();
        let q = t.position();
        let v = t.velocity().unwrap();
        let peak = q
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(q[peak..].windows(2).all(|w| w[1].abs() <= w[0].abs()));
        assert!(v.last().unwrap().abs() < 1e-4);

        let disc = (kd * kd - 4.0 * kp).sqrt();
        let (r1, r2) = ((-kd + disc) / 2.0, (-kd - disc) / 2.0);
        let b = (0.4 - r1 * 0.05) / (r2 - r1);
        let a = 0.05 - b;
        let exact = |t: f64| a * (r1 * t).exp() + b * (r2 * t).exp();
        for (i, &ti) in t.time().iter().enumerate().step_by(50) {
            assert!((q[i] - exact(ti)).abs() < 2e-3, "t={ti}");
        }
    }

    #[test]
    fn impulse_sets_initial_velocity() {
        let sched = GainSchedule::constant(GainSet::pd(8.0, 3.0), ORIGIN);
        let imp = [Impulse {
            time: 0.0,
            delta_v: 0.37,
        }];
        let t = simulate_trial(0.0, 0.0, &sched, &SimOptions::default(), &imp).unwrap();
        assert!((t.velocity().unwrap()[0] - 0.37).abs() < 1e-9);
    }

    #[test]
    fn schedule_validation() {
        let e = |t: f64| ScheduleEntry {
            switch_time: t,
            gains: GainSet::default(),
            reference: ORIGIN,
        };
        assert!(GainSchedule::new(vec![]).is_err());
        assert!(GainSchedule::new(vec![e(0.1)]).is_err());
        assert!(GainSchedule::new(vec![e(0.0), e(0.5), e(0.5)]).is_err());
        assert!(GainSchedule::new(vec![e(0.0), e(0.5)]).is_ok());
        let bad = SimOptions {
            dt: 0.0,
            ..SimOptions::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn deterministic() {
        let sched = GainSchedule::constant(GainSet::pid(8.0, 0.5, 3.0), ORIGIN);
        let a = simulate_trial(0.02, 0.3, &sched, &SimOptions::default(), &[]).unwrap();
        let b = simulate_trial(0.02, 0.3, &sched, &SimOptions::default(), &[]).unwrap();
        assert_eq!(a, b);
    }
}
