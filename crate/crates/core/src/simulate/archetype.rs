//! Synthetic strategy archetypes with known phase boundaries.
//!
//! Each archetype is a chain of PD phases. A phase ends on a kinematic event
//! detected at integrator resolution; the event times are then frozen into a
//! [`GainSchedule`] and the trial is re-simulated with [`simulate_trial`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    simulate_trial, step, GainSchedule, GainSet, Impulse, ScheduleEntry, SimError, SimOptions,
    SimState,
};
use crate::trialdata::{ReferenceState, StrategyTag, Trial};

/// Knobs for archetype generation. Ranges are inclusive `(low, high)` and
/// sampled uniformly per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchetypeParams {
    pub duration: f64,
    pub dt: f64,
    pub record_every: usize,
    pub mass_kg: (f64, f64),
    /// Acceleration depth, m/s^2, that stepping valleys must exceed.
    pub valley_depth: f64,
    pub ankle_push: (f64, f64),
    pub toe_push: (f64, f64),
    pub step_push: (f64, f64),
    /// Velocity change of the extra step in two-step and toe-to-step.
    pub extra_step: (f64, f64),
}

impl Default for ArchetypeParams {
    fn default() -> Self {
        Self {
            duration: 3.0,
            dt: 1e-3,
            record_every: 10,
            mass_kg: (55.0, 85.0),
            valley_depth: 1.0,
            ankle_push: (0.10, 0.15),
            toe_push: (0.14, 0.19),
            step_push: (0.38, 0.50),
            extra_step: (0.36, 0.46),
        }
    }
}

impl ArchetypeParams {
    pub fn validate(&self) -> Result<(), SimError> {
        SimOptions {
            duration: self.duration,
            dt: self.dt,
            record_every: self.record_every,
            ..SimOptions::default()
        }
        .validate()?;
        let ranges = [
            ("mass_kg", self.mass_kg),
            ("ankle_push", self.ankle_push),
            ("toe_push", self.toe_push),
            ("step_push", self.step_push),
            ("extra_step", self.extra_step),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(SimError::InvalidOptions(format!(
                    "{name} range ({lo}, {hi}) is invalid"
                )));
            }
        }
        if self.mass_kg.0 <= 0.0 {
            return Err(SimError::InvalidOptions("mass_kg must be positive".into()));
        }
        if !(self.valley_depth > 0.0 && self.valley_depth.is_finite()) {
            return Err(SimError::InvalidOptions(
                "valley_depth must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Construction record of an archetype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub strategy: StrategyTag,
    pub seed: u64,
    /// Sample index nearest each phase switch.
    pub breakpoints: Vec<usize>,
    pub schedule: GainSchedule,
    pub impulses: Vec<Impulse>,
    pub q0: f64,
}

impl GroundTruth {
    pub fn phase_gains(&self) -> Vec<GainSet> {
        self.schedule.entries().iter().map(|e| e.gains).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Archetype {
    pub trial: Trial,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, Copy)]
enum Until {
    /// Acceleration crosses zero upwards.
    AccelUp,
    /// Velocity reaches zero from above.
    VelocityDown,
    End,
}

#[derive(Debug, Clone, Copy)]
enum Target {
    Origin,
    /// `p* = q_switch + offset`, `v* = 0`.
    FromSwitch(f64),
}

#[derive(Debug, Clone, Copy)]
struct Phase {
    gains: GainSet,
    target: Target,
    until: Until,
}

fn resolve(target: Target, q: f64) -> ReferenceState {
    match target {
        Target::Origin => ReferenceState::ORIGIN,
        Target::FromSwitch(offset) => ReferenceState::new(q + offset, 0.0),
    }
}

/// Runs the phase chain at integrator resolution and returns the switch
/// steps with the reference each phase locks in.
fn locate_switches(
    q0: f64,
    phases: &[Phase],
    impulses: &[Impulse],
    opts: &SimOptions,
) -> Vec<(usize, ReferenceState)> {
    let kick_steps: Vec<(usize, f64)> = impulses
        .iter()
        .map(|i| ((i.time / opts.dt).round() as usize, i.delta_v))
        .collect();
    let mut switches = vec![(0, resolve(phases[0].target, q0))];
    let mut state = SimState {
        q: q0,
        v: 0.0,
        t: 0.0,
    };
    let mut accumulated = 0.0;
    let mut phase = 0;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=opts.steps() {
        for &(_, dv) in kick_steps.iter().filter(|k| k.0 == i) {
            state.v += dv;
        }
        let mut reference = switches[phase].1;
        let mut next = step(
            state,
            &phases[phase].gains,
            &reference,
            accumulated,
            opts.dt,
        );
        let fired = match (phases[phase].until, prev) {
            (Until::AccelUp, Some((a_prev, _))) => a_prev < 0.0 && next.acceleration >= 0.0,
            (Until::VelocityDown, Some((_, v_prev))) => v_prev > 0.0 && state.v <= 0.0,
            _ => false,
        };
        if fired && phase + 1 < phases.len() {
            phase += 1;
            reference = resolve(phases[phase].target, state.q);
            switches.push((i, reference));
            next = step(
                state,
                &phases[phase].gains,
                &reference,
                accumulated,
                opts.dt,
            );
            prev = None;
        } else {
            prev = Some((next.acceleration, state.v));
        }
        state = next.state;
        accumulated = next.accumulated_error;
    }
    switches
}

fn pick(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..=range.1)
    } else {
        range.0
    }
}

/// Generates a deterministic archetype trial for `tag`.
///
/// Start positions and push velocities place ankle archetypes inside the
/// stable band `|v + 3p| <= 0.3` and stepping archetypes outside it.
pub fn synth_archetype(
    tag: StrategyTag,
    seed: u64,
    params: &ArchetypeParams,
) -> Result<Archetype, SimError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mass = pick(&mut rng, params.mass_kg);
    let opts = SimOptions {
        duration: params.duration,
        dt: params.dt,
        record_every: params.record_every,
        mass,
        id: format!("{}_{seed:04}", tag.as_str()),
    };
    opts.validate()?;
    let mut r = |range: (f64, f64)| pick(&mut rng, range);

    let toe_phases = |r: &mut dyn FnMut((f64, f64)) -> f64| {
        let kp2 = r((1.0, 1.4));
        let drop = r((0.65, 0.85));
        let kp3 = r((36.0, 49.0));
        vec![
            Phase {
                gains: GainSet::pd(r((7.0, 10.0)), r((2.0, 3.0))),
                target: Target::Origin,
                until: Until::VelocityDown,
            },
            Phase {
                gains: GainSet::pd(kp2, r((0.3, 0.6))),
                target: Target::FromSwitch(-drop / kp2),
                until: Until::AccelUp,
            },
            Phase {
                gains: GainSet::pd(kp3, 2.0 * kp3.sqrt() * r((0.95, 1.05))),
                target: Target::FromSwitch(r((0.04, 0.07))),
                until: Until::End,
            },
        ]
    };
    let step_phases = |r: &mut dyn FnMut((f64, f64)) -> f64| {
        vec![
            Phase {
                gains: GainSet::pd(r((12.0, 15.0)), r((4.8, 5.8))),
                target: Target::Origin,
                until: Until::AccelUp,
            },
            Phase {
                gains: GainSet::pd(r((6.5, 8.5)), r((4.2, 5.0))),
                target: Target::Origin,
                until: Until::End,
            },
        ]
    };

    let (q0, push, phases, extra) = match tag {
        StrategyTag::Ankle => {
            let q0 = r((-0.02, 0.0));
            let push = r(params.ankle_push);
            let phases = vec![
                Phase {
                    gains: GainSet::pd(r((7.0, 10.0)), r((2.5, 3.5))),
                    target: Target::Origin,
                    until: Until::AccelUp,
                },
                Phase {
                    gains: GainSet::pd(r((2.5, 4.0)), r((4.0, 5.0))),
                    target: Target::Origin,
                    until: Until::End,
                },
            ];
            (q0, push, phases, None)
        }
        StrategyTag::Toe => {
            let q0 = r((0.0, 0.03));
            let push = r(params.toe_push);
            (q0, push, toe_phases(&mut r), None)
        }
        StrategyTag::OneStep => {
            let q0 = r((0.04, 0.10));
            let push = r(params.step_push);
            (q0, push, step_phases(&mut r), None)
        }
        StrategyTag::TwoStep => {
            let q0 = r((0.06, 0.12));
            let push = r(params.step_push);
            let phases = step_phases(&mut r);
            let extra = (r((0.25, 0.40)), r(params.extra_step));
            (q0, push, phases, Some(extra))
        }
        StrategyTag::ToeToStep => {
            let q0 = r((0.0, 0.03));
            let push = r(params.toe_push);
            let phases = toe_phases(&mut r);
            let extra = (r((0.30, 0.45)), r(params.extra_step));
            (q0, push, phases, Some(extra))
        }
    };

    let mut impulses = vec![Impulse {
        time: 0.0,
        delta_v: push,
    }];
    let mut switches = locate_switches(q0, &phases, &impulses, &opts);
    if let Some((delay, dv)) = extra {
        // The extra step follows the last switch; adding it cannot move
        // earlier switches.
        let last = switches.last().expect("at least one phase").0;
        impulses.push(Impulse {
            time: last as f64 * opts.dt + delay,
            delta_v: dv,
        });
        switches = locate_switches(q0, &phases, &impulses, &opts);
    }

    let entries = switches
        .iter()
        .zip(&phases)
        .map(|(&(i, reference), phase)| ScheduleEntry {
            switch_time: i as f64 * opts.dt,
            gains: phase.gains,
            reference,
        })
        .collect();
    let schedule = GainSchedule::new(entries)?;
    let trial = simulate_trial(q0, 0.0, &schedule, &opts, &impulses)?.with_strategy(tag);
    let stride = opts.record_every as f64;
    let breakpoints = switches[1..]
        .iter()
        .map(|&(i, _)| (i as f64 / stride).round() as usize)
        .collect();
    Ok(Archetype {
        trial,
        truth: GroundTruth {
            strategy: tag,
            seed,
            breakpoints,
            schedule,
            impulses,
            q0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accel(tag: StrategyTag, seed: u64) -> Vec<f64> {
        let arc = synth_archetype(tag, seed, &ArchetypeParams::default()).unwrap();
        arc.trial.acceleration().unwrap().to_vec()
    }

    #[test]
    fn ankle_has_one_upward_sign_change() {
        for seed in 0..20 {
            let a = accel(StrategyTag::Ankle, seed);
            let ups = a.windows(2).filter(|w| w[0] < 0.0 && w[1] >= 0.0).count();
            assert_eq!(ups, 1, "seed {seed}");
        }
    }

    #[test]
    fn one_step_minimum_precedes_upcrossing() {
        for seed in 0..20 {
            let a = accel(StrategyTag::OneStep, seed);
            let min_at = (0..a.len()).min_by(|&i, &j| a[i].total_cmp(&a[j])).unwrap();
            let up = (1..a.len())
                .find(|&i| a[i - 1] < 0.0 && a[i] >= 0.0)
                .unwrap();
            assert!(min_at < up, "seed {seed}");
        }
    }

    #[test]
    fn two_step_has_two_disjoint_valleys() {
        let depth = ArchetypeParams::default().valley_depth;
        for seed in 0..20 {
            let a = accel(StrategyTag::TwoStep, seed);
            let starts = (0..a.len())
                .filter(|&i| a[i] < -depth && (i == 0 || a[i - 1] >= -depth))
                .count();
            assert_eq!(starts, 2, "seed {seed}");
        }
    }

    #[test]
    fn schedule_and_breakpoints_agree() {
        for tag in StrategyTag::ALL {
            let arc = synth_archetype(tag, 3, &ArchetypeParams::default()).unwrap();
            let switches = arc.truth.schedule.entries().len() - 1;
            assert_eq!(arc.truth.breakpoints.len(), switches, "{tag}");
            assert!(arc.truth.breakpoints.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(arc.trial.strategy, Some(tag));
        }
    }

    #[test]
    fn push_sets_initial_velocity() {
        let arc = synth_archetype(StrategyTag::OneStep, 11, &ArchetypeParams::default()).unwrap();
        let v0 = arc.trial.velocity().unwrap()[0];
        assert!((v0 - arc.truth.impulses[0].delta_v).abs() < 1e-12);
        assert_eq!(arc.trial.position()[0], arc.truth.q0);
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = [
            ArchetypeParams {
                dt: 0.0,
                ..Default::default()
            },
            ArchetypeParams {
                record_every: 0,
                ..Default::default()
            },
            ArchetypeParams {
                step_push: (0.5, 0.4),
                ..Default::default()
            },
            ArchetypeParams {
                mass_kg: (-1.0, 80.0),
                ..Default::default()
            },
        ];
        for params in bad {
            assert!(matches!(
                synth_archetype(StrategyTag::Ankle, 0, &params),
                Err(SimError::InvalidOptions(_))
            ));
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let p = ArchetypeParams::default();
        for tag in StrategyTag::ALL {
            let a = synth_archetype(tag, 42, &p).unwrap();
            let b = synth_archetype(tag, 42, &p).unwrap();
            assert_eq!(a, b);
        }
        let c = synth_archetype(StrategyTag::Toe, 43, &p).unwrap();
        assert_ne!(c, synth_archetype(StrategyTag::Toe, 42, &p).unwrap());
    }
}
