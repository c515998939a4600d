use pushfit::fitlaw::{
    build_design, fit_segments, fit_trial, predict, rms_error, ControlLawSpec, Metric,
};
use pushfit::segment::{Segmentation, ANKLE_LABELS, ONE_STEP_LABELS};
use pushfit::simulate::{
    simulate_trial, GainSchedule, GainSet, Impulse, ScheduleEntry, SimOptions,
};
use pushfit::stats::initial_state;
use pushfit::trialdata::{reference_state, ReferenceState, StrategyTag, Trial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(fit: f64, truth: f64) -> f64 {
    (fit - truth).abs() / truth.abs()
}

fn pd(law: &str, metric: Metric, lambda: f64) -> ControlLawSpec {
    ControlLawSpec::parse(law, metric, lambda).unwrap()
}

/// Runs long enough for the slowest mode to decay by e^-20.
fn settled(gains: &GainSet) -> SimOptions {
    SimOptions {
        duration: 20.0 / gains.slowest_decay_rate(),
        ..SimOptions::default()
    }
}

#[test]
fn pd_gains_recovered_exactly_and_shrunk_slightly() {
    let gains = GainSet::pd(8.3515, 2.51);
    let schedule = GainSchedule::constant(gains, ReferenceState::ORIGIN);
    let kicks = Impulse::alternating(0.5, 0.7, 4, -0.6);
    let mut opts = settled(&gains);
    opts.duration += 0.5 + 0.7 * 4.0;
    let trial = simulate_trial(0.2, 0.5, &schedule, &opts, &kicks).unwrap();

    let exact = fit_trial(&trial, &pd("PD", Metric::Linear, 0.0)).unwrap();
    assert!(rel(exact.gains.get("kp").unwrap(), 8.3515) < 1e-6);
    assert!(rel(exact.gains.get("kd").unwrap(), 2.51) < 1e-6);

    let ridge = fit_trial(&trial, &pd("PD", Metric::Linear, 0.01)).unwrap();
    for name in ["kp", "kd"] {
        let (a, b) = (
            ridge.gains.get(name).unwrap(),
            exact.gains.get(name).unwrap(),
        );
        assert!(a.abs() <= b.abs() && rel(a, b) < 0.01, "{name}: {a} vs {b}");
    }
}

#[test]
fn random_pd_gains_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let gains = GainSet::pd(rng.random_range(2.0..15.0), rng.random_range(1.0..6.0));
        let schedule = GainSchedule::constant(gains, ReferenceState::ORIGIN);
        let kicks = Impulse::alternating(0.5, 0.7, 4, -0.6);
        let mut opts = settled(&gains);
        opts.duration += 0.5 + 0.7 * 4.0;
        let q0 = rng.random_range(0.1..0.3);
        let v0 = rng.random_range(0.3..0.8);
        let trial = simulate_trial(q0, v0, &schedule, &opts, &kicks).unwrap();
        let fit = fit_trial(&trial, &pd("PD", Metric::Linear, 0.0)).unwrap();
        assert!(rel(fit.gains.get("kp").unwrap(), gains.kp_over_m) < 1e-6);
        assert!(rel(fit.gains.get("kd").unwrap(), gains.kd_over_m) < 1e-6);
    }
}

#[test]
fn pid_recovered_at_integrator_rate() {
    let gains = GainSet::pid(9.0, 2.0, 3.0);
    // The integral pole near ki/kp is the slowest mode.
    let opts = SimOptions {
        duration: 20.0 * 9.0 / 2.0 * 1.2,
        record_every: 1,
        ..SimOptions::default()
    };
    let schedule = GainSchedule::constant(gains, ReferenceState::ORIGIN);
    let trial = simulate_trial(0.05, 0.4, &schedule, &opts, &[]).unwrap();
    let fit = fit_trial(&trial, &pd("PID", Metric::Linear, 0.0)).unwrap();
    assert!(rel(fit.gains.get("kp").unwrap(), 9.0) < 1e-6);
    assert!(rel(fit.gains.get("kd").unwrap(), 3.0) < 1e-6);
    // The fitted sum has no dt factor.
    assert!(rel(fit.gains.get("ki").unwrap(), 2.0 * opts.dt) < 1e-6);
}

fn two_phase(first: GainSet, second: GainSet, switch: f64, q0: f64, v0: f64) -> Trial {
    let schedule = GainSchedule::new(vec![
        ScheduleEntry {
            switch_time: 0.0,
            gains: first,
            reference: ReferenceState::ORIGIN,
        },
        ScheduleEntry {
            switch_time: switch,
            gains: second,
            reference: ReferenceState::ORIGIN,
        },
    ])
    .unwrap();
    let mut opts = settled(&second);
    opts.duration += switch;
    simulate_trial(q0, v0, &schedule, &opts, &[]).unwrap()
}

#[test]
fn ankle_schedule_refit_per_phase() {
    let trial = two_phase(
        GainSet::pd(8.86, 3.29),
        GainSet::pd(3.46, 1.58),
        0.5,
        -0.01,
        0.12,
    );
    let spec = pd("PD", Metric::Linear, 0.0);
    let phases = [
        trial.slice(0, 50).unwrap(),
        trial.slice(50, trial.len()).unwrap(),
    ];
    let reference = reference_state(&trial).unwrap();
    for (part, (kp, kd)) in phases.iter().zip([(8.86, 3.29), (3.46, 1.58)]) {
        let design = build_design(part, &spec, &reference, 0.0).unwrap();
        let w = pushfit::fitlaw::ridge_solve(&design, 0.0).unwrap();
        assert!(rel(w[0], kp) < 0.01 && rel(w[1], kd) < 0.01, "{w:?}");
    }

    let seg = Segmentation::new(
        vec![50],
        ANKLE_LABELS.iter().map(|s| s.to_string()).collect(),
        StrategyTag::Ankle,
        trial.len(),
    )
    .unwrap();
    let fit = fit_segments(&trial, &seg, &spec).unwrap();
    assert!(rel(fit.phases[0].fit.gains.get("kp").unwrap(), 8.86) < 0.01);
    assert!(rel(fit.phases[1].fit.gains.get("kd").unwrap(), 1.58) < 0.01);
}

#[test]
fn one_step_schedule_fit_segments() {
    let trial = two_phase(
        GainSet::pd(13.51, 5.30),
        GainSet::pd(7.55, 4.43),
        0.4,
        0.08,
        0.45,
    );
    let seg = Segmentation::new(
        vec![40],
        ONE_STEP_LABELS.iter().map(|s| s.to_string()).collect(),
        StrategyTag::OneStep,
        trial.len(),
    )
    .unwrap();
    let fit = fit_segments(&trial, &seg, &pd("PD", Metric::Linear, 0.0)).unwrap();
    for (phase, (kp, kd)) in fit.phases.iter().zip([(13.51, 5.30), (7.55, 4.43)]) {
        assert!(rel(phase.fit.gains.get("kp").unwrap(), kp) < 0.01);
        assert!(rel(phase.fit.gains.get("kd").unwrap(), kd) < 0.01);
    }
}

#[test]
fn aggregate_equals_rms_of_concatenated_predictions() {
    let trial = two_phase(
        GainSet::pd(13.51, 5.30),
        GainSet::pd(7.55, 4.43),
        0.4,
        0.08,
        0.45,
    );
    let noisy_acc: Vec<f64> = trial
        .acceleration()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, a)| a + 0.02 * ((i * 37 % 11) as f64 - 5.0))
        .collect();
    let trial = trial
        .with_kinematics(
            trial.position().to_vec(),
            trial.velocity().map(<[f64]>::to_vec),
            Some(noisy_acc),
        )
        .unwrap();
    for spec in [
        pd("PD", Metric::Linear, 0.01),
        pd("PID", Metric::Linear, 0.01),
        pd("PD", Metric::Polynomial, 0.01),
    ] {
        let seg = Segmentation::new(
            vec![40],
            ONE_STEP_LABELS.iter().map(|s| s.to_string()).collect(),
            StrategyTag::OneStep,
            trial.len(),
        )
        .unwrap();
        let fit = fit_segments(&trial, &seg, &spec).unwrap();
        let reference = reference_state(&trial).unwrap();
        let mut predicted = Vec::new();
        let mut accumulated = 0.0;
        for phase in &fit.phases {
            let part = trial.slice(phase.start, phase.end).unwrap();
            let design = build_design(&part, &spec, &reference, accumulated).unwrap();
            predicted.extend(predict(&design, &phase.fit.gains.values()).unwrap());
            accumulated += part
                .position()
                .iter()
                .map(|p| reference.p_star - p)
                .sum::<f64>();
        }
        let direct = rms_error(&predicted, trial.acceleration().unwrap()).unwrap();
        assert!(
            (direct - fit.aggregate.rms).abs() < 1e-12,
            "{direct} vs {}",
            fit.aggregate.rms
        );
    }
}

#[test]
fn polynomial_degenerates_to_linear_and_exponential_is_worse() {
    let gains = GainSet::pd(8.0, 3.0);
    let schedule = GainSchedule::constant(gains, ReferenceState::ORIGIN);
    let kicks = Impulse::alternating(0.5, 0.7, 12, -0.36);
    let mut opts = settled(&gains);
    opts.duration += 0.5 + 0.7 * 12.0;
    let trial = simulate_trial(0.12, 0.3, &schedule, &opts, &kicks).unwrap();
    let max_e = trial.position().iter().fold(0.0f64, |m, p| m.max(p.abs()));
    assert!(max_e <= 0.3);

    let linear = fit_trial(&trial, &pd("PD", Metric::Linear, 0.01)).unwrap();
    let poly = fit_trial(&trial, &pd("PD", Metric::Polynomial, 0.01)).unwrap();
    let exp = fit_trial(&trial, &pd("PD", Metric::Exponential, 0.01)).unwrap();
    for name in ["kp_e7", "kp_e5", "kd_e7", "kd_e5"] {
        assert!(poly.gains.get(name).unwrap().abs() < 1e-2, "{name}");
    }
    assert!(rel(poly.gains.get("kp_e1").unwrap(), 8.0) < 0.02);
    assert!(rel(poly.gains.get("kd_e1").unwrap(), 3.0) < 0.02);
    assert!((poly.r2 - linear.r2).abs() < 0.005);
    assert!(exp.r2 < linear.r2);
}

#[test]
fn initial_velocity_is_the_push() {
    let schedule = GainSchedule::constant(GainSet::pd(8.0, 3.0), ReferenceState::ORIGIN);
    let trial = simulate_trial(
        0.0,
        0.0,
        &schedule,
        &SimOptions::default(),
        &[Impulse {
            time: 0.0,
            delta_v: 0.37,
        }],
    )
    .unwrap();
    let (p0, v0) = initial_state(&trial).unwrap();
    assert_eq!(p0, 0.0);
    assert!((v0 - 0.37).abs() < 1e-9);
}
