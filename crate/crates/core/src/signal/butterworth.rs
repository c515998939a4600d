use std::f64::consts::PI;

use super::SignalError;

/// Low-pass filter configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
    pub zero_phase: bool,
}

impl FilterSpec {
    /// Fourth-order, 30 Hz, zero-phase.
    pub fn standard(sample_rate_hz: f64) -> Self {
        Self {
            order: 4,
            cutoff_hz: 30.0,
            sample_rate_hz,
            zero_phase: true,
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.order == 0 {
            return Err(SignalError::InvalidSpec("order must be at least 1".into()));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < nyquist && nyquist.is_finite()) {
            return Err(SignalError::InvalidSpec(format!(
                "cutoff {} Hz must lie in (0, {nyquist}) Hz",
                self.cutoff_hz
            )));
        }
        Ok(())
    }

    /// Analog-prototype magnitude `1/sqrt(1 + (f/fc)^(2n))` at `freq_hz`.
    pub fn analog_magnitude(&self, freq_hz: f64) -> f64 {
        let r = freq_hz / self.cutoff_hz;
        1.0 / (1.0 + r.powi(2 * self.order as i32)).sqrt()
    }
}

/// One second-order (or degenerate first-order) section, unit DC gain,
/// normalised so `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Transposed direct form II state for a constant input of 1.
    fn steady_state(&self) -> [f64; 2] {
        let z2 = self.b[2] - self.a[1];
        let z1 = self.b[1] - self.a[0] + z2;
        [z1, z2]
    }

    fn run(&self, xs: &mut [f64], init: f64) {
        let [mut z1, mut z2] = self.steady_state();
        z1 *= init;
        z2 *= init;
        for x in xs.iter_mut() {
            let input = *x;
            let y = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * y + z2;
            z2 = self.b[2] * input - self.a[1] * y;
            *x = y;
        }
    }

    /// Complex frequency response magnitude at normalised angular frequency `w`.
    fn magnitude(&self, w: f64) -> f64 {
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b[0] + self.b[1] * c1 + self.b[2] * c2,
            self.b[1] * s1 + self.b[2] * s2,
        );
        let den = (
            1.0 + self.a[0] * c1 + self.a[1] * c2,
            self.a[0] * s1 + self.a[1] * s2,
        );
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }
}

/// Digital Butterworth low-pass realised as cascaded sections via the
/// prewarped bilinear transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    sections: Vec<Biquad>,
}

impl Butterworth {
    pub fn design(spec: &FilterSpec) -> Result<Self, SignalError> {
        spec.validate()?;
        let n = spec.order;
        let k = 2.0 * spec.sample_rate_hz;
        let wc = k * (PI * spec.cutoff_hz / spec.sample_rate_hz).tan();

        let mut sections = Vec::with_capacity(n.div_ceil(2));
        for i in 0..n / 2 {
            // Upper-half-plane pole of the analog prototype.
            let theta = PI * (2 * i + n + 1) as f64 / (2 * n) as f64;
            let re = wc * theta.cos();
            let mag2 = wc * wc;
            let d0 = k * k - 2.0 * re * k + mag2;
            let d1 = 2.0 * (mag2 - k * k);
            let d2 = k * k + 2.0 * re * k + mag2;
            sections.push(Biquad {
                b: [mag2 / d0, 2.0 * mag2 / d0, mag2 / d0],
                a: [d1 / d0, d2 / d0],
            });
        }
        if n % 2 == 1 {
            let d0 = k + wc;
            sections.push(Biquad {
                b: [wc / d0, wc / d0, 0.0],
                a: [(wc - k) / d0, 0.0],
            });
        }
        Ok(Self { sections })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Single causal pass, initial state matched to the first sample.
    pub fn apply(&self, xs: &mut [f64]) {
        if xs.is_empty() {
            return;
        }
        let init = xs[0];
        for s in &self.sections {
            s.run(xs, init);
        }
    }

    /// Digital magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        self.sections.iter().map(|s| s.magnitude(w)).product()
    }
}

/// Applies the low-pass described by `spec`. In zero-phase mode the signal is
/// extended by odd reflection (`3 * order` samples each side), filtered
/// forward, then backward.
pub fn butterworth_lowpass(xs: &[f64], spec: &FilterSpec) -> Result<Vec<f64>, SignalError> {
    let filter = Butterworth::design(spec)?;
    let need = 3 * spec.order;
    if xs.len() < need.max(2) {
        return Err(SignalError::TooShort {
            needed: need.max(2),
            got: xs.len(),
        });
    }
    if !spec.zero_phase {
        let mut out = xs.to_vec();
        filter.apply(&mut out);
        return Ok(out);
    }

    let n = xs.len();
    let pad = need.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * xs[0] - xs[i]));
    ext.extend_from_slice(xs);
    ext.extend((1..=pad).map(|i| 2.0 * xs[n - 1] - xs[n - 1 - i]));

    filter.apply(&mut ext);
    ext.reverse();
    filter.apply(&mut ext);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    /// Least-squares amplitude of the `freq` component, skipping `trim`
    /// samples at each end.
    fn tone_amplitude(xs: &[f64], freq: f64, fs: f64, trim: usize) -> f64 {
        let (mut ss, mut cc, mut sc, mut xs_s, mut xs_c) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, x) in xs.iter().enumerate().take(xs.len() - trim).skip(trim) {
            let w = 2.0 * PI * freq * i as f64 / fs;
            let (s, c) = w.sin_cos();
            ss += s * s;
            cc += c * c;
            sc += s * c;
            xs_s += x * s;
            xs_c += x * c;
        }
        let det = ss * cc - sc * sc;
        let a = (xs_s * cc - xs_c * sc) / det;
        let b = (xs_c * ss - xs_s * sc) / det;
        a.hypot(b)
    }

    #[test]
    fn constant_passes_unchanged() {
        let spec = FilterSpec::standard(100.0);
        let xs = vec![3.25; 200];
        let ys = butterworth_lowpass(&xs, &spec).unwrap();
        assert!(ys.iter().all(|y| (y - 3.25).abs() < 1e-9));
        let single = butterworth_lowpass(
            &xs,
            &FilterSpec {
                zero_phase: false,
                ..spec
            },
        )
        .unwrap();
        assert!(single.iter().all(|y| (y - 3.25).abs() < 1e-9));
    }

    #[test]
    fn half_power_at_cutoff() {
        let spec = FilterSpec::standard(100.0);
        let filter = Butterworth::design(&spec).unwrap();
        assert!((filter.magnitude(30.0, 100.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((filter.magnitude(0.0, 100.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_phase_halves_amplitude_at_cutoff() {
        let spec = FilterSpec::standard(100.0);
        let ys = butterworth_lowpass(&sine(30.0, 100.0, 2000), &spec).unwrap();
        let amp = tone_amplitude(&ys, 30.0, 100.0, 200);
        assert!((amp - 0.5).abs() < 0.02, "amplitude {amp}");
    }

    #[test]
    fn single_pass_stopband_at_three_times_cutoff() {
        // 90 Hz needs a sample rate above 180 Hz; use the 600 Hz treadmill rate.
        let spec = FilterSpec {
            zero_phase: false,
            ..FilterSpec::standard(600.0)
        };
        let ys = butterworth_lowpass(&sine(90.0, 600.0, 6000), &spec).unwrap();
        let amp = tone_amplitude(&ys, 90.0, 600.0, 600);
        let oracle = spec.analog_magnitude(90.0);
        assert!((oracle - 0.0123).abs() < 1e-4);
        assert!(amp <= 0.02, "amplitude {amp}");
    }

    #[test]
    fn odd_orders_have_unit_dc_gain() {
        for order in 1..=7 {
            let spec = FilterSpec {
                order,
                ..FilterSpec::standard(100.0)
            };
            let f = Butterworth::design(&spec).unwrap();
            assert!(
                (f.magnitude(0.0, 100.0) - 1.0).abs() < 1e-12,
                "order {order}"
            );
            assert!((f.magnitude(30.0, 100.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_specs() {
        let at_nyquist = FilterSpec {
            cutoff_hz: 50.0,
            ..FilterSpec::standard(100.0)
        };
        assert!(matches!(
            butterworth_lowpass(&[0.0; 100], &at_nyquist),
            Err(SignalError::InvalidSpec(_))
        ));
        let zero_order = FilterSpec {
            order: 0,
            ..FilterSpec::standard(100.0)
        };
        assert!(zero_order.validate().is_err());
        assert!(matches!(
            butterworth_lowpass(&[0.0; 5], &FilterSpec::standard(100.0)),
            Err(SignalError::TooShort { .. })
        ));
    }

    #[test]
    fn zero_phase_has_no_lag() {
        let spec = FilterSpec::standard(100.0);
        // band-limited: sum of low tones well inside the passband
        let xs: Vec<f64> = (0..1000)
            .map(|i| {
                let t = i as f64 / 100.0;
                (2.0 * PI * 1.3 * t).sin() + 0.5 * (2.0 * PI * 4.1 * t).cos()
            })
            .collect();
        let ys = butterworth_lowpass(&xs, &spec).unwrap();
        let xcorr = |lag: isize| -> f64 {
            (100..900)
                .map(|i| xs[i] * ys[(i as isize + lag) as usize])
                .sum()
        };
        let best = (-5..=5)
            .max_by(|&a, &b| xcorr(a).total_cmp(&xcorr(b)))
            .unwrap();
        assert_eq!(best, 0);
    }
}
