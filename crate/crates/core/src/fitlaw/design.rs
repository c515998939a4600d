use nalgebra::DMatrix;

use super::{ControlLawSpec, FitError, Metric, PolyDerivative, Term, EXP_ERROR_LIMIT};
use crate::trialdata::{ReferenceState, Trial};

/// Regressor matrix (rows are samples) and acceleration target.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    columns: Vec<String>,
    x: DMatrix<f64>,
    target: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(
        columns: Vec<String>,
        rows: Vec<Vec<f64>>,
        target: Vec<f64>,
    ) -> Result<Self, FitError> {
        if rows.len() != target.len() {
            return Err(FitError::LengthMismatch(rows.len(), target.len()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != columns.len()) {
            return Err(FitError::DimensionMismatch {
                expected: columns.len(),
                got: bad.len(),
            });
        }
        let finite = rows.iter().flatten().chain(&target).all(|x| x.is_finite());
        if !finite {
            return Err(FitError::NonFinite("design entries must be finite".into()));
        }
        let x = DMatrix::from_fn(rows.len(), columns.len(), |i, j| rows[i][j]);
        Ok(Self { columns, x, target })
    }

    pub fn column_names(&self) -> &[String] {
        &self.columns
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.x.column(j).iter().copied().collect())
    }
}

const POWERS: [i32; 4] = [7, 5, 3, 1];

/// Builds the regression problem for `spec` against `reference`.
///
/// `initial_accumulated_error` seeds the integral column so a phase can
/// continue the sum of the phases before it.
pub fn build_design(
    trial: &Trial,
    spec: &ControlLawSpec,
    reference: &ReferenceState,
    initial_accumulated_error: f64,
) -> Result<DesignMatrix, FitError> {
    spec.validate()?;
    let v = trial.require_velocity()?;
    let target = trial.require_acceleration()?.to_vec();
    let e: Vec<f64> = trial
        .position()
        .iter()
        .map(|p| reference.p_star - p)
        .collect();
    let de: Vec<f64> = v.iter().map(|v| reference.v_star - v).collect();

    if spec.metric == Metric::Exponential {
        let worst = e.iter().chain(&de).map(|x| x.abs()).fold(0.0, f64::max);
        if worst > EXP_ERROR_LIMIT || worst.is_nan() {
            return Err(FitError::NonFinite(format!(
                "error magnitude {worst} exceeds the exponential limit {EXP_ERROR_LIMIT}"
            )));
        }
    }

    let mut sum = initial_accumulated_error;
    let rows = e
        .iter()
        .zip(&de)
        .map(|(&e, &de)| {
            sum += e;
            let mut row = Vec::with_capacity(8);
            for term in spec.terms() {
                match (spec.metric, term) {
                    (Metric::Linear, Term::P) => row.push(e),
                    (Metric::Linear, Term::I) => row.push(sum),
                    (Metric::Linear, Term::D) => row.push(de),
                    (Metric::Polynomial, Term::P) => row.extend(POWERS.map(|n| e.powi(n))),
                    (Metric::Polynomial, Term::D) => {
                        row.extend(POWERS.map(|n| match spec.poly_derivative {
                            PolyDerivative::ChainRule => n as f64 * e.powi(n - 1) * de,
                            PolyDerivative::ErrorRatePowers => de.powi(n),
                        }))
                    }
                    (Metric::Exponential, Term::P) => row.push(e.exp()),
                    (Metric::Exponential, Term::D) => row.push(de.exp()),
                    (_, Term::I) => unreachable!("validated: I is linear only"),
                }
            }
            row
        })
        .collect();
    DesignMatrix::new(spec.column_names(), rows, target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_error_trial(n: usize) -> Trial {
        // p* - p = 1 and v* - v = 1 with reference (1, 1) and zero states
        let time = (0..n).map(|i| i as f64 * 0.01).collect();
        Trial::new(
            "d",
            time,
            vec![0.0; n],
            Some(vec![0.0; n]),
            Some(vec![0.0; n]),
            70.0,
        )
        .unwrap()
    }

    #[test]
    fn polynomial_row_at_unit_error() {
        let spec = ControlLawSpec::parse("PD", Metric::Polynomial, 0.01).unwrap();
        let d = build_design(
            &unit_error_trial(3),
            &spec,
            &ReferenceState::new(1.0, 1.0),
            0.0,
        )
        .unwrap();
        let row: Vec<f64> = d.matrix().row(0).iter().copied().collect();
        assert_eq!(row, [1.0, 1.0, 1.0, 1.0, 7.0, 5.0, 3.0, 1.0]);

        let alt = spec.with_poly_derivative(PolyDerivative::ErrorRatePowers);
        let trial = Trial::new(
            "d",
            vec![0.0, 0.01, 0.02],
            vec![0.0; 3],
            Some(vec![-2.0; 3]),
            Some(vec![0.0; 3]),
            70.0,
        )
        .unwrap();
        let d = build_design(&trial, &alt, &ReferenceState::new(1.0, 0.0), 0.0).unwrap();
        let row: Vec<f64> = d.matrix().row(0).iter().copied().collect();
        assert_eq!(row[4..], [128.0, 32.0, 8.0, 2.0]);
    }

    #[test]
    fn zero_error_linear_pid() {
        let spec = ControlLawSpec::parse("PID", Metric::Linear, 0.01).unwrap();
        let d = build_design(&unit_error_trial(5), &spec, &ReferenceState::ORIGIN, 0.0).unwrap();
        assert!(d.column("kp").unwrap().iter().all(|&x| x == 0.0));
        assert!(d.column("ki").unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn integral_column_is_running_sum_including_current() {
        let spec = ControlLawSpec::parse("I", Metric::Linear, 0.0).unwrap();
        let t = Trial::new(
            "d",
            vec![0.0, 0.01, 0.02, 0.03],
            vec![1.0, 2.0, 3.0, 4.0],
            Some(vec![0.0; 4]),
            Some(vec![0.0; 4]),
            70.0,
        )
        .unwrap();
        let d = build_design(&t, &spec, &ReferenceState::ORIGIN, 0.5).unwrap();
        assert_eq!(d.column("ki").unwrap(), [-0.5, -2.5, -5.5, -9.5]);
    }

    #[test]
    fn exponential_row_at_zero_error() {
        let spec = ControlLawSpec::parse("PD", Metric::Exponential, 0.01).unwrap();
        let d = build_design(&unit_error_trial(3), &spec, &ReferenceState::ORIGIN, 0.0).unwrap();
        let row: Vec<f64> = d.matrix().row(0).iter().copied().collect();
        assert_eq!(row, [1.0, 1.0]);
        let far = build_design(
            &unit_error_trial(3),
            &spec,
            &ReferenceState::new(60.0, 0.0),
            0.0,
        );
        assert!(matches!(far, Err(FitError::NonFinite(_))));
    }

    #[test]
    fn missing_kinematics() {
        let t = Trial::new("d", vec![0.0, 0.01, 0.02], vec![0.0; 3], None, None, 70.0).unwrap();
        let spec = ControlLawSpec::parse("PD", Metric::Linear, 0.01).unwrap();
        assert!(matches!(
            build_design(&t, &spec, &ReferenceState::ORIGIN, 0.0),
            Err(FitError::Trial(_))
        ));
    }
}
