use serde::{Deserialize, Serialize};

use super::FitError;

fn check_lengths(predicted: &[f64], observed: &[f64]) -> Result<(), FitError> {
    if predicted.len() != observed.len() {
        return Err(FitError::LengthMismatch(predicted.len(), observed.len()));
    }
    if predicted.is_empty() {
        return Err(FitError::Empty);
    }
    Ok(())
}

/// Root-mean-square residual.
pub fn rms_error(predicted: &[f64], observed: &[f64]) -> Result<f64, FitError> {
    check_lengths(predicted, observed)?;
    let ss: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(f, y)| (f - y) * (f - y))
        .sum();
    Ok((ss / predicted.len() as f64).sqrt())
}

/// Coefficient of determination `1 - S_res / S_tot`; negative when the model
/// is worse than the mean.
pub fn r_squared(predicted: &[f64], observed: &[f64]) -> Result<f64, FitError> {
    check_lengths(predicted, observed)?;
    if observed.len() < 2 {
        return Err(FitError::DegenerateTarget);
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let s_tot: f64 = observed.iter().map(|y| (y - mean) * (y - mean)).sum();
    if s_tot == 0.0 {
        return Err(FitError::DegenerateTarget);
    }
    let s_res: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(f, y)| (f - y) * (f - y))
        .sum();
    Ok(1.0 - s_res / s_tot)
}

/// Sample-weighted summary over phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub rms: f64,
    pub r2: f64,
    pub n: usize,
}

/// Combines `(n, rms, r2)` per phase: RMS as the sample-weighted power mean,
/// so it equals the RMS of the concatenated residuals, and R² as the
/// sample-weighted arithmetic mean.
pub fn aggregate(parts: &[(usize, f64, f64)]) -> Result<Aggregate, FitError> {
    let n: usize = parts.iter().map(|p| p.0).sum();
    if n == 0 {
        return Err(FitError::Empty);
    }
    let total = n as f64;
    let ms: f64 = parts
        .iter()
        .map(|&(k, rms, _)| k as f64 * rms * rms)
        .sum::<f64>()
        / total;
    let r2: f64 = parts.iter().map(|&(k, _, r2)| k as f64 * r2).sum::<f64>() / total;
    Ok(Aggregate {
        rms: ms.sqrt(),
        r2,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rms_cases() {
        assert_eq!(rms_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rms_error(&[1.5, 2.5, 0.5], &[1.0, 2.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((rms_error(&[1.0, 2.0], &[0.0, 0.0]).unwrap() - 2.5_f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            rms_error(&[1.0], &[1.0, 2.0]),
            Err(FitError::LengthMismatch(1, 2))
        ));
        assert!(matches!(rms_error(&[], &[]), Err(FitError::Empty)));
    }

    #[test]
    fn r2_cases() {
        let y = [0.3, -1.0, 2.0, 0.7];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        let mean = y.iter().sum::<f64>() / 4.0;
        assert!(r_squared(&[mean; 4], &y).unwrap().abs() < 1e-15);
        assert_eq!(r_squared(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), -3.0);
        assert!(matches!(
            r_squared(&[1.0, 1.0], &[2.0, 2.0]),
            Err(FitError::DegenerateTarget)
        ));
    }

    #[test]
    fn weighted_aggregate_by_hand() {
        let agg = aggregate(&[(30, 0.1, 0.9), (70, 0.2, 0.5)]).unwrap();
        let expect = ((30.0 * 0.01 + 70.0 * 0.04) / 100.0_f64).sqrt();
        assert!((agg.rms - expect).abs() < 1e-15);
        assert!((agg.rms - 0.17607).abs() < 1e-5);
        assert!((agg.r2 - 0.62).abs() < 1e-15);
        assert_eq!(agg.n, 100);
        assert!(aggregate(&[]).is_err());
    }

    proptest! {
        #[test]
        fn aggregate_rms_equals_concatenated_rms(
            res in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 1..40), 1..5)
        ) {
            let zeros: Vec<Vec<f64>> = res.iter().map(|r| vec![0.0; r.len()]).collect();
            let parts: Vec<(usize, f64, f64)> = res
                .iter()
                .zip(&zeros)
                .map(|(r, z)| (r.len(), rms_error(r, z).unwrap(), 0.0))
                .collect();
            let flat: Vec<f64> = res.concat();
            let direct = rms_error(&flat, &vec![0.0; flat.len()]).unwrap();
            prop_assert!((aggregate(&parts).unwrap().rms - direct).abs() <= 1e-12);
        }
    }
}
