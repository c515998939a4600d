use nalgebra::{DMatrix, DVector};

use super::{DesignMatrix, FitError};

/// Ridge solution of `design` by QR factorisation of the system augmented
/// with `sqrt(lambda) * I` rows and zero targets.
pub fn ridge_solve(design: &DesignMatrix, lambda: f64) -> Result<Vec<f64>, FitError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(FitError::InvalidSpec(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let x = design.matrix();
    let (n, k) = x.shape();
    let extra = if lambda > 0.0 { k } else { 0 };
    if n + extra < k || k == 0 {
        return Err(FitError::SingularSystem);
    }

    let mut a = DMatrix::zeros(n + extra, k);
    a.rows_mut(0, n).copy_from(x);
    let mut b = DVector::zeros(n + extra);
    b.rows_mut(0, n).copy_from_slice(design.target());
    if extra > 0 {
        a.view_mut((n, 0), (k, k)).fill_diagonal(lambda.sqrt());
    }

    let qr = a.qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    let tol = scale * f64::EPSILON * (n + extra) as f64;
    if scale == 0.0 || r.diagonal().iter().any(|d| d.abs() <= tol) {
        return Err(FitError::SingularSystem);
    }
    let qtb = qr.q().transpose() * b;
    let w = r
        .solve_upper_triangular(&qtb)
        .ok_or(FitError::SingularSystem)?;
    Ok(w.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn design(rows: &[Vec<f64>], y: &[f64]) -> DesignMatrix {
        let cols = (0..rows[0].len()).map(|i| format!("c{i}")).collect();
        DesignMatrix::new(cols, rows.to_vec(), y.to_vec()).unwrap()
    }

    /// Normal equations (X^T X + lambda I) w = X^T y by Gaussian elimination
    /// with partial pivoting.
    fn normal_equations(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
        let k = rows[0].len();
        let mut m = vec![vec![0.0; k + 1]; k];
        for (row, &yi) in rows.iter().zip(y) {
            for i in 0..k {
                for j in 0..k {
                    m[i][j] += row[i] * row[j];
                }
                m[i][k] += row[i] * yi;
            }
        }
        for (i, r) in m.iter_mut().enumerate() {
            r[i] += lambda;
        }
        for col in 0..k {
            let pivot = (col..k)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            m.swap(col, pivot);
            let pivot_row = m[col].clone();
            for row in m.iter_mut().skip(col + 1) {
                let f = row[col] / pivot_row[col];
                for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
            }
        }
        let mut w = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| m[i][j] * w[j]).sum();
            w[i] = (m[i][k] - s) / m[i][i];
        }
        w
    }

    fn norm(w: &[f64]) -> f64 {
        w.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn square_system_exact() {
        let rows = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let w = ridge_solve(&design(&rows, &[5.0, 10.0]), 0.0).unwrap();
        assert!(
            (w[0] - 1.0).abs() < 1e-12 && (w[1] - 3.0).abs() < 1e-12,
            "{w:?}"
        );
    }

    #[test]
    fn identity_with_small_lambda() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let w = ridge_solve(&design(&rows, &[1.0, 1.0]), 0.01).unwrap();
        for wi in w {
            assert!((wi - 1.0 / 1.01).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_target_zero_solution() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5]];
        for lambda in [0.0, 0.01, 5.0] {
            let w = ridge_solve(&design(&rows, &[0.0; 3]), lambda).unwrap();
            assert!(w.iter().all(|&x| x == 0.0), "{w:?}");
        }
    }

    #[test]
    fn rank_deficient_without_lambda() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        let d = design(&rows, &[1.0, 2.0, 3.0]);
        assert!(matches!(
            ridge_solve(&d, 0.0),
            Err(FitError::SingularSystem)
        ));
        assert!(ridge_solve(&d, 0.01).is_ok());
        let wide = design(&[vec![1.0, 2.0]], &[1.0]);
        assert!(matches!(
            ridge_solve(&wide, 0.0),
            Err(FitError::SingularSystem)
        ));
        assert!(ridge_solve(&d, -1.0).is_err());
    }

    fn system() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (1usize..=9).prop_flat_map(|k| {
            (k.max(10)..=200).prop_flat_map(move |n| {
                (
                    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, k), n),
                    prop::collection::vec(-5.0..5.0f64, n),
                )
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_normal_equations((rows, y) in system(), lambda in prop::sample::select(vec![0.01, 1.0])) {
            let w = ridge_solve(&design(&rows, &y), lambda).unwrap();
            let oracle = normal_equations(&rows, &y, lambda);
            let diff: Vec<f64> = w.iter().zip(&oracle).map(|(a, b)| a - b).collect();
            prop_assert!(norm(&diff) <= 1e-9 * norm(&oracle).max(1e-12));
        }

        #[test]
        fn shrinkage_is_monotone((rows, y) in system(), l1 in 0.0..10.0f64, dl in 0.0..10.0f64) {
            let d = design(&rows, &y);
            let w1 = ridge_solve(&d, l1 + 1e-6).unwrap();
            let w2 = ridge_solve(&d, l1 + 1e-6 + dl).unwrap();
            prop_assert!(norm(&w1) >= norm(&w2) * (1.0 - 1e-12));
        }
    }
}
