//! Matrix exponential by scaling and squaring with a truncated Taylor series.
//!
//! The argument is scaled by `2^-s` until its 1-norm is at most 1/2, the
//! Taylor series is summed until the next term falls below machine precision
//! relative to the partial sum (at most 40 terms), and the result is squared
//! `s` times. For skew-Hermitian input this keeps `e^A` unitary to a few
//! hundred ulps for `‖A‖_1` up to ~10^3.

use crate::error::{LoheError, Result};
use crate::matrix::MatC;

const SCALED_NORM: f64 = 0.5;
const MAX_TERMS: usize = 40;

pub fn expm(a: &MatC) -> Result<MatC> {
    if !a.is_square() {
        return Err(LoheError::MatrixDims {
            expected_rows: a.rows(),
            expected_cols: a.rows(),
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(LoheError::NonFinite("matrix exponential argument"));
    }
    let n = a.rows();
    let norm = a.norm_1();
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let b = a.scale_real(0.5f64.powi(squarings));

    let mut sum = MatC::identity(n);
    let mut term = MatC::identity(n);
    for k in 1..=MAX_TERMS {
        term = term.matmul(&b)?.scale_real(1.0 / k as f64);
        sum = sum.add(&term);
        if term.norm_1() <= f64::EPSILON * 1e-2 * sum.norm_1() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum)?;
    }
    if !sum.is_finite() {
        return Err(LoheError::NonFinite("matrix exponential result"));
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_skew_hermitian, scenario_rng};
    use crate::tensor::C64;

    #[test]
    fn zero_gives_identity() {
        let e = expm(&MatC::zeros(3, 3)).unwrap();
        assert_eq!(e, MatC::identity(3));
    }

    #[test]
    fn rotation_closed_form() {
        let theta = 1.234;
        let a = MatC::from_real_rows(&[vec![0.0, -theta], vec![theta, 0.0]]).unwrap();
        let e = expm(&a).unwrap();
        let expect = MatC::from_real_rows(&[
            vec![theta.cos(), -theta.sin()],
            vec![theta.sin(), theta.cos()],
        ])
        .unwrap();
        assert!(e.sub(&expect).frobenius_norm() < 1e-14);
    }

    #[test]
    fn diagonal_closed_form() {
        let mut a = MatC::zeros(2, 2);
        a.set(0, 0, C64::new(0.0, 3.0));
        a.set(1, 1, C64::new(-1.5, 0.0));
        let e = expm(&a).unwrap();
        assert!((e.get(0, 0) - C64::new(0.0, 3.0).exp()).norm() < 1e-14);
        assert!((e.get(1, 1) - (-1.5f64).exp()).norm() < 1e-14);
    }

    #[test]
    fn large_skew_argument_stays_unitary() {
        let mut rng = scenario_rng(21);
        for n in [2, 5, 16] {
            let a = random_skew_hermitian(n, 3.0, &mut rng).scale_real(100.0);
            let e = expm(&a).unwrap();
            let defect = e.mul_adjoint(&e).unwrap().sub(&MatC::identity(n)).frobenius_norm();
            assert!(defect < 1e-12, "n={n} defect={defect:e}");
        }
    }

    #[test]
    fn rejects_non_square_and_non_finite() {
        assert!(expm(&MatC::zeros(2, 3)).is_err());
        let mut a = MatC::zeros(2, 2);
        a.set(0, 0, C64::new(f64::INFINITY, 0.0));
        assert!(expm(&a).is_err());
    }
}
