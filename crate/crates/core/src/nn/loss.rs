use super::matrix::Matrix;
use crate::error::{Error, Result};

/// `log σ²` is clamped to this range before exponentiation.
pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;

#[inline]
pub(crate) fn clamp_logvar(v: f64) -> f64 {
    v.clamp(LOGVAR_MIN, LOGVAR_MAX)
}

/// Mean squared error averaged over every element (samples × features).
pub fn mse_loss(x: &Matrix, x_hat: &Matrix) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::Shape {
            op: "mse_loss",
            left: x.shape(),
            right: x_hat.shape(),
        });
    }
    let n = x.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = x
        .as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / n as f64)
}

/// KL divergence from `N(μ, σ²)` to `N(0, I)`, summed over latent dimensions
/// and averaged over the batch. `logvar` is clamped to
/// `[LOGVAR_MIN, LOGVAR_MAX]`.
pub fn kl_gaussian(mu: &Matrix, logvar: &Matrix) -> Result<f64> {
    if mu.shape() != logvar.shape() {
        return Err(Error::Shape {
            op: "kl_gaussian",
            left: mu.shape(),
            right: logvar.shape(),
        });
    }
    let b = mu.rows();
    if b == 0 {
        return Ok(0.0);
    }
    let sum: f64 = mu
        .as_slice()
        .iter()
        .zip(logvar.as_slice())
        .map(|(&m, &lv)| {
            let lv = clamp_logvar(lv);
            -0.5 * (1.0 + lv - m * m - lv.exp())
        })
        .sum();
    Ok(sum / b as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn mse_examples() {
        let a = m(&[&[0.3, 0.1]]);
        assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(mse_loss(&m(&[&[0.0], &[2.0]]), &m(&[&[1.0], &[1.0]])).unwrap(), 1.0);
        assert_eq!(mse_loss(&m(&[&[0.0, 0.0]]), &m(&[&[3.0, 4.0]])).unwrap(), 12.5);
        assert!(mse_loss(&m(&[&[0.0]]), &m(&[&[0.0, 1.0]])).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_gaussian(&m(&[&[0.0]]), &m(&[&[0.0]])).unwrap(), 0.0);
        assert!((kl_gaussian(&m(&[&[1.0]]), &m(&[&[0.0]])).unwrap() - 0.5).abs() < 1e-12);
        let expect = 0.5 * (4.0 - 4f64.ln() - 1.0);
        let got = kl_gaussian(&m(&[&[0.0]]), &m(&[&[4f64.ln()]])).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 0.8069).abs() < 1e-4);
    }

    #[test]
    fn kl_clamps_extreme_logvar() {
        let huge = kl_gaussian(&m(&[&[0.0]]), &m(&[&[1e6]])).unwrap();
        let at_clamp = kl_gaussian(&m(&[&[0.0]]), &m(&[&[LOGVAR_MAX]])).unwrap();
        assert!(huge.is_finite());
        assert_eq!(huge, at_clamp);
        let tiny = kl_gaussian(&m(&[&[0.0]]), &m(&[&[-1e6]])).unwrap();
        assert_eq!(tiny, kl_gaussian(&m(&[&[0.0]]), &m(&[&[LOGVAR_MIN]])).unwrap());
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(
            mu in proptest::collection::vec(-5.0f64..5.0, 6),
            lv in proptest::collection::vec(-12.0f64..12.0, 6),
        ) {
            let mu = Matrix::from_vec(2, 3, mu).unwrap();
            let lv = Matrix::from_vec(2, 3, lv).unwrap();
            let kl = kl_gaussian(&mu, &lv).unwrap();
            prop_assert!(kl >= 0.0);
        }

        #[test]
        fn kl_zero_only_at_prior(mu in -2.0f64..2.0, lv in -2.0f64..2.0) {
            prop_assume!(mu.abs() > 1e-3 || lv.abs() > 1e-3);
            let kl = kl_gaussian(&m(&[&[mu]]), &m(&[&[lv]])).unwrap();
            prop_assert!(kl > 0.0);
        }
    }
}
