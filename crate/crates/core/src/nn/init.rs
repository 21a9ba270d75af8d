use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::matrix::Matrix;

/// He (Kaiming) normal initialization: entries ~ N(0, 2 / fan_in).
///
/// # Panics
///
/// If `fan_in` is zero.
pub fn he_init<R: Rng + ?Sized>(fan_in: usize, rows: usize, cols: usize, rng: &mut R) -> Matrix {
    assert!(fan_in >= 1, "he_init: fan_in must be at least 1");
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite positive std");
    let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches shape")
}
