use c2bnvae_core::nn::{batchnorm_forward, cbn_forward, BatchNorm, CbnParamBank, Matrix};
use proptest::prelude::*;

fn batch() -> impl Strategy<Value = (Matrix, Vec<usize>, usize)> {
    (2usize..10, 1usize..5, 1usize..4).prop_flat_map(|(rows, cols, classes)| {
        (
            prop::collection::vec(-50.0f64..50.0, rows * cols),
            prop::collection::vec(0..classes, rows),
        )
            .prop_map(move |(data, labels)| (Matrix::from_vec(rows, cols, data).unwrap(), labels, classes))
    })
}

fn spread_ok(x: &Matrix) -> bool {
    (0..x.cols()).all(|j| {
        let col: Vec<f64> = x.iter_rows().map(|r| r[j]).collect();
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo > 1e-3
    })
}

proptest! {
    #[test]
    fn identical_banks_match_plain_batch_norm(
        (x, labels, classes) in batch(),
        affine in prop::collection::vec((0.1f64..3.0, -2.0f64..2.0), 4),
    ) {
        let width = x.cols();
        let gamma: Vec<f64> = affine.iter().take(width).map(|a| a.0).collect();
        let beta: Vec<f64> = affine.iter().take(width).map(|a| a.1).collect();
        let mut bank = CbnParamBank::new(classes, width);
        for c in 0..classes {
            bank.gamma.row_mut(c).copy_from_slice(&gamma);
            bank.beta.row_mut(c).copy_from_slice(&beta);
        }
        let mut bn = BatchNorm::with_affine(&gamma, &beta).unwrap();
        let a = cbn_forward(&x, &labels, &mut bank, true).unwrap();
        let b = batchnorm_forward(&x, &mut bn, true).unwrap();
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
        prop_assert_eq!(&bank.running_mean, &bn.0.running_mean);
        prop_assert_eq!(&bank.running_var, &bn.0.running_var);

        let a = cbn_forward(&x, &labels, &mut bank, false).unwrap();
        let b = batchnorm_forward(&x, &mut bn, false).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn normalized_columns_have_zero_mean_unit_variance((x, labels, classes) in batch()) {
        prop_assume!(spread_ok(&x));
        let mut bank = CbnParamBank::new(classes, x.cols()).with_eps(1e-12);
        let y = cbn_forward(&x, &labels, &mut bank, true).unwrap();
        let n = y.rows() as f64;
        for j in 0..y.cols() {
            let mean = y.iter_rows().map(|r| r[j]).sum::<f64>() / n;
            let var = y.iter_rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9, "mean {}", mean);
            prop_assert!((var - 1.0).abs() < 1e-6, "var {}", var);
        }
    }

    #[test]
    fn each_row_uses_its_own_class_affine((x, labels, classes) in batch()) {
        let width = x.cols();
        let mut base = CbnParamBank::new(classes, width);
        let plain = cbn_forward(&x, &labels, &mut base.clone(), true).unwrap();
        for c in 0..classes {
            for j in 0..width {
                base.gamma.row_mut(c)[j] = 1.0 + c as f64 + 0.5 * j as f64;
                base.beta.row_mut(c)[j] = -(c as f64) + 0.25 * j as f64;
            }
        }
        let y = cbn_forward(&x, &labels, &mut base.clone(), true).unwrap();
        for (i, &l) in labels.iter().enumerate() {
            for j in 0..width {
                let want = base.gamma.row(l)[j] * plain.row(i)[j] + base.beta.row(l)[j];
                prop_assert!((y.row(i)[j] - want).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn running_statistics_follow_momentum() {
    let x = Matrix::from_rows(&[[1.0], [3.0]]).unwrap();
    let mut bank = CbnParamBank::new(1, 1);
    cbn_forward(&x, &[0, 0], &mut bank, true).unwrap();
    assert!((bank.running_mean[0] - 0.2).abs() < 1e-15);
    // population variance 1.0
    assert!((bank.running_var[0] - 1.0).abs() < 1e-15);
    let before = bank.clone();
    cbn_forward(&x, &[0, 0], &mut bank, false).unwrap();
    assert_eq!(bank, before);
}
