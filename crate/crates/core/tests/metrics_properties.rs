use c2bnvae_core::metrics::{accuracy, confusion, format_table, round2, weighted_prf};
use c2bnvae_core::seed::rng_from_seed;
use c2bnvae_core::{ConfusionMatrix, EvalReport};
use proptest::prelude::*;
use rand::Rng;

fn random_cm(rng: &mut impl Rng) -> ConfusionMatrix {
    let c = rng.random_range(2..=6);
    loop {
        let counts: Vec<Vec<u64>> = (0..c)
            .map(|_| {
                (0..c)
                    .map(|_| {
                        if rng.random_bool(0.3) {
                            0
                        } else {
                            rng.random_range(0..50)
                        }
                    })
                    .collect()
            })
            .collect();
        let cm = ConfusionMatrix::from_counts(counts).unwrap();
        if cm.total() > 0 {
            return cm;
        }
    }
}

#[test]
fn weighted_recall_equals_accuracy() {
    let mut rng = rng_from_seed(42);
    for _ in 0..1000 {
        let cm = random_cm(&mut rng);
        let acc = accuracy(&cm).unwrap();
        let w = weighted_prf(&cm).unwrap();
        assert!((acc - w.recall).abs() < 1e-9, "{cm:?}");
        for v in [w.precision, w.recall, w.f1] {
            assert!((0.0..=100.0 + 1e-9).contains(&v));
        }
        for m in &w.per_class {
            let lo = m.precision.min(m.recall);
            let hi = m.precision.max(m.recall);
            assert!(m.f1 >= lo - 1e-12 && m.f1 <= hi + 1e-12);
        }
    }
}

#[test]
fn class_relabelling_does_not_change_scores() {
    let mut rng = rng_from_seed(7);
    for _ in 0..200 {
        let cm = random_cm(&mut rng);
        let c = cm.num_classes();
        let mut perm: Vec<usize> = (0..c).collect();
        for i in (1..c).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let mut permuted = ConfusionMatrix::zeros(c);
        for i in 0..c {
            for j in 0..c {
                permuted.counts[perm[i]][perm[j]] = cm.counts[i][j];
            }
        }
        let (a, b) = (weighted_prf(&cm).unwrap(), weighted_prf(&permuted).unwrap());
        assert!((a.precision - b.precision).abs() < 1e-9);
        assert!((a.f1 - b.f1).abs() < 1e-9);
        assert_eq!(accuracy(&cm).unwrap(), accuracy(&permuted).unwrap());
    }
}

#[test]
fn perfect_predictions_score_one_hundred() {
    let y = [0, 1, 2, 2, 1, 4];
    let cm = confusion(&y, &y, 5).unwrap();
    let r = EvalReport::new("perfect", cm, &["a", "b", "c", "d", "e"]).unwrap();
    assert_eq!(
        (r.accuracy, r.precision_w, r.recall_w, r.f1_w),
        (100.0, 100.0, 100.0, 100.0)
    );
    assert_eq!(
        r.flags,
        [
            "d: no predictions, precision taken as 0",
            "d: no true samples, recall taken as 0"
        ]
    );
}

#[test]
fn report_json_round_trips() {
    let cm = ConfusionMatrix::from_counts(vec![vec![5, 1], vec![2, 3]]).unwrap();
    let r = EvalReport::new("DT", cm, &["x", "y"]).unwrap();
    let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
    let table = format_table(&[r.clone(), r]);
    assert_eq!(table.lines().count(), 4);
}

proptest! {
    #[test]
    fn round2_is_within_half_a_cent(x in 0.0f64..100.0) {
        let r = round2(x);
        prop_assert!((r - x).abs() <= 0.005 + 1e-9);
        prop_assert!(((r * 100.0).round() - r * 100.0).abs() < 1e-6);
    }
}
