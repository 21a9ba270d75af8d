use c2bnvae_core::model::{CbnPlacement, Mode, NormKind};
use c2bnvae_core::nn::gradcheck::check_gradients;
use c2bnvae_core::nn::{Matrix, ParamStore, Tape};
use c2bnvae_core::seed::rng_from_seed;
use c2bnvae_core::{C2bnVae, ModelConfig};
use rand::Rng;
use rand_distr::StandardNormal;

const TOLERANCE: f64 = 1e-4;
const STEP: f64 = 1e-5;
// Biases feeding a batch-statistics norm have an exact zero gradient in
// training mode; their difference quotients are pure rounding noise.
const FLOOR: f64 = 1e-5;

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Perturbs every parameter so biases, betas and per-class gammas differ.
fn jitter(store: &mut ParamStore, rng: &mut impl Rng) {
    for m in store.values_mut() {
        for v in m.as_mut_slice() {
            *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

fn model_loss_check(cfg: ModelConfig, batch: usize, mode: Mode, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut model = C2bnVae::new(cfg.clone()).unwrap();
    jitter(model.params_mut(), &mut rng);
    let x = Matrix::from_vec(
        batch,
        cfg.feature_dim,
        (0..batch * cfg.feature_dim).map(|_| rng.random::<f64>()).collect(),
    )
    .unwrap();
    let labels: Vec<usize> = (0..batch).map(|i| i % cfg.num_classes).collect();
    let noise = random_matrix(batch, cfg.latent_dim, 1.0, &mut rng);
    let kl_weight = cfg.kl_weight;
    let report = check_gradients(
        model.params(),
        |store: &ParamStore, tape: &mut Tape| {
            let pass = model.forward_on(store, tape, &x, &labels, &noise, mode)?;
            let recon = tape.mse(pass.input, pass.x_hat)?;
            let regu = tape.kl_gaussian(pass.mu, pass.logvar)?;
            let weighted = tape.scale(regu, kl_weight);
            tape.add(recon, weighted)
        },
        STEP,
        FLOOR,
    )
    .unwrap();
    assert_eq!(report.checked, model.params().scalar_count());
    assert!(
        report.max_rel_error < TOLERANCE,
        "seed {seed}: worst {:?} rel err {}",
        report.worst,
        report.max_rel_error
    );
    report.max_rel_error
}

#[test]
fn end_to_end_tiny_model() {
    let cfg = ModelConfig {
        latent_dim: 2,
        hidden_widths: vec![4],
        seed: 3,
        ..ModelConfig::new(6, 2)
    };
    model_loss_check(cfg, 6, Mode::Train, 11);
}

#[test]
fn twenty_four_random_models() {
    let mut rng = rng_from_seed(2024);
    for trial in 0..24u64 {
        let depth = rng.random_range(1..=3);
        let cfg = ModelConfig {
            latent_dim: rng.random_range(1..=3),
            hidden_widths: (0..depth).map(|_| rng.random_range(2..=5)).collect(),
            kl_weight: rng.random_range(0.1..2.0),
            leaky_slope: [0.0, 0.01, 0.2][trial as usize % 3],
            norm: if trial % 2 == 0 {
                NormKind::Conditional
            } else {
                NormKind::Plain
            },
            cbn_placement: if trial % 4 < 2 {
                CbnPlacement::EncoderAndDecoder
            } else {
                CbnPlacement::DecoderOnly
            },
            seed: trial,
            ..ModelConfig::new(rng.random_range(2..=6), rng.random_range(1..=3))
        };
        let mode = if trial % 3 == 2 { Mode::Eval } else { Mode::Train };
        let batch = rng.random_range(3..=7);
        model_loss_check(cfg, batch, mode, 100 + trial);
    }
}

#[test]
fn elementwise_ops_and_sum() {
    let mut rng = rng_from_seed(5);
    let mut store = ParamStore::new();
    let a = store.add("a", random_matrix(3, 4, 0.5, &mut rng));
    let b = store.add("b", random_matrix(3, 4, 0.5, &mut rng));
    let w = store.add("w", random_matrix(8, 2, 0.5, &mut rng));
    let bias = store.add("bias", random_matrix(1, 2, 0.5, &mut rng));
    let report = check_gradients(
        &store,
        |s: &ParamStore, t: &mut Tape| {
            let (av, bv) = (t.param(s, a), t.param(s, b));
            let e = t.exp(av);
            let m = t.mul(e, bv)?;
            let sc = t.scale(m, -0.7);
            let sum = t.add(sc, bv)?;
            let clamped = t.clamp(sum, -0.4, 0.4);
            let cat = t.concat(clamped, av)?;
            let wv = t.param(s, w);
            let prod = t.matmul(cat, wv)?;
            let bb = t.param(s, bias);
            let biased = t.add_bias(prod, bb)?;
            let sig = t.sigmoid(biased);
            Ok(t.sum_all(sig))
        },
        STEP,
        FLOOR,
    )
    .unwrap();
    assert!(report.max_rel_error < TOLERANCE, "{report:?}");
}
