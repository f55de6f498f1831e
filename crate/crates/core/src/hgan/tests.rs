use rand::Rng;

use super::*;
use crate::datasets::{gen_airfoil_dataset, AirfoilDataConfig, AirfoilFamily, AirfoilSource};
use crate::rng::seeded;

fn toy_dataset(n: usize, m: usize) -> DesignDataset {
    gen_airfoil_dataset(&AirfoilDataConfig {
        n_nominal: n,
        m_fab: m,
        sigma_y: 0.02,
        n_points: 16,
        source: AirfoilSource::Synthetic {
            family: AirfoilFamily::one_parameter(16),
        },
        seed: 11,
    })
    .unwrap()
}

fn small_arch() -> ArchConfig {
    ArchConfig {
        gen_hidden: vec![8, 6],
        disc_hidden: vec![7, 5],
    }
}

fn small_model(latent: &LatentConfig) -> (DesignDataset, HierGan) {
    let ds = toy_dataset(6, 2);
    let model = HierGan::init(&ds, latent, &small_arch(), &mut seeded(3)).unwrap();
    (ds, model)
}

#[test]
fn prior_moments() {
    let cfg = LatentConfig::new(2, 3, 0);
    let p = sample_priors(&cfg, 100_000, &mut seeded(1)).unwrap();
    let mean = p.c_p.iter().sum::<f64>() / p.c_p.len() as f64;
    assert!((mean - 0.5).abs() < 0.005, "{mean}");
    assert!(p.c_p.iter().all(|&v| (0.0..1.0).contains(&v)));
    let n = p.c_c.len() as f64;
    let m = p.c_c.iter().sum::<f64>() / n;
    let var = p.c_c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    assert!((var - 0.5).abs() < 0.01, "{var}");
    assert!(p.z.is_empty());
}

#[test]
fn latent_config_contract() {
    assert!(LatentConfig::new(0, 1, 1).validate().is_err());
    assert!(LatentConfig::new(1, 0, 1).validate().is_err());
    assert!(LatentConfig::new(1, 1, 0).validate().is_ok());
    assert!(sample_priors(&LatentConfig::new(1, 1, 0), 0, &mut seeded(0)).is_err());
}

#[test]
fn nominal_is_zero_child_slice() {
    let latent = LatentConfig::new(2, 2, 3);
    let (ds, model) = small_model(&latent);
    let mut rng = seeded(4);
    for _ in 0..10 {
        let p = sample_priors(&latent, 1, &mut rng).unwrap();
        let a = model.gen.generate_nominal(&p.c_p, &p.z).unwrap();
        let b = model.gen.generate_fabricated(&p.c_p, &[0.0, 0.0], &p.z).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), ds.design_dims());
        assert!(a.iter().all(|v| v.is_finite()));
        let c = model.gen.generate_fabricated(&p.c_p, &p.c_c, &p.z).unwrap();
        assert_eq!(c, model.gen.generate_fabricated(&p.c_p, &p.c_c, &p.z).unwrap());
    }
}

#[test]
fn generator_rejects_bad_dims() {
    let latent = LatentConfig::new(2, 2, 3);
    let (_, model) = small_model(&latent);
    assert!(matches!(
        model.gen.generate_fabricated(&[0.5], &[0.0, 0.0], &[0.0; 3]),
        Err(Error::Dimension { .. })
    ));
}

#[test]
fn vanishing_child_code_approaches_nominal() {
    let latent = LatentConfig::new(2, 2, 1);
    let (_, model) = small_model(&latent);
    let a = model.gen.generate_nominal(&[0.3, 0.7], &[0.1]).unwrap();
    let b = model.gen.generate_fabricated(&[0.3, 0.7], &[1e-7, -1e-7], &[0.1]).unwrap();
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-6, "{diff}");
}

fn zero_heads(model: &mut HierGan) {
    let [_, d_head, q_head] = model.disc.nets_mut();
    for net in [d_head, q_head] {
        for p in net.params_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

#[test]
fn even_discriminator_gives_two_log_two() {
    let latent = LatentConfig::new(1, 1, 1);
    let (ds, mut model) = small_model(&latent);
    zero_heads(&mut model);
    let b = crate::datasets::sample_pair_batch(&ds, 4, &mut seeded(1)).unwrap();
    let p = sample_priors(&latent, 4, &mut seeded(2)).unwrap();
    let l = hier_gan_losses(&model, &b.nominal, &b.fabricated, &p, 0.0, GeneratorLoss::NonSaturating).unwrap();
    assert!((l.adv_d - 2.0 * 2f64.ln()).abs() < 1e-12);
    assert!((l.loss_d - 2.0 * 2f64.ln()).abs() < 1e-12);
    assert!((l.loss_g - 2f64.ln()).abs() < 1e-12);
    let mm = hier_gan_losses(&model, &b.nominal, &b.fabricated, &p, 0.0, GeneratorLoss::Minimax).unwrap();
    assert!((mm.loss_g + 2f64.ln()).abs() < 1e-12);
}

#[test]
fn info_term_at_exact_prediction() {
    // With zero Q weights the prediction is the Q bias; set it to the single code.
    let latent = LatentConfig::new(2, 1, 0);
    let (ds, mut model) = small_model(&latent);
    zero_heads(&mut model);
    let p = Priors {
        batch: 1,
        c_p: vec![0.25, 0.5],
        c_c: vec![-0.3],
        z: vec![],
    };
    model.disc.nets_mut()[2].params_mut()[1]
        .data_mut()
        .copy_from_slice(&[0.25, 0.5, -0.3]);
    let b = crate::datasets::sample_pair_batch(&ds, 2, &mut seeded(1)).unwrap();
    let l = hier_gan_losses(&model, &b.nominal, &b.fabricated, &p, 1.0, GeneratorLoss::NonSaturating).unwrap();
    let expected = -1.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((l.info - expected).abs() < 1e-12);
    let lambda_zero =
        hier_gan_losses(&model, &b.nominal, &b.fabricated, &p, 0.0, GeneratorLoss::NonSaturating).unwrap();
    assert!((l.loss_d - (lambda_zero.loss_d - expected)).abs() < 1e-12);
}

#[test]
fn losses_are_permutation_invariant() {
    let latent = LatentConfig::new(2, 2, 1);
    let (ds, model) = small_model(&latent);
    let b = crate::datasets::sample_pair_batch(&ds, 5, &mut seeded(1)).unwrap();
    let p = sample_priors(&latent, 5, &mut seeded(2)).unwrap();
    let base = hier_gan_losses(&model, &b.nominal, &b.fabricated, &p, 1.0, GeneratorLoss::NonSaturating).unwrap();
    let d = ds.design_dims();
    let rev = |v: &[f64], w: usize| -> Vec<f64> { v.chunks(w).rev().flatten().copied().collect() };
    let q = Priors {
        batch: 5,
        c_p: rev(&p.c_p, 2),
        c_c: rev(&p.c_c, 2),
        z: rev(&p.z, 1),
    };
    let perm = hier_gan_losses(&model, &rev(&b.nominal, d), &rev(&b.fabricated, d), &q, 1.0, GeneratorLoss::NonSaturating)
        .unwrap();
    assert!((base.loss_d - perm.loss_d).abs() < 1e-12);
    assert!((base.loss_g - perm.loss_g).abs() < 1e-12);
}

fn param_mut(m: &mut HierGan, player: Player, mut t: usize) -> &mut crate::autodiff::Tensor {
    match player {
        Player::Generator => &mut m.gen.net_mut().params_mut()[t],
        Player::Discriminator => {
            for net in m.disc.nets_mut() {
                let n = net.params().len();
                if t < n {
                    return &mut net.params_mut()[t];
                }
                t -= n;
            }
            panic!("parameter index out of range")
        }
    }
}

fn fd_check(player: Player, kind: GeneratorLoss) {
    let latent = LatentConfig::new(2, 2, 2);
    let (ds, model) = small_model(&latent);
    let b = crate::datasets::sample_pair_batch(&ds, 4, &mut seeded(5)).unwrap();
    let p = sample_priors(&latent, 4, &mut seeded(6)).unwrap();
    let lambda = 0.7;
    let (_, grads) = loss_gradients(&model, player, &b.nominal, &b.fabricated, &p, lambda, kind).unwrap();
    let value = |m: &HierGan| {
        let l = hier_gan_losses(m, &b.nominal, &b.fabricated, &p, lambda, kind).unwrap();
        match player {
            Player::Discriminator => l.loss_d,
            Player::Generator => l.loss_g,
        }
    };
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (t, grad) in grads.iter().enumerate() {
        for i in 0..grad.len() {
            let perturbed = |delta: f64| {
                let mut m = model.clone();
                param_mut(&mut m, player, t).data_mut()[i] += delta;
                value(&m)
            };
            let fd = (perturbed(h) - perturbed(-h)) / (2.0 * h);
            let a = grad.data()[i];
            let rel = (a - fd).abs() / (a.abs() + fd.abs() + 1e-8);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "{player:?} {kind:?} worst rel err {worst}");
}

#[test]
fn discriminator_gradients_match_finite_differences() {
    fd_check(Player::Discriminator, GeneratorLoss::NonSaturating);
}

#[test]
fn generator_gradients_match_finite_differences() {
    fd_check(Player::Generator, GeneratorLoss::NonSaturating);
    fd_check(Player::Generator, GeneratorLoss::Minimax);
}

#[test]
fn short_training_is_finite_and_reproducible() {
    let ds = toy_dataset(10, 2);
    let latent = LatentConfig::new(2, 2, 2);
    let cfg = TrainConfig {
        steps: 50,
        batch: 8,
        seed: 9,
        arch: small_arch(),
        ..TrainConfig::default()
    };
    let a = train(&ds, &latent, &cfg).unwrap();
    assert_eq!(a.history.len(), 50);
    assert!(a
        .history
        .iter()
        .all(|r| r.loss_d.is_finite() && r.loss_g.is_finite() && r.info.is_finite()));
    let b = train(&ds, &latent, &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model, b.model);
}

#[test]
fn trained_generator_separates_parent_codes() {
    let ds = toy_dataset(60, 3);
    let latent = LatentConfig::new(2, 2, 2);
    let cfg = TrainConfig {
        steps: 500,
        ..TrainConfig::default()
    };
    let m = train(&ds, &latent, &cfg).unwrap().model;
    let mut rng = seeded(21);
    let z = [0.0, 0.0];
    for _ in 0..20 {
        let a = [rng.random::<f64>(), rng.random::<f64>()];
        let b = [rng.random::<f64>(), rng.random::<f64>()];
        let ga = m.gen.generate_nominal(&a, &z).unwrap();
        let gb = m.gen.generate_nominal(&b, &z).unwrap();
        let rms = (ga.iter().zip(&gb).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / ga.len() as f64).sqrt();
        let dist = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        // far above round-off, scaled by how far apart the codes are
        assert!(rms > 1e-4 * dist, "{a:?} {b:?} rms {rms:e}");
    }
}

#[test]
fn diverging_training_reports_step() {
    let ds = toy_dataset(4, 1);
    let latent = LatentConfig::new(1, 1, 0);
    let cfg = TrainConfig {
        steps: 20,
        batch: 4,
        lr: 1e300,
        arch: small_arch(),
        ..TrainConfig::default()
    };
    match train(&ds, &latent, &cfg) {
        Err(Error::Training { step, .. }) => assert!(step < 20),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.history.len())),
    }
}

#[test]
fn model_round_trip() {
    let latent = LatentConfig::new(2, 2, 3);
    let (_, model) = small_model(&latent);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.gdm");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, model);
    let mut rng = seeded(8);
    for _ in 0..10 {
        let p = sample_priors(&latent, 1, &mut rng).unwrap();
        assert_eq!(
            back.gen.generate_fabricated(&p.c_p, &p.c_c, &p.z).unwrap(),
            model.gen.generate_fabricated(&p.c_p, &p.c_c, &p.z).unwrap()
        );
    }
    assert!(matches!(
        load_model_with(&path, &LatentConfig::new(2, 3, 3)),
        Err(Error::Config(_))
    ));
    assert!(load_model_with(&path, &latent).is_ok());

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(load_model(&path), Err(Error::Format { .. })));
}

#[test]
fn dataset_archive_is_not_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.gda");
    crate::datasets::archive_write(&toy_dataset(2, 1), &path).unwrap();
    assert!(matches!(load_model(&path), Err(Error::Format { .. })));
}

#[test]
fn scaler_round_trip() {
    let ds = toy_dataset(5, 2);
    let s = DesignScaler::fit(&ds);
    let mut v = ds.nominal_flat().to_vec();
    s.normalize(&mut v);
    s.denormalize(&mut v);
    for (a, b) in v.iter().zip(ds.nominal_flat()) {
        assert!((a - b).abs() < 1e-12);
    }
}
