use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::statistics::Statistics;

use super::losses::step_gradients;
use super::{sample_priors, ArchConfig, GeneratorLoss, HierGan, LatentConfig, Player};
use crate::autodiff::{AdamConfig, AdamState};
use crate::datasets::{sample_pair_batch, DesignDataset};
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Weight of the information term.
    pub lambda: f64,
    pub seed: u64,
    /// Discriminator updates per generator update.
    pub d_steps: usize,
    pub generator_loss: GeneratorLoss,
    pub arch: ArchConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch: 32,
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            lambda: 1.0,
            seed: 0,
            d_steps: 1,
            generator_loss: GeneratorLoss::NonSaturating,
            arch: ArchConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch == 0 || self.d_steps == 0 {
            return Err(Error::contract("steps, batch and d_steps must be >= 1"));
        }
        if !(self.lambda >= 0.0) || !(self.lr > 0.0) {
            return Err(Error::contract(format!(
                "need lambda >= 0 and lr > 0 (got {}, {})",
                self.lambda, self.lr
            )));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub loss_d: f64,
    pub loss_g: f64,
    pub info: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: HierGan,
    pub history: Vec<LossRecord>,
}

fn normalized_batch<R: Rng + ?Sized>(model: &HierGan, ds: &DesignDataset, batch: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut b = sample_pair_batch(ds, batch, rng)?;
    model.gen.scaler().normalize(&mut b.nominal);
    model.gen.scaler().normalize(&mut b.fabricated);
    Ok((b.nominal, b.fabricated))
}

fn check_finite(step: usize, what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Training {
            step,
            detail: format!("{what} is {v}"),
        })
    }
}

/// Alternating Adam updates of `D`/`Q` and `G`. Each generated pair shares its `c_p` and `z`.
pub fn train(ds: &DesignDataset, latent: &LatentConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut init_rng = substream(cfg.seed, 0);
    let model = HierGan::init(ds, latent, &cfg.arch, &mut init_rng)?;
    train_from(model, ds, cfg)
}

/// Continues training an existing model.
pub fn train_from(mut model: HierGan, ds: &DesignDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if ds.design_dims() != model.gen.design_dims() {
        return Err(Error::Dimension {
            op: "train",
            detail: format!("dataset dims {} vs model {}", ds.design_dims(), model.gen.design_dims()),
        });
    }
    let mut rng = substream(cfg.seed, 1);
    let latent = model.latent().clone();
    let mut adam_g = AdamState::new(cfg.adam(), model.gen.net().params());
    let mut adam_d = model.disc.nets().map(|n| AdamState::new(cfg.adam(), n.params()));
    let mut history = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let mut loss_d = 0.0;
        for _ in 0..cfg.d_steps {
            let (nom, fab) = normalized_batch(&model, ds, cfg.batch, &mut rng)?;
            let priors = sample_priors(&latent, cfg.batch, &mut rng)?;
            let (v, _) = step_gradients(
                &mut model,
                Player::Discriminator,
                &nom,
                &fab,
                &priors,
                cfg.lambda,
                cfg.generator_loss,
            )?;
            check_finite(step, "discriminator loss", v)?;
            loss_d = v;
            for (net, adam) in model.disc.nets_mut().into_iter().zip(&mut adam_d) {
                adam.step(net.params_mut())?;
            }
        }

        let (nom, fab) = normalized_batch(&model, ds, cfg.batch, &mut rng)?;
        let priors = sample_priors(&latent, cfg.batch, &mut rng)?;
        let (loss_g, parts) = step_gradients(
            &mut model,
            Player::Generator,
            &nom,
            &fab,
            &priors,
            cfg.lambda,
            cfg.generator_loss,
        )?;
        check_finite(step, "generator loss", loss_g)?;
        adam_g.step(model.gen.net_mut().params_mut())?;
        history.push(LossRecord {
            step,
            loss_d,
            loss_g,
            info: parts.info,
        });
    }
    Ok(TrainOutcome { model, history })
}

/// How well `Q` recovers the parent code from generated pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentRecovery {
    /// Pearson correlation between `c_p[k]` and `Q`'s estimate, per parent dimension.
    pub correlation: Vec<f64>,
    /// RMS change (normalized units) of the nominal design when `c_p[k]` sweeps 0 to 1.
    pub sensitivity: Vec<f64>,
    /// Dimensions whose sensitivity is at least 10% of the largest one.
    pub active: Vec<bool>,
}

impl LatentRecovery {
    /// Smallest correlation over active dimensions.
    pub fn min_active_correlation(&self) -> f64 {
        self.correlation
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(&c, _)| c)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn latent_recovery<R: Rng + ?Sized>(model: &HierGan, n: usize, rng: &mut R) -> Result<LatentRecovery> {
    let latent = model.latent();
    if n < 2 {
        return Err(Error::contract("latent recovery needs at least 2 samples"));
    }
    let p = sample_priors(latent, n, rng)?;
    let nom = model.gen.generate_batch(n, &p.c_p, None, &p.z)?;
    let fab = model.gen.generate_batch(n, &p.c_p, Some(&p.c_c), &p.z)?;
    let (_, q) = model.disc.eval(model.gen.scaler(), n, &nom, &fab)?;
    let cd = latent.code_dim();
    let correlation = (0..latent.d_p)
        .map(|k| {
            let truth: Vec<f64> = (0..n).map(|r| p.c_p[r * latent.d_p + k]).collect();
            let est: Vec<f64> = (0..n).map(|r| q[r * cd + k]).collect();
            let sd = (&truth).std_dev() * (&est).std_dev();
            if sd > 0.0 {
                (&truth).covariance(&est) / sd
            } else {
                0.0
            }
        })
        .collect();

    let scale = model.gen.scaler().scale;
    let d = model.gen.design_dims();
    let z = vec![0.0; n * latent.d_z];
    let sensitivity: Vec<f64> = (0..latent.d_p)
        .map(|k| {
            let mut lo = p.c_p.clone();
            let mut hi = p.c_p.clone();
            for r in 0..n {
                lo[r * latent.d_p + k] = 0.0;
                hi[r * latent.d_p + k] = 1.0;
            }
            let a = model.gen.generate_batch(n, &lo, None, &z)?;
            let b = model.gen.generate_batch(n, &hi, None, &z)?;
            let ss: f64 = a.iter().zip(&b).map(|(x, y)| ((x - y) / scale).powi(2)).sum();
            Ok((ss / (n * d) as f64).sqrt())
        })
        .collect::<Result<_>>()?;
    let max = sensitivity.iter().cloned().fold(0.0, f64::max);
    let active = sensitivity.iter().map(|&s| max > 0.0 && s >= 0.1 * max).collect();
    Ok(LatentRecovery {
        correlation,
        sensitivity,
        active,
    })
}
