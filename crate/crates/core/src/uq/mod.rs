//! Monte-Carlo uncertainty quantification through the generator's child code.

mod synthetic;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use synthetic::{
    airfoil_proxy, airfoil_proxy_terms, flat_plate_baseline, metasurface_proxy, synthetic_qoi, two_peak_test,
    AirfoilProxyParams, AirfoilProxyTerms, Peak, SyntheticQoi, TwoPeak, TwoPeakEmbedding, AIRFOIL_PROXY,
};

use crate::error::{Error, Result};
use crate::hgan::{DesignGenerator, LatentConfig};
use crate::parallel::par_map;

pub const SCHEMA_VERSION: u32 = 1;

type Evaluator = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;

/// A deterministic design -> scalar map with an evaluation counter.
#[derive(Clone)]
pub struct QoiFunction {
    name: String,
    f: Arc<Evaluator>,
    concurrent: bool,
    count: Arc<AtomicU64>,
}

impl fmt::Debug for QoiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QoiFunction")
            .field("name", &self.name)
            .field("concurrent", &self.concurrent)
            .field("evaluations", &self.evaluations())
            .finish()
    }
}

impl QoiFunction {
    /// A QoI that is safe to call from several threads at once.
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            concurrent: true,
            count: Arc::new(AtomicU64::new(0)),
        }
    }

    /// Marks the QoI as sequential; MC batches then evaluate it one sample at a time.
    pub fn sequential(mut self) -> Self {
        self.concurrent = false;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_concurrent(&self) -> bool {
        self.concurrent
    }

    pub fn eval(&self, design: &[f64]) -> Result<f64> {
        self.count.fetch_add(1, Ordering::Relaxed);
        let v = (self.f)(design)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Qoi(format!("{} returned {v}", self.name)))
        }
    }

    /// Number of evaluations so far, shared across clones.
    pub fn evaluations(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

/// Child (and optionally noise) codes reused across evaluations for common random numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBank {
    pub c_c: Vec<Vec<f64>>,
    /// `None` keeps `z = 0`.
    pub z: Option<Vec<Vec<f64>>>,
}

impl SampleBank {
    pub fn draw<R: Rng + ?Sized>(latent: &LatentConfig, n_mc: usize, sample_z: bool, rng: &mut R) -> Result<Self> {
        latent.validate()?;
        if n_mc == 0 {
            return Err(Error::contract("n_mc must be >= 1"));
        }
        let c_c = (0..n_mc).map(|_| latent.sample_child(rng)).collect();
        let z = sample_z.then(|| (0..n_mc).map(|_| latent.sample_noise(rng)).collect());
        Ok(Self { c_c, z })
    }

    pub fn len(&self) -> usize {
        self.c_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c_c.is_empty()
    }
}

/// Fraction of failed QoI evaluations tolerated in one MC batch.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

/// Successful samples of one MC batch plus the failure count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSamples {
    pub values: Vec<f64>,
    pub failures: usize,
}

/// Evaluates `qoi(G(c_p, c_c, z))` for every bank entry.
pub fn mc_with_bank<G: DesignGenerator + ?Sized>(
    gen: &G,
    c_p: &[f64],
    qoi: &QoiFunction,
    bank: &SampleBank,
) -> Result<McSamples> {
    let latent = gen.latent();
    if c_p.len() != latent.d_p {
        return Err(Error::Dimension {
            op: "mc_fabricated_qoi",
            detail: format!("c_p has {} values, expected {}", c_p.len(), latent.d_p),
        });
    }
    if bank.is_empty() {
        return Err(Error::contract("n_mc must be >= 1"));
    }
    let zero_z = vec![0.0; latent.d_z];
    let one = |i: usize, c_c: &Vec<f64>| -> Result<f64> {
        let z = bank.z.as_ref().map_or(&zero_z, |z| &z[i]);
        let design = gen.generate(c_p, c_c, z)?;
        qoi.eval(&design)
    };
    let results: Vec<Result<f64>> = if qoi.is_concurrent() {
        par_map(&bank.c_c, one)
    } else {
        bank.c_c.iter().enumerate().map(|(i, c)| one(i, c)).collect()
    };
    let mut values = Vec::with_capacity(results.len());
    let mut failures = 0;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(v) => values.push(v),
            Err(Error::Qoi(msg)) => {
                failures += 1;
                first_err.get_or_insert(msg);
            }
            Err(e) => return Err(e),
        }
    }
    let n = bank.len();
    if failures as f64 > MAX_FAILURE_FRACTION * n as f64 || values.is_empty() {
        return Err(Error::Qoi(format!(
            "{failures} of {n} samples failed (first: {})",
            first_err.unwrap_or_default()
        )));
    }
    Ok(McSamples { values, failures })
}

/// Draws `n_mc` child codes (z = 0) and evaluates the QoI on each fabricated design.
pub fn mc_fabricated_qoi<G: DesignGenerator + ?Sized, R: Rng + ?Sized>(
    gen: &G,
    c_p: &[f64],
    qoi: &QoiFunction,
    n_mc: usize,
    rng: &mut R,
) -> Result<McSamples> {
    let bank = SampleBank::draw(gen.latent(), n_mc, false, rng)?;
    mc_with_bank(gen, c_p, qoi, &bank)
}

/// Sample mean and 1/n variance.
pub fn estimate_moments(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::contract("moments of an empty sample"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok((mean, var))
}

/// Lower empirical quantile: the `ceil(tau n)`-th smallest sample (at least the first).
pub fn estimate_quantile(samples: &[f64], tau: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::contract("quantile of an empty sample"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::contract(format!("tau must lie in (0, 1), got {tau}")));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    // the slack keeps products like 0.07 * 100 = 7.000000000000001 on the intended rank
    let k = ((tau * s.len() as f64 - 1e-9).ceil() as usize).clamp(1, s.len());
    Ok(s[k - 1])
}

/// How spread is traded against level in a robust objective (maximization).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobustMode {
    Quantile { tau: f64 },
    /// `mean - k * std`.
    MeanKSigma { k: f64 },
}

impl RobustMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RobustMode::Quantile { tau } if !(tau > 0.0 && tau < 1.0) => {
                Err(Error::contract(format!("tau must lie in (0, 1), got {tau}")))
            }
            RobustMode::MeanKSigma { k } if !(k >= 0.0) => Err(Error::contract(format!("k must be >= 0, got {k}"))),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, samples: &[f64]) -> Result<f64> {
        self.validate()?;
        match *self {
            RobustMode::Quantile { tau } => estimate_quantile(samples, tau),
            RobustMode::MeanKSigma { k } => {
                let (m, v) = estimate_moments(samples)?;
                Ok(m - k * v.sqrt())
            }
        }
    }
}

pub fn robust_objective<G: DesignGenerator + ?Sized, R: Rng + ?Sized>(
    gen: &G,
    c_p: &[f64],
    qoi: &QoiFunction,
    n_mc: usize,
    mode: RobustMode,
    rng: &mut R,
) -> Result<f64> {
    mode.validate()?;
    let s = mc_fabricated_qoi(gen, c_p, qoi, n_mc, rng)?;
    mode.apply(&s.values)
}

/// `P[g_j(x_fab) >= 0]` per limit state, on one shared set of fabricated designs.
pub fn estimate_reliability<G: DesignGenerator + ?Sized, R: Rng + ?Sized>(
    gen: &G,
    c_p: &[f64],
    limit_states: &[QoiFunction],
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let bank = SampleBank::draw(gen.latent(), n_mc, false, rng)?;
    limit_states
        .iter()
        .map(|g| {
            let s = mc_with_bank(gen, c_p, g, &bank)?;
            Ok(reliability_of(&s.values))
        })
        .collect()
}

/// Fraction of limit-state samples that are `>= 0`.
pub fn reliability_of(g_values: &[f64]) -> f64 {
    if g_values.is_empty() {
        return 0.0;
    }
    g_values.iter().filter(|&&g| g >= 0.0).count() as f64 / g_values.len() as f64
}

/// Summary of one MC batch at a parent code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UqReport {
    pub schema_version: u32,
    pub qoi: String,
    pub c_p: Vec<f64>,
    pub n_mc: usize,
    pub tau: f64,
    pub samples: Vec<f64>,
    pub failures: usize,
    pub mean: f64,
    pub variance: f64,
    pub quantile: f64,
    pub reliability: std::collections::BTreeMap<String, f64>,
}

impl UqReport {
    pub fn from_samples(qoi: &str, c_p: &[f64], n_mc: usize, tau: f64, samples: McSamples) -> Result<Self> {
        let (mean, variance) = estimate_moments(&samples.values)?;
        let quantile = estimate_quantile(&samples.values, tau)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            qoi: qoi.to_string(),
            c_p: c_p.to_vec(),
            n_mc,
            tau,
            samples: samples.values,
            failures: samples.failures,
            mean,
            variance,
            quantile,
            reliability: Default::default(),
        })
    }
}

#[cfg(test)]
mod tests;
