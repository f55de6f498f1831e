//! Bayesian optimization over the parent code: LHS start, GP surrogate, expected improvement.

mod gp;

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

pub use gp::{gp_fit, gp_predict, matern52, GpModel, GpOptions};

use crate::error::{Error, Result};
use crate::hgan::DesignGenerator;
use crate::rng::substream;
use crate::uq::{mc_fabricated_qoi, mc_with_bank, QoiFunction, RobustMode, SampleBank, SCHEMA_VERSION};

/// `n` points in `[0,1)^d`, one per stratum `[k/n, (k+1)/n)` in every dimension.
pub fn lhs_sample<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if n == 0 || d == 0 {
        return Err(Error::contract(format!("lhs_sample needs n, d >= 1, got {n}, {d}")));
    }
    let mut out = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(rng);
        for (row, &k) in out.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            row[j] = ((k as f64 + u) / n as f64).min(1.0 - f64::EPSILON);
        }
    }
    Ok(out)
}

/// Closed-form EI for maximization from a Gaussian predictive `N(mu, sigma^2)`.
pub fn expected_improvement_from(mu: f64, sigma: f64, f_best: f64) -> f64 {
    let gain = mu - f_best;
    if !(sigma > 1e-300) {
        return gain.max(0.0);
    }
    let n = Normal::standard();
    let u = gain / sigma;
    (gain * n.cdf(u) + sigma * n.pdf(u)).max(0.0)
}

pub fn expected_improvement(model: &GpModel, x: &[f64], f_best: f64) -> f64 {
    let (mu, sigma) = model.predict(x);
    expected_improvement_from(mu, sigma, f_best)
}

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131,
];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Halton points `1..=n` with a random Cranley-Patterson shift.
pub fn shifted_halton<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if d > PRIMES.len() {
        return Err(Error::contract(format!("halton candidates support d <= {}, got {d}", PRIMES.len())));
    }
    let shift: Vec<f64> = (0..d).map(|_| rng.random()).collect();
    Ok((1..=n as u64)
        .map(|i| (0..d).map(|j| (radical_inverse(i, PRIMES[j]) + shift[j]).fract()).collect())
        .collect())
}

pub const N_CANDIDATES: usize = 1024;
const N_REFINE: usize = 5;

/// Coordinate pattern search on EI from `start`, staying in the unit box.
fn refine(model: &GpModel, f_best: f64, start: &[f64], start_ei: f64) -> (Vec<f64>, f64) {
    let (mut x, mut best) = (start.to_vec(), start_ei);
    let mut h = 0.05;
    while h > 1e-4 {
        let mut moved = false;
        for j in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[j] = (y[j] + dir * h).clamp(0.0, 1.0);
                let ei = expected_improvement(model, &y, f_best);
                if ei > best {
                    (x, best, moved) = (y, ei, true);
                }
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    (x, best)
}

/// Maximizes EI over shifted Halton candidates, then refines the best few locally.
pub fn propose_next<R: Rng + ?Sized>(model: &GpModel, f_best: f64, rng: &mut R) -> Result<(Vec<f64>, f64)> {
    let cands = shifted_halton(N_CANDIDATES, model.dim(), rng)?;
    let mut scored: Vec<(f64, usize)> = cands
        .iter()
        .enumerate()
        .map(|(i, c)| (expected_improvement(model, c, f_best), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best = (cands[scored[0].1].clone(), scored[0].0);
    for &(ei, i) in scored.iter().take(N_REFINE) {
        let (x, v) = refine(model, f_best, &cands[i], ei);
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

/// EI proposals closer than this to an observed input are replaced by an exploration step.
pub const DUPLICATE_RADIUS: f64 = 1e-2;

/// The shifted-Halton candidate with the largest predictive standard deviation.
pub fn most_uncertain<R: Rng + ?Sized>(model: &GpModel, rng: &mut R) -> Result<Vec<f64>> {
    let cands = shifted_halton(N_CANDIDATES, model.dim(), rng)?;
    let sd: Vec<f64> = cands.iter().map(|c| model.predict(c).1).collect();
    let best = (0..cands.len()).fold(0, |b, i| if sd[i] > sd[b] { i } else { b });
    Ok(cands[best].clone())
}

/// What one evaluation of a parent code scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoMode {
    /// QoI of the nominal design, `f(G(c_p, 0, 0))`.
    Standard,
    /// Lower `tau`-quantile of the fabricated QoI.
    Quantile { tau: f64 },
    /// `mean - k * std` of the fabricated QoI.
    MeanKSigma { k: f64 },
}

impl BoMode {
    pub fn robust(&self) -> Option<RobustMode> {
        match *self {
            BoMode::Standard => None,
            BoMode::Quantile { tau } => Some(RobustMode::Quantile { tau }),
            BoMode::MeanKSigma { k } => Some(RobustMode::MeanKSigma { k }),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            BoMode::Standard => "standard",
            _ => "robust",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    pub d_p: usize,
    pub n_init: usize,
    pub n_total: usize,
    pub mode: BoMode,
    /// MC samples per robust evaluation.
    pub n_mc: usize,
    /// Reuse one child-code bank for every robust evaluation in the run.
    pub common_random_numbers: bool,
    pub seed: u64,
    pub gp: GpOptions,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self::for_dims(2)
    }
}

impl BoConfig {
    /// `3 d_p` LHS points and `20 d_p` evaluations in total, standard mode.
    pub fn for_dims(d_p: usize) -> Self {
        Self {
            d_p,
            n_init: 3 * d_p,
            n_total: 20 * d_p,
            mode: BoMode::Standard,
            n_mc: 100,
            common_random_numbers: true,
            seed: 0,
            gp: GpOptions::default(),
        }
    }

    /// Airfoil protocol: d_p = 7, 21 of 140 evaluations from LHS, 100 MC samples, tau = 0.05.
    pub fn airfoil_preset(seed: u64) -> Self {
        Self {
            mode: BoMode::Quantile { tau: 0.05 },
            n_mc: 100,
            seed,
            ..Self::for_dims(7)
        }
    }

    /// Metasurface protocol: d_p = 5, 15 of 100 evaluations from LHS, 20 MC samples, tau = 0.05.
    pub fn metasurface_preset(seed: u64) -> Self {
        Self {
            mode: BoMode::Quantile { tau: 0.05 },
            n_mc: 20,
            seed,
            ..Self::for_dims(5)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_p == 0 || self.n_init == 0 || self.n_mc == 0 {
            return Err(Error::contract("bo: d_p, n_init and n_mc must be >= 1"));
        }
        if self.n_init > self.n_total {
            return Err(Error::contract(format!(
                "bo: n_init {} exceeds n_total {}",
                self.n_init, self.n_total
            )));
        }
        if let Some(m) = self.mode.robust() {
            m.validate()?;
        }
        Ok(())
    }
}

/// One objective evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoRecord {
    pub schema_version: u32,
    pub iter: usize,
    pub c_p: Vec<f64>,
    pub objective: f64,
    /// EI at the proposal; absent for LHS points.
    pub acquisition: Option<f64>,
    pub mode: String,
    pub incumbent: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoTrace {
    pub records: Vec<BoRecord>,
}

impl BoTrace {
    pub fn incumbents(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.incumbent).collect()
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoOutcome {
    pub trace: BoTrace,
    pub best_c_p: Vec<f64>,
    pub best_objective: f64,
    /// `G(best_c_p, 0, 0)`.
    pub best_design: Vec<f64>,
}

/// Scores parent codes under one BO mode.
struct Objective<'a, G: ?Sized> {
    gen: &'a G,
    qoi: &'a QoiFunction,
    cfg: &'a BoConfig,
    bank: Option<SampleBank>,
    rng: crate::rng::Rng64,
}

impl<G: DesignGenerator + ?Sized> Objective<'_, G> {
    fn eval(&mut self, c_p: &[f64]) -> Result<f64> {
        let Some(mode) = self.cfg.mode.robust() else {
            let zero = vec![0.0; self.gen.latent().d_z];
            return self.qoi.eval(&self.gen.generate_nominal(c_p, &zero)?);
        };
        let samples = match &self.bank {
            Some(bank) => mc_with_bank(self.gen, c_p, self.qoi, bank)?,
            None => mc_fabricated_qoi(self.gen, c_p, self.qoi, self.cfg.n_mc, &mut self.rng)?,
        };
        mode.apply(&samples.values)
    }
}

/// Runs `n_init` LHS evaluations then EI proposals up to `n_total`, returning the incumbent.
pub fn bo_run<G: DesignGenerator + ?Sized>(gen: &G, qoi: &QoiFunction, cfg: &BoConfig) -> Result<BoOutcome> {
    cfg.validate()?;
    let latent = gen.latent();
    if latent.d_p != cfg.d_p {
        return Err(Error::Dimension {
            op: "bo_run",
            detail: format!("config d_p {} but generator d_p {}", cfg.d_p, latent.d_p),
        });
    }
    let bank = match (cfg.mode.robust(), cfg.common_random_numbers) {
        (Some(_), true) => Some(SampleBank::draw(latent, cfg.n_mc, false, &mut substream(cfg.seed, 1))?),
        _ => None,
    };
    let mut objective = Objective {
        gen,
        qoi,
        cfg,
        bank,
        rng: substream(cfg.seed, 2),
    };
    let mut propose_rng = substream(cfg.seed, 3);

    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_total);
    let mut ys: Vec<f64> = Vec::with_capacity(cfg.n_total);
    let mut trace = BoTrace::default();
    let mut record = |xs: &mut Vec<Vec<f64>>, ys: &mut Vec<f64>, c_p: Vec<f64>, y: f64, acq: Option<f64>| {
        let incumbent = ys.iter().copied().fold(y, f64::max);
        trace.records.push(BoRecord {
            schema_version: SCHEMA_VERSION,
            iter: xs.len(),
            c_p: c_p.clone(),
            objective: y,
            acquisition: acq,
            mode: cfg.mode.label().to_string(),
            incumbent,
        });
        xs.push(c_p);
        ys.push(y);
    };

    for c_p in lhs_sample(cfg.n_init, cfg.d_p, &mut substream(cfg.seed, 0))? {
        let y = objective.eval(&c_p)?;
        record(&mut xs, &mut ys, c_p, y, None);
    }
    while xs.len() < cfg.n_total {
        let model = gp_fit(&xs, &ys, &cfg.gp)?;
        let f_best = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut c_p, mut ei) = propose_next(&model, f_best, &mut propose_rng)?;
        // re-sampling a deterministic objective teaches the surrogate nothing
        if model.distance_to_data(&c_p) < DUPLICATE_RADIUS {
            c_p = most_uncertain(&model, &mut propose_rng)?;
            ei = expected_improvement(&model, &c_p, f_best);
        }
        let y = objective.eval(&c_p)?;
        record(&mut xs, &mut ys, c_p, y, Some(ei));
    }

    let best = (0..ys.len()).fold(0, |b, i| if ys[i] > ys[b] { i } else { b });
    let zero = vec![0.0; latent.d_z];
    let best_design = gen.generate_nominal(&xs[best], &zero)?;
    Ok(BoOutcome {
        trace,
        best_c_p: xs[best].clone(),
        best_objective: ys[best],
        best_design,
    })
}
