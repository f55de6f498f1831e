//! Hierarchical GAN: one generator `G(c_p, c_c, z)` for both nominal and fabricated
//! designs, and a pair discriminator `D` with an auxiliary code head `Q`.
//!
//! Nominal designs are `G(c_p, 0, z)`; fabricated ones feed a child code
//! `c_c`. `D` sees `(x_nom, x_fab)` pairs and `Q` predicts `(c_p, c_c)` from
//! generated pairs, which ties the parent code to design identity and the
//! child code to fabrication variability.

mod io;
mod losses;
mod train;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use io::{load_model, load_model_with, save_model};
pub use losses::{hier_gan_losses, loss_gradients, GanLosses, GeneratorLoss, Player};
pub use train::{latent_recovery, train, train_from, LatentRecovery, LossRecord, TrainConfig, TrainOutcome};

use crate::autodiff::{Graph, Var, LEAKY_SLOPE};
use crate::datasets::{DesignDataset, DesignKind};
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};

/// Latent layout and priors: `c_p ~ U(0,1)^d_p`, `c_c ~ N(0, child_var I)`, `z ~ N(0, noise_var I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatentConfig {
    pub d_p: usize,
    pub d_c: usize,
    pub d_z: usize,
    pub child_var: f64,
    pub noise_var: f64,
}

impl Default for LatentConfig {
    /// The airfoil dimensions: 7 parent, 5 child, 10 noise.
    fn default() -> Self {
        Self::new(7, 5, 10)
    }
}

impl LatentConfig {
    pub fn new(d_p: usize, d_c: usize, d_z: usize) -> Self {
        Self {
            d_p,
            d_c,
            d_z,
            child_var: 0.5,
            noise_var: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_p == 0 || self.d_c == 0 {
            return Err(Error::contract(format!(
                "latent dims need d_p >= 1 and d_c >= 1 (got {}, {})",
                self.d_p, self.d_c
            )));
        }
        for (name, v) in [("child_var", self.child_var), ("noise_var", self.noise_var)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::contract(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.d_p + self.d_c + self.d_z
    }

    pub fn code_dim(&self) -> usize {
        self.d_p + self.d_c
    }

    pub fn sample_child<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        gaussian(self.child_var, self.d_c, rng)
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        gaussian(self.noise_var, self.d_z, rng)
    }
}

fn gaussian<R: Rng + ?Sized>(var: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, var.sqrt()).expect("variance validated");
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// A batch of latent draws, each stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Priors {
    pub batch: usize,
    pub c_p: Vec<f64>,
    pub c_c: Vec<f64>,
    pub z: Vec<f64>,
}

impl Priors {
    /// Concatenated `(c_p, c_c)` rows, the targets of the `Q` head.
    pub fn codes(&self, cfg: &LatentConfig) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.batch * cfg.code_dim());
        for r in 0..self.batch {
            out.extend_from_slice(&self.c_p[r * cfg.d_p..(r + 1) * cfg.d_p]);
            out.extend_from_slice(&self.c_c[r * cfg.d_c..(r + 1) * cfg.d_c]);
        }
        out
    }
}

pub fn sample_priors<R: Rng + ?Sized>(cfg: &LatentConfig, batch: usize, rng: &mut R) -> Result<Priors> {
    cfg.validate()?;
    if batch == 0 {
        return Err(Error::contract("batch must be >= 1"));
    }
    let c_p = (0..batch * cfg.d_p).map(|_| rng.random::<f64>()).collect();
    let c_c = gaussian(cfg.child_var, batch * cfg.d_c, rng);
    let z = gaussian(cfg.noise_var, batch * cfg.d_z, rng);
    Ok(Priors { batch, c_p, c_c, z })
}

/// Affine map between design space and the unit-scale space the networks work in.
///
/// Coordinates are centered per dimension and divided by a single global
/// scale, so relative geometry (and fabrication noise) is preserved.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignScaler {
    pub mean: Vec<f64>,
    pub scale: f64,
}

impl DesignScaler {
    pub fn identity(dims: usize) -> Self {
        Self {
            mean: vec![0.0; dims],
            scale: 1.0,
        }
    }

    pub fn fit(ds: &DesignDataset) -> Self {
        let d = ds.design_dims();
        let count = ds.n_nominal() * (1 + ds.n_fab());
        let all = || ds.nominal_flat().chunks(d).chain(ds.fabricated_flat().chunks(d));
        let mut mean = vec![0.0; d];
        for row in all() {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let ss: f64 = all()
            .flat_map(|row| row.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)))
            .sum();
        let scale = (ss / (count * d) as f64).sqrt();
        Self {
            mean,
            scale: if scale > 1e-12 { scale } else { 1.0 },
        }
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    /// Normalizes a flat buffer of whole designs in place.
    pub fn normalize(&self, rows: &mut [f64]) {
        for row in rows.chunks_mut(self.dims()) {
            for (x, m) in row.iter_mut().zip(&self.mean) {
                *x = (*x - m) / self.scale;
            }
        }
    }

    pub fn denormalize(&self, rows: &mut [f64]) {
        for row in rows.chunks_mut(self.dims()) {
            for (x, m) in row.iter_mut().zip(&self.mean) {
                *x = *x * self.scale + m;
            }
        }
    }
}

/// Hidden layer widths for both networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            gen_hidden: vec![128, 256],
            disc_hidden: vec![256, 128],
        }
    }
}

/// Dense generator `concat(c_p, c_c, z) -> design`, tanh hidden layers, linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct HierGenerator {
    latent: LatentConfig,
    net: Mlp,
    scaler: DesignScaler,
}

impl HierGenerator {
    pub fn new<R: Rng + ?Sized>(
        latent: LatentConfig,
        hidden: &[usize],
        scaler: DesignScaler,
        rng: &mut R,
    ) -> Result<Self> {
        latent.validate()?;
        let mut sizes = vec![latent.input_dim()];
        sizes.extend_from_slice(hidden);
        sizes.push(scaler.dims());
        let net = Mlp::new(&sizes, Activation::Tanh, Activation::Identity, rng)?;
        Ok(Self { latent, net, scaler })
    }

    pub fn from_parts(latent: LatentConfig, net: Mlp, scaler: DesignScaler) -> Result<Self> {
        latent.validate()?;
        if net.input_dim() != latent.input_dim() || net.output_dim() != scaler.dims() {
            return Err(Error::Dimension {
                op: "generator",
                detail: format!(
                    "network {:?} vs latent input {} and design dims {}",
                    net.sizes(),
                    latent.input_dim(),
                    scaler.dims()
                ),
            });
        }
        Ok(Self { latent, net, scaler })
    }

    pub fn latent(&self) -> &LatentConfig {
        &self.latent
    }

    pub fn design_dims(&self) -> usize {
        self.scaler.dims()
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn scaler(&self) -> &DesignScaler {
        &self.scaler
    }

    /// Latent input rows `[c_p, c_c, z]`; `c_c = None` means the nominal slice `c_c = 0`.
    pub fn input_rows(&self, batch: usize, c_p: &[f64], c_c: Option<&[f64]>, z: &[f64]) -> Result<Vec<f64>> {
        let l = &self.latent;
        let check = |name: &str, got: usize, per: usize| {
            if got != batch * per {
                Err(Error::Dimension {
                    op: "generator input",
                    detail: format!("{name} has {got} values, expected {batch} x {per}"),
                })
            } else {
                Ok(())
            }
        };
        check("c_p", c_p.len(), l.d_p)?;
        if let Some(c) = c_c {
            check("c_c", c.len(), l.d_c)?;
        }
        check("z", z.len(), l.d_z)?;
        let mut rows = Vec::with_capacity(batch * l.input_dim());
        for r in 0..batch {
            rows.extend_from_slice(&c_p[r * l.d_p..(r + 1) * l.d_p]);
            match c_c {
                Some(c) => rows.extend_from_slice(&c[r * l.d_c..(r + 1) * l.d_c]),
                None => rows.extend(std::iter::repeat_n(0.0, l.d_c)),
            }
            rows.extend_from_slice(&z[r * l.d_z..(r + 1) * l.d_z]);
        }
        Ok(rows)
    }

    /// Forward pass in normalized design space on a recorded graph.
    pub fn forward(&self, g: &mut Graph, params: &[Var], input: Var) -> Result<Var> {
        self.net.forward(g, params, input)
    }

    /// A batch of fabricated designs in design space.
    pub fn generate_batch(&self, batch: usize, c_p: &[f64], c_c: Option<&[f64]>, z: &[f64]) -> Result<Vec<f64>> {
        let rows = self.input_rows(batch, c_p, c_c, z)?;
        let mut out = self.net.eval(batch, rows)?;
        self.scaler.denormalize(&mut out);
        Ok(out)
    }

    pub fn generate_fabricated(&self, c_p: &[f64], c_c: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        self.generate_batch(1, c_p, Some(c_c), z)
    }

    /// `G(c_p, 0, z)`, through the same code path as [`Self::generate_fabricated`].
    pub fn generate_nominal(&self, c_p: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        self.generate_batch(1, c_p, None, z)
    }
}

/// Anything that maps latent codes to designs: a trained generator or an analytic stand-in.
pub trait DesignGenerator: Sync {
    fn latent(&self) -> &LatentConfig;
    fn design_dims(&self) -> usize;
    fn generate(&self, c_p: &[f64], c_c: &[f64], z: &[f64]) -> Result<Vec<f64>>;

    fn generate_nominal(&self, c_p: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        self.generate(c_p, &vec![0.0; self.latent().d_c], z)
    }
}

impl DesignGenerator for HierGenerator {
    fn latent(&self) -> &LatentConfig {
        &self.latent
    }

    fn design_dims(&self) -> usize {
        self.scaler.dims()
    }

    fn generate(&self, c_p: &[f64], c_c: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        self.generate_fabricated(c_p, c_c, z)
    }

    fn generate_nominal(&self, c_p: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        HierGenerator::generate_nominal(self, c_p, z)
    }
}

/// Pair discriminator: leaky-ReLU trunk on `concat(x_nom, x_fab)`, then a
/// one-logit `D` head and a `Q` head predicting `(c_p, c_c)` means.
#[derive(Clone, Debug, PartialEq)]
pub struct HierDiscriminator {
    trunk: Mlp,
    d_head: Mlp,
    q_head: Mlp,
}

/// Graph handles for bound discriminator parameters.
#[derive(Clone, Debug)]
pub struct DiscVars {
    pub trunk: Vec<Var>,
    pub d_head: Vec<Var>,
    pub q_head: Vec<Var>,
}

impl HierDiscriminator {
    pub fn new<R: Rng + ?Sized>(design_dims: usize, hidden: &[usize], code_dim: usize, rng: &mut R) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::contract("discriminator needs at least one hidden layer"));
        }
        let leaky = Activation::LeakyRelu { slope: LEAKY_SLOPE };
        let mut sizes = vec![2 * design_dims];
        sizes.extend_from_slice(hidden);
        let trunk = Mlp::new(&sizes, leaky, leaky, rng)?;
        let last = *hidden.last().expect("nonempty");
        let d_head = Mlp::new(&[last, 1], Activation::Identity, Activation::Identity, rng)?;
        let q_head = Mlp::new(&[last, code_dim], Activation::Identity, Activation::Identity, rng)?;
        Ok(Self { trunk, d_head, q_head })
    }

    pub fn from_parts(trunk: Mlp, d_head: Mlp, q_head: Mlp) -> Result<Self> {
        if trunk.output_dim() != d_head.input_dim()
            || trunk.output_dim() != q_head.input_dim()
            || d_head.output_dim() != 1
        {
            return Err(Error::Dimension {
                op: "discriminator",
                detail: "head sizes do not match the trunk".into(),
            });
        }
        Ok(Self { trunk, d_head, q_head })
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn d_head(&self) -> &Mlp {
        &self.d_head
    }

    pub fn q_head(&self) -> &Mlp {
        &self.q_head
    }

    pub fn design_dims(&self) -> usize {
        self.trunk.input_dim() / 2
    }

    pub fn code_dim(&self) -> usize {
        self.q_head.output_dim()
    }

    /// All parameter networks in storage order: trunk, D head, Q head.
    pub fn nets_mut(&mut self) -> [&mut Mlp; 3] {
        [&mut self.trunk, &mut self.d_head, &mut self.q_head]
    }

    pub fn nets(&self) -> [&Mlp; 3] {
        [&self.trunk, &self.d_head, &self.q_head]
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> DiscVars {
        DiscVars {
            trunk: self.trunk.bind(g, trainable),
            d_head: self.d_head.bind(g, trainable),
            q_head: self.q_head.bind(g, trainable),
        }
    }

    /// Returns `(logits [n,1], q_means [n, d_p + d_c])` for normalized pairs.
    pub fn forward(&self, g: &mut Graph, vars: &DiscVars, nom: Var, fab: Var) -> Result<(Var, Var)> {
        let x = g.concat(&[nom, fab])?;
        let h = self.trunk.forward(g, &vars.trunk, x)?;
        let logit = self.d_head.forward(g, &vars.d_head, h)?;
        let q = self.q_head.forward(g, &vars.q_head, h)?;
        Ok((logit, q))
    }

    /// Evaluates on design-space pairs; returns flat logits and Q means.
    pub fn eval(&self, scaler: &DesignScaler, batch: usize, nom: &[f64], fab: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.design_dims();
        let (mut nom, mut fab) = (nom.to_vec(), fab.to_vec());
        scaler.normalize(&mut nom);
        scaler.normalize(&mut fab);
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let nv = g.constant_matrix(batch, d, nom)?;
        let fv = g.constant_matrix(batch, d, fab)?;
        let (l, q) = self.forward(&mut g, &vars, nv, fv)?;
        Ok((g.value(l).to_vec(), g.value(q).to_vec()))
    }
}

/// A trained (or freshly initialized) hierarchical GAN plus the design layout it emits.
#[derive(Clone, Debug, PartialEq)]
pub struct HierGan {
    pub kind: DesignKind,
    pub design_shape: Vec<usize>,
    pub arch: ArchConfig,
    pub gen: HierGenerator,
    pub disc: HierDiscriminator,
}

impl HierGan {
    /// Random initialization sized for `ds`, with the scaler fitted to it.
    pub fn init<R: Rng + ?Sized>(ds: &DesignDataset, latent: &LatentConfig, arch: &ArchConfig, rng: &mut R) -> Result<Self> {
        let scaler = DesignScaler::fit(ds);
        Self::init_with_scaler(ds.kind, ds.design_shape.clone(), scaler, latent, arch, rng)
    }

    pub fn init_with_scaler<R: Rng + ?Sized>(
        kind: DesignKind,
        design_shape: Vec<usize>,
        scaler: DesignScaler,
        latent: &LatentConfig,
        arch: &ArchConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if design_shape.iter().product::<usize>() != scaler.dims() {
            return Err(Error::contract("design shape does not match scaler dims"));
        }
        let gen = HierGenerator::new(latent.clone(), &arch.gen_hidden, scaler, rng)?;
        let disc = HierDiscriminator::new(gen.design_dims(), &arch.disc_hidden, latent.code_dim(), rng)?;
        Ok(Self {
            kind,
            design_shape,
            arch: arch.clone(),
            gen,
            disc,
        })
    }

    pub fn latent(&self) -> &LatentConfig {
        self.gen.latent()
    }
}

#[cfg(test)]
mod tests;
