//! Coverage and fidelity checks of a trained generator, plus the (d_p, d_c) sweep driver.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::autodiff::Graph;
use crate::datasets::{DesignDataset, Fabrication};
use crate::error::{Error, Result};
use crate::hgan::{train, DesignGenerator, HierGenerator, LatentConfig, TrainConfig};
use crate::parallel::par_map;
use crate::rng::{substream, Rng64};
use crate::uq::{QoiFunction, MAX_FAILURE_FRACTION, SCHEMA_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub n_restarts: usize,
    pub max_iters: usize,
    /// Stop once one step improves the loss by less than this fraction.
    pub rel_tol: f64,
    /// Coordinates per surface point (2) or pixel (1), for the RMS error.
    pub point_dim: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_restarts: 6,
            max_iters: 200,
            rel_tol: 1e-8,
            point_dim: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub target: Vec<f64>,
    pub c_p: Vec<f64>,
    /// Euclidean distance between `G(c_p, 0, 0)` and the target.
    pub distance: f64,
    /// `distance / sqrt(points)`: root-mean-square error per point or pixel.
    pub rms: f64,
    pub restarts: usize,
    pub iterations: usize,
}

/// Squared design-space distance of `G(c_p, 0, 0)` to a target and its gradient in `c_p`.
fn fit_loss(gen: &HierGenerator, target_norm: &[f64], c_p: &[f64]) -> Result<(f64, Vec<f64>)> {
    let l = gen.latent();
    let scale = gen.scaler().scale;
    let mut g = Graph::new();
    let params = gen.net().bind(&mut g, false);
    let cp = g.variable_matrix(1, l.d_p, c_p.to_vec())?;
    let rest = l.d_c + l.d_z;
    let input = if rest > 0 {
        let zeros = g.constant_matrix(1, rest, vec![0.0; rest])?;
        g.concat(&[cp, zeros])?
    } else {
        cp
    };
    let out = gen.forward(&mut g, &params, input)?;
    let t = g.constant_matrix(1, target_norm.len(), target_norm.to_vec())?;
    let diff = g.sub(out, t)?;
    let sq = g.square(diff);
    let total = g.sum(sq);
    let loss = g.scale(total, scale * scale);
    g.backward(loss)?;
    let grad = g.grad(cp).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; l.d_p]);
    Ok((g.scalar(loss)?, grad))
}

fn project(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Projected gradient descent with Barzilai-Borwein steps and Armijo backtracking.
fn descend(gen: &HierGenerator, target_norm: &[f64], start: &[f64], opts: &FitOptions) -> Result<(Vec<f64>, usize)> {
    let mut x = start.to_vec();
    project(&mut x);
    let (mut f, mut grad) = fit_loss(gen, target_norm, &x)?;
    if !f.is_finite() {
        return Err(Error::Numerical(format!("fit loss {f} at start {start:?}")));
    }
    let gmax = grad.iter().fold(0f64, |m, v| m.max(v.abs()));
    let mut step = if gmax > 0.0 { 0.1 / gmax } else { 1.0 };
    let mut iters = 0;
    while iters < opts.max_iters {
        iters += 1;
        let (mut xn, mut fn_, mut gn);
        loop {
            xn = x.iter().zip(&grad).map(|(a, g)| a - step * g).collect::<Vec<_>>();
            project(&mut xn);
            let decrease: f64 = grad.iter().zip(x.iter().zip(&xn)).map(|(g, (a, b))| g * (a - b)).sum();
            (fn_, gn) = fit_loss(gen, target_norm, &xn)?;
            if fn_.is_finite() && fn_ <= f - 1e-4 * decrease {
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                return Ok((x, iters));
            }
        }
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e6) } else { (step * 2.0).min(1e6) };
        let improvement = (f - fn_) / f.max(1e-300);
        (x, f, grad) = (xn, fn_, gn);
        if improvement < opts.rel_tol || ss == 0.0 {
            break;
        }
    }
    Ok((x, iters))
}

/// Best fit of `G(c_p, 0, 0)` to `target` over the given starting codes.
pub fn fitting_test_from(gen: &HierGenerator, target: &[f64], starts: &[Vec<f64>], opts: &FitOptions) -> Result<FitResult> {
    let dims = gen.design_dims();
    if target.len() != dims {
        return Err(Error::Dimension {
            op: "fitting_test",
            detail: format!("target has {} values, generator emits {dims}", target.len()),
        });
    }
    if starts.is_empty() || starts.iter().any(|s| s.len() != gen.latent().d_p) {
        return Err(Error::contract("fitting_test needs >= 1 start of length d_p"));
    }
    if opts.point_dim == 0 || !dims.is_multiple_of(opts.point_dim) {
        return Err(Error::contract(format!("point_dim {} does not divide {dims}", opts.point_dim)));
    }
    let mut target_norm = target.to_vec();
    gen.scaler().normalize(&mut target_norm);
    let zero_z = vec![0.0; gen.latent().d_z];

    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    let mut failures = Vec::new();
    for s in starts {
        match descend(gen, &target_norm, s, opts) {
            Ok((c_p, iters)) => {
                let x = gen.generate_nominal(&c_p, &zero_z)?;
                let d = x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if d.is_finite() && best.as_ref().is_none_or(|b| d < b.0) {
                    best = Some((d, c_p, iters));
                }
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    let Some((distance, c_p, iterations)) = best else {
        return Err(Error::Numerical(format!(
            "all {} fitting restarts diverged: {}",
            starts.len(),
            failures.join("; ")
        )));
    };
    Ok(FitResult {
        target: target.to_vec(),
        c_p,
        distance,
        rms: distance / ((dims / opts.point_dim) as f64).sqrt(),
        restarts: starts.len(),
        iterations,
    })
}

/// Fits from `opts.n_restarts` uniform starts in the parent box.
pub fn fitting_test<R: Rng + ?Sized>(
    gen: &HierGenerator,
    target: &[f64],
    opts: &FitOptions,
    rng: &mut R,
) -> Result<FitResult> {
    let d_p = gen.latent().d_p;
    let starts: Vec<Vec<f64>> = (0..opts.n_restarts)
        .map(|_| (0..d_p).map(|_| rng.random()).collect())
        .collect();
    fitting_test_from(gen, target, &starts, opts)
}

/// `W_1` between two equal-size samples: mean gap between matched order statistics.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::contract(format!(
            "wasserstein_1d needs equal nonempty samples, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Per-nominal `W_1` between model and ground-truth fabricated QoI, with a same-process null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub n_samples: usize,
    pub distances: Vec<f64>,
    /// `W_1` between two independent ground-truth batches at each nominal.
    pub null: Vec<f64>,
}

impl FidelityReport {
    pub fn median_distance(&self) -> f64 {
        Data::new(self.distances.clone()).median()
    }

    pub fn median_null(&self) -> f64 {
        Data::new(self.null.clone()).median()
    }
}

fn qoi_batch(qoi: &QoiFunction, designs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let results: Vec<Result<f64>> = if qoi.is_concurrent() {
        par_map(designs, |_, d| qoi.eval(d))
    } else {
        designs.iter().map(|d| qoi.eval(d)).collect()
    };
    let mut values = Vec::with_capacity(designs.len());
    for r in results {
        match r {
            Ok(v) => values.push(v),
            Err(Error::Qoi(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let failed = designs.len() - values.len();
    if failed as f64 > MAX_FAILURE_FRACTION * designs.len() as f64 || values.is_empty() {
        return Err(Error::Qoi(format!("{failed} of {} fidelity samples failed", designs.len())));
    }
    Ok(values)
}

fn w1_truncated(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len().min(b.len());
    wasserstein_1d(&a[..n], &b[..n])
}

/// Fidelity of an arbitrary fabricated-design sampler against the ground-truth process.
///
/// `model_fab(i, nominal, rng)` draws one model fabrication of nominal `i`.
pub fn fidelity_test_with<F>(
    nominals: &[Vec<f64>],
    mut model_fab: F,
    fab: &Fabrication,
    qoi: &QoiFunction,
    n_samples: usize,
    rng: &mut Rng64,
) -> Result<FidelityReport>
where
    F: FnMut(usize, &[f64], &mut Rng64) -> Result<Vec<f64>>,
{
    if n_samples == 0 || nominals.is_empty() {
        return Err(Error::contract("fidelity_test needs n_samples >= 1 and >= 1 nominal"));
    }
    let mut distances = Vec::with_capacity(nominals.len());
    let mut null = Vec::with_capacity(nominals.len());
    for (i, nom) in nominals.iter().enumerate() {
        let model: Vec<Vec<f64>> = (0..n_samples).map(|_| model_fab(i, nom, rng)).collect::<Result<_>>()?;
        let truth: Vec<Vec<f64>> = (0..2 * n_samples).map(|_| fab.fabricate(nom, rng)).collect::<Result<_>>()?;
        let qm = qoi_batch(qoi, &model)?;
        let qt = qoi_batch(qoi, &truth[..n_samples])?;
        let qt2 = qoi_batch(qoi, &truth[n_samples..])?;
        distances.push(w1_truncated(&qm, &qt)?);
        null.push(w1_truncated(&qt2, &qt)?);
    }
    Ok(FidelityReport {
        n_samples,
        distances,
        null,
    })
}

/// Compares `f(G(c_p, c_c, 0))` with `f(fab(G(c_p, 0, 0)))` at each parent code.
pub fn fidelity_test<G: DesignGenerator + ?Sized>(
    gen: &G,
    c_ps: &[Vec<f64>],
    fab: &Fabrication,
    qoi: &QoiFunction,
    n_samples: usize,
    rng: &mut Rng64,
) -> Result<FidelityReport> {
    let latent = gen.latent();
    let zero_z = vec![0.0; latent.d_z];
    let nominals: Vec<Vec<f64>> = c_ps.iter().map(|c| gen.generate_nominal(c, &zero_z)).collect::<Result<_>>()?;
    fidelity_test_with(
        &nominals,
        |i, _, rng| gen.generate(&c_ps[i], &latent.sample_child(rng), &zero_z),
        fab,
        qoi,
        n_samples,
        rng,
    )
}

/// Median and interquartile range; `None` for an empty sample.
fn summary(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let mut d = Data::new(v.to_vec());
    Some((d.median(), d.interquartile_range()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub grid: Vec<(usize, usize)>,
    pub d_z: usize,
    pub n_targets: usize,
    pub n_nominals: usize,
    /// Fabrication draws per nominal in the fidelity test.
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            grid: vec![(2, 2)],
            d_z: 4,
            n_targets: 20,
            n_nominals: 10,
            n_samples: 50,
            seed: 0,
        }
    }
}

impl StudyConfig {
    /// Airfoil sweep over `{2,5,7,10} x {2,5,10}`. These values are plausible
    /// ranges, not the published grid; d_p = 7 is where coverage was reported to level off.
    pub fn airfoil_preset(seed: u64) -> Self {
        let grid = [2, 5, 7, 10].iter().flat_map(|&p| [2, 5, 10].map(|c| (p, c))).collect();
        Self {
            grid,
            d_z: 10,
            n_targets: 100,
            n_nominals: 30,
            n_samples: 100,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub d_p: usize,
    pub d_c: usize,
    pub seed: u64,
    pub n_targets: usize,
    pub n_nominals: usize,
    pub n_samples: usize,
    pub fit_rms: Vec<f64>,
    pub wasserstein: Vec<f64>,
    pub null: Vec<f64>,
    pub fit_median: Option<f64>,
    pub fit_iqr: Option<f64>,
    pub w1_median: Option<f64>,
    pub w1_iqr: Option<f64>,
    /// Set when the cell failed; the study carries on with the other cells.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub cells: Vec<StudyCell>,
}

impl StudyReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        let mut s = String::from("d_p,d_c,fit_median,fit_iqr,w1_median,w1_iqr,seed,status\n");
        for c in &self.cells {
            s += &format!(
                "{},{},{},{},{},{},{},{}\n",
                c.d_p,
                c.d_c,
                opt(c.fit_median),
                opt(c.fit_iqr),
                opt(c.w1_median),
                opt(c.w1_iqr),
                c.seed,
                if c.error.is_some() { "failed" } else { "ok" }
            );
        }
        s
    }
}

fn run_cell(
    ds: &DesignDataset,
    d_p: usize,
    d_c: usize,
    train_cfg: &TrainConfig,
    cfg: &StudyConfig,
    qoi: &QoiFunction,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let latent = LatentConfig::new(d_p, d_c, cfg.d_z);
    let model = train(ds, &latent, &TrainConfig { seed, ..train_cfg.clone() })?.model;
    let mut rng = substream(seed, 100);
    let fit_opts = FitOptions {
        n_restarts: 3 * d_p,
        point_dim: ds.kind.point_dim(),
        ..FitOptions::default()
    };
    let n_t = cfg.n_targets.min(ds.n_nominal());
    let targets = sample_indices(&mut rng, ds.n_nominal(), n_t).into_vec();
    let fit_rms = targets
        .iter()
        .map(|&i| fitting_test(&model.gen, ds.nominal(i), &fit_opts, &mut rng).map(|f| f.rms))
        .collect::<Result<Vec<_>>>()?;
    let c_ps: Vec<Vec<f64>> = (0..cfg.n_nominals)
        .map(|_| (0..d_p).map(|_| rng.random()).collect())
        .collect();
    let fid = fidelity_test(&model.gen, &c_ps, &ds.fabrication(), qoi, cfg.n_samples, &mut rng)?;
    Ok((fit_rms, fid.distances, fid.null))
}

/// Trains one model per `(d_p, d_c)` cell and summarizes coverage and fidelity.
///
/// Cells run concurrently with per-cell seeds; a failing cell is recorded, not fatal.
pub fn parametric_study(
    ds: &DesignDataset,
    cfg: &StudyConfig,
    train_cfg: &TrainConfig,
    qoi: &QoiFunction,
) -> Result<StudyReport> {
    if cfg.grid.is_empty() {
        return Err(Error::contract("parametric_study needs a nonempty grid"));
    }
    let cells = par_map(&cfg.grid, |k, &(d_p, d_c)| {
        let seed = cfg.seed.wrapping_add(k as u64);
        let (fit_rms, wasserstein, null, error) = match run_cell(ds, d_p, d_c, train_cfg, cfg, qoi, seed) {
            Ok((f, w, n)) => (f, w, n, None),
            Err(e) => (vec![], vec![], vec![], Some(e.to_string())),
        };
        let fit = summary(&fit_rms);
        let w1 = summary(&wasserstein);
        StudyCell {
            d_p,
            d_c,
            seed,
            n_targets: fit_rms.len(),
            n_nominals: wasserstein.len(),
            n_samples: cfg.n_samples,
            fit_median: fit.map(|s| s.0),
            fit_iqr: fit.map(|s| s.1),
            w1_median: w1.map(|s| s.0),
            w1_iqr: w1.map(|s| s.1),
            fit_rms,
            wasserstein,
            null,
            error,
        }
    });
    Ok(StudyReport {
        schema_version: SCHEMA_VERSION,
        cells,
    })
}
