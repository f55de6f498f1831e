//! Matérn-5/2 Gaussian-process surrogate on standardized targets.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpOptions {
    /// Smallest noise-to-signal variance ratio the fit may choose.
    pub nugget_floor: f64,
    pub n_starts: usize,
    /// Nelder-Mead iterations per start.
    pub max_iters: u64,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self {
            nugget_floor: 1e-6,
            n_starts: 8,
            max_iters: 200,
        }
    }
}

/// Matérn-5/2 correlation at distance `r` for length-scale `l`.
pub fn matern52(r: f64, l: f64) -> f64 {
    let s = 5f64.sqrt() * r / l;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn correlation(x: &[Vec<f64>], l: f64, g: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| matern52(dist(&x[i], &x[j]), l) + if i == j { g } else { 0.0 })
}

/// Profiled fit at fixed `(l, g)`: the signal variance has a closed form.
struct Profile {
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    signal_var: f64,
    nll: f64,
}

fn profile(x: &[Vec<f64>], y: &DVector<f64>, l: f64, g: f64) -> Option<Profile> {
    let chol = correlation(x, l, g).cholesky()?;
    let alpha = chol.solve(y);
    let n = y.len() as f64;
    let signal_var = (y.dot(&alpha) / n).max(1e-12);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let nll = 0.5 * n * signal_var.ln() + 0.5 * log_det;
    nll.is_finite().then_some(Profile {
        chol,
        alpha,
        signal_var,
        nll,
    })
}

#[derive(Clone, Copy)]
struct Bounds {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Bounds {
    fn clamp(&self, p: &[f64]) -> [f64; 2] {
        [p[0].clamp(self.lo[0], self.hi[0]), p[1].clamp(self.lo[1], self.hi[1])]
    }
}

struct Likelihood<'a> {
    x: &'a [Vec<f64>],
    y: &'a DVector<f64>,
    bounds: Bounds,
}

impl CostFunction for Likelihood<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let q = self.bounds.clamp(p);
        let outside = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        Ok(match profile(self.x, self.y, q[0].exp(), q[1].exp()) {
            Some(pr) => pr.nll + 1e3 * outside,
            None => 1e300,
        })
    }
}

/// A fitted GP over inputs in the unit box.
#[derive(Clone, Debug)]
pub struct GpModel {
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_scale: f64,
    length: f64,
    nugget: f64,
    signal_var: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

/// Fits length-scale and nugget by multi-start likelihood maximization in log space.
pub fn gp_fit(x: &[Vec<f64>], y: &[f64], opts: &GpOptions) -> Result<GpModel> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            op: "gp_fit",
            detail: format!("{} inputs but {} targets", x.len(), y.len()),
        });
    }
    let d = x.first().map_or(0, Vec::len);
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension {
            op: "gp_fit",
            detail: "inputs must be nonempty rows of equal length".into(),
        });
    }
    if x.iter().all(|r| r == &x[0]) {
        return Err(Error::contract("gp_fit needs at least 2 distinct points"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("gp_fit: non-finite target".into()));
    }
    if !(opts.nugget_floor > 0.0 && opts.nugget_floor < 1.0) || opts.n_starts == 0 {
        return Err(Error::contract("nugget_floor must lie in (0, 1) and n_starts >= 1"));
    }

    let n = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n).sqrt();
    let y_scale = if sd > 0.0 { sd } else { 1.0 };
    let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_scale));

    let diag = (d as f64).sqrt();
    let bounds = Bounds {
        lo: [(1e-2f64).ln(), opts.nugget_floor.ln()],
        hi: [(2.0 * diag).ln(), 0.0],
    };
    let mut best: Option<(f64, [f64; 2])> = None;
    for k in 0..opts.n_starts {
        let t = if opts.n_starts == 1 { 0.5 } else { k as f64 / (opts.n_starts - 1) as f64 };
        let l0 = (0.05f64.ln() + t * (1.0f64.ln() - 0.05f64.ln())).exp() * diag;
        let g0: f64 = if k % 2 == 0 { 1e-4 } else { 1e-2 };
        let p0 = bounds.clamp(&[l0.ln(), g0.max(opts.nugget_floor).ln()]);
        let simplex = vec![p0.to_vec(), vec![p0[0] + 0.5, p0[1]], vec![p0[0], p0[1] + 1.0]];
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-7)
            .map_err(|e| Error::Numerical(format!("gp_fit: {e}")))?;
        let problem = Likelihood {
            x,
            y: &ys,
            bounds,
        };
        let res = Executor::new(problem, solver)
            .configure(|s| s.max_iters(opts.max_iters))
            .run()
            .map_err(|e| Error::Numerical(format!("gp_fit: {e}")))?;
        let state = res.state();
        if let Some(p) = state.get_best_param() {
            let cost = state.get_best_cost();
            if cost < 1e300 && best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, bounds.clamp(p)));
            }
        }
    }

    let [log_l, log_g] = best.map_or([(0.3 * diag).ln(), bounds.lo[1]], |(_, p)| p);
    let length = log_l.exp();
    let mut nugget = log_g.exp();
    // escalate the nugget until the factorization succeeds
    for _ in 0..8 {
        if let Some(pr) = profile(x, &ys, length, nugget) {
            return Ok(GpModel {
                x: x.to_vec(),
                y_mean,
                y_scale,
                length,
                nugget,
                signal_var: pr.signal_var,
                chol: pr.chol,
                alpha: pr.alpha,
            });
        }
        nugget *= 10.0;
    }
    let eig = SymmetricEigen::new(correlation(x, length, nugget)).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0f64), |(a, b), &e| (a.min(e.abs()), b.max(e.abs())));
    Err(Error::Numerical(format!(
        "gp_fit: kernel matrix not positive definite with nugget {nugget:.1e} (condition estimate {:.3e})",
        hi / lo
    )))
}

impl GpModel {
    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn n_obs(&self) -> usize {
        self.x.len()
    }

    /// Euclidean distance from `x` to the nearest observed input.
    pub fn distance_to_data(&self, x: &[f64]) -> f64 {
        self.x.iter().map(|xi| dist(x, xi)).fold(f64::INFINITY, f64::min)
    }

    pub fn length_scale(&self) -> f64 {
        self.length
    }

    /// Noise-to-signal variance ratio actually used.
    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    /// Prior variance of the latent function, in target units.
    pub fn signal_variance(&self) -> f64 {
        self.signal_var * self.y_scale * self.y_scale
    }

    /// Kernel value `k(a, b)` in target units.
    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        self.signal_variance() * matern52(dist(a, b), self.length)
    }

    /// Posterior mean and standard deviation of the latent function at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let r = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| matern52(dist(x, xi), self.length)));
        let mean = r.dot(&self.alpha);
        let v = self.chol.solve(&r);
        let var = (self.signal_var * (1.0 - r.dot(&v))).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}

pub fn gp_predict(model: &GpModel, x: &[f64]) -> (f64, f64) {
    model.predict(x)
}
