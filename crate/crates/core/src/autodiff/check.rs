use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares the tape gradient of a scalar function with central differences.
///
/// Returns `max_i |a_i - d_i| / (|a_i| + |d_i| + 1e-12)`. Near kinks
/// (clamps, `leaky_relu` at 0) the two disagree and the error is large.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    if h <= 0.0 {
        return Err(Error::contract("finite-difference step must be positive"));
    }
    let mut g = Graph::new();
    let xv = g.param(x);
    let out = f(&mut g, xv)?;
    g.backward(out)?;
    let analytic = g
        .grad(xv)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; x.len()]);

    let eval = |t: &Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let v = g.constant(t);
        let out = f(&mut g, v)?;
        g.scalar(out)
    };

    let mut probe = x.clone();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = eval(&probe)?;
        probe.data_mut()[i] = orig - h;
        let down = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let cd = (up - down) / (2.0 * h);
        let err = (a - cd).abs() / (a.abs() + cd.abs() + 1e-12);
        worst = worst.max(err);
    }
    Ok(worst)
}
