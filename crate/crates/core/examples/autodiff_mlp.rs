//! Fits a small tanh MLP to `sin(3x)` with the reverse-mode tape and Adam,
//! then checks one gradient against finite differences.

use ganduf::autodiff::{grad_check, AdamConfig, AdamState, Graph, Tensor};
use ganduf::nn::{Activation, Mlp};
use ganduf::rng::seeded;

fn main() -> ganduf::Result<()> {
    let n = 64;
    let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin()).collect();

    let mut net = Mlp::new(&[1, 32, 32, 1], Activation::Tanh, Activation::Identity, &mut seeded(0))?;
    let cfg = AdamConfig {
        lr: 1e-2,
        beta1: 0.9,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(cfg, net.params());
    for step in 0..=2000 {
        let mut g = Graph::new();
        let vars = net.bind(&mut g, true);
        let x = g.constant_matrix(n, 1, xs.clone())?;
        let y = g.constant_matrix(n, 1, ys.clone())?;
        let out = net.forward(&mut g, &vars, x)?;
        let diff = g.sub(out, y)?;
        let sq = g.square(diff);
        let loss = g.mean(sq);
        if step % 500 == 0 {
            println!("step {step:4}  mse {:.3e}", g.scalar(loss)?);
        }
        g.backward(loss)?;
        net.collect_grads(&g, &vars)?;
        adam.step(net.params_mut())?;
    }

    // d/dx of sum(tanh(x)^2) on a random matrix
    let x = Tensor::matrix(2, 3, vec![0.3, -1.2, 0.8, 2.0, -0.1, 0.5])?;
    let rel = grad_check(
        |g, v| {
            let t = g.tanh(v);
            let s = g.square(t);
            Ok(g.sum(s))
        },
        &x,
        6e-6,
    )?;
    println!("finite-difference check: max rel err {rel:.1e}");
    Ok(())
}
