//! Dense multilayer perceptrons on top of [`crate::autodiff`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    LeakyRelu { slope: f64 },
}

impl Activation {
    fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Tanh => g.tanh(x),
            Activation::LeakyRelu { slope } => g.leaky_relu(x, slope),
        }
    }
}

/// Stack of affine layers; parameters are stored as `[w0, b0, w1, b1, ...]`
/// with `w_i: [in, out]` and `b_i: [1, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    params: Vec<Tensor>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::contract(format!("invalid layer sizes {sizes:?}")));
        }
        let mut params = Vec::with_capacity(2 * (sizes.len() - 1));
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            params.push(Tensor::matrix(fan_in, fan_out, w)?);
            params.push(Tensor::zeros(vec![1, fan_out])?);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            hidden,
            output,
            params,
        })
    }

    /// Rebuilds a network from stored parameters, checking every shape.
    pub fn from_parts(
        sizes: Vec<usize>,
        hidden: Activation,
        output: Activation,
        params: Vec<Tensor>,
    ) -> Result<Self> {
        if sizes.len() < 2 || params.len() != 2 * (sizes.len() - 1) {
            return Err(Error::contract("parameter count does not match layer sizes"));
        }
        for (i, pair) in sizes.windows(2).enumerate() {
            if params[2 * i].shape() != [pair[0], pair[1]] || params[2 * i + 1].shape() != [1, pair[1]]
            {
                return Err(Error::Dimension {
                    op: "mlp",
                    detail: format!("layer {i} parameters do not match sizes {sizes:?}"),
                });
            }
        }
        Ok(Self {
            sizes,
            hidden,
            output,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    /// Records every parameter as a leaf; `trainable` decides whether it gets gradients.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| if trainable { g.param(p) } else { g.constant(p) })
            .collect()
    }

    pub fn forward(&self, g: &mut Graph, params: &[Var], x: Var) -> Result<Var> {
        if params.len() != self.params.len() {
            return Err(Error::contract("bound parameter count mismatch"));
        }
        let layers = params.len() / 2;
        let mut h = x;
        for l in 0..layers {
            h = g.matmul(h, params[2 * l])?;
            h = g.add(h, params[2 * l + 1])?;
            let act = if l + 1 == layers { self.output } else { self.hidden };
            h = act.apply(g, h);
        }
        Ok(h)
    }

    /// Adds the gradients of bound parameters into their grad slots.
    pub fn collect_grads(&mut self, g: &Graph, bound: &[Var]) -> Result<()> {
        for (p, &v) in self.params.iter_mut().zip(bound) {
            g.accumulate_into(v, p)?;
        }
        Ok(())
    }

    /// Forward pass on a `[rows, in]` batch without recording gradients.
    pub fn eval(&self, rows: usize, input: Vec<f64>) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let x = g.constant_matrix(rows, self.input_dim(), input)?;
        let y = self.forward(&mut g, &bound, x)?;
        Ok(g.value(y).to_vec())
    }
}
