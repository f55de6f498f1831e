use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchConfig, DesignScaler, HierDiscriminator, HierGan, HierGenerator, LatentConfig};
use crate::autodiff::Tensor;
use crate::container::{self, NamedTensor};
use crate::datasets::DesignKind;
use crate::error::{Error, FormatError, Result};
use crate::nn::{Activation, Mlp};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetSpec {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelManifest {
    content: String,
    kind: DesignKind,
    design_shape: Vec<usize>,
    latent: LatentConfig,
    arch: ArchConfig,
    scale: f64,
    generator: NetSpec,
    trunk: NetSpec,
    d_head: NetSpec,
    q_head: NetSpec,
}

fn spec(net: &Mlp) -> NetSpec {
    NetSpec {
        sizes: net.sizes().to_vec(),
        hidden: net.hidden_activation(),
        output: net.output_activation(),
    }
}

fn push_net(out: &mut Vec<NamedTensor>, prefix: &str, net: &Mlp) {
    for (i, p) in net.params().iter().enumerate() {
        let kind = if i % 2 == 0 { "w" } else { "b" };
        out.push(NamedTensor::new(
            format!("{prefix}.{kind}{}", i / 2),
            p.shape().to_vec(),
            p.data().to_vec(),
        ));
    }
}

fn take_net(tensors: &mut Vec<NamedTensor>, prefix: &str, spec: NetSpec) -> std::result::Result<Mlp, FormatError> {
    let mut params = Vec::new();
    for (l, pair) in spec.sizes.windows(2).enumerate() {
        for (kind, shape) in [("w", vec![pair[0], pair[1]]), ("b", vec![1, pair[1]])] {
            let data = container::take_tensor(tensors, &format!("{prefix}.{kind}{l}"), &shape)?;
            params.push(Tensor::new(shape, data).map_err(|e| FormatError::Manifest(e.to_string()))?);
        }
    }
    Mlp::from_parts(spec.sizes, spec.hidden, spec.output, params).map_err(|e| FormatError::Manifest(e.to_string()))
}

pub fn save_model(model: &HierGan, path: &Path) -> Result<()> {
    let manifest = ModelManifest {
        content: "model".into(),
        kind: model.kind,
        design_shape: model.design_shape.clone(),
        latent: model.latent().clone(),
        arch: model.arch.clone(),
        scale: model.gen.scaler().scale,
        generator: spec(model.gen.net()),
        trunk: spec(model.disc.trunk()),
        d_head: spec(model.disc.d_head()),
        q_head: spec(model.disc.q_head()),
    };
    let mean = &model.gen.scaler().mean;
    let mut tensors = vec![NamedTensor::new("scaler.mean", vec![mean.len()], mean.clone())];
    push_net(&mut tensors, "gen", model.gen.net());
    push_net(&mut tensors, "disc.trunk", model.disc.trunk());
    push_net(&mut tensors, "disc.d", model.disc.d_head());
    push_net(&mut tensors, "disc.q", model.disc.q_head());
    container::write_file(path, &serde_json::to_value(&manifest).expect("manifest serializes"), &tensors)
}

pub fn load_model(path: &Path) -> Result<HierGan> {
    let fmt = |kind: FormatError| Error::Format {
        path: path.to_path_buf(),
        kind,
    };
    let (manifest, mut tensors) = container::read_file(path)?;
    let m: ModelManifest =
        serde_json::from_value(manifest).map_err(|e| fmt(FormatError::Manifest(e.to_string())))?;
    if m.content != "model" {
        return Err(fmt(FormatError::Manifest(format!("expected a model, found {}", m.content))));
    }
    let dims: usize = m.design_shape.iter().product();
    let mean = container::take_tensor(&mut tensors, "scaler.mean", &[dims]).map_err(fmt)?;
    let scaler = DesignScaler { mean, scale: m.scale };
    let gen_net = take_net(&mut tensors, "gen", m.generator).map_err(fmt)?;
    let trunk = take_net(&mut tensors, "disc.trunk", m.trunk).map_err(fmt)?;
    let d_head = take_net(&mut tensors, "disc.d", m.d_head).map_err(fmt)?;
    let q_head = take_net(&mut tensors, "disc.q", m.q_head).map_err(fmt)?;
    let gen = HierGenerator::from_parts(m.latent, gen_net, scaler)?;
    let disc = HierDiscriminator::from_parts(trunk, d_head, q_head)?;
    if disc.design_dims() != dims || disc.code_dim() != gen.latent().code_dim() {
        return Err(fmt(FormatError::Manifest("discriminator does not match generator".into())));
    }
    Ok(HierGan {
        kind: m.kind,
        design_shape: m.design_shape,
        arch: m.arch,
        gen,
        disc,
    })
}

/// Loads a model and refuses it unless its latent layout equals `expected`.
pub fn load_model_with(path: &Path, expected: &LatentConfig) -> Result<HierGan> {
    let model = load_model(path)?;
    if model.latent() != expected {
        return Err(Error::Config(format!(
            "model {} has latent {:?}, expected {:?}",
            path.display(),
            model.latent(),
            expected
        )));
    }
    Ok(model)
}
