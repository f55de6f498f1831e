use serde::{Deserialize, Serialize};

use super::{DiscVars, HierGan, Priors};
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Generator objective flavour.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    /// `-E[log D(fake)]`.
    #[default]
    NonSaturating,
    /// `E[log(1 - D(fake))]`, the literal minimax term.
    Minimax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Player {
    Discriminator,
    Generator,
}

/// Loss values for one real batch and one prior batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanLosses {
    pub loss_d: f64,
    pub loss_g: f64,
    /// Batch mean of the Gaussian log-likelihood of the codes under `Q`.
    pub info: f64,
    /// `loss_d` without the information term.
    pub adv_d: f64,
}

pub(super) struct LossVars {
    pub gvars: Vec<Var>,
    pub dvars: DiscVars,
    pub loss_d: Var,
    pub loss_g: Var,
    pub info: Var,
    pub adv_d: Var,
}

/// Records both losses on `g`. Inputs are normalized design rows.
#[allow(clippy::too_many_arguments)]
pub(super) fn build_losses(
    model: &HierGan,
    g: &mut Graph,
    trainable: Option<Player>,
    real_nom: &[f64],
    real_fab: &[f64],
    priors: &Priors,
    lambda: f64,
    kind: GeneratorLoss,
) -> Result<LossVars> {
    let latent = model.latent();
    let d = model.gen.design_dims();
    let n_real = real_nom.len() / d;
    if n_real == 0 || priors.batch == 0 || real_fab.len() != real_nom.len() {
        return Err(Error::contract("loss batches must be nonempty and paired"));
    }
    let gvars = model.gen.net().bind(g, trainable == Some(Player::Generator));
    let dvars = model.disc.bind(g, trainable == Some(Player::Discriminator));

    let b = priors.batch;
    let in_nom = model.gen.input_rows(b, &priors.c_p, None, &priors.z)?;
    let in_fab = model.gen.input_rows(b, &priors.c_p, Some(&priors.c_c), &priors.z)?;
    let in_nom = g.constant_matrix(b, latent.input_dim(), in_nom)?;
    let in_fab = g.constant_matrix(b, latent.input_dim(), in_fab)?;
    let fake_nom = model.gen.forward(g, &gvars, in_nom)?;
    let fake_fab = model.gen.forward(g, &gvars, in_fab)?;

    let rn = g.constant_matrix(n_real, d, real_nom.to_vec())?;
    let rf = g.constant_matrix(n_real, d, real_fab.to_vec())?;
    let (l_real, _) = model.disc.forward(g, &dvars, rn, rf)?;
    let (l_fake, q) = model.disc.forward(g, &dvars, fake_nom, fake_fab)?;

    // log-likelihood of the codes under N(q, I), averaged over the batch
    let codes = g.constant_matrix(b, latent.code_dim(), priors.codes(latent))?;
    let diff = g.sub(q, codes)?;
    let sq = g.square(diff);
    let ss = g.sum(sq);
    let ll = g.scale(ss, -0.5 / b as f64);
    let norm = -0.5 * latent.code_dim() as f64 * (2.0 * std::f64::consts::PI).ln();
    let norm = g.constant(&Tensor::scalar(norm));
    let info = g.add(ll, norm)?;

    let neg_real = g.scale(l_real, -1.0);
    let sp_real = g.softplus(neg_real);
    let t_real = g.mean(sp_real);
    let sp_fake = g.softplus(l_fake);
    let t_fake = g.mean(sp_fake);
    let adv_d = g.add(t_real, t_fake)?;

    let adv_g = match kind {
        GeneratorLoss::NonSaturating => {
            let neg = g.scale(l_fake, -1.0);
            let sp = g.softplus(neg);
            g.mean(sp)
        }
        GeneratorLoss::Minimax => g.scale(t_fake, -1.0),
    };
    let info_term = g.scale(info, -lambda);
    let loss_d = g.add(adv_d, info_term)?;
    let loss_g = g.add(adv_g, info_term)?;
    Ok(LossVars {
        gvars,
        dvars,
        loss_d,
        loss_g,
        info,
        adv_d,
    })
}

/// `loss_D = -E log D(real) - E log(1 - D(fake)) - lambda L_I` and the matching
/// generator loss; `real_*` are design-space rows.
pub fn hier_gan_losses(
    model: &HierGan,
    real_nom: &[f64],
    real_fab: &[f64],
    priors: &Priors,
    lambda: f64,
    kind: GeneratorLoss,
) -> Result<GanLosses> {
    let (mut nom, mut fab) = (real_nom.to_vec(), real_fab.to_vec());
    model.gen.scaler().normalize(&mut nom);
    model.gen.scaler().normalize(&mut fab);
    let mut g = Graph::new();
    let v = build_losses(model, &mut g, None, &nom, &fab, priors, lambda, kind)?;
    Ok(GanLosses {
        loss_d: g.scalar(v.loss_d)?,
        loss_g: g.scalar(v.loss_g)?,
        info: g.scalar(v.info)?,
        adv_d: g.scalar(v.adv_d)?,
    })
}

/// Loss value and parameter gradients for one player, in that player's
/// parameter order (generator layers, or discriminator trunk, D head, Q head).
pub fn loss_gradients(
    model: &HierGan,
    player: Player,
    real_nom: &[f64],
    real_fab: &[f64],
    priors: &Priors,
    lambda: f64,
    kind: GeneratorLoss,
) -> Result<(f64, Vec<Tensor>)> {
    let (mut nom, mut fab) = (real_nom.to_vec(), real_fab.to_vec());
    model.gen.scaler().normalize(&mut nom);
    model.gen.scaler().normalize(&mut fab);
    let mut copy = model.clone();
    let (value, _) = step_gradients(&mut copy, player, &nom, &fab, priors, lambda, kind)?;
    let tensors: Vec<Tensor> = match player {
        Player::Generator => copy.gen.net().params().to_vec(),
        Player::Discriminator => copy.disc.nets().iter().flat_map(|n| n.params().to_vec()).collect(),
    };
    let grads = tensors
        .into_iter()
        .map(|t| {
            let grad = t.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]);
            Tensor::new(t.shape().to_vec(), grad)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((value, grads))
}

/// Runs one forward/backward pass and leaves gradients in the player's parameters.
/// Inputs are normalized rows. Returns the player's loss and the full loss record.
pub(super) fn step_gradients(
    model: &mut HierGan,
    player: Player,
    nom: &[f64],
    fab: &[f64],
    priors: &Priors,
    lambda: f64,
    kind: GeneratorLoss,
) -> Result<(f64, GanLosses)> {
    let mut g = Graph::new();
    let v = build_losses(model, &mut g, Some(player), nom, fab, priors, lambda, kind)?;
    let losses = GanLosses {
        loss_d: g.scalar(v.loss_d)?,
        loss_g: g.scalar(v.loss_g)?,
        info: g.scalar(v.info)?,
        adv_d: g.scalar(v.adv_d)?,
    };
    let target = match player {
        Player::Discriminator => v.loss_d,
        Player::Generator => v.loss_g,
    };
    let value = g.scalar(target)?;
    g.backward(target)?;
    match player {
        Player::Generator => {
            let net = model.gen.net_mut();
            net.params_mut().iter_mut().for_each(Tensor::zero_grad);
            net.collect_grads(&g, &v.gvars)?;
        }
        Player::Discriminator => {
            let [trunk, d_head, q_head] = model.disc.nets_mut();
            for (net, vars) in [(trunk, &v.dvars.trunk), (d_head, &v.dvars.d_head), (q_head, &v.dvars.q_head)] {
                net.params_mut().iter_mut().for_each(Tensor::zero_grad);
                net.collect_grads(&g, vars)?;
            }
        }
    }
    Ok((value, losses))
}
