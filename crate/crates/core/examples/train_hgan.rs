//! Trains the hierarchical GAN on a small synthetic airfoil set and reports
//! how well Q recovers the parent code.
//!
//! `cargo run --release --example train_hgan -- [steps]`

use ganduf::datasets::{gen_airfoil_dataset, AirfoilDataConfig, AirfoilFamily, AirfoilSource};
use ganduf::hgan::{latent_recovery, train, LatentConfig, TrainConfig};
use ganduf::rng::seeded;

fn main() -> ganduf::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let ds = gen_airfoil_dataset(&AirfoilDataConfig {
        n_nominal: 200,
        m_fab: 5,
        n_points: 32,
        source: AirfoilSource::Synthetic {
            family: AirfoilFamily::one_parameter(32),
        },
        ..Default::default()
    })?;
    let latent = LatentConfig::new(2, 2, 4);
    let cfg = TrainConfig {
        steps,
        ..TrainConfig::default()
    };
    let out = train(&ds, &latent, &cfg)?;
    for rec in out.history.iter().step_by((steps / 6).max(1)) {
        println!("step {:5}  loss_d {:7.4}  loss_g {:7.4}  info {:7.4}", rec.step, rec.loss_d, rec.loss_g, rec.info);
    }
    let r = latent_recovery(&out.model, 1000, &mut seeded(9))?;
    println!("parent-code correlation {:.3?}, active {:?}", r.correlation, r.active);
    Ok(())
}
