//! Monte-Carlo uncertainty of the airfoil proxy under generated fabrication
//! variation, at a few parent codes, sharing one sample bank.

use ganduf::datasets::{gen_airfoil_dataset, AirfoilDataConfig};
use ganduf::hgan::{train, LatentConfig, TrainConfig};
use ganduf::rng::seeded;
use ganduf::uq::{mc_with_bank, synthetic_qoi, RobustMode, SampleBank, SyntheticQoi, UqReport};

fn main() -> ganduf::Result<()> {
    let ds = gen_airfoil_dataset(&AirfoilDataConfig {
        n_nominal: 100,
        n_points: 32,
        ..Default::default()
    })?;
    let latent = LatentConfig::new(3, 2, 4);
    let cfg = TrainConfig {
        steps: 1000,
        ..TrainConfig::default()
    };
    let model = train(&ds, &latent, &cfg)?.model;
    let qoi = synthetic_qoi(SyntheticQoi::AirfoilProxy);
    let bank = SampleBank::draw(&latent, 200, false, &mut seeded(1))?;
    let k_sigma = RobustMode::MeanKSigma { k: 1.0 };
    println!("c_p                 mean     std      q05      mean-1sd");
    for c_p in [[0.2, 0.5, 0.5], [0.5, 0.5, 0.5], [0.8, 0.2, 0.9]] {
        let s = mc_with_bank(&model.gen, &c_p, &qoi, &bank)?;
        let ks = k_sigma.apply(&s.values)?;
        let r = UqReport::from_samples(qoi.name(), &c_p, bank.len(), 0.05, s)?;
        println!("{c_p:?}  {:7.3}  {:7.3}  {:7.3}  {:7.3}", r.mean, r.variance.sqrt(), r.quantile, ks);
    }
    Ok(())
}
