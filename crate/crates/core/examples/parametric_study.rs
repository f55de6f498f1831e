//! Small (d_p, d_c) sweep: one model per cell, fitting error and fidelity W1.
//! Writes the plot-ready CSV to stdout.

use ganduf::datasets::{gen_airfoil_dataset, AirfoilDataConfig};
use ganduf::hgan::TrainConfig;
use ganduf::studies::{parametric_study, StudyConfig};
use ganduf::uq::{synthetic_qoi, SyntheticQoi};

fn main() -> ganduf::Result<()> {
    let ds = gen_airfoil_dataset(&AirfoilDataConfig {
        n_nominal: 60,
        m_fab: 3,
        n_points: 32,
        ..Default::default()
    })?;
    let cfg = StudyConfig {
        grid: vec![(1, 2), (2, 2), (4, 2)],
        d_z: 2,
        n_targets: 8,
        n_nominals: 4,
        n_samples: 30,
        seed: 0,
    };
    let train_cfg = TrainConfig {
        steps: 500,
        ..TrainConfig::default()
    };
    let report = parametric_study(&ds, &cfg, &train_cfg, &synthetic_qoi(SyntheticQoi::AirfoilProxy))?;
    print!("{}", report.to_csv());
    Ok(())
}
