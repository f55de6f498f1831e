//! Parses Selig-format coordinates, resamples them, and builds a dataset from
//! imported files instead of the synthetic family.

use ganduf::datasets::{gen_airfoil_dataset, AirfoilDataConfig, AirfoilSource};
use ganduf::geometry::parse_airfoil_coords;

const NACA2412: &str = "NACA 2412
1.0000 0.0013
0.9500 0.0114
0.9000 0.0208
0.8000 0.0375
0.7000 0.0518
0.6000 0.0636
0.5000 0.0724
0.4000 0.0780
0.3000 0.0788
0.2500 0.0767
0.2000 0.0726
0.1500 0.0661
0.1000 0.0563
0.0750 0.0496
0.0500 0.0413
0.0250 0.0299
0.0125 0.0215
0.0000 0.0000
0.0125 -0.0165
0.0250 -0.0227
0.0500 -0.0301
0.0750 -0.0346
0.1000 -0.0375
0.1500 -0.0410
0.2000 -0.0423
0.2500 -0.0422
0.3000 -0.0412
0.4000 -0.0380
0.5000 -0.0334
0.6000 -0.0276
0.7000 -0.0214
0.8000 -0.0150
0.9000 -0.0082
0.9500 -0.0048
1.0000 -0.0013
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shape = parse_airfoil_coords(NACA2412)?;
    let resampled = shape.resample(48)?;
    println!("parsed {} points, resampled to {}", shape.len(), resampled.len());
    println!("thickness {:.4}, area {:.5}", resampled.bbox().height(), resampled.signed_area().abs());

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("naca2412.dat");
    std::fs::write(&path, NACA2412)?;
    let ds = gen_airfoil_dataset(&AirfoilDataConfig {
        n_nominal: 1,
        m_fab: 4,
        n_points: 48,
        source: AirfoilSource::Imported { files: vec![path] },
        ..Default::default()
    })?;
    println!("dataset: {} nominal x {} fabricated, {} values per design", ds.n_nominal(), ds.n_fab(), ds.design_dims());
    Ok(())
}

