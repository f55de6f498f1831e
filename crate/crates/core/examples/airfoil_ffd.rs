//! Free-form deformation of an airfoil: the unperturbed lattice reproduces the
//! shape, a perturbed one gives a "fabricated" variant.

use ganduf::datasets::AirfoilFamily;
use ganduf::geometry::{ffd_deform, make_control_grid, parametric_coords, perturb_control_grid};
use ganduf::rng::seeded;

fn main() -> ganduf::Result<()> {
    let family = AirfoilFamily::default();
    let shape = family.shape_from(0.04, 0.4, 0.12)?;
    let bb = shape.bbox();
    println!("{} points, chord {:.3}, thickness {:.4}, area {:.5}", shape.len(), bb.width(), bb.height(), shape.signed_area().abs());

    let grid = make_control_grid(&shape, 8, 3)?;
    let coords = parametric_coords(&shape)?;
    let same = ffd_deform(&coords, &grid);
    let err = same
        .points()
        .iter()
        .zip(shape.points())
        .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
        .fold(0.0, f64::max);
    println!("identity lattice: max deviation {err:.1e}");

    let mut rng = seeded(1);
    for k in 0..3 {
        let fab = ffd_deform(&coords, &perturb_control_grid(&grid, 0.02, &mut rng)?);
        let rms = (fab
            .points()
            .iter()
            .zip(shape.points())
            .map(|(a, b)| (a[1] - b[1]).powi(2))
            .sum::<f64>()
            / shape.len() as f64)
            .sqrt();
        println!("fabrication {k}: rms y-offset {rms:.4}, area {:.5}", fab.signed_area().abs());
    }
    Ok(())
}
