//! Signed-distance motifs, their convex blend, and a fabricated (distorted and
//! smoothed) version, printed as ASCII masks.

use ganduf::datasets::{fabricate_field, metasurface_nominal};
use ganduf::geometry::{threshold_field, Mask};
use ganduf::rng::seeded;
use ganduf::uq::metasurface_proxy;

fn show(title: &str, m: &Mask) {
    println!("{title} (fill {:.2})", m.filled() as f64 / m.cells.len() as f64);
    for row in m.cells.chunks(m.width) {
        println!("  {}", row.iter().map(|&c| if c { '#' } else { '.' }).collect::<String>());
    }
}

fn main() -> ganduf::Result<()> {
    let mut rng = seeded(3);
    let (field, params, weights) = metasurface_nominal(24, None, &mut rng)?;
    println!("motif sizes {params:?}");
    println!("weights {weights:.3?}");
    show("nominal", &threshold_field(&field));
    let fab = fabricate_field(&field, 1.0, 1.0, &mut rng)?;
    show("fabricated", &threshold_field(&fab));
    println!(
        "absorbance proxy: nominal {:.4}, fabricated {:.4}",
        metasurface_proxy(field.values())?,
        metasurface_proxy(fab.values())?
    );
    Ok(())
}
