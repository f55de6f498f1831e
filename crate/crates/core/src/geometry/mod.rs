//! Design geometry: airfoil point loops, FFD lattices and signed-distance fields.

mod airfoil;
mod ffd;
mod sdf;

pub use airfoil::{load_airfoil_file, parse_airfoil_coords, AirfoilShape, BoundingBox, MIN_AIRFOIL_POINTS};
pub use ffd::{
    bernstein, bernstein_row, ffd_deform, make_control_grid, parametric_coords, perturb_control_grid,
    perturb_control_grid_xy, ControlGrid, ParametricCoords,
};
pub use sdf::{
    distort_field, distort_field_with_grid, field_control_grid, gaussian_kernel, gaussian_smooth,
    rasterize_motif, sdf_interpolate, sdf_motif, threshold_field, warp_coordinates, Mask, MotifKind,
    MotifParams, SdfField, MIN_FIELD_SIZE,
};

/// Lattice shape used for airfoil fabrication noise: 8 columns along the chord, 3 rows.
pub const AIRFOIL_GRID: (usize, usize) = (8, 3);

/// Lattice shape used for metasurface distortion.
pub const FIELD_GRID: (usize, usize) = (12, 12);
