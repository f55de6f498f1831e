//! Paired nominal/fabricated design datasets: generation, sampling and archives.

mod family;

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use family::{camber_line, thickness_half, AirfoilFamily, FamilyDof};

use crate::container::{self, NamedTensor};
use crate::error::{Error, FormatError, Result};
use crate::geometry::{
    distort_field, ffd_deform, gaussian_smooth, load_airfoil_file, make_control_grid, parametric_coords,
    perturb_control_grid, sdf_interpolate, sdf_motif, AirfoilShape, MotifKind, MotifParams, SdfField,
    AIRFOIL_GRID, FIELD_GRID,
};
use crate::rng::{substream, Rng64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Airfoil,
    Metasurface,
}

impl DesignKind {
    /// Values per "point" when reporting per-point errors: (x, y) pairs or single pixels.
    pub fn point_dim(self) -> usize {
        match self {
            DesignKind::Airfoil => 2,
            DesignKind::Metasurface => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum AirfoilSource {
    Synthetic { family: AirfoilFamily },
    Imported { files: Vec<PathBuf> },
}

/// Parameters that produced a dataset, stored in its archive manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "benchmark", rename_all = "snake_case")]
pub enum GeneratorParams {
    Airfoil {
        sigma_y: f64,
        n_points: usize,
        source: AirfoilSource,
    },
    Metasurface {
        sigma_px: f64,
        smooth_sigma: f64,
        res: usize,
    },
}

impl GeneratorParams {
    /// The fabrication process that built the dataset, for ground-truth resampling.
    pub fn fabrication(&self) -> Fabrication {
        match *self {
            GeneratorParams::Airfoil { sigma_y, .. } => Fabrication::Airfoil { sigma_y },
            GeneratorParams::Metasurface {
                sigma_px,
                smooth_sigma,
                res,
            } => Fabrication::Metasurface {
                sigma_px,
                smooth_sigma,
                res,
            },
        }
    }
}

/// Simulated manufacturing process applied to a flattened nominal design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "snake_case")]
pub enum Fabrication {
    /// y-noise on the interior columns of an 8 x 3 FFD lattice.
    Airfoil { sigma_y: f64 },
    /// 12 x 12 lattice distortion in x and y, then Gaussian smoothing.
    Metasurface {
        sigma_px: f64,
        smooth_sigma: f64,
        res: usize,
    },
}

impl Fabrication {
    pub fn fabricate(&self, nominal: &[f64], rng: &mut Rng64) -> Result<Vec<f64>> {
        match *self {
            Fabrication::Airfoil { sigma_y } => {
                let shape = AirfoilShape::from_design_vector(nominal)?;
                Ok(fabricate_airfoil(&shape, sigma_y, rng)?.to_design_vector())
            }
            Fabrication::Metasurface {
                sigma_px,
                smooth_sigma,
                res,
            } => {
                let field = SdfField::new(res, res, nominal.to_vec())?;
                Ok(fabricate_field(&field, sigma_px, smooth_sigma, rng)?.into_values())
            }
        }
    }
}

pub fn fabricate_airfoil(shape: &AirfoilShape, sigma_y: f64, rng: &mut Rng64) -> Result<AirfoilShape> {
    let (cols, rows) = AIRFOIL_GRID;
    let grid = make_control_grid(shape, cols, rows)?;
    let coords = parametric_coords(shape)?;
    let grid = perturb_control_grid(&grid, sigma_y, rng)?;
    Ok(ffd_deform(&coords, &grid))
}

pub fn fabricate_field(field: &SdfField, sigma_px: f64, smooth_sigma: f64, rng: &mut Rng64) -> Result<SdfField> {
    let (cols, rows) = FIELD_GRID;
    let distorted = distort_field(field, cols, rows, sigma_px, rng)?;
    gaussian_smooth(&distorted, smooth_sigma)
}

/// `N` nominal designs with `M` fabricated realizations each, stored flattened.
///
/// `fabricated(i, j)` was produced from `nominal(i)`; the index pairing is authoritative.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignDataset {
    pub kind: DesignKind,
    pub design_shape: Vec<usize>,
    n: usize,
    m: usize,
    nominal: Vec<f64>,
    fabricated: Vec<f64>,
    pub generator: GeneratorParams,
    pub seed: u64,
}

impl DesignDataset {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: DesignKind,
        design_shape: Vec<usize>,
        n: usize,
        m: usize,
        nominal: Vec<f64>,
        fabricated: Vec<f64>,
        generator: GeneratorParams,
        seed: u64,
    ) -> Result<Self> {
        let d: usize = design_shape.iter().product();
        if n == 0 || m == 0 || d == 0 {
            return Err(Error::contract(format!("dataset needs N, M, D >= 1 (got {n}, {m}, {d})")));
        }
        if nominal.len() != n * d || fabricated.len() != n * m * d {
            return Err(Error::Dimension {
                op: "dataset",
                detail: format!(
                    "nominal {} / fabricated {} values for N={n}, M={m}, D={d}",
                    nominal.len(),
                    fabricated.len()
                ),
            });
        }
        Ok(Self {
            kind,
            design_shape,
            n,
            m,
            nominal,
            fabricated,
            generator,
            seed,
        })
    }

    pub fn n_nominal(&self) -> usize {
        self.n
    }

    pub fn n_fab(&self) -> usize {
        self.m
    }

    pub fn design_dims(&self) -> usize {
        self.design_shape.iter().product()
    }

    pub fn nominal(&self, i: usize) -> &[f64] {
        let d = self.design_dims();
        &self.nominal[i * d..(i + 1) * d]
    }

    pub fn fabricated(&self, i: usize, j: usize) -> &[f64] {
        let d = self.design_dims();
        let k = i * self.m + j;
        &self.fabricated[k * d..(k + 1) * d]
    }

    pub fn nominal_flat(&self) -> &[f64] {
        &self.nominal
    }

    pub fn fabricated_flat(&self) -> &[f64] {
        &self.fabricated
    }

    pub fn fabrication(&self) -> Fabrication {
        self.generator.fabrication()
    }
}

pub const DEFAULT_N_NOMINAL: usize = 200;
pub const DEFAULT_N_FAB: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AirfoilDataConfig {
    pub n_nominal: usize,
    pub m_fab: usize,
    pub sigma_y: f64,
    pub n_points: usize,
    pub source: AirfoilSource,
    pub seed: u64,
}

impl AirfoilDataConfig {
    /// 1528 nominal airfoils x 10 fabrications, 192 points, sigma 0.02.
    pub fn full_scale(seed: u64) -> Self {
        let family = AirfoilFamily {
            n_points: 192,
            ..AirfoilFamily::default()
        };
        Self {
            n_nominal: 1528,
            m_fab: 10,
            sigma_y: 0.02,
            n_points: 192,
            source: AirfoilSource::Synthetic { family },
            seed,
        }
    }
}

impl Default for AirfoilDataConfig {
    fn default() -> Self {
        Self {
            n_nominal: DEFAULT_N_NOMINAL,
            m_fab: DEFAULT_N_FAB,
            sigma_y: 0.02,
            n_points: 64,
            source: AirfoilSource::Synthetic {
                family: AirfoilFamily::default(),
            },
            seed: 0,
        }
    }
}

pub fn gen_airfoil_dataset(cfg: &AirfoilDataConfig) -> Result<DesignDataset> {
    if cfg.n_nominal == 0 || cfg.m_fab == 0 {
        return Err(Error::contract("n_nominal and m_fab must be >= 1"));
    }
    let mut files = match &cfg.source {
        AirfoilSource::Imported { files } => {
            if files.len() < cfg.n_nominal {
                return Err(Error::contract(format!(
                    "{} airfoil files for {} nominal designs",
                    files.len(),
                    cfg.n_nominal
                )));
            }
            let mut f = files.clone();
            f.sort();
            f
        }
        AirfoilSource::Synthetic { .. } => Vec::new(),
    };
    files.truncate(cfg.n_nominal);

    let d = 2 * cfg.n_points;
    let mut nominal = Vec::with_capacity(cfg.n_nominal * d);
    let mut fabricated = Vec::with_capacity(cfg.n_nominal * cfg.m_fab * d);
    // `files` is empty for synthetic sources, so index rather than zip
    #[allow(clippy::needless_range_loop)]
    for i in 0..cfg.n_nominal {
        let mut rng = substream(cfg.seed, i as u64);
        let shape = match &cfg.source {
            AirfoilSource::Synthetic { family } => {
                let mut fam = family.clone();
                fam.n_points = cfg.n_points;
                fam.sample(&mut rng)?.1
            }
            AirfoilSource::Imported { .. } => load_airfoil_file(&files[i])?.resample(cfg.n_points)?,
        };
        nominal.extend(shape.to_design_vector());
        for _ in 0..cfg.m_fab {
            fabricated.extend(fabricate_airfoil(&shape, cfg.sigma_y, &mut rng)?.to_design_vector());
        }
    }
    let source = match &cfg.source {
        AirfoilSource::Imported { .. } => AirfoilSource::Imported { files },
        s => s.clone(),
    };
    DesignDataset::new(
        DesignKind::Airfoil,
        vec![cfg.n_points, 2],
        cfg.n_nominal,
        cfg.m_fab,
        nominal,
        fabricated,
        GeneratorParams::Airfoil {
            sigma_y: cfg.sigma_y,
            n_points: cfg.n_points,
            source,
        },
        cfg.seed,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetasurfaceDataConfig {
    pub n_nominal: usize,
    pub m_fab: usize,
    pub sigma_px: f64,
    pub smooth_sigma: f64,
    pub res: usize,
    pub seed: u64,
    /// Fixes the interpolation weights instead of drawing them (test hook).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forced_weights: Option<[f64; 3]>,
}

impl MetasurfaceDataConfig {
    /// 1000 nominal cells x 10 fabrications at 64 x 64, distortion 1 px, smoothing 2.
    pub fn full_scale(seed: u64) -> Self {
        Self {
            n_nominal: 1000,
            m_fab: 10,
            sigma_px: 1.0,
            smooth_sigma: 2.0,
            res: 64,
            seed,
            forced_weights: None,
        }
    }
}

impl Default for MetasurfaceDataConfig {
    fn default() -> Self {
        Self {
            n_nominal: DEFAULT_N_NOMINAL,
            m_fab: DEFAULT_N_FAB,
            sigma_px: 1.0,
            smooth_sigma: 2.0,
            res: 32,
            seed: 0,
            forced_weights: None,
        }
    }
}

/// Random sizes for the three motifs, in the documented ranges.
pub fn sample_motif_params<R: Rng + ?Sized>(rng: &mut R) -> [MotifParams; 3] {
    MotifKind::ALL.map(|kind| {
        let extent: f64 = rng.random_range(0.5..0.9);
        let max_w = match kind {
            MotifKind::Cross => 0.3,
            _ => (0.45 * extent).min(0.3),
        };
        MotifParams {
            extent,
            width: rng.random_range(0.1..max_w),
        }
    })
}

/// Uniform draw from the 2-simplex (Dirichlet(1, 1, 1)).
pub fn sample_simplex<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let e: [f64; 3] = std::array::from_fn(|_| -(1.0 - rng.random::<f64>()).ln());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// One nominal cell: interpolated motif fields plus the sizes and weights used.
pub fn metasurface_nominal<R: Rng + ?Sized>(
    res: usize,
    forced_weights: Option<[f64; 3]>,
    rng: &mut R,
) -> Result<(SdfField, [MotifParams; 3], [f64; 3])> {
    let params = sample_motif_params(rng);
    let weights = forced_weights.unwrap_or_else(|| sample_simplex(rng));
    let fields = MotifKind::ALL
        .iter()
        .zip(&params)
        .map(|(&k, &p)| sdf_motif(k, p, res))
        .collect::<Result<Vec<_>>>()?;
    Ok((sdf_interpolate(&fields, &weights)?, params, weights))
}

pub fn gen_metasurface_dataset(cfg: &MetasurfaceDataConfig) -> Result<DesignDataset> {
    if cfg.n_nominal == 0 || cfg.m_fab == 0 {
        return Err(Error::contract("n_nominal and m_fab must be >= 1"));
    }
    let d = cfg.res * cfg.res;
    let mut nominal = Vec::with_capacity(cfg.n_nominal * d);
    let mut fabricated = Vec::with_capacity(cfg.n_nominal * cfg.m_fab * d);
    // `files` is empty for synthetic sources, so index rather than zip
    #[allow(clippy::needless_range_loop)]
    for i in 0..cfg.n_nominal {
        let mut rng = substream(cfg.seed, i as u64);
        let (field, _, _) = metasurface_nominal(cfg.res, cfg.forced_weights, &mut rng)?;
        for _ in 0..cfg.m_fab {
            fabricated.extend_from_slice(
                fabricate_field(&field, cfg.sigma_px, cfg.smooth_sigma, &mut rng)?.values(),
            );
        }
        nominal.extend(field.into_values());
    }
    DesignDataset::new(
        DesignKind::Metasurface,
        vec![cfg.res, cfg.res],
        cfg.n_nominal,
        cfg.m_fab,
        nominal,
        fabricated,
        GeneratorParams::Metasurface {
            sigma_px: cfg.sigma_px,
            smooth_sigma: cfg.smooth_sigma,
            res: cfg.res,
        },
        cfg.seed,
    )
}

/// Matched real pairs drawn for one discriminator batch.
#[derive(Clone, Debug, PartialEq)]
pub struct PairBatch {
    pub size: usize,
    pub nominal: Vec<f64>,
    pub fabricated: Vec<f64>,
    pub indices: Vec<(usize, usize)>,
}

/// Draws `i` uniformly over nominal designs, then `j` uniformly over its fabrications.
pub fn sample_pair_batch<R: Rng + ?Sized>(ds: &DesignDataset, batch: usize, rng: &mut R) -> Result<PairBatch> {
    if batch == 0 {
        return Err(Error::contract("batch must be >= 1"));
    }
    let d = ds.design_dims();
    let mut out = PairBatch {
        size: batch,
        nominal: Vec::with_capacity(batch * d),
        fabricated: Vec::with_capacity(batch * d),
        indices: Vec::with_capacity(batch),
    };
    for _ in 0..batch {
        let i = rng.random_range(0..ds.n);
        let j = rng.random_range(0..ds.m);
        out.nominal.extend_from_slice(ds.nominal(i));
        out.fabricated.extend_from_slice(ds.fabricated(i, j));
        out.indices.push((i, j));
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchiveManifest {
    content: String,
    kind: DesignKind,
    n: usize,
    m: usize,
    design_dims: usize,
    design_shape: Vec<usize>,
    generator: GeneratorParams,
    seed: u64,
}

pub fn archive_write(ds: &DesignDataset, path: &Path) -> Result<()> {
    let manifest = ArchiveManifest {
        content: "dataset".into(),
        kind: ds.kind,
        n: ds.n,
        m: ds.m,
        design_dims: ds.design_dims(),
        design_shape: ds.design_shape.clone(),
        generator: ds.generator.clone(),
        seed: ds.seed,
    };
    let d = ds.design_dims();
    container::write_file(
        path,
        &serde_json::to_value(&manifest).expect("manifest serializes"),
        &[
            NamedTensor::new("nominal", vec![ds.n, d], ds.nominal.clone()),
            NamedTensor::new("fabricated", vec![ds.n, ds.m, d], ds.fabricated.clone()),
        ],
    )
}

pub fn archive_read(path: &Path) -> Result<DesignDataset> {
    let fmt = |kind: FormatError| Error::Format {
        path: path.to_path_buf(),
        kind,
    };
    let (manifest, mut tensors) = container::read_file(path)?;
    let m: ArchiveManifest =
        serde_json::from_value(manifest).map_err(|e| fmt(FormatError::Manifest(e.to_string())))?;
    if m.content != "dataset" {
        return Err(fmt(FormatError::Manifest(format!("expected a dataset, found {}", m.content))));
    }
    let nominal = container::take_tensor(&mut tensors, "nominal", &[m.n, m.design_dims]).map_err(fmt)?;
    let fabricated =
        container::take_tensor(&mut tensors, "fabricated", &[m.n, m.m, m.design_dims]).map_err(fmt)?;
    DesignDataset::new(m.kind, m.design_shape, m.n, m.m, nominal, fabricated, m.generator, m.seed)
}

/// Exports a single design vector (e.g. an optimizer's answer) in the archive layout.
pub fn write_design(path: &Path, kind: DesignKind, design_shape: &[usize], design: &[f64], extra: Value) -> Result<()> {
    let mut manifest = serde_json::json!({
        "content": "design",
        "kind": kind,
        "design_dims": design.len(),
        "design_shape": design_shape,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut manifest, extra) {
        dst.extend(src);
    }
    container::write_file(
        path,
        &manifest,
        &[NamedTensor::new("design", vec![1, design.len()], design.to_vec())],
    )
}
