//! Synthetic landforms centred on the grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HeightField, MAX_NODES};
use crate::error::{Error, Result};

pub const DEFAULT_ROUGHNESS_M: f64 = 0.5;

/// Roughness lattice spacing, in grid cells.
const ROUGHNESS_LATTICE_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Landform {
    Flat,
    /// Cosine-tapered bowl with a raised rim crest at `diameter / 2` and an
    /// ejecta apron falling back to the base over another half radius.
    Crater {
        diameter: f64,
        depth: f64,
        rim_height: f64,
    },
    /// Flat-bottomed trench along the x axis, bending by `bend_angle_deg`
    /// counter-clockwise at mid-length.
    Canyon {
        width: f64,
        depth: f64,
        length: f64,
        bend_angle_deg: f64,
    },
    /// Gaussian mound, sigma = base_radius / 3.
    Hill {
        base_radius: f64,
        height: f64,
    },
    /// Flat-topped mesa with smoothstep sides 0.2 * top_radius wide.
    Plateau {
        height: f64,
        top_radius: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandformSpec {
    pub landform: Landform,
    pub base_elevation: f64,
    pub seed: u64,
    pub roughness_amplitude: f64,
}

impl LandformSpec {
    pub fn new(landform: Landform, base_elevation: f64, seed: u64) -> Self {
        Self {
            landform,
            base_elevation,
            seed,
            roughness_amplitude: DEFAULT_ROUGHNESS_M,
        }
    }

    pub fn with_roughness(mut self, amplitude: f64) -> Self {
        self.roughness_amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive, got {v}")))
            }
        };
        if !self.base_elevation.is_finite() {
            return Err(Error::Domain("base elevation must be finite".into()));
        }
        if !(self.roughness_amplitude >= 0.0 && self.roughness_amplitude.is_finite()) {
            return Err(Error::Domain(format!(
                "roughness amplitude must be non-negative, got {}",
                self.roughness_amplitude
            )));
        }
        match self.landform {
            Landform::Flat => Ok(()),
            Landform::Crater {
                diameter,
                depth,
                rim_height,
            } => {
                positive("crater diameter", diameter)?;
                positive("crater depth", depth)?;
                positive("crater rim height", rim_height)
            }
            Landform::Canyon {
                width,
                depth,
                length,
                bend_angle_deg,
            } => {
                positive("canyon width", width)?;
                positive("canyon depth", depth)?;
                positive("canyon length", length)?;
                if (0.0..=120.0).contains(&bend_angle_deg) {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "canyon bend angle must lie in [0, 120] degrees, got {bend_angle_deg}"
                    )))
                }
            }
            Landform::Hill {
                base_radius,
                height,
            } => {
                positive("hill base radius", base_radius)?;
                positive("hill height", height)
            }
            Landform::Plateau { height, top_radius } => {
                positive("plateau height", height)?;
                positive("plateau top radius", top_radius)
            }
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Canyon centreline: three points, bend at the middle one.
fn canyon_polyline(center: (f64, f64), length: f64, bend_angle_deg: f64) -> [(f64, f64); 3] {
    let half = 0.5 * length;
    let bend = bend_angle_deg.to_radians();
    [
        (center.0 - half, center.1),
        center,
        (center.0 + half * bend.cos(), center.1 + half * bend.sin()),
    ]
}

/// Relief relative to the base elevation at offset `(dx, dy)` from the grid
/// centre (or absolute point for the canyon).
fn relief(landform: &Landform, p: (f64, f64), center: (f64, f64)) -> f64 {
    let r = ((p.0 - center.0).powi(2) + (p.1 - center.1).powi(2)).sqrt();
    match *landform {
        Landform::Flat => 0.0,
        Landform::Crater {
            diameter,
            depth,
            rim_height,
        } => {
            let radius = 0.5 * diameter;
            let apron = 0.5 * radius;
            if r <= radius {
                let taper = 1.0 - (std::f64::consts::FRAC_PI_2 * r / radius).cos();
                -depth + (depth + rim_height) * taper
            } else if r < radius + apron {
                rim_height * 0.5 * (1.0 + (std::f64::consts::PI * (r - radius) / apron).cos())
            } else {
                0.0
            }
        }
        Landform::Canyon {
            width,
            depth,
            length,
            bend_angle_deg,
        } => {
            let line = canyon_polyline(center, length, bend_angle_deg);
            let d =
                segment_distance(p, line[0], line[1]).min(segment_distance(p, line[1], line[2]));
            let floor_half = 0.25 * width;
            let wall = 0.25 * width;
            -depth * (1.0 - smoothstep((d - floor_half) / wall))
        }
        Landform::Hill {
            base_radius,
            height,
        } => {
            let sigma = base_radius / 3.0;
            height * (-(r * r) / (2.0 * sigma * sigma)).exp()
        }
        Landform::Plateau { height, top_radius } => {
            let skirt = 0.2 * top_radius;
            height * (1.0 - smoothstep((r - top_radius) / skirt))
        }
    }
}

fn check_fit(landform: &Landform, hf_extent: (f64, f64), center: (f64, f64)) -> Result<()> {
    let (w, h) = hf_extent;
    let min_extent = w.min(h);
    let fits = match *landform {
        Landform::Flat => true,
        Landform::Crater { diameter, .. } => diameter <= min_extent,
        Landform::Hill { base_radius, .. } => 2.0 * base_radius <= min_extent,
        Landform::Plateau { top_radius, .. } => 2.0 * 1.2 * top_radius <= min_extent,
        Landform::Canyon {
            width,
            length,
            bend_angle_deg,
            ..
        } => {
            let half_w = 0.5 * width;
            canyon_polyline(center, length, bend_angle_deg)
                .iter()
                .all(|&(x, y)| {
                    (x - center.0).abs() + half_w <= 0.5 * w
                        && (y - center.1).abs() + half_w <= 0.5 * h
                })
        }
    };
    if fits {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{landform:?} does not fit inside a {w} x {h} m grid"
        )))
    }
}

/// Smooth value noise in `[-1, 1]` sampled at grid nodes.
fn value_noise(seed: u64, n_rows: usize, n_cols: usize) -> Vec<f64> {
    let lat_rows = n_rows / ROUGHNESS_LATTICE_CELLS + 2;
    let lat_cols = n_cols / ROUGHNESS_LATTICE_CELLS + 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattice: Vec<f64> = (0..lat_rows * lat_cols)
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    let step = ROUGHNESS_LATTICE_CELLS as f64;
    let mut out = Vec::with_capacity(n_rows * n_cols);
    for row in 0..n_rows {
        let fy = row as f64 / step;
        let (ly, ty) = (fy.floor() as usize, smoothstep(fy.fract()));
        for col in 0..n_cols {
            let fx = col as f64 / step;
            let (lx, tx) = (fx.floor() as usize, smoothstep(fx.fract()));
            let at = |r: usize, c: usize| lattice[r * lat_cols + c];
            let top = at(ly, lx) * (1.0 - tx) + at(ly, lx + 1) * tx;
            let bottom = at(ly + 1, lx) * (1.0 - tx) + at(ly + 1, lx + 1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

/// Renders `spec` on an `n_rows x n_cols` grid whose lower-left node sits at
/// the origin; the landform is centred on the grid.
pub fn generate_landform(
    spec: &LandformSpec,
    n_rows: usize,
    n_cols: usize,
    cell_size: f64,
) -> Result<HeightField> {
    spec.validate()?;
    if n_rows < 2 || n_cols < 2 {
        return Err(Error::Dimension(format!(
            "grid needs at least 2x2 nodes, got {n_rows}x{n_cols}"
        )));
    }
    if n_rows.checked_mul(n_cols).is_none_or(|n| n > MAX_NODES) {
        return Err(Error::Dimension(format!(
            "grid of {n_rows}x{n_cols} nodes exceeds the {MAX_NODES} node limit"
        )));
    }
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::Dimension(format!(
            "cell size must be positive and finite, got {cell_size}"
        )));
    }
    let extent = (
        (n_cols - 1) as f64 * cell_size,
        (n_rows - 1) as f64 * cell_size,
    );
    let center = (0.5 * extent.0, 0.5 * extent.1);
    check_fit(&spec.landform, extent, center)?;

    let noise = (spec.roughness_amplitude > 0.0).then(|| value_noise(spec.seed, n_rows, n_cols));
    let mut elevations = Vec::with_capacity(n_rows * n_cols);
    for row in 0..n_rows {
        for col in 0..n_cols {
            let p = (col as f64 * cell_size, row as f64 * cell_size);
            let mut z = spec.base_elevation + relief(&spec.landform, p, center);
            if let Some(noise) = &noise {
                z += spec.roughness_amplitude * noise[row * n_cols + col];
            }
            elevations.push(z);
        }
    }
    HeightField::new([0.0, 0.0], cell_size, n_rows, n_cols, elevations)
}
