//! Heightfield terrain: storage, bilinear queries, line of sight and ray casts.
//!
//! A [`HeightField`] is node based: `n_cols` nodes along x spaced by
//! `cell_size`, so the world extent is `(n_cols - 1) * cell_size` wide. Row 0
//! sits at the southern edge (`origin.y`) and rows grow northward.
//!
//! Geometric queries walk the grid cell by cell. Between two consecutive grid
//! line crossings a straight segment stays inside one cell, where the bilinear
//! surface restricted to the segment is an exact quadratic in the segment
//! parameter. That lets both the visibility test and the ray cast resolve
//! every cell exactly instead of relying on a step size.

mod ascii_grid;
mod landform;

pub use ascii_grid::{load_ascii_grid, write_ascii_grid};
pub use landform::{generate_landform, Landform, LandformSpec, DEFAULT_ROUGHNESS_M};

use crate::error::{Error, Result};
use crate::geometry::{Position3, Ray};

/// Upper bound on grid nodes accepted from any constructor or file.
pub const MAX_NODES: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    origin: [f64; 2],
    cell_size: f64,
    n_rows: usize,
    n_cols: usize,
    elevations: Vec<f64>,
}

impl HeightField {
    /// `elevations` is row-major with row 0 at `origin[1]`.
    pub fn new(
        origin: [f64; 2],
        cell_size: f64,
        n_rows: usize,
        n_cols: usize,
        elevations: Vec<f64>,
    ) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::Dimension(format!(
                "cell size must be positive and finite, got {cell_size}"
            )));
        }
        if n_rows < 2 || n_cols < 2 {
            return Err(Error::Dimension(format!(
                "grid needs at least 2x2 nodes, got {n_rows}x{n_cols}"
            )));
        }
        match n_rows.checked_mul(n_cols) {
            Some(n) if n <= MAX_NODES => {
                if elevations.len() != n {
                    return Err(Error::Dimension(format!(
                        "expected {n} elevations, got {}",
                        elevations.len()
                    )));
                }
            }
            _ => {
                return Err(Error::Dimension(format!(
                    "grid of {n_rows}x{n_cols} nodes exceeds the {MAX_NODES} node limit"
                )))
            }
        }
        if !origin[0].is_finite() || !origin[1].is_finite() {
            return Err(Error::Dimension("grid origin must be finite".into()));
        }
        if let Some(i) = elevations.iter().position(|z| !z.is_finite()) {
            return Err(Error::Dimension(format!(
                "elevation at index {i} is not finite"
            )));
        }
        Ok(Self {
            origin,
            cell_size,
            n_rows,
            n_cols,
            elevations,
        })
    }

    /// Constant-elevation grid.
    pub fn flat(
        origin: [f64; 2],
        cell_size: f64,
        n_rows: usize,
        n_cols: usize,
        elevation: f64,
    ) -> Result<Self> {
        let n = n_rows
            .checked_mul(n_cols)
            .filter(|&n| n <= MAX_NODES)
            .ok_or_else(|| Error::Dimension("grid too large".into()))?;
        Self::new(origin, cell_size, n_rows, n_cols, vec![elevation; n])
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    /// `(width, height)` in metres.
    pub fn extent(&self) -> (f64, f64) {
        (
            (self.n_cols - 1) as f64 * self.cell_size,
            (self.n_rows - 1) as f64 * self.cell_size,
        )
    }

    pub fn x_max(&self) -> f64 {
        self.origin[0] + self.extent().0
    }

    pub fn y_max(&self) -> f64 {
        self.origin[1] + self.extent().1
    }

    pub fn center(&self) -> (f64, f64) {
        let (w, h) = self.extent();
        (self.origin[0] + 0.5 * w, self.origin[1] + 0.5 * h)
    }

    pub fn node(&self, row: usize, col: usize) -> f64 {
        self.elevations[row * self.n_cols + col]
    }

    pub fn node_position(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin[0] + col as f64 * self.cell_size,
            self.origin[1] + row as f64 * self.cell_size,
        )
    }

    fn tolerance(&self) -> f64 {
        1e-9 * self.cell_size
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let tol = self.tolerance();
        x.is_finite()
            && y.is_finite()
            && x >= self.origin[0] - tol
            && x <= self.x_max() + tol
            && y >= self.origin[1] - tol
            && y <= self.y_max() + tol
    }

    /// Cell containing `(x, y)`, clamped so that edge points map to the last cell.
    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let fx = (x - self.origin[0]) / self.cell_size;
        let fy = (y - self.origin[1]) / self.cell_size;
        let col = (fx.floor().max(0.0) as usize).min(self.n_cols - 2);
        let row = (fy.floor().max(0.0) as usize).min(self.n_rows - 2);
        (row, col)
    }

    /// Bilinear interpolation inside a given cell, with `(x, y)` allowed to sit
    /// on its boundary.
    fn bilinear_in_cell(&self, row: usize, col: usize, x: f64, y: f64) -> f64 {
        let (x0, y0) = self.node_position(row, col);
        let u = (x - x0) / self.cell_size;
        let v = (y - y0) / self.cell_size;
        let h00 = self.node(row, col);
        let h10 = self.node(row, col + 1);
        let h01 = self.node(row + 1, col);
        let h11 = self.node(row + 1, col + 1);
        (1.0 - u) * (1.0 - v) * h00 + u * (1.0 - v) * h10 + (1.0 - u) * v * h01 + u * v * h11
    }

    fn cell_max(&self, row: usize, col: usize) -> f64 {
        self.node(row, col)
            .max(self.node(row, col + 1))
            .max(self.node(row + 1, col))
            .max(self.node(row + 1, col + 1))
    }

    /// Bilinear elevation at `(x, y)`.
    pub fn sample_elevation(&self, x: f64, y: f64) -> Result<f64> {
        if !self.contains(x, y) {
            return Err(Error::OutOfBounds { x, y });
        }
        let (row, col) = self.cell_of(x, y);
        Ok(self.bilinear_in_cell(row, col, x, y))
    }

    /// Outward unit normal of the bilinear surface at `(x, y)`.
    pub fn surface_normal(&self, x: f64, y: f64) -> Result<crate::geometry::Vec3> {
        if !self.contains(x, y) {
            return Err(Error::OutOfBounds { x, y });
        }
        let (row, col) = self.cell_of(x, y);
        let (x0, y0) = self.node_position(row, col);
        let u = (x - x0) / self.cell_size;
        let v = (y - y0) / self.cell_size;
        let h00 = self.node(row, col);
        let h10 = self.node(row, col + 1);
        let h01 = self.node(row + 1, col);
        let h11 = self.node(row + 1, col + 1);
        let dzdx = ((h10 - h00) * (1.0 - v) + (h11 - h01) * v) / self.cell_size;
        let dzdy = ((h01 - h00) * (1.0 - u) + (h11 - h10) * u) / self.cell_size;
        Ok(crate::geometry::Vec3::new(-dzdx, -dzdy, 1.0)
            .normalized()
            .expect("finite gradient"))
    }

    /// Height of `p` above the terrain directly beneath it.
    pub fn height_above(&self, p: Position3) -> Result<f64> {
        Ok(p.z - self.sample_elevation(p.x, p.y)?)
    }

    /// Parameter values in `(0, t_end)` where the horizontal motion
    /// `start + t * delta` crosses a grid line, sorted and bracketed by `0` and
    /// `t_end`. Consecutive values delimit single-cell intervals.
    fn crossings(&self, start: (f64, f64), delta: (f64, f64), t_end: f64) -> Vec<f64> {
        let mut ts = vec![0.0, t_end];
        for (s, d, o, n) in [
            (start.0, delta.0, self.origin[0], self.n_cols),
            (start.1, delta.1, self.origin[1], self.n_rows),
        ] {
            if d == 0.0 {
                continue;
            }
            let e = s + d * t_end;
            let (lo, hi) = if s < e { (s, e) } else { (e, s) };
            let k_lo = ((lo - o) / self.cell_size).ceil().max(0.0) as usize;
            let k_hi = (((hi - o) / self.cell_size).floor().max(0.0) as usize).min(n - 1);
            for k in k_lo..=k_hi {
                let line = o + k as f64 * self.cell_size;
                let t = (line - s) / d;
                if t > 0.0 && t < t_end {
                    ts.push(t);
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    /// Whether the straight segment `a -> b` clears the terrain by more than
    /// `clearance` everywhere strictly between its endpoints.
    pub fn line_of_sight(&self, a: Position3, b: Position3, clearance: f64) -> Result<bool> {
        if !(clearance >= 0.0 && clearance.is_finite()) {
            return Err(Error::Domain(format!(
                "clearance must be non-negative, got {clearance}"
            )));
        }
        for (name, p) in [("start", a), ("end", b)] {
            if !p.is_finite() {
                return Err(Error::InvalidPosition(format!(
                    "{name} point is not finite"
                )));
            }
            let ground = self.sample_elevation(p.x, p.y)?;
            if p.z < ground - self.tolerance() {
                return Err(Error::InvalidPosition(format!(
                    "{name} point at z = {} is below terrain at {ground}",
                    p.z
                )));
            }
        }

        let delta = (b.x - a.x, b.y - a.y);
        let ts = self.crossings((a.x, a.y), delta, 1.0);
        let point = |t: f64| (a.x + delta.0 * t, a.y + delta.1 * t, a.z + (b.z - a.z) * t);

        for w in ts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let (xm, ym, _) = point(0.5 * (t0 + t1));
            let (row, col) = self.cell_of(xm, ym);
            let (_, _, z0) = point(t0);
            let (_, _, z1) = point(t1);
            if z0.min(z1) > self.cell_max(row, col) + clearance {
                continue;
            }
            let gap = |t: f64| {
                let (x, y, z) = point(t);
                z - self.bilinear_in_cell(row, col, x, y) - clearance
            };
            let quad = Quadratic::fit(gap(t0), gap(0.5 * (t0 + t1)), gap(t1));
            let zero_tol = 1e-9 * (1.0 + a.z.abs().max(b.z.abs()));
            if quad.touches_or_dips(t0 == 0.0, t1 == 1.0, zero_tol) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// First point where `ray` meets the terrain within `max_range` metres.
    pub fn intersect_ray(&self, ray: &Ray, max_range: f64) -> Result<Option<Position3>> {
        let o = ray.origin();
        let d = ray.direction();
        if !(max_range >= 0.0) {
            return Err(Error::Domain(format!(
                "max_range must be non-negative, got {max_range}"
            )));
        }
        let ground = self.sample_elevation(o.x, o.y)?;
        if o.z < ground - self.tolerance() {
            return Err(Error::InvalidPosition(format!(
                "ray origin at z = {} is below terrain at {ground}",
                o.z
            )));
        }

        // Clip to the horizontal extent.
        let mut t_end = max_range;
        for (s, v, lo, hi) in [
            (o.x, d.x, self.origin[0], self.x_max()),
            (o.y, d.y, self.origin[1], self.y_max()),
        ] {
            if v > 0.0 {
                t_end = t_end.min((hi - s) / v);
            } else if v < 0.0 {
                t_end = t_end.min((lo - s) / v);
            }
        }
        let t_end = t_end.max(0.0);
        if t_end == 0.0 {
            return Ok((o.z - ground <= self.tolerance()).then_some(o));
        }

        let ts = self.crossings((o.x, o.y), (d.x, d.y), t_end);
        for w in ts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let mid = ray.at(0.5 * (t0 + t1));
            let (row, col) = self.cell_of(mid.x, mid.y);
            let gap = |t: f64| {
                let p = ray.at(t);
                p.z - self.bilinear_in_cell(row, col, p.x, p.y)
            };
            let g0 = gap(t0);
            let g1 = gap(t1);
            let quad = Quadratic::fit(g0, gap(0.5 * (t0 + t1)), g1);
            if g0 > 0.0 && g1 > 0.0 && quad.interior_min().is_none_or(|(_, m)| m > 0.0) {
                continue;
            }
            if let Some(s) = quad.first_root() {
                let t = refine_root(&gap, t0 + s * (t1 - t0), t0, t1);
                return Ok(Some(ray.at(t)));
            }
        }
        Ok(None)
    }
}

/// Polishes a root of a bracketed interval by bisection on the exact gap.
fn refine_root(gap: &impl Fn(f64) -> f64, guess: f64, t0: f64, t1: f64) -> f64 {
    if gap(guess).abs() <= 0.0 {
        return guess;
    }
    // Bracket: last positive before the first non-positive.
    let (mut lo, mut hi) = if gap(guess) > 0.0 {
        (guess, t1)
    } else {
        (t0, guess)
    };
    if gap(lo) <= 0.0 {
        return lo;
    }
    if gap(hi) > 0.0 {
        return guess;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `a*s^2 + b*s + c` on the unit interval.
#[derive(Debug, Clone, Copy)]
struct Quadratic {
    a: f64,
    b: f64,
    c: f64,
}

impl Quadratic {
    /// Interpolates values at `s = 0, 0.5, 1`.
    fn fit(g0: f64, gm: f64, g1: f64) -> Self {
        Self {
            a: 2.0 * g0 - 4.0 * gm + 2.0 * g1,
            b: -3.0 * g0 + 4.0 * gm - g1,
            c: g0,
        }
    }

    fn eval(&self, s: f64) -> f64 {
        (self.a * s + self.b) * s + self.c
    }

    fn interior_min(&self) -> Option<(f64, f64)> {
        if self.a > 0.0 {
            let s = -self.b / (2.0 * self.a);
            if s > 0.0 && s < 1.0 {
                return Some((s, self.eval(s)));
            }
        }
        None
    }

    /// Whether the function is `<= 0` somewhere on the interval, treating
    /// excluded ends as open: a value of (near) zero there only counts when the
    /// function does not rise moving inward.
    fn touches_or_dips(&self, exclude_start: bool, exclude_end: bool, zero_tol: f64) -> bool {
        if let Some((_, m)) = self.interior_min() {
            if m <= 0.0 {
                return true;
            }
        }
        let g0 = self.c;
        let g1 = self.eval(1.0);
        let start_blocks = if exclude_start {
            if g0.abs() <= zero_tol {
                // Slope moving into the interval from s = 0.
                self.b < 0.0 || (self.b == 0.0 && self.a <= 0.0)
            } else {
                g0 < 0.0
            }
        } else {
            g0 <= 0.0
        };
        let end_blocks = if exclude_end {
            if g1.abs() <= zero_tol {
                let slope = 2.0 * self.a + self.b;
                slope > 0.0 || (slope == 0.0 && self.a <= 0.0)
            } else {
                g1 < 0.0
            }
        } else {
            g1 <= 0.0
        };
        start_blocks || end_blocks
    }

    /// Smallest `s` in `[0, 1]` with value `<= 0`.
    fn first_root(&self) -> Option<f64> {
        if self.c <= 0.0 {
            return Some(0.0);
        }
        let scale = self.a.abs().max(self.b.abs()).max(self.c.abs());
        let mut roots: Vec<f64> = Vec::with_capacity(2);
        if self.a.abs() <= 1e-12 * scale {
            if self.b < 0.0 {
                roots.push(-self.c / self.b);
            }
        } else {
            let disc = self.b * self.b - 4.0 * self.a * self.c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                let q = -0.5 * (self.b + self.b.signum() * sq);
                if q != 0.0 {
                    roots.push(q / self.a);
                    roots.push(self.c / q);
                }
            }
        }
        roots
            .into_iter()
            .filter(|s| (0.0..=1.0).contains(s))
            .min_by(f64::total_cmp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn ramp() -> HeightField {
        // z = 10 * col on a 3x3 grid, cell size 1.
        let z = (0..3)
            .flat_map(|_| (0..3).map(|c| 10.0 * c as f64))
            .collect();
        HeightField::new([0.0, 0.0], 1.0, 3, 3, z).unwrap()
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(HeightField::flat([0.0, 0.0], 1.0, 1, 5, 0.0).is_err());
        assert!(HeightField::flat([0.0, 0.0], 0.0, 2, 2, 0.0).is_err());
        assert!(HeightField::new([0.0, 0.0], 1.0, 2, 2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(HeightField::new([0.0, 0.0], 1.0, 2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn extent_is_node_spacing_times_cells() {
        let hf = HeightField::flat([5.0, -5.0], 10.0, 4, 3, 0.0).unwrap();
        assert_eq!(hf.extent(), (20.0, 30.0));
        assert_eq!(hf.x_max(), 25.0);
    }

    #[test]
    fn sample_at_nodes_and_midpoints() {
        let hf = ramp();
        assert_eq!(hf.sample_elevation(2.0, 1.0).unwrap(), 20.0);
        assert_eq!(hf.sample_elevation(0.5, 0.0).unwrap(), 5.0);
        assert!(matches!(
            hf.sample_elevation(2.5, 0.0),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn flat_terrain_has_los() {
        let hf = HeightField::flat([0.0, 0.0], 10.0, 11, 11, 0.0).unwrap();
        let a = Vec3::new(1.0, 1.0, 2.0);
        let b = Vec3::new(97.0, 63.0, 2.0);
        assert!(hf.line_of_sight(a, b, 0.0).unwrap());
        assert!(!hf.line_of_sight(a, b, 2.5).unwrap());
    }

    #[test]
    fn endpoint_below_terrain_is_rejected() {
        let hf = HeightField::flat([0.0, 0.0], 10.0, 3, 3, 5.0).unwrap();
        let err = hf
            .line_of_sight(Vec3::new(1.0, 1.0, 0.0), Vec3::new(9.0, 9.0, 8.0), 0.0)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidPosition(_)));
    }

    #[test]
    fn endpoint_on_ground_is_not_blocking() {
        let hf = HeightField::flat([0.0, 0.0], 10.0, 3, 3, 0.0).unwrap();
        assert!(hf
            .line_of_sight(Vec3::new(3.0, 3.0, 0.0), Vec3::new(17.0, 12.0, 4.0), 0.0)
            .unwrap());
    }

    #[test]
    fn single_cell_ridge_blocks() {
        let mut z = vec![0.0; 25];
        z[2 * 5 + 2] = 50.0;
        let hf = HeightField::new([0.0, 0.0], 1.0, 5, 5, z).unwrap();
        let a = Vec3::new(0.0, 2.0, 1.0);
        let b = Vec3::new(4.0, 2.0, 1.0);
        assert!(!hf.line_of_sight(a, b, 0.0).unwrap());
        let c = Vec3::new(0.0, 0.0, 1.0);
        let d = Vec3::new(4.0, 0.0, 1.0);
        assert!(hf.line_of_sight(c, d, 0.0).unwrap());
    }

    #[test]
    fn vertical_ray_hits_flat_ground() {
        let hf = HeightField::flat([0.0, 0.0], 10.0, 5, 5, 0.0).unwrap();
        let ray = Ray::new(Vec3::new(12.0, 17.0, 10.0), Vec3::new(0.0, 0.0, -1.0)).unwrap();
        let hit = hf.intersect_ray(&ray, 100.0).unwrap().unwrap();
        assert!(hit.z.abs() < 1e-12);
        let up = Ray::new(Vec3::new(12.0, 17.0, 10.0), Vec3::UNIT_Z).unwrap();
        assert!(hf.intersect_ray(&up, 100.0).unwrap().is_none());
    }

    #[test]
    fn ray_respects_max_range() {
        let hf = HeightField::flat([0.0, 0.0], 10.0, 5, 5, 0.0).unwrap();
        let ray = Ray::new(Vec3::new(12.0, 17.0, 10.0), Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert!(hf.intersect_ray(&ray, 9.0).unwrap().is_none());
    }

    #[test]
    fn oblique_ray_hits_ramp() {
        let hf = ramp();
        // Travels along +x at z = 15: the ramp reaches 15 at x = 1.5.
        let ray = Ray::new(Vec3::new(0.0, 1.0, 15.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let hit = hf.intersect_ray(&ray, 10.0).unwrap().unwrap();
        assert!((hit.x - 1.5).abs() < 1e-9, "{hit:?}");
    }
}
