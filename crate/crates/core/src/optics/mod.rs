//! Coherent on-axis imaging: coordinate normalization, the Airy kernel and
//! the forward amplitude computed by triangle quadrature.

pub mod bessel;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::{gauss_points, ProvenancedMesh, TriangleQuadrature};

pub use bessel::{bessel_j, j0, j1, j2};

/// Below this radius the kernel switches to its Taylor expansion.
pub const SMALL_RHO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalConfig {
    pub lambda0_nm: f64,
    pub na: f64,
    pub magnification: f64,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self {
            lambda0_nm: 193.0,
            na: 0.93,
            magnification: -1.0,
        }
    }
}

impl OpticalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0_nm.is_finite() && self.lambda0_nm > 0.0) {
            return Err(Error::Config("optics.lambda0_nm must be positive".into()));
        }
        if !(self.na > 0.0 && self.na < 1.5) {
            return Err(Error::Config("optics.na must lie in (0, 1.5)".into()));
        }
        if self.magnification == 0.0 || !self.magnification.is_finite() {
            return Err(Error::Config("optics.magnification must be non-zero".into()));
        }
        Ok(())
    }

    /// Length unit of the normalized coordinates, `λ0 / NA` in nm.
    pub fn unit_nm(&self) -> f64 {
        self.lambda0_nm / self.na
    }

    /// Mask plane: `x̂_o = −M x_o / (λ0/NA)`.
    pub fn normalize_object(&self, p: Point) -> Point {
        p * (-self.magnification / self.unit_nm())
    }

    pub fn denormalize_object(&self, p: Point) -> Point {
        p * (-self.unit_nm() / self.magnification)
    }

    /// Image plane: `x̂_i = x_i / (λ0/NA)`.
    pub fn normalize_image(&self, p: Point) -> Point {
        p * (1.0 / self.unit_nm())
    }

    pub fn denormalize_image(&self, p: Point) -> Point {
        p * self.unit_nm()
    }

    /// Mask-plane point whose normalized coordinates equal those of the
    /// image-plane point `p`: `x_o = −x_i / M`.
    pub fn image_to_object_nm(&self, p: Point) -> Point {
        p * (-1.0 / self.magnification)
    }
}

/// Airy kernel `H = J_1(2πρ) / ρ` as a function of the radius.
pub fn psf_radial(rho: f64) -> f64 {
    let rho = rho.abs();
    if rho < SMALL_RHO {
        PI - PI.powi(3) * rho * rho / 2.0
    } else {
        j1(2.0 * PI * rho) / rho
    }
}

/// `H(dx, dy)` for normalized offsets.
pub fn psf(dx: f64, dy: f64) -> f64 {
    psf_radial(dx.hypot(dy))
}

/// `dH/dρ = [π (J_0(2πρ) − J_2(2πρ)) ρ − J_1(2πρ)] / ρ²`, taken as 0 below
/// [`SMALL_RHO`] where the kernel has its smooth maximum.
pub fn psf_radial_derivative(rho: f64) -> f64 {
    if rho < SMALL_RHO {
        return 0.0;
    }
    let z = 2.0 * PI * rho;
    let dj1 = PI * (j0(z) - j2(z));
    (dj1 * rho - j1(z)) / (rho * rho)
}

/// Equidistant image-plane lattice in normalized coordinates. Sample
/// `(i, j)` sits at `origin + (i·pitch, j·pitch)`; arrays over the grid are
/// stored row by row with `i` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    nx: usize,
    ny: usize,
    origin: Point,
    pitch: f64,
}

impl ImageGrid {
    pub fn new(nx: usize, ny: usize, origin: Point, pitch: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Config("grid needs at least 2 samples per axis".into()));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::Config("grid pitch must be positive".into()));
        }
        Ok(Self {
            nx,
            ny,
            origin,
            pitch,
        })
    }

    /// Grid from image-plane nanometres.
    pub fn from_physical(
        nx: usize,
        ny: usize,
        origin_nm: Point,
        pitch_nm: f64,
        optics: &OpticalConfig,
    ) -> Result<Self> {
        Self::new(
            nx,
            ny,
            optics.normalize_image(origin_nm),
            pitch_nm / optics.unit_nm(),
        )
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    /// `Δx_i · Δy_i`.
    pub fn cell_area(&self) -> f64 {
        self.pitch * self.pitch
    }

    pub fn sample(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.origin.x + i as f64 * self.pitch,
            self.origin.y + j as f64 * self.pitch,
        )
    }

    /// Sample at flat index `j * nx + i`.
    pub fn sample_at(&self, idx: usize) -> Point {
        self.sample(idx % self.nx, idx / self.nx)
    }

    pub fn samples(&self) -> Vec<Point> {
        (0..self.len()).map(|k| self.sample_at(k)).collect()
    }

    pub fn translated(&self, v: Point) -> Self {
        Self {
            origin: self.origin + v,
            ..self.clone()
        }
    }
}

/// Real amplitude over an [`ImageGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeField {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl AmplitudeField {
    pub fn zeros(grid: &ImageGrid) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn intensity(&self) -> Vec<f64> {
        intensity(&self.values)
    }
}

/// `I = U · conj(U)`; the amplitude is real so this is the square.
pub fn intensity(amplitude: &[f64]) -> Vec<f64> {
    amplitude.iter().map(|u| u * u).collect()
}

/// Weighted source points `(G_pq, W_{G,q} |S_p|)` of one mesh.
pub fn quadrature_sources(mesh: &ProvenancedMesh, quad: &TriangleQuadrature) -> Vec<(Point, f64)> {
    let tensor = mesh.assemble_tensor();
    let pts = gauss_points(&tensor, quad);
    let ng = quad.len();
    let mut out = Vec::with_capacity(pts.len());
    for p in 0..tensor.len() {
        let area = tensor.signed_area(p).abs();
        for (q, w) in quad.weights().iter().enumerate() {
            out.push((pts[p * ng + q], w * area));
        }
    }
    out
}

/// `U(x_i, y_i) ≈ Σ_regions Σ_p Σ_q W_{G,q} H(x_i − x_o^{pq}, y_i − y_o^{pq}) |S_p|`.
pub fn forward_amplitude(
    meshes: &[ProvenancedMesh],
    quad: &TriangleQuadrature,
    grid: &ImageGrid,
) -> AmplitudeField {
    let sources: Vec<(Point, f64)> = meshes
        .iter()
        .flat_map(|m| quadrature_sources(m, quad))
        .collect();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let s = grid.sample_at(k);
            sources
                .iter()
                .map(|(g, w)| w * psf(s.x - g.x, s.y - g.y))
                .sum()
        })
        .collect();
    AmplitudeField {
        nx: grid.nx(),
        ny: grid.ny(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: f64, at: Point) -> Vec<Point> {
        vec![
            at,
            at + Point::new(side, 0.0),
            at + Point::new(side, side),
            at + Point::new(0.0, side),
        ]
    }

    #[test]
    fn normalization() {
        let cfg = OpticalConfig::default();
        assert_eq!(cfg.normalize_object(Point::new(0.0, 0.0)), Point::new(0.0, 0.0));
        let p = cfg.normalize_object(Point::new(1.0, 0.0));
        assert!((p.x - 4.818652849740933e-3).abs() < 1e-15);
        let cfg = OpticalConfig {
            lambda0_nm: 248.0,
            na: 0.7,
            magnification: 0.25,
        };
        for &(x, y) in &[(13.0, -7.5), (1e3, 2e-3), (-55.5, 0.0)] {
            let p = Point::new(x, y);
            assert!(cfg.denormalize_object(cfg.normalize_object(p)).dist(p) < 1e-12);
            assert!(cfg.denormalize_image(cfg.normalize_image(p)).dist(p) < 1e-12);
            let o = cfg.image_to_object_nm(p);
            assert!(cfg.normalize_object(o).dist(cfg.normalize_image(p)) < 1e-12);
        }
    }

    #[test]
    fn psf_center_symmetry_and_zero() {
        assert!((psf(0.0, 0.0) - PI).abs() < 1e-10);
        let (a, b) = (0.31, -0.17);
        assert_eq!(psf(a, b), psf(-a, b));
        assert!((psf(a, b) - psf(b, a)).abs() < 1e-15);
        let first_zero = 3.8317059702075123 / (2.0 * PI);
        assert!(psf(first_zero, 0.0).abs() < 1e-8);
        let edge = SMALL_RHO;
        assert!((psf_radial(edge * (1.0 - 1e-9)) - psf_radial(edge * (1.0 + 1e-9))).abs() < 1e-10);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for &r in &[1e-3, 0.05, 0.3, 0.61, 1.7, 4.2] {
            let h = 1e-6;
            let fd = (psf_radial(r + h) - psf_radial(r - h)) / (2.0 * h);
            assert!((psf_radial_derivative(r) - fd).abs() < 1e-7, "rho={r}");
        }
        assert_eq!(psf_radial_derivative(0.0), 0.0);
    }

    #[test]
    fn empty_mask_gives_zero_field() {
        let grid = ImageGrid::new(5, 4, Point::new(-1.0, -1.0), 0.5).unwrap();
        let u = forward_amplitude(&[], &TriangleQuadrature::degree3(), &grid);
        assert!(u.values.iter().all(|v| *v == 0.0));
        assert!(u.intensity().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn intensity_is_square() {
        assert_eq!(intensity(&[2.0, -3.0, 0.5]), vec![4.0, 9.0, 0.25]);
        assert_eq!(intensity(&[0.7; 3]), vec![0.7 * 0.7; 3]);
    }

    #[test]
    fn superposition_and_translation() {
        let quad = TriangleQuadrature::degree3();
        let a = ProvenancedMesh::triangulate(&square(0.4, Point::new(-0.6, -0.2)))
            .unwrap()
            .refine(0.01)
            .unwrap();
        let b = ProvenancedMesh::triangulate(&square(0.3, Point::new(0.3, 0.1)))
            .unwrap()
            .refine(0.01)
            .unwrap();
        let grid = ImageGrid::new(8, 8, Point::new(-1.0, -1.0), 0.25).unwrap();
        let both = forward_amplitude(&[a.clone(), b.clone()], &quad, &grid);
        let ua = forward_amplitude(&[a.clone()], &quad, &grid);
        let ub = forward_amplitude(&[b], &quad, &grid);
        for k in 0..grid.len() {
            assert!((both.values[k] - ua.values[k] - ub.values[k]).abs() < 1e-12);
        }

        let v = Point::new(0.37, -1.25);
        let moved: Vec<Point> = a.samples().iter().map(|p| *p + v).collect();
        let am = a.with_samples(&moved).unwrap();
        let um = forward_amplitude(&[am], &quad, &grid.translated(v));
        for k in 0..grid.len() {
            assert!((um.values[k] - ua.values[k]).abs() < 1e-12);
        }
    }
}
