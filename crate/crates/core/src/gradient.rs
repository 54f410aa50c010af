//! Analytic derivatives of the amplitude and the objective with respect to
//! spline control points, for a frozen mesh topology.
//!
//! Vertex coordinates are linear in the controls, `R̃ = W N P = T P`, so
//! `∂R̃_{v,x}/∂P_{k,x} = ∂R̃_{v,y}/∂P_{k,y} = T(v, k)` and the cross terms
//! vanish. Triangle areas, Gaussian points and the Airy kernel are then
//! differentiated through `T`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::{ProvenancedMesh, TriangleQuadrature, TriangleTensor};
use crate::objective::{ResistModel, TargetRaster};
use crate::optics::{psf, psf_radial_derivative, AmplitudeField, ImageGrid};
use crate::spline::CollocationMatrix;

/// Pixels per work unit; fixed so that reductions do not depend on the
/// thread count.
const PIXEL_CHUNK: usize = 64;

/// `T = W · N`, dense `K × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SensitivityMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, v: usize, k: usize) -> f64 {
        self.data[v * self.cols + k]
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.cols..(v + 1) * self.cols]
    }
}

pub fn sensitivity(mesh: &ProvenancedMesh, colloc: &CollocationMatrix) -> Result<SensitivityMatrix> {
    if colloc.rows() != mesh.num_samples() {
        return Err(Error::DimensionMismatch(format!(
            "provenance has {} columns, collocation has {} rows",
            mesh.num_samples(),
            colloc.rows()
        )));
    }
    let cols = colloc.cols();
    let mut data = vec![0.0; mesh.num_vertices() * cols];
    for (v, row) in mesh.provenance().iter().enumerate() {
        let out = &mut data[v * cols..(v + 1) * cols];
        for &(i, w) in row {
            for (o, n) in out.iter_mut().zip(colloc.row(i)) {
                *o += w * n;
            }
        }
    }
    Ok(SensitivityMatrix {
        rows: mesh.num_vertices(),
        cols,
        data,
    })
}

/// Dense `N_T × n` table of `(∂|S_p|/∂P_{kx}, ∂|S_p|/∂P_{ky})`.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaGradient {
    pub cols: usize,
    pub values: Vec<(f64, f64)>,
}

impl AreaGradient {
    pub fn get(&self, p: usize, k: usize) -> (f64, f64) {
        self.values[p * self.cols + k]
    }
}

/// Area derivative of one counterclockwise triangle for one control, given
/// the vertex sensitivities `(T_a, T_b, T_c)`.
fn area_derivative(xs: &[f64; 3], ys: &[f64; 3], t: [f64; 3]) -> (f64, f64) {
    let dx = 0.5 * ((t[1] - t[0]) * (ys[2] - ys[0]) - (ys[1] - ys[0]) * (t[2] - t[0]));
    let dy = 0.5 * ((xs[1] - xs[0]) * (t[2] - t[0]) - (t[1] - t[0]) * (xs[2] - xs[0]));
    (dx, dy)
}

pub fn area_gradient(
    tensor: &TriangleTensor,
    sens: &SensitivityMatrix,
    connectivity: &[[usize; 3]],
) -> AreaGradient {
    let cols = sens.cols();
    let mut values = Vec::with_capacity(tensor.len() * cols);
    for (p, tri) in connectivity.iter().enumerate() {
        for k in 0..cols {
            let t = tri.map(|v| sens.get(v, k));
            values.push(area_derivative(&tensor.xs[p], &tensor.ys[p], t));
        }
    }
    AreaGradient { cols, values }
}

/// Test hooks for the gradient check. Not part of the stable surface.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradientOptions {
    /// Scales the radial kernel derivative by 1.5 so a gradient check must fail.
    pub corrupt_kernel_derivative: bool,
}

impl GradientOptions {
    fn kernel_scale(&self) -> f64 {
        if self.corrupt_kernel_derivative {
            1.5
        } else {
            1.0
        }
    }
}

/// `(∂H/∂P_{kx}, ∂H/∂P_{ky})` for every control `k`, where the Gaussian
/// point `gauss` has barycentric weights `bary` on the triangle `tri` and
/// `sample` is the image point.
pub fn kernel_gradient(
    gauss: Point,
    sample: Point,
    tri: &[usize; 3],
    bary: &[f64; 3],
    sens: &SensitivityMatrix,
) -> Vec<(f64, f64)> {
    kernel_gradient_with(gauss, sample, tri, bary, sens, GradientOptions::default())
}

fn kernel_gradient_with(
    gauss: Point,
    sample: Point,
    tri: &[usize; 3],
    bary: &[f64; 3],
    sens: &SensitivityMatrix,
    opts: GradientOptions,
) -> Vec<(f64, f64)> {
    let (ex, ey) = (gauss.x - sample.x, gauss.y - sample.y);
    let rho = ex.hypot(ey);
    let dh = psf_radial_derivative(rho) * opts.kernel_scale();
    if dh == 0.0 {
        return vec![(0.0, 0.0); sens.cols()];
    }
    (0..sens.cols())
        .map(|k| {
            // ∂x_o/∂P_kx = ∂y_o/∂P_ky = Σ_j L_j T(C_j, k)
            let dg: f64 = (0..3).map(|j| bary[j] * sens.get(tri[j], k)).sum();
            let drho_x = ex / rho * dg;
            let drho_y = ey / rho * dg;
            (dh * drho_x, dh * drho_y)
        })
        .collect()
}

/// Per-triangle data for the gradient sums: area, Gaussian points and the
/// controls whose sensitivity is non-zero on at least one vertex.
struct TriangleTerms {
    area: f64,
    gauss: Vec<Point>,
    /// `(control, ∂g/∂P per Gaussian point, ∂|S|/∂P_x, ∂|S|/∂P_y)`
    support: Vec<(usize, Vec<f64>, f64, f64)>,
}

struct RegionTerms {
    cols: usize,
    triangles: Vec<TriangleTerms>,
}

impl RegionTerms {
    fn new(mesh: &ProvenancedMesh, sens: &SensitivityMatrix, quad: &TriangleQuadrature) -> Self {
        let tensor = mesh.assemble_tensor();
        let triangles = mesh
            .triangles()
            .iter()
            .enumerate()
            .map(|(p, tri)| {
                let (xs, ys) = (&tensor.xs[p], &tensor.ys[p]);
                let gauss = quad
                    .bary()
                    .iter()
                    .map(|l| {
                        Point::new(
                            xs[0] * l[0] + xs[1] * l[1] + xs[2] * l[2],
                            ys[0] * l[0] + ys[1] * l[1] + ys[2] * l[2],
                        )
                    })
                    .collect();
                let support = (0..sens.cols())
                    .filter_map(|k| {
                        let t = tri.map(|v| sens.get(v, k));
                        if t.iter().all(|v| *v == 0.0) {
                            return None;
                        }
                        let dg = quad
                            .bary()
                            .iter()
                            .map(|l| l[0] * t[0] + l[1] * t[1] + l[2] * t[2])
                            .collect();
                        let (dax, day) = area_derivative(xs, ys, t);
                        Some((k, dg, dax, day))
                    })
                    .collect();
                TriangleTerms {
                    area: tensor.signed_area(p),
                    gauss,
                    support,
                }
            })
            .collect();
        Self {
            cols: sens.cols(),
            triangles,
        }
    }

    /// Adds `scale · ∂U(sample)/∂P` into `out`.
    fn accumulate(
        &self,
        sample: Point,
        weights: &[f64],
        scale: f64,
        opts: GradientOptions,
        out: &mut [(f64, f64)],
    ) {
        for tri in &self.triangles {
            for (q, g) in tri.gauss.iter().enumerate() {
                let (ex, ey) = (g.x - sample.x, g.y - sample.y);
                let rho = ex.hypot(ey);
                let h = psf(ex, ey);
                let dh = psf_radial_derivative(rho) * opts.kernel_scale();
                let (ux, uy) = if dh == 0.0 { (0.0, 0.0) } else { (ex / rho, ey / rho) };
                let w = weights[q] * scale;
                for (k, dg, dax, day) in &tri.support {
                    let kern = dh * dg[q] * tri.area;
                    let o = &mut out[*k];
                    o.0 += w * (kern * ux + h * dax);
                    o.1 += w * (kern * uy + h * day);
                }
            }
        }
    }
}

/// `∂U/∂P` over the grid for one region: `values[pixel * n + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionFieldGradient {
    pub cols: usize,
    pub values: Vec<(f64, f64)>,
}

impl RegionFieldGradient {
    pub fn get(&self, pixel: usize, k: usize) -> (f64, f64) {
        self.values[pixel * self.cols + k]
    }
}

/// `∂U/∂P_{k·} = Σ_p Σ_q W_{G,q} [∂H/∂P_{k·} |S_p| + H ∂|S_p|/∂P_{k·}]`,
/// one field per region. Each region's derivative involves only its own mesh.
pub fn amplitude_gradient(
    meshes: &[ProvenancedMesh],
    quad: &TriangleQuadrature,
    grid: &ImageGrid,
    sens: &[SensitivityMatrix],
) -> Result<Vec<RegionFieldGradient>> {
    if meshes.len() != sens.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} meshes but {} sensitivity matrices",
            meshes.len(),
            sens.len()
        )));
    }
    Ok(meshes
        .iter()
        .zip(sens)
        .map(|(mesh, t)| {
            let terms = RegionTerms::new(mesh, t, quad);
            let cols = terms.cols;
            let values = (0..grid.len())
                .into_par_iter()
                .flat_map_iter(|idx| {
                    let mut out = vec![(0.0, 0.0); cols];
                    terms.accumulate(
                        grid.sample_at(idx),
                        quad.weights(),
                        1.0,
                        GradientOptions::default(),
                        &mut out,
                    );
                    out
                })
                .collect();
            RegionFieldGradient { cols, values }
        })
        .collect())
}

/// `∂J/∂P` per region: `regions[r][k] = (∂J/∂P_kx, ∂J/∂P_ky)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub regions: Vec<Vec<Point>>,
}

impl GradientVector {
    pub fn max_abs(&self) -> f64 {
        self.regions
            .iter()
            .flatten()
            .fold(0.0f64, |m, g| m.max(g.x.abs()).max(g.y.abs()))
    }

    /// Largest per-control displacement norm.
    pub fn max_norm(&self) -> f64 {
        self.regions
            .iter()
            .flatten()
            .fold(0.0f64, |m, g| m.max(g.norm()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.regions
            .iter()
            .flatten()
            .flat_map(|g| [g.x, g.y])
            .collect()
    }
}

/// Everything the objective gradient needs at one iterate.
pub struct GradientInputs<'a> {
    pub meshes: &'a [ProvenancedMesh],
    pub sensitivities: &'a [SensitivityMatrix],
    pub quad: &'a TriangleQuadrature,
    pub grid: &'a ImageGrid,
    pub amplitude: &'a AmplitudeField,
    pub target: &'a TargetRaster,
    pub model: &'a ResistModel,
    /// `Δx Δy`, or 1 for the unweighted objective.
    pub cell_weight: f64,
}

/// `∂J/∂P_{k·} = Σ 2 (sig(I) − I_target) sig′(I) · 2U ∂U/∂P_{k·} · Δx Δy`.
pub fn objective_gradient(inputs: &GradientInputs<'_>) -> Result<GradientVector> {
    objective_gradient_with(inputs, GradientOptions::default())
}

#[doc(hidden)]
pub fn objective_gradient_with(
    inputs: &GradientInputs<'_>,
    opts: GradientOptions,
) -> Result<GradientVector> {
    let GradientInputs {
        meshes,
        sensitivities,
        quad,
        grid,
        amplitude,
        target,
        model,
        cell_weight,
    } = *inputs;
    if meshes.len() != sensitivities.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} meshes but {} sensitivity matrices",
            meshes.len(),
            sensitivities.len()
        )));
    }
    if amplitude.values.len() != grid.len() || target.values.len() != grid.len() {
        return Err(Error::DimensionMismatch(
            "amplitude, target and grid sizes differ".into(),
        ));
    }
    let residual: Vec<f64> = amplitude
        .values
        .iter()
        .zip(&target.values)
        .map(|(u, t)| {
            let i = u * u;
            2.0 * (model.sigmoid(i) - f64::from(*t)) * model.sigmoid_derivative(i) * 2.0 * u * cell_weight
        })
        .collect();

    let regions = meshes
        .iter()
        .zip(sensitivities)
        .map(|(mesh, t)| {
            let terms = RegionTerms::new(mesh, t, quad);
            let cols = terms.cols;
            let partials: Vec<Vec<(f64, f64)>> = residual
                .par_chunks(PIXEL_CHUNK)
                .enumerate()
                .map(|(c, chunk)| {
                    let mut acc = vec![(0.0, 0.0); cols];
                    for (off, r) in chunk.iter().enumerate() {
                        if *r == 0.0 {
                            continue;
                        }
                        let idx = c * PIXEL_CHUNK + off;
                        terms.accumulate(grid.sample_at(idx), quad.weights(), *r, opts, &mut acc);
                    }
                    acc
                })
                .collect();
            let mut total = vec![(0.0, 0.0); cols];
            for part in partials {
                for (t, p) in total.iter_mut().zip(part) {
                    t.0 += p.0;
                    t.1 += p.1;
                }
            }
            total.into_iter().map(|(x, y)| Point::new(x, y)).collect()
        })
        .collect();
    Ok(GradientVector { regions })
}
