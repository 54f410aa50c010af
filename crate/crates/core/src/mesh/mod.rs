//! Triangle meshes over spline-bounded regions with provenance tracking.
//!
//! Every mesh vertex is a convex combination of the boundary samples `Q`:
//! `R̃ = W · Q`. The first `m` vertices are the samples themselves (`W`
//! starts as the identity) and each centroid inserted during refinement gets
//! the row `(w_i + w_j + w_k) / 3` of its parent triangle. Vertex coordinates
//! are always recomputed from `W · Q`, so the identity holds by construction.

mod quadrature;

use std::collections::{HashMap, HashSet};

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::{check_simple_polygon, point_in_polygon, signed_area, Point};

pub use quadrature::TriangleQuadrature;

/// Triangles below this area are dropped before refinement.
pub const SLIVER_AREA: f64 = 1e-14;

const MAX_REFINE_ROUNDS: usize = 256;
const MAX_FLIP_PASSES: usize = 256;

/// Sparse row of `W`: `(sample index, weight)` pairs sorted by index.
pub type ProvenanceRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ProvenancedMesh {
    samples: Vec<Point>,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    provenance: Vec<ProvenanceRow>,
}

/// Per-triangle vertex coordinates: `xs[p]` and `ys[p]` hold the x- and
/// y-coordinates of triangle `p`'s three vertices in counterclockwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleTensor {
    pub xs: Vec<[f64; 3]>,
    pub ys: Vec<[f64; 3]>,
}

impl TriangleTensor {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn vertex(&self, p: usize, j: usize) -> Point {
        Point::new(self.xs[p][j], self.ys[p][j])
    }

    pub fn signed_area(&self, p: usize) -> f64 {
        signed_area(self.vertex(p, 0), self.vertex(p, 1), self.vertex(p, 2))
    }
}

fn combine(rows: [&ProvenanceRow; 3]) -> ProvenanceRow {
    let mut acc: Vec<(usize, f64)> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    acc.sort_by_key(|e| e.0);
    let mut out: ProvenanceRow = Vec::with_capacity(acc.len());
    for (i, w) in acc {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += w / 3.0,
            _ => out.push((i, w / 3.0)),
        }
    }
    out
}

fn apply_row(row: &ProvenanceRow, samples: &[Point]) -> Point {
    row.iter()
        .fold(Point::default(), |acc, &(i, w)| acc + samples[i] * w)
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Positive iff `d` lies strictly inside the circumcircle of the
/// counterclockwise triangle `(a, b, c)`.
fn in_circle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (ax, ay) = (a.x - d.x, a.y - d.y);
    let (bx, by) = (b.x - d.x, b.y - d.y);
    let (cx, cy) = (c.x - d.x, c.y - d.y);
    (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay)
}

impl ProvenancedMesh {
    /// Constrained Delaunay triangulation of a closed sample loop, keeping
    /// only triangles whose centroid lies inside the loop. `W = I_m`.
    pub fn triangulate(samples: &[Point]) -> Result<Self> {
        check_simple_polygon(samples)?;
        let m = samples.len();
        let verts: Vec<Point2<f64>> = samples.iter().map(|p| Point2::new(p.x, p.y)).collect();
        let edges: Vec<[usize; 2]> = (0..m).map(|i| [i, (i + 1) % m]).collect();
        let mut conflicts = 0usize;
        let cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::try_bulk_load_cdt(
            verts,
            edges,
            |_| conflicts += 1,
        )
        .map_err(|e| Error::Triangulation(format!("{e:?}")))?;
        if conflicts > 0 || cdt.num_vertices() != m {
            return Err(Error::Triangulation(
                "boundary constraints could not be inserted".into(),
            ));
        }

        let mut triangles = Vec::new();
        for face in cdt.inner_faces() {
            let [a, b, c] = face.vertices().map(|v| v.fix().index());
            let (pa, pb, pc) = (samples[a], samples[b], samples[c]);
            let centroid = (pa + pb + pc) * (1.0 / 3.0);
            if !point_in_polygon(centroid, samples) {
                continue;
            }
            let area = signed_area(pa, pb, pc);
            if area.abs() < SLIVER_AREA {
                continue;
            }
            triangles.push(if area > 0.0 { [a, b, c] } else { [a, c, b] });
        }
        if triangles.is_empty() {
            return Err(Error::DegeneratePolygon("no interior triangles".into()));
        }
        Ok(Self {
            samples: samples.to_vec(),
            vertices: samples.to_vec(),
            triangles,
            provenance: (0..m).map(|i| vec![(i, 1.0)]).collect(),
        })
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn provenance(&self) -> &[ProvenanceRow] {
        &self.provenance
    }

    /// Dense `K × m` copy of `W`.
    pub fn provenance_dense(&self) -> Vec<Vec<f64>> {
        self.provenance
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; self.samples.len()];
                for &(i, w) in row {
                    dense[i] = w;
                }
                dense
            })
            .collect()
    }

    /// `W · Q` evaluated afresh.
    pub fn reconstruct(&self, samples: &[Point]) -> Vec<Point> {
        self.provenance
            .iter()
            .map(|row| apply_row(row, samples))
            .collect()
    }

    /// Same topology and provenance, new boundary samples.
    pub fn with_samples(&self, samples: &[Point]) -> Result<Self> {
        if samples.len() != self.samples.len() {
            return Err(Error::DimensionMismatch(format!(
                "mesh has {} samples, got {}",
                self.samples.len(),
                samples.len()
            )));
        }
        Ok(Self {
            samples: samples.to_vec(),
            vertices: self.reconstruct(samples),
            triangles: self.triangles.clone(),
            provenance: self.provenance.clone(),
        })
    }

    fn triangle_area(&self, t: &[usize; 3]) -> f64 {
        signed_area(
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
        )
    }

    pub fn areas(&self) -> Vec<f64> {
        self.triangles.iter().map(|t| self.triangle_area(t)).collect()
    }

    /// `Σ_p |S_p|`.
    pub fn polygon_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| self.triangle_area(t).abs())
            .sum()
    }

    /// Splits every triangle larger than `max_area` at its centroid until
    /// none remain, restoring the Delaunay property among existing vertices
    /// with edge flips after each sweep. Boundary edges are never flipped.
    pub fn refine(&self, max_area: f64) -> Result<Self> {
        if !(max_area.is_finite() && max_area > 0.0) {
            return Err(Error::InvalidTolerance(max_area));
        }
        let mut mesh = self.clone();
        mesh.triangles.retain(|t| {
            signed_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]) >= SLIVER_AREA
        });
        for _ in 0..MAX_REFINE_ROUNDS {
            let large: Vec<usize> = (0..mesh.triangles.len())
                .filter(|&p| mesh.triangle_area(&mesh.triangles[p]) > max_area)
                .collect();
            if large.is_empty() {
                return Ok(mesh);
            }
            for p in large {
                mesh.split_at_centroid(p);
            }
            mesh.flip_to_delaunay();
        }
        Err(Error::Triangulation(format!(
            "refinement to area {max_area} did not finish in {MAX_REFINE_ROUNDS} rounds"
        )))
    }

    /// Inserts the centroid of triangle `p` as a new vertex and replaces `p`
    /// by its three children.
    pub fn split_at_centroid(&mut self, p: usize) {
        let [a, b, c] = self.triangles[p];
        let row = combine([
            &self.provenance[a],
            &self.provenance[b],
            &self.provenance[c],
        ]);
        let k = self.vertices.len();
        self.vertices.push(apply_row(&row, &self.samples));
        self.provenance.push(row);
        self.triangles[p] = [a, b, k];
        self.triangles.push([b, c, k]);
        self.triangles.push([c, a, k]);
    }

    fn boundary_edges(&self) -> HashSet<(usize, usize)> {
        let m = self.samples.len();
        (0..m).map(|i| edge_key(i, (i + 1) % m)).collect()
    }

    /// Lawson flips on interior edges until locally Delaunay.
    fn flip_to_delaunay(&mut self) {
        let boundary = self.boundary_edges();
        for _ in 0..MAX_FLIP_PASSES {
            let mut owners: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
            for (p, t) in self.triangles.iter().enumerate() {
                for j in 0..3 {
                    owners
                        .entry(edge_key(t[j], t[(j + 1) % 3]))
                        .or_default()
                        .push(p);
                }
            }
            let mut keys: Vec<(usize, usize)> = owners.keys().copied().collect();
            keys.sort_unstable();
            let mut touched = vec![false; self.triangles.len()];
            let mut flipped = false;
            for key in keys {
                if boundary.contains(&key) {
                    continue;
                }
                let pair = &owners[&key];
                if pair.len() != 2 {
                    continue;
                }
                let (p1, p2) = (pair[0], pair[1]);
                if touched[p1] || touched[p2] {
                    continue;
                }
                if self.try_flip(p1, p2, key) {
                    touched[p1] = true;
                    touched[p2] = true;
                    flipped = true;
                }
            }
            if !flipped {
                return;
            }
        }
    }

    fn try_flip(&mut self, p1: usize, p2: usize, edge: (usize, usize)) -> bool {
        // rotate p1 so that it reads (a, b, c) with a → b the shared edge
        let t1 = self.triangles[p1];
        let Some(r) = (0..3).find(|&j| {
            let (u, v) = (t1[j], t1[(j + 1) % 3]);
            edge_key(u, v) == edge
        }) else {
            return false;
        };
        let (a, b, c) = (t1[r], t1[(r + 1) % 3], t1[(r + 2) % 3]);
        let Some(&d) = self.triangles[p2].iter().find(|&&v| v != a && v != b) else {
            return false;
        };
        let (pa, pb, pc, pd) = (
            self.vertices[a],
            self.vertices[b],
            self.vertices[c],
            self.vertices[d],
        );
        let scale = [pa, pb, pc]
            .iter()
            .map(|q| q.dist(pd))
            .fold(0.0f64, f64::max);
        if in_circle(pa, pb, pc, pd) <= 1e-10 * scale.powi(4) {
            return false;
        }
        let (n1, n2) = ([a, d, c], [d, b, c]);
        let eps = 1e-12 * scale * scale;
        if signed_area(pa, pd, pc) <= eps || signed_area(pd, pb, pc) <= eps {
            return false;
        }
        self.triangles[p1] = n1;
        self.triangles[p2] = n2;
        true
    }

    /// `R = R̃(C)`.
    pub fn assemble_tensor(&self) -> TriangleTensor {
        let mut xs = Vec::with_capacity(self.triangles.len());
        let mut ys = Vec::with_capacity(self.triangles.len());
        for t in &self.triangles {
            xs.push(t.map(|v| self.vertices[v].x));
            ys.push(t.map(|v| self.vertices[v].y));
        }
        TriangleTensor { xs, ys }
    }
}

/// Gaussian points `G_p = [R_{p,a} R_{p,b} R_{p,c}] · L`, flattened so that
/// point `q` of triangle `p` sits at index `p * N_G + q`.
pub fn gauss_points(tensor: &TriangleTensor, quad: &TriangleQuadrature) -> Vec<Point> {
    let mut out = Vec::with_capacity(tensor.len() * quad.len());
    for p in 0..tensor.len() {
        let (xs, ys) = (tensor.xs[p], tensor.ys[p]);
        for l in quad.bary() {
            out.push(Point::new(
                xs[0] * l[0] + xs[1] * l[1] + xs[2] * l[2],
                ys[0] * l[0] + ys[1] * l[1] + ys[2] * l[2],
            ));
        }
    }
    out
}

/// Applies the quadrature rule to `f` over every triangle of the tensor.
pub fn integrate<F: Fn(Point) -> f64>(
    tensor: &TriangleTensor,
    quad: &TriangleQuadrature,
    f: F,
) -> f64 {
    let pts = gauss_points(tensor, quad);
    let ng = quad.len();
    (0..tensor.len())
        .map(|p| {
            let s: f64 = quad
                .weights()
                .iter()
                .enumerate()
                .map(|(q, w)| w * f(pts[p * ng + q]))
                .sum();
            s * tensor.signed_area(p).abs()
        })
        .sum()
}
