//! Symmetric Gaussian quadrature on triangles.

/// Quadrature rule in barycentric form: column `q` of `L` is `bary[q]`, and
/// the rule approximates `∫∫_T f ≈ |T| Σ_q w_q f(G_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleQuadrature {
    bary: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl TriangleQuadrature {
    /// Four-point rule exact for total degree 3. The centroid carries a
    /// negative weight; all points lie inside the triangle.
    pub fn degree3() -> Self {
        Self {
            bary: vec![
                [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                [0.6, 0.2, 0.2],
                [0.2, 0.6, 0.2],
                [0.2, 0.2, 0.6],
            ],
            weights: vec![-27.0 / 48.0, 25.0 / 48.0, 25.0 / 48.0, 25.0 / 48.0],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn bary(&self) -> &[[f64; 3]] {
        &self.bary
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Default for TriangleQuadrature {
    fn default() -> Self {
        Self::degree3()
    }
}
