//! B-spline and periodic B-spline bases, and closed boundary curves built on them.
//!
//! All basis indices in this module are zero-based. A periodic spline with
//! `n` control points and degree `p` is built on a uniform knot vector of
//! `n + 1` knots on `[0, 1]` (so it carries `n - p` ordinary basis functions),
//! extended by `p` knots on each side; the `n` periodic basis functions then
//! map one-to-one onto the `n` control points and the curve closes with
//! `C^{p-1}` continuity.

use crate::error::{Error, Result};
use crate::geometry::Point;

pub const DEFAULT_DEGREE: usize = 3;

/// Values of every degree-`p` basis function on `knots` at `xi`, using the
/// Cox-de Boor recursion with half-open supports and the `0/0 := 0` rule.
fn cox_de_boor_all(knots: &[f64], p: usize, xi: f64) -> Vec<f64> {
    let len = knots.len();
    let mut n: Vec<f64> = (0..len - 1)
        .map(|i| {
            if knots[i] <= xi && xi < knots[i + 1] {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for d in 1..=p {
        for i in 0..len - 1 - d {
            let left_den = knots[i + d] - knots[i];
            let right_den = knots[i + d + 1] - knots[i + 1];
            let left = if left_den > 0.0 {
                (xi - knots[i]) / left_den * n[i]
            } else {
                0.0
            };
            let right = if right_den > 0.0 {
                (knots[i + d + 1] - xi) / right_den * n[i + 1]
            } else {
                0.0
            };
            n[i] = left + right;
        }
        n.pop();
    }
    n
}

/// Non-decreasing knot vector `ξ_1 ≤ … ≤ ξ_{n+p+1}` for degree-`p` splines.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        if knots.len() < degree + 2 {
            return Err(Error::InvalidKnots(format!(
                "{} knots cannot carry a degree {} basis",
                knots.len(),
                degree
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidKnots("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnots("knots must be non-decreasing".into()));
        }
        if knots[knots.len() - 1] <= knots[0] {
            return Err(Error::InvalidKnots("knot span has zero length".into()));
        }
        Ok(Self { knots, degree })
    }

    /// `num_basis + degree + 1` equally spaced knots on `[a, b]`.
    pub fn uniform(num_basis: usize, degree: usize, a: f64, b: f64) -> Result<Self> {
        let count = num_basis + degree + 1;
        let step = (b - a) / (count - 1) as f64;
        let mut knots: Vec<f64> = (0..count).map(|i| a + step * i as f64).collect();
        knots[count - 1] = b;
        Self::new(knots, degree)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn span(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// `N_{k,p}(xi)` for zero-based `k`.
    pub fn basis(&self, k: usize, xi: f64) -> Result<f64> {
        let n = self.num_basis();
        if k >= n {
            return Err(Error::IndexOutOfRange {
                index: k as isize,
                lo: 0,
                hi: n as isize - 1,
            });
        }
        let (lo, hi) = self.span();
        if !(lo..=hi).contains(&xi) {
            return Err(Error::ParameterOutOfSpan { value: xi, lo, hi });
        }
        let local = &self.knots[k..k + self.degree + 2];
        Ok(cox_de_boor_all(local, self.degree, xi)[0])
    }

    /// Builds the extended partition by shifting `p` knots from each end
    /// across the period `L = b - a`.
    pub fn extend(&self) -> ExtendedPartition {
        let p = self.degree;
        let n = self.num_basis();
        let (a, b) = self.span();
        let period = b - a;
        let mut ext = Vec::with_capacity(self.knots.len() + 2 * p);
        // ξ_k = ξ_{k+n+p} − L for 1−p ≤ k < 1
        for k in 0..p {
            ext.push(self.knots[n + k] - period);
        }
        ext.extend_from_slice(&self.knots);
        // ξ_k = ξ_{k−n−p} + L for n+p+1 < k ≤ n+2p+1
        for k in 0..p {
            ext.push(self.knots[k + 1] + period);
        }
        ExtendedPartition {
            knots: ext,
            degree: p,
            num_inner: n,
            period,
        }
    }
}

/// Knot vector extended periodically by `p` knots on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPartition {
    knots: Vec<f64>,
    degree: usize,
    num_inner: usize,
    period: f64,
}

impl ExtendedPartition {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Number of periodic basis functions, `n + p`.
    pub fn num_periodic(&self) -> usize {
        self.num_inner + self.degree
    }

    /// Parameter range `[ξ_1, ξ_{n+p+1}]` of the closed curve.
    pub fn domain(&self) -> (f64, f64) {
        let p = self.degree;
        (self.knots[p], self.knots[p + self.num_periodic()])
    }

    fn check_param(&self, xi: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&xi) {
            return Err(Error::ParameterOutOfSpan { value: xi, lo, hi });
        }
        Ok(())
    }

    /// All `n + p` periodic basis values at `xi`.
    pub fn periodic_basis_all(&self, xi: f64) -> Result<Vec<f64>> {
        self.check_param(xi)?;
        let p = self.degree;
        let np = self.num_periodic();
        // extended basis function j (zero-based) starts at extended knot j,
        // (one-based index j + 1 − p)
        let ext = cox_de_boor_all(&self.knots, p, xi);
        let mut out: Vec<f64> = ext[p..p + np].to_vec();
        for j in 0..p {
            out[self.num_inner + j] += ext[j];
        }
        Ok(out)
    }

    /// `N̊_{k,p}(xi)` for zero-based `k < n + p`.
    pub fn periodic_basis(&self, k: usize, xi: f64) -> Result<f64> {
        let np = self.num_periodic();
        if k >= np {
            return Err(Error::IndexOutOfRange {
                index: k as isize,
                lo: 0,
                hi: np as isize - 1,
            });
        }
        Ok(self.periodic_basis_all(xi)?[k])
    }
}

/// Dense `m × n` matrix of periodic basis values at the sample parameters,
/// so that the boundary samples are `Q = N · P`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CollocationMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn apply(&self, controls: &[Point]) -> Result<Vec<Point>> {
        if controls.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "collocation has {} columns but {} controls were given",
                self.cols,
                controls.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(controls)
                    .filter(|(w, _)| **w != 0.0)
                    .fold(Point::default(), |acc, (w, p)| acc + *p * *w)
            })
            .collect())
    }
}

/// Uniform sample parameters `t_k = k / m`, `k = 0..m`; `t = 1` is left out
/// because the closed curve repeats it.
pub fn uniform_params(m: usize) -> Vec<f64> {
    (0..m).map(|k| k as f64 / m as f64).collect()
}

/// One closed mask region bounded by a periodic B-spline.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSplineRegion {
    degree: usize,
    controls: Vec<Point>,
    params: Vec<f64>,
    partition: ExtendedPartition,
}

impl PeriodicSplineRegion {
    /// Region with `m` uniform sample parameters.
    pub fn new(controls: Vec<Point>, degree: usize, m: usize) -> Result<Self> {
        Self::with_params(controls, degree, uniform_params(m))
    }

    pub fn with_params(controls: Vec<Point>, degree: usize, params: Vec<f64>) -> Result<Self> {
        let n = controls.len();
        if degree < 1 || n < degree + 2 {
            return Err(Error::TooFewControls {
                degree,
                required: degree + 2,
                found: n,
            });
        }
        if params.is_empty()
            || params.windows(2).any(|w| w[1] <= w[0])
            || params[0] < 0.0
            || params[params.len() - 1] > 1.0
        {
            return Err(Error::NonIncreasingParameters);
        }
        let partition = KnotVector::uniform(n - degree, degree, 0.0, 1.0)?.extend();
        Ok(Self {
            degree,
            controls,
            params,
            partition,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn controls(&self) -> &[Point] {
        &self.controls
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn num_samples(&self) -> usize {
        self.params.len()
    }

    pub fn partition(&self) -> &ExtendedPartition {
        &self.partition
    }

    /// Same basis and sampling, different control points.
    pub fn with_controls(&self, controls: Vec<Point>) -> Result<Self> {
        if controls.len() != self.controls.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} controls, got {}",
                self.controls.len(),
                controls.len()
            )));
        }
        Ok(Self {
            controls,
            ..self.clone()
        })
    }

    pub fn collocation(&self) -> Result<CollocationMatrix> {
        let cols = self.controls.len();
        let mut data = Vec::with_capacity(self.params.len() * cols);
        for &t in &self.params {
            data.extend(self.partition.periodic_basis_all(t)?);
        }
        Ok(CollocationMatrix {
            rows: self.params.len(),
            cols,
            data,
        })
    }

    pub fn sample_boundary(&self) -> Result<Vec<Point>> {
        self.collocation()?.apply(&self.controls)
    }

    /// Direct evaluation of the curve at one parameter.
    pub fn eval(&self, t: f64) -> Result<Point> {
        let basis = self.partition.periodic_basis_all(t)?;
        Ok(basis
            .iter()
            .zip(&self.controls)
            .fold(Point::default(), |acc, (w, p)| acc + *p * *w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook recursive Cox-de Boor, kept separate from the iterative table.
    fn recursive_basis(knots: &[f64], i: usize, p: usize, xi: f64) -> f64 {
        if p == 0 {
            return if knots[i] <= xi && xi < knots[i + 1] { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (xi - knots[i]) / d1 * recursive_basis(knots, i, p - 1, xi);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - xi) / d2 * recursive_basis(knots, i + 1, p - 1, xi);
        }
        v
    }

    #[test]
    fn degree_zero_indicator() {
        let kv = KnotVector::new(vec![0.0, 1.0, 2.0], 0).unwrap();
        assert_eq!(kv.basis(0, 0.5).unwrap(), 1.0);
        assert_eq!(kv.basis(0, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn cardinal_cubic_values() {
        let kv = KnotVector::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], 3).unwrap();
        assert!((kv.basis(0, 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((kv.basis(0, 1.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        for &xi in &[0.3, 1.7, 2.2, 3.9] {
            let r = recursive_basis(kv.knots(), 0, 3, xi);
            assert!((kv.basis(0, xi).unwrap() - r).abs() < 1e-15);
        }
    }

    #[test]
    fn basis_errors() {
        let kv = KnotVector::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], 3).unwrap();
        assert!(matches!(kv.basis(1, 1.0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(kv.basis(0, 4.5), Err(Error::ParameterOutOfSpan { .. })));
        assert!(KnotVector::new(vec![0.0, 2.0, 1.0, 3.0], 1).is_err());
    }

    #[test]
    fn partition_of_unity_on_interior_span() {
        let kv = KnotVector::new(vec![0.0, 0.1, 0.3, 0.35, 0.6, 0.8, 0.9, 1.0], 2).unwrap();
        let (lo, hi) = (kv.knots()[2], kv.knots()[kv.num_basis()]);
        for s in 0..=100 {
            let xi = lo + (hi - lo) * s as f64 / 100.0 * 0.9999;
            let sum: f64 = (0..kv.num_basis()).map(|k| kv.basis(k, xi).unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-14, "xi={xi} sum={sum}");
        }
    }

    #[test]
    fn extension_shifts_by_period() {
        let kv = KnotVector::new(vec![0.0, 0.25, 0.5, 0.75, 1.0], 1).unwrap();
        let ext = kv.extend();
        assert_eq!(ext.knots(), &[-0.25, 0.0, 0.25, 0.5, 0.75, 1.0, 1.25]);

        let kv0 = KnotVector::new(vec![0.0, 1.0], 0).unwrap();
        assert_eq!(kv0.extend().knots(), kv0.knots());

        let kv3 = KnotVector::uniform(7, 3, 0.0, 1.0).unwrap();
        assert_eq!(kv3.knots().len(), 11);
        let ext3 = kv3.extend();
        assert_eq!(ext3.knots().len(), 17);
        for w in ext3.knots().windows(2) {
            assert!((w[1] - w[0] - 0.1).abs() < 1e-15);
        }
        assert!((ext3.knots()[0] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn periodic_basis_matches_unwrapped_cardinal_oracle() {
        // n + p = 8 periodic functions, p = 3: 9 uniform knots on [0, 1].
        let ext = KnotVector::uniform(5, 3, 0.0, 1.0).unwrap().extend();
        let h = 1.0 / 8.0;
        // cardinal cubic on [0, 4] scaled to knot spacing h
        let cardinal = |u: f64| {
            let kv = [0.0, 1.0, 2.0, 3.0, 4.0];
            recursive_basis(&kv, 0, 3, u)
        };
        for &xi in &[0.0, 0.03, 0.5, 0.77, 1.0] {
            let vals = ext.periodic_basis_all(xi).unwrap();
            for (k, v) in vals.iter().enumerate() {
                // periodic function k starts at knot k·h and wraps with period 1
                let mut want = 0.0;
                for shift in [-1.0, 0.0, 1.0] {
                    let u = (xi - k as f64 * h + shift) / h;
                    if (0.0..4.0).contains(&u) {
                        want += cardinal(u);
                    }
                }
                assert!((v - want).abs() < 1e-14, "k={k} xi={xi}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn periodic_values_wrap() {
        let ext = KnotVector::uniform(6, 3, 0.0, 1.0).unwrap().extend();
        let a = ext.periodic_basis_all(0.0).unwrap();
        let b = ext.periodic_basis_all(1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(ext.periodic_basis(9, 0.5).is_err());
    }

    fn square_controls() -> Vec<Point> {
        let mut c = Vec::new();
        for i in 0..3 {
            c.push(Point::new(i as f64, 0.0));
        }
        for i in 0..3 {
            c.push(Point::new(3.0, i as f64));
        }
        for i in 0..3 {
            c.push(Point::new(3.0 - i as f64, 3.0));
        }
        for i in 0..3 {
            c.push(Point::new(0.0, 3.0 - i as f64));
        }
        c
    }

    #[test]
    fn collocation_matches_direct_evaluation() {
        let controls: Vec<Point> = (0..8)
            .map(|i| {
                let a = i as f64 / 8.0 * std::f64::consts::TAU;
                Point::new(a.cos() * (1.0 + 0.2 * i as f64), a.sin())
            })
            .collect();
        let region = PeriodicSplineRegion::new(controls.clone(), 3, 16).unwrap();
        let q = region.sample_boundary().unwrap();
        // direct summation over all periodic basis functions, independent of the matrix
        let ext = region.partition();
        for (k, &t) in region.params().iter().enumerate() {
            let mut p = Point::default();
            for (j, c) in controls.iter().enumerate() {
                p = p + *c * ext.periodic_basis(j, t).unwrap();
            }
            assert!(q[k].dist(p) < 1e-12);
        }

        let sq = PeriodicSplineRegion::new(square_controls(), 3, 48).unwrap();
        for (q, &t) in sq.sample_boundary().unwrap().iter().zip(sq.params()) {
            assert!(q.dist(sq.eval(t).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn collocation_shape_and_support() {
        let region = PeriodicSplineRegion::new(square_controls(), 3, 30).unwrap();
        let n = region.collocation().unwrap();
        assert_eq!((n.rows(), n.cols()), (30, 12));
        for i in 0..n.rows() {
            let row = n.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(row.iter().filter(|v| **v != 0.0).count() <= 4);
        }
    }

    #[test]
    fn constant_controls_give_constant_curve() {
        let c = Point::new(2.5, -1.0);
        let region = PeriodicSplineRegion::new(vec![c; 7], 3, 20).unwrap();
        for q in region.sample_boundary().unwrap() {
            assert!(q.dist(c) < 1e-14);
        }
    }

    #[test]
    fn curve_is_closed() {
        let region = PeriodicSplineRegion::new(square_controls(), 3, 10).unwrap();
        assert!(region.eval(0.0).unwrap().dist(region.eval(1.0).unwrap()) < 1e-12);
    }

    #[test]
    fn circle_controls_stay_in_hull() {
        let r = 2.0;
        let controls: Vec<Point> = (0..10)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 10.0;
                Point::new(1.0 + r * a.cos(), -2.0 + r * a.sin())
            })
            .collect();
        let region = PeriodicSplineRegion::new(controls, 3, 64).unwrap();
        for q in region.sample_boundary().unwrap() {
            assert!(q.dist(Point::new(1.0, -2.0)) <= r + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            PeriodicSplineRegion::new(vec![Point::default(); 4], 3, 10),
            Err(Error::TooFewControls { .. })
        ));
        assert!(matches!(
            PeriodicSplineRegion::with_params(square_controls(), 3, vec![0.0, 0.5, 0.5]),
            Err(Error::NonIncreasingParameters)
        ));
    }

    proptest! {
        #[test]
        fn periodic_partition_of_unity(xi in 0.0f64..=1.0, n in 5usize..30) {
            let ext = KnotVector::uniform(n - 3, 3, 0.0, 1.0).unwrap().extend();
            let vals = ext.periodic_basis_all(xi).unwrap();
            prop_assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(vals.iter().all(|v| *v >= 0.0));
            prop_assert!(vals.iter().filter(|v| **v != 0.0).count() <= 4);
        }

        #[test]
        fn affine_equivariance(
            a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0,
            vx in -10.0f64..10.0, vy in -10.0f64..10.0,
        ) {
            let controls = square_controls();
            let map = |p: Point| Point::new(a * p.x + b * p.y + vx, c * p.x + d * p.y + vy);
            let base = PeriodicSplineRegion::new(controls.clone(), 3, 40).unwrap();
            let moved = base.with_controls(controls.iter().map(|p| map(*p)).collect()).unwrap();
            for (q, r) in base.sample_boundary().unwrap().iter().zip(moved.sample_boundary().unwrap()) {
                prop_assert!(map(*q).dist(r) < 1e-10);
            }
        }
    }
}
