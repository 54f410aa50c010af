//! Sigmoid resist model, binary targets and the image-fidelity objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, shoelace_area, Point};
use crate::optics::ImageGrid;

/// `sig(x) = 1 / (1 + exp(−a (x − tr)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResistModel {
    pub a: f64,
    pub tr: f64,
}

impl Default for ResistModel {
    fn default() -> Self {
        Self { a: 90.0, tr: 0.3 }
    }
}

impl ResistModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::Config("resist.a must be positive".into()));
        }
        if !(self.tr.is_finite() && self.tr > 0.0) {
            return Err(Error::Config("resist.tr must be positive".into()));
        }
        Ok(())
    }

    pub fn sigmoid(&self, x: f64) -> f64 {
        let z = self.a * (x - self.tr);
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }

    pub fn sigmoid_derivative(&self, x: f64) -> f64 {
        let s = self.sigmoid(x);
        self.a * s * (1.0 - s)
    }

    /// Hard develop threshold `T(x) = [x ≥ tr]`.
    pub fn threshold(&self, x: f64) -> bool {
        x >= self.tr
    }
}

/// Binary raster aligned with an [`ImageGrid`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetRaster {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<u8>,
}

impl TargetRaster {
    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|v| **v != 0).count()
    }
}

/// Marks every grid sample lying inside any polygon (even-odd rule).
/// Polygons and grid share one coordinate system.
pub fn rasterize_target(polygons: &[Vec<Point>], grid: &ImageGrid) -> Result<TargetRaster> {
    for (k, poly) in polygons.iter().enumerate() {
        if poly.len() < 3 {
            return Err(Error::DegeneratePolygon(format!(
                "target {k} has {} vertices",
                poly.len()
            )));
        }
        if shoelace_area(poly).abs() == 0.0 {
            return Err(Error::DegeneratePolygon(format!("target {k} has zero area")));
        }
    }
    let values = (0..grid.len())
        .map(|idx| {
            let s = grid.sample_at(idx);
            u8::from(polygons.iter().any(|poly| point_in_polygon(s, poly)))
        })
        .collect();
    Ok(TargetRaster {
        nx: grid.nx(),
        ny: grid.ny(),
        values,
    })
}

fn check_len(intensity: &[f64], target: &TargetRaster) -> Result<()> {
    if intensity.len() != target.values.len() {
        return Err(Error::DimensionMismatch(format!(
            "intensity has {} samples, target has {}",
            intensity.len(),
            target.values.len()
        )));
    }
    Ok(())
}

/// `J = Σ (sig(I) − I_target)² · cell_area`. Pass the grid's `Δx Δy` as
/// `cell_area`, or 1 for the unweighted sum.
pub fn objective_value(
    intensity: &[f64],
    target: &TargetRaster,
    model: &ResistModel,
    cell_area: f64,
) -> Result<f64> {
    check_len(intensity, target)?;
    Ok(intensity
        .iter()
        .zip(&target.values)
        .map(|(i, t)| {
            let r = model.sigmoid(*i) - f64::from(*t);
            r * r
        })
        .sum::<f64>()
        * cell_area)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrintReport {
    pub print: Vec<u8>,
    pub epe: Vec<u8>,
    pub epe_count: usize,
}

/// Hard-thresholded print and its XOR mismatch against the target.
pub fn print_and_epe(
    intensity: &[f64],
    target: &TargetRaster,
    model: &ResistModel,
) -> Result<PrintReport> {
    check_len(intensity, target)?;
    let print: Vec<u8> = intensity.iter().map(|i| u8::from(model.threshold(*i))).collect();
    let epe: Vec<u8> = print
        .iter()
        .zip(&target.values)
        .map(|(p, t)| u8::from((*p != 0) != (*t != 0)))
        .collect();
    let epe_count = epe.iter().filter(|v| **v != 0).count();
    Ok(PrintReport {
        print,
        epe,
        epe_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid10() -> ImageGrid {
        ImageGrid::new(10, 10, Point::new(0.5, 0.5), 1.0).unwrap()
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point> {
        vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ]
    }

    #[test]
    fn sigmoid_values() {
        let m = ResistModel::default();
        assert_eq!(m.sigmoid(0.3), 0.5);
        assert!((m.sigmoid(0.35) - 0.9890130573694068).abs() < 1e-15);
        assert_eq!(m.sigmoid(1e300), 1.0);
        assert_eq!(m.sigmoid(-1e300), 0.0);
        assert!(m.sigmoid(f64::MAX).is_finite());
    }

    #[test]
    fn sigmoid_derivative_peak_and_symmetry() {
        let m = ResistModel::default();
        assert!((m.sigmoid_derivative(0.3) - 90.0 / 4.0).abs() < 1e-12);
        for &d in &[0.001, 0.01, 0.05] {
            assert!((m.sigmoid_derivative(0.3 + d) - m.sigmoid_derivative(0.3 - d)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn sigmoid_derivative_matches_fd(x in 0.2f64..0.4) {
            let m = ResistModel::default();
            let h = 1e-6;
            let fd = (m.sigmoid(x + h) - m.sigmoid(x - h)) / (2.0 * h);
            let an = m.sigmoid_derivative(x);
            prop_assert!((an - fd).abs() <= 1e-6 * an.abs().max(1e-3));
        }

        #[test]
        fn objective_monotone_in_intensity(i in 0.0f64..1.0, bump in 0.0f64..0.5) {
            let m = ResistModel::default();
            let one = TargetRaster { nx: 1, ny: 1, values: vec![1] };
            let zero = TargetRaster { nx: 1, ny: 1, values: vec![0] };
            let j = |v: f64, t: &TargetRaster| objective_value(&[v], t, &m, 1.0).unwrap();
            prop_assert!(j(i + bump, &one) <= j(i, &one));
            prop_assert!(j(i, &zero) <= j(i + bump, &zero));
        }
    }

    #[test]
    fn rasterize_cases() {
        let g = grid10();
        let all = rasterize_target(&[rect(-1.0, -1.0, 11.0, 11.0)], &g).unwrap();
        assert_eq!(all.count_ones(), 100);
        let none = rasterize_target(&[], &g).unwrap();
        assert_eq!(none.count_ones(), 0);
        let half = rasterize_target(&[rect(0.0, 0.0, 5.0, 10.0)], &g).unwrap();
        for j in 0..10 {
            for i in 0..10 {
                assert_eq!(half.values[j * 10 + i], u8::from(i < 5));
            }
        }
        assert!(rasterize_target(&[vec![Point::default(); 2]], &g).is_err());
        let flat = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        assert!(rasterize_target(&[flat], &g).is_err());
    }

    #[test]
    fn objective_cases() {
        let g = grid10();
        let m = ResistModel::default();
        let target = rasterize_target(&[rect(0.0, 0.0, 5.0, 10.0)], &g).unwrap();
        let saturated: Vec<f64> = target.values.iter().map(|t| if *t == 1 { 0.6 } else { 0.0 }).collect();
        assert!(objective_value(&saturated, &target, &m, g.cell_area()).unwrap() < 1e-10);

        let ones = TargetRaster { nx: 10, ny: 10, values: vec![1; 100] };
        let j = objective_value(&[0.0; 100], &ones, &m, 1.0).unwrap();
        assert!((j - 100.0).abs() < 1e-9);

        let i: Vec<f64> = (0..100).map(|k| k as f64 / 150.0).collect();
        let j1 = objective_value(&i, &target, &m, 1.0).unwrap();
        let j2 = objective_value(&i, &target, &m, 2.0).unwrap();
        assert_eq!(j2, 2.0 * j1);
        assert!(objective_value(&i[..5], &target, &m, 1.0).is_err());
    }

    #[test]
    fn epe_counts() {
        let m = ResistModel::default();
        let target = TargetRaster { nx: 2, ny: 2, values: vec![1, 0, 0, 1] };
        let exact = print_and_epe(&[1.0, 0.0, 0.0, 1.0], &target, &m).unwrap();
        assert_eq!(exact.epe_count, 0);
        assert_eq!(exact.print, target.values);
        let inverse = print_and_epe(&[0.0, 1.0, 1.0, 0.0], &target, &m).unwrap();
        assert_eq!(inverse.epe_count, 4);
        let one = print_and_epe(&[1.0, 0.0, 0.5, 1.0], &target, &m).unwrap();
        assert_eq!(one.epe_count, 1);
        assert_eq!(one.epe, vec![0, 0, 1, 0]);
    }
}
