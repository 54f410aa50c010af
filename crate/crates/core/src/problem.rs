//! The assembled imaging problem: regions, their meshes, the forward image
//! and the objective at one set of control points.

use crate::error::Result;
use crate::geometry::Point;
use crate::gradient::{
    objective_gradient_with, sensitivity, GradientInputs, GradientOptions, GradientVector,
    SensitivityMatrix,
};
use crate::mesh::{ProvenancedMesh, TriangleQuadrature};
use crate::objective::{objective_value, print_and_epe, PrintReport, ResistModel, TargetRaster};
use crate::optics::{forward_amplitude, AmplitudeField, ImageGrid};
use crate::spline::{CollocationMatrix, PeriodicSplineRegion};

/// One region's spline, collocation matrix and provenanced mesh.
#[derive(Debug, Clone)]
pub struct RegionState {
    pub spline: PeriodicSplineRegion,
    pub collocation: CollocationMatrix,
    pub mesh: ProvenancedMesh,
}

impl RegionState {
    /// Samples the boundary, triangulates and refines.
    pub fn build(spline: PeriodicSplineRegion, refine_area: f64) -> Result<Self> {
        let collocation = spline.collocation()?;
        let samples = collocation.apply(spline.controls())?;
        let mesh = ProvenancedMesh::triangulate(&samples)?.refine(refine_area)?;
        Ok(Self {
            spline,
            collocation,
            mesh,
        })
    }

    /// New controls with connectivity and provenance held fixed.
    pub fn frozen(&self, controls: Vec<Point>) -> Result<Self> {
        let spline = self.spline.with_controls(controls)?;
        let samples = self.collocation.apply(spline.controls())?;
        Ok(Self {
            mesh: self.mesh.with_samples(&samples)?,
            collocation: self.collocation.clone(),
            spline,
        })
    }

    pub fn controls(&self) -> &[Point] {
        self.spline.controls()
    }

    pub fn sensitivity(&self) -> Result<SensitivityMatrix> {
        sensitivity(&self.mesh, &self.collocation)
    }
}

/// Fixed data of an optimization problem, all in normalized coordinates.
#[derive(Debug, Clone)]
pub struct MaskProblem {
    pub grid: ImageGrid,
    pub target: TargetRaster,
    pub resist: ResistModel,
    pub quad: TriangleQuadrature,
    pub degree: usize,
    /// Sample count `m` per region.
    pub samples: Vec<usize>,
    pub refine_area: f64,
    /// Weight of each pixel in the objective (`Δx Δy` or 1).
    pub cell_weight: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub regions: Vec<RegionState>,
    pub amplitude: AmplitudeField,
    pub intensity: Vec<f64>,
    pub objective: f64,
}

impl Evaluation {
    pub fn controls(&self) -> Vec<Vec<Point>> {
        self.regions.iter().map(|r| r.controls().to_vec()).collect()
    }

    pub fn meshes(&self) -> Vec<ProvenancedMesh> {
        self.regions.iter().map(|r| r.mesh.clone()).collect()
    }
}

impl MaskProblem {
    pub fn build_regions(&self, controls: &[Vec<Point>]) -> Result<Vec<RegionState>> {
        controls
            .iter()
            .zip(&self.samples)
            .map(|(c, &m)| {
                let spline = PeriodicSplineRegion::new(c.clone(), self.degree, m)?;
                RegionState::build(spline, self.refine_area)
            })
            .collect()
    }

    pub fn evaluate_regions(&self, regions: Vec<RegionState>) -> Result<Evaluation> {
        let meshes: Vec<ProvenancedMesh> = regions.iter().map(|r| r.mesh.clone()).collect();
        let amplitude = forward_amplitude(&meshes, &self.quad, &self.grid);
        let intensity = amplitude.intensity();
        let objective = objective_value(&intensity, &self.target, &self.resist, self.cell_weight)?;
        Ok(Evaluation {
            regions,
            amplitude,
            intensity,
            objective,
        })
    }

    /// Rebuilds meshes from scratch and evaluates.
    pub fn evaluate(&self, controls: &[Vec<Point>]) -> Result<Evaluation> {
        self.evaluate_regions(self.build_regions(controls)?)
    }

    /// Evaluates new controls on the meshes of `base` without retriangulating.
    pub fn evaluate_frozen(&self, base: &Evaluation, controls: &[Vec<Point>]) -> Result<Evaluation> {
        let regions = base
            .regions
            .iter()
            .zip(controls)
            .map(|(r, c)| r.frozen(c.clone()))
            .collect::<Result<Vec<_>>>()?;
        self.evaluate_regions(regions)
    }

    pub fn gradient(&self, eval: &Evaluation) -> Result<GradientVector> {
        self.gradient_with(eval, GradientOptions::default())
    }

    #[doc(hidden)]
    pub fn gradient_with(&self, eval: &Evaluation, opts: GradientOptions) -> Result<GradientVector> {
        let meshes = eval.meshes();
        let sens = eval
            .regions
            .iter()
            .map(RegionState::sensitivity)
            .collect::<Result<Vec<_>>>()?;
        objective_gradient_with(
            &GradientInputs {
                meshes: &meshes,
                sensitivities: &sens,
                quad: &self.quad,
                grid: &self.grid,
                amplitude: &eval.amplitude,
                target: &self.target,
                model: &self.resist,
                cell_weight: self.cell_weight,
            },
            opts,
        )
    }

    pub fn print_report(&self, eval: &Evaluation) -> Result<PrintReport> {
        print_and_epe(&eval.intensity, &self.target, &self.resist)
    }
}

/// Central finite differences of the frozen-topology objective with respect
/// to every control coordinate, in the same layout as
/// [`GradientVector::flatten`].
pub fn finite_difference_gradient(problem: &MaskProblem, base: &Evaluation, h: f64) -> Result<Vec<f64>> {
    let controls = base.controls();
    let mut out = Vec::new();
    for (r, region) in controls.iter().enumerate() {
        for k in 0..region.len() {
            for axis in 0..2 {
                let shifted = |s: f64| -> Result<f64> {
                    let mut c = controls.clone();
                    if axis == 0 {
                        c[r][k].x += s;
                    } else {
                        c[r][k].y += s;
                    }
                    Ok(problem.evaluate_frozen(base, &c)?.objective)
                };
                out.push((shifted(h)? - shifted(-h)?) / (2.0 * h));
            }
        }
    }
    Ok(out)
}

/// `|a − f| / max(1, |f|)`.
pub fn mixed_error(analytic: f64, reference: f64) -> f64 {
    (analytic - reference).abs() / reference.abs().max(1.0)
}
