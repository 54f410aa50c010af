//! Run configuration as a JSON document. Physical lengths carry an `_nm`
//! suffix; mask controls live in the mask plane, targets and the grid in
//! the image plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_simple_polygon, shoelace_area, Point};
use crate::mesh::TriangleQuadrature;
use crate::objective::{rasterize_target, ResistModel};
use crate::optics::{ImageGrid, OpticalConfig};
use crate::optimizer::{init_controls_from_target, OptimizerConfig};
use crate::problem::MaskProblem;
use crate::spline::DEFAULT_DEGREE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub pixel_nm: f64,
    /// Position of sample `(0, 0)`. When absent the grid is centred on the
    /// bounding box of the targets (or of the regions if there are none).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_nm: Option<Point>,
    /// Fraction of the field on each side that targets must keep clear of.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    0.2
}

/// One mask region: explicit controls, or controls spaced along a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionConfig {
    Explicit {
        controls_nm: Vec<Point>,
        samples: usize,
    },
    FromTarget {
        from_target: usize,
        n: usize,
        samples: usize,
    },
}

impl RegionConfig {
    pub fn samples(&self) -> usize {
        match self {
            Self::Explicit { samples, .. } | Self::FromTarget { samples, .. } => *samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub vertices_nm: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    /// Weight each pixel by `Δx Δy` in normalized units; otherwise by 1.
    pub pixel_area_weight: bool,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            pixel_area_weight: true,
        }
    }
}

/// Only the 4-point degree-3 rule is available.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureChoice {
    #[default]
    Degree3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub optics: OpticalConfig,
    #[serde(default)]
    pub resist: ResistModel,
    pub grid: GridConfig,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
    #[serde(default)]
    pub targets: Vec<TargetConfig>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub quadrature: QuadratureChoice,
}

fn default_degree() -> usize {
    DEFAULT_DEGREE
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.optics.validate()?;
        self.resist.validate()?;
        self.optimizer.validate()?;
        let g = &self.grid;
        if g.nx < 2 || g.ny < 2 {
            return Err(Error::Config("grid.nx and grid.ny must be at least 2".into()));
        }
        if !(g.pixel_nm.is_finite() && g.pixel_nm > 0.0) {
            return Err(Error::Config("grid.pixel_nm must be positive".into()));
        }
        if !(0.0..0.5).contains(&g.margin) {
            return Err(Error::Config("grid.margin must lie in [0, 0.5)".into()));
        }
        if self.degree < 1 {
            return Err(Error::Config("degree must be at least 1".into()));
        }
        for (k, t) in self.targets.iter().enumerate() {
            if t.vertices_nm.len() < 3 || shoelace_area(&t.vertices_nm) == 0.0 {
                return Err(Error::Config(format!("targets[{k}].vertices_nm is degenerate")));
            }
            check_simple_polygon(&t.vertices_nm)
                .map_err(|e| Error::Config(format!("targets[{k}].vertices_nm: {e}")))?;
        }
        for (k, r) in self.regions.iter().enumerate() {
            let n = match r {
                RegionConfig::Explicit { controls_nm, .. } => controls_nm.len(),
                RegionConfig::FromTarget { from_target, n, .. } => {
                    if *from_target >= self.targets.len() {
                        return Err(Error::Config(format!(
                            "regions[{k}].from_target refers to missing target {from_target}"
                        )));
                    }
                    *n
                }
            };
            if n < self.degree + 2 {
                return Err(Error::Config(format!(
                    "regions[{k}] needs at least {} controls, found {n}",
                    self.degree + 2
                )));
            }
            if r.samples() < 3 {
                return Err(Error::Config(format!("regions[{k}].samples must be at least 3")));
            }
        }
        if let Some(origin) = g.origin_nm {
            if !origin.x.is_finite() || !origin.y.is_finite() {
                return Err(Error::Config("grid.origin_nm must be finite".into()));
            }
        }
        self.check_margin()
    }

    fn check_margin(&self) -> Result<()> {
        let Some((lo, hi)) = bounding_box(self.targets.iter().flat_map(|t| &t.vertices_nm)) else {
            return Ok(());
        };
        let origin = self.origin_nm();
        let g = &self.grid;
        let (wx, wy) = ((g.nx - 1) as f64 * g.pixel_nm, (g.ny - 1) as f64 * g.pixel_nm);
        let (mx, my) = (g.margin * wx, g.margin * wy);
        let eps = 1e-9 * wx.max(wy);
        if lo.x < origin.x + mx - eps
            || lo.y < origin.y + my - eps
            || hi.x > origin.x + wx - mx + eps
            || hi.y > origin.y + wy - my + eps
        {
            return Err(Error::Config(
                "grid.margin: targets extend into the field margin".into(),
            ));
        }
        Ok(())
    }

    /// Image-plane position of sample `(0, 0)` in nm.
    pub fn origin_nm(&self) -> Point {
        if let Some(o) = self.grid.origin_nm {
            return o;
        }
        let g = &self.grid;
        let half = Point::new(
            (g.nx - 1) as f64 * g.pixel_nm / 2.0,
            (g.ny - 1) as f64 * g.pixel_nm / 2.0,
        );
        let targets = bounding_box(self.targets.iter().flat_map(|t| &t.vertices_nm));
        let regions = || {
            let pts: Vec<Point> = self
                .regions
                .iter()
                .filter_map(|r| match r {
                    RegionConfig::Explicit { controls_nm, .. } => Some(controls_nm.clone()),
                    RegionConfig::FromTarget { .. } => None,
                })
                .flatten()
                .map(|p| self.optics.denormalize_image(self.optics.normalize_object(p)))
                .collect();
            bounding_box(pts.iter())
        };
        match targets.or_else(regions) {
            Some((lo, hi)) => (lo + hi) * 0.5 - half,
            None => Point::default() - half,
        }
    }

    pub fn grid(&self) -> Result<ImageGrid> {
        ImageGrid::from_physical(
            self.grid.nx,
            self.grid.ny,
            self.origin_nm(),
            self.grid.pixel_nm,
            &self.optics,
        )
    }

    pub fn normalized_targets(&self) -> Vec<Vec<Point>> {
        self.targets
            .iter()
            .map(|t| t.vertices_nm.iter().map(|p| self.optics.normalize_image(*p)).collect())
            .collect()
    }

    /// Initial controls per region in normalized coordinates.
    pub fn initial_controls(&self) -> Result<Vec<Vec<Point>>> {
        let targets = self.normalized_targets();
        self.regions
            .iter()
            .map(|r| match r {
                RegionConfig::Explicit { controls_nm, .. } => Ok(controls_nm
                    .iter()
                    .map(|p| self.optics.normalize_object(*p))
                    .collect()),
                RegionConfig::FromTarget { from_target, n, .. } => {
                    init_controls_from_target(&targets[*from_target], *n, self.degree)
                }
            })
            .collect()
    }

    pub fn problem(&self) -> Result<MaskProblem> {
        let grid = self.grid()?;
        let target = rasterize_target(&self.normalized_targets(), &grid)?;
        let cell_weight = if self.objective.pixel_area_weight {
            grid.cell_area()
        } else {
            1.0
        };
        Ok(MaskProblem {
            grid,
            target,
            resist: self.resist,
            quad: match self.quadrature {
                QuadratureChoice::Degree3 => TriangleQuadrature::degree3(),
            },
            degree: self.degree,
            samples: self.regions.iter().map(RegionConfig::samples).collect(),
            refine_area: self.optimizer.refine_area,
            cell_weight,
        })
    }
}

fn bounding_box<'a>(points: impl Iterator<Item = &'a Point>) -> Option<(Point, Point)> {
    points.fold(None, |acc, p| match acc {
        None => Some((*p, *p)),
        Some((lo, hi)) => Some((
            Point::new(lo.x.min(p.x), lo.y.min(p.y)),
            Point::new(hi.x.max(p.x), hi.y.max(p.y)),
        )),
    })
}
