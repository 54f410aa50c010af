//! File writers: ASCII PGM rasters, SVG boundaries, control-point JSON and
//! the convergence trace.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Point;
use crate::optics::OpticalConfig;
use crate::optimizer::TraceEntry;
use crate::spline::PeriodicSplineRegion;

pub const PGM_MAXVAL: u32 = 65535;
pub const SVG_SAMPLES: usize = 512;

/// P2 raster with the top row at maximum `y`. Pixel values are
/// `round(v · scale)` clamped to the maxval; `scale` is recorded in a
/// header comment so values can be recovered.
pub fn pgm(nx: usize, ny: usize, values: &[f64], scale: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "P2");
    let _ = writeln!(s, "# scale {scale:.17e}");
    let _ = writeln!(s, "{nx} {ny}");
    let _ = writeln!(s, "{PGM_MAXVAL}");
    for j in (0..ny).rev() {
        let row: Vec<String> = (0..nx)
            .map(|i| {
                let v = (values[j * nx + i] * scale).round().clamp(0.0, f64::from(PGM_MAXVAL));
                format!("{}", v as u32)
            })
            .collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

/// Intensity scaled so its maximum maps to the maxval.
pub fn intensity_pgm(nx: usize, ny: usize, intensity: &[f64]) -> String {
    let max = intensity.iter().fold(0.0f64, |m, v| m.max(*v));
    let scale = if max > 0.0 { f64::from(PGM_MAXVAL) / max } else { 1.0 };
    pgm(nx, ny, intensity, scale)
}

pub fn binary_pgm(nx: usize, ny: usize, values: &[u8]) -> String {
    let v: Vec<f64> = values.iter().map(|b| f64::from(*b)).collect();
    pgm(nx, ny, &v, f64::from(PGM_MAXVAL))
}

/// Control points of every region in mask-plane nanometres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskFile {
    pub regions: Vec<MaskRegion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRegion {
    pub controls_nm: Vec<Point>,
}

impl MaskFile {
    pub fn from_normalized(controls: &[Vec<Point>], optics: &OpticalConfig) -> Self {
        Self {
            regions: controls
                .iter()
                .map(|c| MaskRegion {
                    controls_nm: c.iter().map(|p| optics.denormalize_object(*p)).collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mask serializes") + "\n"
    }
}

/// Each region's spline sampled at [`SVG_SAMPLES`] points, in mask-plane nm
/// with `y` pointing up.
pub fn boundary_svg(
    controls: &[Vec<Point>],
    degree: usize,
    optics: &OpticalConfig,
) -> Result<String> {
    let mut paths = Vec::new();
    let (mut lo, mut hi) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
    for c in controls {
        let curve = PeriodicSplineRegion::new(c.clone(), degree, SVG_SAMPLES)?;
        let pts: Vec<Point> = curve
            .sample_boundary()?
            .into_iter()
            .map(|p| optics.denormalize_object(p))
            .collect();
        for p in &pts {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        paths.push(pts);
    }
    if paths.is_empty() {
        lo = Point::default();
        hi = Point::new(1.0, 1.0);
    }
    let pad = 0.05 * (hi.x - lo.x).max(hi.y - lo.y);
    let (x0, y0) = (lo.x - pad, -(hi.y + pad));
    let (w, h) = (hi.x - lo.x + 2.0 * pad, hi.y - lo.y + 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6} {y0:.6} {w:.6} {h:.6}">"#
    );
    for pts in &paths {
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.6},{:.6} ", if i == 0 { "M" } else { "L" }, p.x, -p.y);
        }
        d.push('Z');
        let _ = writeln!(
            s,
            r#"  <path d="{d}" fill="none" stroke="black" stroke-width="{:.6}"/>"#,
            w / 400.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn convergence_csv(trace: &[TraceEntry]) -> String {
    let mut s = String::from("iter,J,alpha\n");
    for t in trace {
        let _ = writeln!(s, "{},{:.17e},{:.17e}", t.iter, t.objective, t.alpha);
    }
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    fs::write(dir.join(name), contents)
}
