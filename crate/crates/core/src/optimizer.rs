//! Steepest descent with golden-section line search. Every trial step
//! rebuilds meshes from the moved controls; trial boundaries that fail to
//! mesh (self-intersection, collapse) score `+∞`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{perimeter, Point};
use crate::gradient::GradientVector;
use crate::problem::{Evaluation, MaskProblem};

/// `1 / φ`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Bracket shrink factor when golden-section search finds no decrease.
const BRACKET_SHRINK: f64 = 0.1;
const BRACKET_RETRIES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Maximum number of iterations `I_M`.
    pub max_iters: usize,
    /// Stop once `J ≤ eps`.
    pub eps: f64,
    /// Stop once the accepted step size `α < alpha_eps`.
    pub alpha_eps: f64,
    /// Upper bound on the largest control displacement of one step, in
    /// normalized units; sets the bracket `[0, α_max]`.
    pub max_displacement: f64,
    /// Golden-section tolerance relative to `α_max`.
    pub gs_tol: f64,
    /// Maximum triangle area after refinement, normalized units.
    pub refine_area: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            eps: 1e-4,
            alpha_eps: 1e-4,
            max_displacement: 2.0,
            gs_tol: 1e-3,
            refine_area: 0.02,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("optimizer.max_iters must be at least 1".into()));
        }
        for (name, v) in [
            ("optimizer.eps", self.eps),
            ("optimizer.alpha_eps", self.alpha_eps),
            ("optimizer.max_displacement", self.max_displacement),
            ("optimizer.gs_tol", self.gs_tol),
            ("optimizer.refine_area", self.refine_area),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Golden-section search for a minimum of `phi` on `[lo, hi]`, stopping when
/// the bracket is narrower than `tol`. Returns the best interior point seen
/// and its value.
pub fn golden_section<F: FnMut(f64) -> f64>(mut phi: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = phi(c);
    let mut fd = phi(d);
    let mut best = if fd < fc { (d, fd) } else { (c, fc) };
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = phi(c);
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = phi(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

pub fn displaced(controls: &[Vec<Point>], grad: &GradientVector, alpha: f64) -> Vec<Vec<Point>> {
    controls
        .iter()
        .zip(&grad.regions)
        .map(|(c, g)| c.iter().zip(g).map(|(p, d)| *p - *d * alpha).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub objective: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `J ≤ ε`.
    Converged,
    MaxIterations,
    /// Accepted `α` fell below `alpha_eps`.
    StepTooSmall,
    /// The line search found no decrease.
    NoDescent,
}

/// Outcome of one line-searched step.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    Accepted { alpha: f64, eval: Evaluation },
    NoProgress { alpha: f64 },
}

/// One steepest-descent step from `current` along `−grad`. Returns the
/// regenerated state at the best trial, or no progress when no trial beats
/// the current objective.
pub fn step(
    problem: &MaskProblem,
    cfg: &OptimizerConfig,
    current: &Evaluation,
    grad: &GradientVector,
) -> StepOutcome {
    let scale = grad.max_norm();
    if scale == 0.0 || !scale.is_finite() {
        return StepOutcome::NoProgress { alpha: 0.0 };
    }
    let controls = current.controls();
    let phi = |alpha: f64| -> f64 {
        match problem.evaluate(&displaced(&controls, grad, alpha)) {
            Ok(e) if e.objective.is_finite() => e.objective,
            _ => f64::INFINITY,
        }
    };
    let mut alpha_max = cfg.max_displacement / scale;
    let mut alpha = 0.0;
    for _ in 0..=BRACKET_RETRIES {
        let (a, value) = golden_section(phi, 0.0, alpha_max, cfg.gs_tol * alpha_max);
        alpha = a;
        if value < current.objective {
            // re-evaluate to keep the accepted state
            if let Ok(eval) = problem.evaluate(&displaced(&controls, grad, a)) {
                return StepOutcome::Accepted { alpha: a, eval };
            }
        }
        alpha_max *= BRACKET_SHRINK;
    }
    StepOutcome::NoProgress { alpha }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub initial: Evaluation,
    pub last: Evaluation,
    pub trace: Vec<TraceEntry>,
    pub steps: usize,
    pub stop: StopReason,
}

/// Descends until `J ≤ eps`, `I_M` iterations have run, or
/// the step size or line search stalls.
pub fn optimize(
    problem: &MaskProblem,
    cfg: &OptimizerConfig,
    initial_controls: &[Vec<Point>],
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let initial = problem.evaluate(initial_controls)?;
    let mut current = initial.clone();
    let mut trace = vec![TraceEntry {
        iter: 0,
        objective: current.objective,
        alpha: 0.0,
    }];
    let mut k = 0;
    let mut steps = 0;
    let stop = loop {
        if current.objective <= cfg.eps {
            break StopReason::Converged;
        }
        if k >= cfg.max_iters {
            break StopReason::MaxIterations;
        }
        k += 1;
        let grad = problem.gradient(&current)?;
        match step(problem, cfg, &current, &grad) {
            StepOutcome::Accepted { alpha, eval } => {
                if alpha < cfg.alpha_eps {
                    break StopReason::StepTooSmall;
                }
                current = eval;
                steps += 1;
                trace.push(TraceEntry {
                    iter: k,
                    objective: current.objective,
                    alpha,
                });
            }
            StepOutcome::NoProgress { .. } => break StopReason::NoDescent,
        }
    };
    Ok(OptimizationResult {
        initial,
        last: current,
        trace,
        steps,
        stop,
    })
}

/// `n` points at equal arc-length spacing along a closed polygon, starting
/// at its first vertex.
pub fn init_controls_from_target(polygon: &[Point], n: usize, degree: usize) -> Result<Vec<Point>> {
    if n < degree + 2 {
        return Err(Error::TooFewControls {
            degree,
            required: degree + 2,
            found: n,
        });
    }
    if polygon.len() < 3 {
        return Err(Error::TooFewPoints(polygon.len()));
    }
    let total = perimeter(polygon);
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegeneratePolygon("zero perimeter".into()));
    }
    let step = total / n as f64;
    let m = polygon.len();
    let mut out = Vec::with_capacity(n);
    let mut edge = 0;
    let mut walked = 0.0; // arc length at the start of `edge`
    for i in 0..n {
        let s = step * i as f64;
        loop {
            let len = polygon[edge].dist(polygon[(edge + 1) % m]);
            if s <= walked + len || edge == m - 1 {
                let (a, b) = (polygon[edge], polygon[(edge + 1) % m]);
                let t = if len > 0.0 { (s - walked) / len } else { 0.0 };
                out.push(a + (b - a) * t);
                break;
            }
            walked += len;
            edge += 1;
        }
    }
    Ok(out)
}
