//! Command-line front end: `simulate`, `gradcheck` and `optimize`.

pub mod config;
pub mod output;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::Error;
use crate::gradient::GradientOptions;
use crate::optics::forward_amplitude;
use crate::optimizer::{optimize, StopReason};
use crate::problem::{finite_difference_gradient, mixed_error, Evaluation, MaskProblem};

pub use config::RunConfig;

/// Gradient check passes when every component's mixed error is below this.
pub const GRADCHECK_TOL: f64 = 1e-4;
/// Central-difference step in normalized units.
pub const GRADCHECK_STEP: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "bspline-ilt", version, about = "Curvilinear mask optimization with B-spline boundaries")]
pub struct Cli {
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Image the configured mask and write intensity, print and EPE rasters.
    Simulate(RunArgs),
    /// Compare the analytic gradient against finite differences.
    Gradcheck(CheckArgs),
    /// Run steepest descent and write the trace and final mask.
    Optimize(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, hide = true)]
    pub corrupt_kernel_derivative: bool,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Config(_) => ExitCode::from(2),
            Self::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "invalid configuration: {m}"),
            Self::Runtime(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Self::Config(m),
            other => Self::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(RunConfig::from_json(&text)?)
}

pub fn run(cli: Cli) -> Result<ExitCode, CliError> {
    if cli.threads > 0 {
        // fails only if a global pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a.config, &a.out, cli.quiet).map(|_| ExitCode::SUCCESS),
        Command::Gradcheck(a) => {
            let opts = GradientOptions {
                corrupt_kernel_derivative: a.corrupt_kernel_derivative,
            };
            let report = cmd_gradcheck(&a.config, opts)?;
            if !cli.quiet {
                print!("{}", report.render());
            }
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Optimize(a) => cmd_optimize(&a.config, &a.out, cli.quiet).map(|_| ExitCode::SUCCESS),
    }
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))
}

fn write_images(
    out: &Path,
    prefix: &str,
    problem: &MaskProblem,
    eval: &Evaluation,
) -> Result<usize, CliError> {
    let (nx, ny) = (problem.grid.nx(), problem.grid.ny());
    let report = problem.print_report(eval)?;
    for (name, body) in [
        ("intensity", output::intensity_pgm(nx, ny, &eval.intensity)),
        ("print", output::binary_pgm(nx, ny, &report.print)),
        ("epe", output::binary_pgm(nx, ny, &report.epe)),
    ] {
        let file = format!("{prefix}{name}.pgm");
        output::write(out, &file, &body).map_err(|e| io_err(&out.join(&file), e))?;
    }
    Ok(report.epe_count)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub objective: f64,
    pub epe_count: usize,
    pub print_count: usize,
    pub target_count: usize,
    pub max_intensity: f64,
}

pub fn cmd_simulate(config: &Path, out: &Path, quiet: bool) -> Result<SimulationSummary, CliError> {
    let cfg = load_config(config)?;
    let problem = cfg.problem()?;
    let eval = problem.evaluate(&cfg.initial_controls()?)?;
    prepare_out(out)?;
    let epe_count = write_images(out, "", &problem, &eval)?;
    let report = problem.print_report(&eval)?;
    let summary = SimulationSummary {
        objective: eval.objective,
        epe_count,
        print_count: report.print.iter().filter(|v| **v != 0).count(),
        target_count: problem.target.count_ones(),
        max_intensity: eval.intensity.iter().fold(0.0f64, |m, v| m.max(*v)),
    };
    let body = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    output::write(out, "summary.json", &body).map_err(|e| io_err(&out.join("summary.json"), e))?;
    if !quiet {
        println!("J = {:.6e}, EPE pixels = {}", summary.objective, summary.epe_count);
    }
    Ok(summary)
}

/// One control coordinate in the gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckRow {
    pub region: usize,
    pub control: usize,
    pub axis: char,
    pub analytic: f64,
    pub finite_difference: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub rows: Vec<GradcheckRow>,
    pub max_error: f64,
    /// `(r, s, max |∂U_r/∂P_s|)` for every ordered pair of distinct regions.
    pub cross_region: Vec<(usize, usize, f64)>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_error < GRADCHECK_TOL
    }

    pub fn render(&self) -> String {
        let mut s = String::from("region control axis analytic finite_difference mixed_error\n");
        for r in &self.rows {
            s += &format!(
                "{} {} {} {:.12e} {:.12e} {:.3e}\n",
                r.region, r.control, r.axis, r.analytic, r.finite_difference, r.error
            );
        }
        for (r, t, v) in &self.cross_region {
            s += &format!("cross-region field {r} wrt controls {t}: max |dU| = {v:e}\n");
        }
        s += &format!(
            "max mixed error {:.3e} (tolerance {GRADCHECK_TOL:e}): {}\n",
            self.max_error,
            if self.passed() { "PASS" } else { "FAIL" }
        );
        s
    }
}

pub fn cmd_gradcheck(config: &Path, opts: GradientOptions) -> Result<GradcheckReport, CliError> {
    let cfg = load_config(config)?;
    let problem = cfg.problem()?;
    let eval = problem.evaluate(&cfg.initial_controls()?)?;
    let analytic = problem.gradient_with(&eval, opts)?;
    let fd = finite_difference_gradient(&problem, &eval, GRADCHECK_STEP)?;

    let mut rows = Vec::new();
    let mut flat = analytic.flatten().into_iter().zip(fd);
    for (r, region) in analytic.regions.iter().enumerate() {
        for k in 0..region.len() {
            for axis in ['x', 'y'] {
                let (a, f) = flat.next().expect("layouts agree");
                rows.push(GradcheckRow {
                    region: r,
                    control: k,
                    axis,
                    analytic: a,
                    finite_difference: f,
                    error: mixed_error(a, f),
                });
            }
        }
    }
    let max_error = rows.iter().fold(0.0f64, |m, r| m.max(r.error));
    Ok(GradcheckReport {
        rows,
        max_error,
        cross_region: cross_region_sensitivity(&problem, &eval)?,
    })
}

/// Finite differences of each region's own field with respect to the
/// controls of every other region, on frozen meshes.
fn cross_region_sensitivity(
    problem: &MaskProblem,
    eval: &Evaluation,
) -> Result<Vec<(usize, usize, f64)>, CliError> {
    let controls = eval.controls();
    let mut out = Vec::new();
    for r in 0..controls.len() {
        for s in (0..controls.len()).filter(|s| *s != r) {
            let mut worst = 0.0f64;
            for k in 0..controls[s].len() {
                for axis in 0..2 {
                    let field = |h: f64| -> Result<Vec<f64>, CliError> {
                        let mut c = controls[s].clone();
                        if axis == 0 {
                            c[k].x += h;
                        } else {
                            c[k].y += h;
                        }
                        let mut regions = eval.regions.clone();
                        regions[s] = eval.regions[s].frozen(c)?;
                        let mesh = [regions[r].mesh.clone()];
                        Ok(forward_amplitude(&mesh, &problem.quad, &problem.grid).values)
                    };
                    let (plus, minus) = (field(GRADCHECK_STEP)?, field(-GRADCHECK_STEP)?);
                    for (a, b) in plus.iter().zip(&minus) {
                        worst = worst.max(((a - b) / (2.0 * GRADCHECK_STEP)).abs());
                    }
                }
            }
            out.push((r, s, worst));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationSummary {
    pub iterations: usize,
    pub stop: StopReason,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub initial_epe: usize,
    pub final_epe: usize,
}

pub fn cmd_optimize(config: &Path, out: &Path, quiet: bool) -> Result<OptimizationSummary, CliError> {
    let cfg = load_config(config)?;
    if cfg.regions.is_empty() || cfg.targets.is_empty() {
        return Err(CliError::Config(
            "optimize needs non-empty regions and targets".into(),
        ));
    }
    let problem = cfg.problem()?;
    let initial_controls = cfg.initial_controls()?;
    let result = optimize(&problem, &cfg.optimizer, &initial_controls)?;

    prepare_out(out)?;
    let write = |name: &str, body: &str| {
        output::write(out, name, body).map_err(|e| io_err(&out.join(name), e))
    };
    write("convergence.csv", &output::convergence_csv(&result.trace))?;
    let final_controls = result.last.controls();
    write(
        "mask_initial.json",
        &output::MaskFile::from_normalized(&initial_controls, &cfg.optics).to_json(),
    )?;
    write(
        "mask_final.json",
        &output::MaskFile::from_normalized(&final_controls, &cfg.optics).to_json(),
    )?;
    write(
        "boundary_final.svg",
        &output::boundary_svg(&final_controls, cfg.degree, &cfg.optics)?,
    )?;
    let initial_epe = write_images(out, "initial_", &problem, &result.initial)?;
    let final_epe = write_images(out, "final_", &problem, &result.last)?;
    let summary = OptimizationSummary {
        iterations: result.steps,
        stop: result.stop,
        initial_objective: result.initial.objective,
        final_objective: result.last.objective,
        initial_epe,
        final_epe,
    };
    write(
        "summary.json",
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    if !quiet {
        for t in &result.trace {
            println!("iter {:3}  J = {:.6e}  alpha = {:.3e}", t.iter, t.objective, t.alpha);
        }
        println!(
            "stop: {:?}; EPE pixels {} -> {}",
            summary.stop, summary.initial_epe, summary.final_epe
        );
    }
    Ok(summary)
}
