use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use climate_cli::analysis::{analyze, AnalyzeOptions};
use climate_cli::selftest::run_selftest;
use climate_cli::stackfile::{read_csv_grid, write_covariates, write_stack};
use climate_cli::surrogate::{self, SurrogateSpec};
use climate_cli::CliError;
use cope_core::cope::BoundaryMode;
use cope_core::glm::{FieldStack, VarianceDivisor};
use cope_core::grid::GridGeometry;
use cope_core::simlab::{
    coverage_experiment, parse_experiment_config, reports_to_csv, ExperimentConfig, NoiseKind,
    NoiseSpec, SimBoundary,
};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Confidence regions for excursion sets of gridded trend fields.
///
/// Exit codes: 0 success, 2 validation error (flags, files, parameters),
/// 3 numerical error (singular design, degenerate variance, empty boundary).
#[derive(Parser)]
#[command(name = "climate-cli", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    /// Interpolated plug-in boundary points (default)
    Plugin,
    /// Cells adjacent to the plug-in boundary
    Adjacent,
    /// Whole-domain supremum
    Domain,
}

impl From<BoundaryArg> for BoundaryMode {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Plugin => BoundaryMode::PluginContour,
            BoundaryArg::Adjacent => BoundaryMode::PluginAdjacentCells,
            BoundaryArg::Domain => BoundaryMode::WholeDomain,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SimBoundaryArg {
    /// Calibrate on the true signal boundary
    #[value(name = "true")]
    True,
    /// Calibrate on the per-trial plug-in boundary
    Plugin,
}

#[derive(Clone, Copy, ValueEnum)]
enum DivisorArg {
    /// Divide the residual sum of squares by n (default)
    N,
    /// Divide by n - p
    NMinusP,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis on a stack file with a covariate sidecar.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        covariates: PathBuf,
        /// Excursion level c for the first coefficient (mean difference).
        #[arg(long, default_value_t = 2.0)]
        level: f64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long = "boot-reps", default_value_t = 1000)]
        boot_reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "plugin")]
        boundary: BoundaryArg,
        #[arg(long, value_enum, default_value = "n")]
        sigma_divisor: DivisorArg,
        /// Error out instead of flagging zero-variance cells.
        #[arg(long)]
        strict_floor: bool,
        /// Output prefix; writes <prefix>.json, <prefix>.csv, <prefix>.svg.
        #[arg(long = "out-prefix")]
        out_prefix: PathBuf,
    },
    /// Monte-Carlo coverage experiment on the synthetic signal.
    Simulate {
        /// Noise kind 1, 2 or 3.
        #[arg(long)]
        noise: Option<u8>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long = "boot-reps")]
        boot_reps: Option<usize>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_enum)]
        boundary: Option<SimBoundaryArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Key = value experiment file; flags override its entries.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Append a wall_seconds column (breaks byte-for-byte determinism).
        #[arg(long)]
        timing: bool,
    },
    /// Write a synthetic two-period stack with a known excursion set.
    MakeSurrogate {
        /// Stack output path; the covariate sidecar lands next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "covariates-out")]
        covariates_out: Option<PathBuf>,
        /// Also write the generator parameters (the ground truth) as JSON.
        #[arg(long = "truth-out")]
        truth_out: Option<PathBuf>,
        #[arg(long, default_value_t = 115)]
        nx: usize,
        #[arg(long, default_value_t = 87)]
        ny: usize,
        #[arg(long = "n-per-period", default_value_t = 29)]
        n_per_period: usize,
        /// Mean difference inside the disk.
        #[arg(long, default_value_t = 2.5)]
        delta: f64,
        #[arg(long = "noise-sd", default_value_t = 0.25)]
        noise_sd: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convert per-layer CSV grids into a stack file (layer order = argument order).
    Convert {
        #[arg(long)]
        out: PathBuf,
        /// CSV grid files, ny rows of nx comma-separated values each.
        #[arg(required = true)]
        grids: Vec<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Analyze {
            input,
            covariates,
            level,
            alpha,
            boot_reps,
            seed,
            boundary,
            sigma_divisor,
            strict_floor,
            out_prefix,
        } => {
            let opts = AnalyzeOptions {
                level,
                alpha,
                boot_reps,
                seed,
                boundary: boundary.into(),
                variance_divisor: match sigma_divisor {
                    DivisorArg::N => VarianceDivisor::SampleSize,
                    DivisorArg::NMinusP => VarianceDivisor::DegreesOfFreedom,
                },
                strict_floor,
                out_prefix,
            };
            let t0 = Instant::now();
            let out = analyze(&input, &covariates, &opts)?;
            for notice in &out.notices {
                eprintln!("notice: {notice}");
            }
            let r = &out.result;
            eprintln!(
                "a = {:.6} (order index {} of {}), upper/point/lower cells: {}/{}/{}",
                r.threshold.a,
                r.threshold.order_index,
                r.sup_sample.m(),
                r.masks.upper.count(),
                r.masks.point_estimate.count(),
                r.masks.lower.count()
            );
            eprintln!(
                "wrote {}, {}, {} in {:.2}s",
                out.json_path.display(),
                out.csv_path.display(),
                out.svg_path.display(),
                t0.elapsed().as_secs_f64()
            );
        }
        Command::Simulate {
            noise,
            n,
            trials,
            boot_reps,
            level,
            alpha,
            boundary,
            seed,
            config,
            out,
            timing,
        } => {
            let mut experiment = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::io(path.display().to_string(), e))?;
                    parse_experiment_config(&text)?
                }
                None => ExperimentConfig::new(NoiseKind::Noise1, 60),
            };
            if let Some(id) = noise {
                experiment.noise = NoiseSpec::standard(NoiseKind::from_id(id)?);
            }
            if let Some(n) = n {
                experiment.n = n;
            }
            if let Some(t) = trials {
                experiment.trials = t;
            }
            if let Some(m) = boot_reps {
                experiment.boot_reps = m;
            }
            if let Some(c) = level {
                experiment.level = c;
            }
            if let Some(a) = alpha {
                experiment.alpha = a;
            }
            if let Some(b) = boundary {
                experiment.boundary = match b {
                    SimBoundaryArg::True => SimBoundary::TrueContour,
                    SimBoundaryArg::Plugin => SimBoundary::PluginContour,
                };
            }
            if let Some(s) = seed {
                experiment.seed = s;
            }
            if experiment.boot_reps < 100 {
                eprintln!(
                    "warning: only {} bootstrap replicates; thresholds below 100 are unreliable",
                    experiment.boot_reps
                );
            }
            let report = coverage_experiment(&experiment)?;
            std::fs::write(&out, reports_to_csv(&[report.clone()], timing))
                .map_err(|e| CliError::io(out.display().to_string(), e))?;
            eprintln!(
                "noise {} n {} {}: coverage {:.4} +- {:.4} over {} trials (mean a {:.4}) in {:.1}s",
                report.noise_kind.id(),
                report.n,
                report.boundary.label(),
                report.coverage,
                report.stderr,
                report.trials,
                report.mean_threshold,
                report.wall_seconds
            );
            eprintln!("wrote {}", out.display());
        }
        Command::MakeSurrogate {
            out,
            covariates_out,
            truth_out,
            nx,
            ny,
            n_per_period,
            delta,
            noise_sd,
            seed,
        } => {
            let spec = SurrogateSpec {
                nx,
                ny,
                n_per_period,
                delta,
                noise_sd,
                seed,
                ..Default::default()
            };
            let s = surrogate::generate(&spec)?;
            write_stack(&out, &s.stack)?;
            let cov_path = covariates_out.unwrap_or_else(|| covariate_sidecar_path(&out));
            write_covariates(&cov_path, &s.covariates)?;
            if let Some(truth_path) = truth_out {
                let json = serde_json::to_string_pretty(&spec).expect("spec serializes");
                std::fs::write(&truth_path, json)
                    .map_err(|e| CliError::io(truth_path.display().to_string(), e))?;
                eprintln!("wrote {}", truth_path.display());
            }
            eprintln!(
                "wrote {} ({}x{}, {} layers) and {}",
                out.display(),
                nx,
                ny,
                s.stack.n_layers(),
                cov_path.display()
            );
        }
        Command::Convert { out, grids } => {
            let mut expected = None;
            let mut values = Vec::new();
            for path in &grids {
                let (nx, ny, grid) = read_csv_grid(path)?;
                match expected {
                    None => expected = Some((nx, ny)),
                    Some(dims) if dims != (nx, ny) => {
                        bail!(
                            "{}: grid is {}x{}, previous grids were {}x{}",
                            path.display(),
                            nx,
                            ny,
                            dims.0,
                            dims.1
                        );
                    }
                    _ => {}
                }
                values.extend(grid);
            }
            let (nx, ny) = expected.context("no grids supplied")?;
            let geom = GridGeometry::unit(nx, ny).map_err(CliError::Core)?;
            let stack =
                FieldStack::from_values(geom, grids.len(), values).map_err(CliError::Core)?;
            write_stack(&out, &stack)?;
            eprintln!(
                "wrote {} ({}x{}, {} layers)",
                out.display(),
                nx,
                ny,
                grids.len()
            );
        }
        Command::Selftest => {
            let outcome = run_selftest(|line| println!("{line}"));
            println!(
                "selftest: {}/{} checks passed",
                outcome.passed,
                outcome.passed + outcome.failed.len()
            );
            if !outcome.failed.is_empty() {
                bail!("{} selftest check(s) failed", outcome.failed.len());
            }
        }
    }
    Ok(())
}

fn covariate_sidecar_path(stack: &std::path::Path) -> PathBuf {
    let mut name = stack
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "stack".into());
    name.push_str(".covariates.csv");
    stack.with_file_name(name)
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(cli) = err.downcast_ref::<CliError>() {
        return cli.exit_code();
    }
    if let Some(core) = err.downcast_ref::<cope_core::Error>() {
        use cope_core::Error as E;
        return match core {
            E::Design(_) | E::ZeroVariance { .. } | E::EmptyBoundary | E::InvalidField(_) => 3,
            _ => 2,
        };
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
