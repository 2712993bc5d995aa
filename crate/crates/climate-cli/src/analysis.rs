//! The end-to-end analysis pipeline behind the `analyze` subcommand:
//! ingest a stack and its covariate sidecar, fit the two-period design,
//! bootstrap the threshold, and emit serialized results, a CSV summary and
//! a figure.

use crate::error::Result;
use crate::render::render_cope_figure;
use crate::stackfile::{design_from_covariates, read_covariates, read_stack};
use cope_core::cope::{run_glm_cope_detailed, BoundaryMode, CopeConfig, CopeResult};
use cope_core::glm::{FitOptions, FloorPolicy, VarianceDivisor};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub level: f64,
    pub alpha: f64,
    pub boot_reps: usize,
    pub seed: u64,
    pub boundary: BoundaryMode,
    pub variance_divisor: VarianceDivisor,
    pub strict_floor: bool,
    pub out_prefix: PathBuf,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            level: 2.0,
            alpha: 0.1,
            boot_reps: 1000,
            seed: 0,
            boundary: BoundaryMode::PluginContour,
            variance_divisor: VarianceDivisor::SampleSize,
            strict_floor: false,
            out_prefix: PathBuf::from("cope-analysis"),
        }
    }
}

#[derive(Debug, Serialize)]
struct DesignSummary {
    n: usize,
    n_a: usize,
    n_b: usize,
    pi_n: f64,
    v_norm: f64,
    scale: f64,
    recentered: bool,
    shift_a: f64,
    shift_b: f64,
}

#[derive(Debug, Serialize)]
struct AnalyzeDocument<'a> {
    input: String,
    covariates: String,
    design: DesignSummary,
    result: &'a CopeResult,
}

#[derive(Debug)]
pub struct AnalyzeOutput {
    pub result: CopeResult,
    pub notices: Vec<String>,
    pub json_path: PathBuf,
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
}

pub fn analyze(stack_path: &Path, covariates_path: &Path, opts: &AnalyzeOptions) -> Result<AnalyzeOutput> {
    let mut notices = Vec::new();
    let stack = read_stack(stack_path)?;
    let rows = read_covariates(covariates_path)?;
    let two_period = design_from_covariates(&rows, stack.n_layers())?;
    if two_period.was_recentered() {
        notices.push(format!(
            "covariate times re-centered per period (shifts: a {:+.3}, b {:+.3})",
            two_period.shift_a, two_period.shift_b
        ));
    }
    if opts.boot_reps < 100 {
        notices.push(format!(
            "only {} bootstrap replicates requested; consider at least 100",
            opts.boot_reps
        ));
    }

    let config = CopeConfig {
        level: opts.level,
        alpha: opts.alpha,
        boot_reps: opts.boot_reps,
        seed: opts.seed,
        boundary: opts.boundary,
        fit_options: FitOptions {
            variance_divisor: opts.variance_divisor,
            floor: if opts.strict_floor {
                FloorPolicy::Strict
            } else {
                FloorPolicy::Flag
            },
        },
        whole_domain_fallback: true,
    };
    let run = run_glm_cope_detailed(&stack, &two_period.design, &config)?;
    notices.extend(run.result.diagnostics.warnings.iter().cloned());

    let json_path = opts.out_prefix.with_extension("json");
    let csv_path = opts.out_prefix.with_extension("csv");
    let svg_path = opts.out_prefix.with_extension("svg");

    let doc = AnalyzeDocument {
        input: stack_path.display().to_string(),
        covariates: covariates_path.display().to_string(),
        design: DesignSummary {
            n: two_period.n(),
            n_a: two_period.n_a,
            n_b: two_period.n_b,
            pi_n: two_period.design.pi_n(),
            v_norm: two_period.design.v_norm(),
            scale: two_period.design.scale(),
            recentered: two_period.was_recentered(),
            shift_a: two_period.shift_a,
            shift_b: two_period.shift_b,
        },
        result: &run.result,
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| crate::error::CliError::Format(format!("serialization failed: {e}")))?;
    std::fs::write(&json_path, json)
        .map_err(|e| crate::error::CliError::io(json_path.display().to_string(), e))?;

    let r = &run.result;
    let csv = format!(
        "level,alpha,boot_reps,seed,boundary,a,order_index,upper_cells,point_cells,lower_cells,band_cells,floored_cells,fallback\n{},{},{},{},{:?},{:.10},{},{},{},{},{},{},{}\n",
        r.level,
        r.threshold.alpha,
        r.sup_sample.m(),
        r.sup_sample.seed(),
        r.config.boundary,
        r.threshold.a,
        r.threshold.order_index,
        r.masks.upper.count(),
        r.masks.point_estimate.count(),
        r.masks.lower.count(),
        r.masks.band.count(),
        r.diagnostics.floored_cells,
        r.diagnostics.fallback_engaged,
    );
    std::fs::write(&csv_path, csv)
        .map_err(|e| crate::error::CliError::io(csv_path.display().to_string(), e))?;

    let bhat1 = run.fit.coefficient(two_period.design.coef_index());
    render_cope_figure(&run.result, bhat1, &run.deviation, &svg_path)?;

    Ok(AnalyzeOutput {
        result: run.result,
        notices,
        json_path,
        csv_path,
        svg_path,
    })
}
