//! Nested confidence regions for excursion sets.
//!
//! Thresholding the standardized deviation field at -a, 0, +a produces three
//! nested masks: with `a` calibrated by the bootstrap, the outer pair brackets
//! the true excursion set with the prescribed confidence, and the closure of
//! their difference is a confidence band for the contour itself.

use crate::bootstrap::{
    sup_distribution_blocked, threshold, Region, RegionDescriptor, SupSample, Threshold,
};
use crate::contour::{adjacent_cells, extract_boundary};
use crate::error::{Error, Result};
use crate::glm::{fit, standardized_deviation, DesignSpec, FieldStack, FitOptions};
use crate::grid::{RegionMask, ScalarField};
use serde::{Deserialize, Serialize};

/// Replicate chunk size for the blocked bootstrap product.
const BOOTSTRAP_BLOCK: usize = 64;

/// The three nested masks plus the contour band.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CopeMasks {
    /// Cells confidently inside the excursion set (dev >= +a).
    pub upper: RegionMask,
    /// The plug-in excursion set itself (dev >= 0).
    pub point_estimate: RegionMask,
    /// Cells not confidently outside (dev >= -a).
    pub lower: RegionMask,
    /// Grid closure of lower \ upper; contains the plug-in boundary cells.
    pub band: RegionMask,
}

/// Thresholds the standardized deviation field at +-a.
///
/// `upper`, `point_estimate` and `lower` are the excursion sets of `dev` at
/// +a, 0 and -a; they are nested for every a >= 0. The band is the discrete
/// closure of `lower \ upper`: 8-neighbour dilation of that difference
/// (unioned with the inner boundary cells of the point estimate, which covers
/// degenerate jumps), intersected with `lower`.
pub fn cope_sets(dev: &ScalarField, threshold: &Threshold) -> Result<CopeMasks> {
    let a = threshold.a;
    if !(a >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be non-negative, got {a}"
        )));
    }
    let upper = dev.excursion_set(a)?;
    let point_estimate = dev.excursion_set(0.0)?;
    let lower = dev.excursion_set(-a)?;
    let half = lower.difference(&upper)?;
    let rim = point_estimate.inner_boundary(dev.mask());
    let band = half.union(&rim)?.dilate8().intersection(&lower)?;
    debug_assert!(upper.is_subset_of(&point_estimate).unwrap());
    debug_assert!(point_estimate.is_subset_of(&lower).unwrap());
    Ok(CopeMasks {
        upper,
        point_estimate,
        lower,
        band,
    })
}

/// The contour confidence band of a CoPE result.
pub fn contour_band(masks: &CopeMasks) -> RegionMask {
    masks.band.clone()
}

/// Per-trial inclusion verdict against a known truth mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionReport {
    /// upper is a subset of the truth
    pub upper_ok: bool,
    /// the truth is a subset of lower
    pub lower_ok: bool,
    pub both_ok: bool,
}

/// Checks the nested-inclusion event `upper ⊆ truth ⊆ lower`.
pub fn verify_inclusion(masks: &CopeMasks, truth: &RegionMask) -> Result<InclusionReport> {
    let upper_ok = masks.upper.is_subset_of(truth)?;
    let lower_ok = truth.is_subset_of(&masks.lower)?;
    Ok(InclusionReport {
        upper_ok,
        lower_ok,
        both_ok: upper_ok && lower_ok,
    })
}

/// How the bootstrap region is discretized from the fitted surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryMode {
    /// Interpolated marching-squares points of the plug-in boundary (default).
    PluginContour,
    /// All cells flanking a crossing edge of the plug-in boundary.
    PluginAdjacentCells,
    /// The supremum over the whole valid domain.
    WholeDomain,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CopeConfig {
    /// Excursion level c for the target coefficient.
    pub level: f64,
    /// 1 - confidence; the bootstrap threshold targets P[sup > a] <= alpha.
    pub alpha: f64,
    /// Bootstrap replicates M.
    pub boot_reps: usize,
    pub seed: u64,
    pub boundary: BoundaryMode,
    pub fit_options: FitOptions,
    /// Fall back to the whole-domain supremum when the plug-in boundary is
    /// empty (conservative); disabled, an empty boundary is an error.
    pub whole_domain_fallback: bool,
}

impl CopeConfig {
    pub fn new(level: f64, alpha: f64, boot_reps: usize, seed: u64) -> Self {
        Self {
            level,
            alpha,
            boot_reps,
            seed,
            boundary: BoundaryMode::PluginContour,
            fit_options: FitOptions::default(),
            whole_domain_fallback: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub floored_cells: usize,
    pub fallback_engaged: bool,
    pub boundary_cells: usize,
    pub boundary_points: usize,
    pub warnings: Vec<String>,
}

/// Everything an analysis produces: threshold, nested masks, the bootstrap
/// sample and full provenance.
#[derive(Debug, Clone, Serialize)]
pub struct CopeResult {
    pub level: f64,
    pub threshold: Threshold,
    pub masks: CopeMasks,
    pub sup_sample: SupSample,
    pub config: CopeConfig,
    pub diagnostics: Diagnostics,
}

/// A [`CopeResult`] together with the fit intermediates (for rendering and
/// downstream diagnostics).
#[derive(Debug, Clone)]
pub struct CopeRun {
    pub result: CopeResult,
    pub fit: crate::glm::FitResult,
    /// The standardized deviation field the masks were thresholded from.
    pub deviation: ScalarField,
}

/// Runs the full procedure on a stack of observations: per-cell fit,
/// plug-in boundary, multiplier bootstrap threshold, nested masks.
pub fn run_glm_cope(
    stack: &FieldStack,
    design: &DesignSpec,
    config: &CopeConfig,
) -> Result<CopeResult> {
    Ok(run_glm_cope_impl(stack, design, config, None)?.result)
}

/// Same, but evaluating the bootstrap supremum over an externally supplied
/// region (e.g. the true boundary in simulations).
pub fn run_glm_cope_on_region(
    stack: &FieldStack,
    design: &DesignSpec,
    config: &CopeConfig,
    region: Region,
) -> Result<CopeResult> {
    Ok(run_glm_cope_impl(stack, design, config, Some(region))?.result)
}

/// [`run_glm_cope`] keeping the fitted surfaces and the deviation field.
pub fn run_glm_cope_detailed(
    stack: &FieldStack,
    design: &DesignSpec,
    config: &CopeConfig,
) -> Result<CopeRun> {
    run_glm_cope_impl(stack, design, config, None)
}

fn run_glm_cope_impl(
    stack: &FieldStack,
    design: &DesignSpec,
    config: &CopeConfig,
    external_region: Option<Region>,
) -> Result<CopeRun> {
    if config.boot_reps == 0 {
        return Err(Error::InvalidParameter(
            "need at least one bootstrap replicate".into(),
        ));
    }
    let mut diagnostics = Diagnostics::default();
    if config.boot_reps < 100 {
        diagnostics.warnings.push(format!(
            "only {} bootstrap replicates; thresholds below 100 replicates are unreliable",
            config.boot_reps
        ));
    }

    let fit_result = fit(stack, design, config.fit_options)?;
    diagnostics.floored_cells = fit_result.floored_count();
    if diagnostics.floored_cells > 0 {
        diagnostics.warnings.push(format!(
            "{} cell(s) at the residual-variance floor; excluded from boundary and supremum",
            diagnostics.floored_cells
        ));
    }
    let dev = standardized_deviation(&fit_result, design, config.level)?;
    let bhat = fit_result.coefficient(design.coef_index());
    let bhat_valid = bhat.mask_excluding(&fit_result.floored)?;
    let residuals = &fit_result.normalized_residuals;

    enum Owned<'a> {
        External(Region<'a>),
        Contour(crate::grid::ContourSet),
        Cells(RegionMask),
        WholeDomain(RegionMask),
        Nothing,
    }

    let whole_domain = || -> RegionMask {
        let inside: Vec<bool> = (0..stack.geometry().len())
            .map(|i| stack.is_active(i) && !fit_result.floored.is_inside(i))
            .collect();
        RegionMask::new(*stack.geometry(), inside).unwrap()
    };

    let mut owned = match external_region {
        Some(Region::Contour(c)) if c.is_empty() => Owned::Nothing,
        Some(Region::Cells(m)) if m.count() == 0 => Owned::Nothing,
        Some(r) => Owned::External(r),
        None => match config.boundary {
            BoundaryMode::PluginContour => {
                let contour = extract_boundary(&bhat_valid, config.level)?;
                if contour.is_empty() {
                    Owned::Nothing
                } else {
                    Owned::Contour(contour)
                }
            }
            BoundaryMode::PluginAdjacentCells => {
                let cells = adjacent_cells(&bhat_valid, config.level)?;
                if cells.count() == 0 {
                    Owned::Nothing
                } else {
                    Owned::Cells(cells)
                }
            }
            BoundaryMode::WholeDomain => {
                let cells = whole_domain();
                if cells.count() == 0 {
                    Owned::Nothing
                } else {
                    Owned::WholeDomain(cells)
                }
            }
        },
    };

    if matches!(owned, Owned::Nothing) && config.boundary != BoundaryMode::WholeDomain {
        if !config.whole_domain_fallback {
            return Err(Error::EmptyBoundary);
        }
        let cells = whole_domain();
        if cells.count() > 0 {
            diagnostics.fallback_engaged = true;
            diagnostics.warnings.push(
                "empty plug-in boundary; falling back to the whole-domain supremum".into(),
            );
            owned = Owned::WholeDomain(cells);
        }
    }

    let (region, descriptor_override) = match &owned {
        Owned::External(r) => (Some(*r), None),
        Owned::Contour(c) => {
            diagnostics.boundary_points = c.len();
            (Some(Region::Contour(c)), None)
        }
        Owned::Cells(m) => {
            diagnostics.boundary_cells = m.count();
            (Some(Region::Cells(m)), None)
        }
        Owned::WholeDomain(m) => {
            diagnostics.boundary_cells = m.count();
            (
                Some(Region::Cells(m)),
                Some(RegionDescriptor::WholeDomain { cells: m.count() }),
            )
        }
        Owned::Nothing => (None, None),
    };

    let mut sup_sample = match region {
        Some(region) => sup_distribution_blocked(
            residuals,
            region,
            config.boot_reps,
            config.seed,
            BOOTSTRAP_BLOCK,
        )?,
        None => {
            // Nothing valid to evaluate on (e.g. a noiseless stack floored
            // everywhere): the bootstrap field is identically zero.
            diagnostics
                .warnings
                .push("no valid cells for the bootstrap; sup sample is identically zero".into());
            SupSample::degenerate(config.boot_reps, config.seed, residuals.fingerprint())
        }
    };
    if let Some(desc) = descriptor_override {
        sup_sample.relabel_region(desc);
    }

    let thr = threshold(&sup_sample, config.alpha)?;
    let masks = cope_sets(&dev, &thr)?;
    Ok(CopeRun {
        result: CopeResult {
            level: config.level,
            threshold: thr,
            masks,
            sup_sample,
            config: *config,
            diagnostics,
        },
        fit: fit_result,
        deviation: dev,
    })
}
