//! Synthetic signal, the three non-stationary noise generators, Monte-Carlo
//! coverage experiments and the bootstrap-vs-direct cdf comparison.
//!
//! The standard setup is a 10 x 10 domain on a 64 x 64 pixel grid. The
//! signal is a fixed mixture of three Gaussian bumps whose level-4/3
//! excursion boundary is a union of closed curves well inside the domain.

use crate::bootstrap::{sup_distribution_blocked, Region, Threshold};
use crate::contour::extract_boundary;
use crate::cope::{
    cope_sets, run_glm_cope, run_glm_cope_on_region, verify_inclusion, BoundaryMode, CopeConfig,
    CopeMasks,
};
use crate::error::{Error, Result};
use crate::glm::{fit, standardized_deviation, DesignSpec, FieldStack, FitOptions};
use crate::grid::{GridGeometry, ScalarField};
use crate::rng::{self, tag};
use crate::smooth::{KernelShape, Smoother};
use rand::distributions::Open01;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// The standard simulation lattice: 64 x 64 pixels over a 10 x 10 square.
pub fn standard_geometry() -> GridGeometry {
    let h = 10.0 / 64.0;
    GridGeometry::new(64, 64, h, h, (h / 2.0, h / 2.0)).unwrap()
}

/// The default excursion level used throughout the simulations.
pub const DEFAULT_LEVEL: f64 = 4.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKind {
    /// Upper half i.i.d. standard normal pixels, lower half constant on
    /// 4x4 blocks with i.i.d. standard normal block values; Gaussian kernel;
    /// scaling 50.
    Noise1,
    /// Same pre-field as Noise1, Laplace kernel, scaling 100.
    Noise2,
    /// Upper half i.i.d. Laplace (variance 2), lower half i.i.d. Student-t
    /// with 10 degrees of freedom; Gaussian kernel; scaling 25.
    Noise3,
}

impl NoiseKind {
    pub fn id(self) -> u8 {
        match self {
            NoiseKind::Noise1 => 1,
            NoiseKind::Noise2 => 2,
            NoiseKind::Noise3 => 3,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(NoiseKind::Noise1),
            2 => Ok(NoiseKind::Noise2),
            3 => Ok(NoiseKind::Noise3),
            _ => Err(Error::InvalidParameter(format!(
                "noise kind must be 1, 2 or 3, got {id}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub geometry: GridGeometry,
    /// Kernel bandwidth in domain units.
    pub bandwidth: f64,
    /// Post-smoothing multiplier.
    pub scaling: f64,
}

impl NoiseSpec {
    /// The standard configuration for a noise kind: 64x64 on 10x10,
    /// bandwidth 1, scaling 50 / 100 / 25.
    pub fn standard(kind: NoiseKind) -> Self {
        let scaling = match kind {
            NoiseKind::Noise1 => 50.0,
            NoiseKind::Noise2 => 100.0,
            NoiseKind::Noise3 => 25.0,
        };
        Self {
            kind,
            geometry: standard_geometry(),
            bandwidth: 1.0,
            scaling,
        }
    }

    pub fn kernel_shape(&self) -> KernelShape {
        match self.kind {
            NoiseKind::Noise2 => KernelShape::Laplace,
            _ => KernelShape::Gaussian,
        }
    }
}

/// Reusable generator: owns the smoothing plan for a noise spec.
pub struct NoiseModel {
    spec: NoiseSpec,
    smoother: Smoother,
}

fn sample_laplace_unit_b<R: Rng>(rng: &mut R) -> f64 {
    // density exp(-|x|) / 2: variance 2, matching the Noise3 upper half
    let u: f64 = rng.sample(Open01);
    if u < 0.5 {
        (2.0 * u).ln()
    } else {
        -(2.0 * (1.0 - u)).ln()
    }
}

impl NoiseModel {
    pub fn new(spec: NoiseSpec) -> Result<Self> {
        if !(spec.scaling > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise scaling must be positive, got {}",
                spec.scaling
            )));
        }
        let smoother = Smoother::new(spec.geometry, spec.kernel_shape(), spec.bandwidth)?;
        Ok(Self { spec, smoother })
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    /// The unsmoothed, unscaled pre-field. Draw order is canonical: upper
    /// half row-major, then the lower half (blocks row-major for Noise 1/2,
    /// pixels row-major for Noise 3), all from the stream `(seed, 0)`.
    pub fn prefield(&self, seed: u64) -> ScalarField {
        let geom = self.spec.geometry;
        let (nx, ny) = (geom.nx(), geom.ny());
        let half = ny / 2;
        let mut rng: ChaCha8Rng = rng::stream(seed, 0);
        let mut values = vec![0.0; nx * ny];
        match self.spec.kind {
            NoiseKind::Noise1 | NoiseKind::Noise2 => {
                for iy in half..ny {
                    for ix in 0..nx {
                        values[iy * nx + ix] = rng.sample(StandardNormal);
                    }
                }
                let bpr = nx.div_ceil(4);
                let brows = half.div_ceil(4);
                let mut blocks = vec![0.0; bpr * brows];
                for b in blocks.iter_mut() {
                    *b = rng.sample(StandardNormal);
                }
                for iy in 0..half {
                    for ix in 0..nx {
                        values[iy * nx + ix] = blocks[(iy / 4) * bpr + ix / 4];
                    }
                }
            }
            NoiseKind::Noise3 => {
                let t10 = StudentT::new(10.0).unwrap();
                for iy in half..ny {
                    for ix in 0..nx {
                        values[iy * nx + ix] = sample_laplace_unit_b(&mut rng);
                    }
                }
                for iy in 0..half {
                    for ix in 0..nx {
                        values[iy * nx + ix] = t10.sample(&mut rng);
                    }
                }
            }
        }
        ScalarField::new(geom, values).unwrap()
    }

    /// One noise realization: smoothed pre-field times the scaling factor.
    pub fn generate(&self, seed: u64) -> ScalarField {
        let pre = self.prefield(seed);
        let mut smoothed = self.smoother.apply(pre.values());
        for v in &mut smoothed {
            *v *= self.spec.scaling;
        }
        ScalarField::new(self.spec.geometry, smoothed).unwrap()
    }

    /// Exact pointwise standard deviation of the noise, from the smoothing
    /// weights and the pre-field degrees of freedom.
    pub fn sigma(&self) -> ScalarField {
        let geom = self.spec.geometry;
        let (nx, ny) = (geom.nx(), geom.ny());
        let half = ny / 2;
        let mut dof_map = vec![0usize; nx * ny];
        let mut dof_var = Vec::new();
        match self.spec.kind {
            NoiseKind::Noise1 | NoiseKind::Noise2 => {
                for iy in half..ny {
                    for ix in 0..nx {
                        dof_map[iy * nx + ix] = dof_var.len();
                        dof_var.push(1.0);
                    }
                }
                let bpr = nx.div_ceil(4);
                let brows = half.div_ceil(4);
                let base = dof_var.len();
                dof_var.extend(std::iter::repeat(1.0).take(bpr * brows));
                for iy in 0..half {
                    for ix in 0..nx {
                        dof_map[iy * nx + ix] = base + (iy / 4) * bpr + ix / 4;
                    }
                }
            }
            NoiseKind::Noise3 => {
                for iy in half..ny {
                    for ix in 0..nx {
                        dof_map[iy * nx + ix] = dof_var.len();
                        dof_var.push(2.0);
                    }
                }
                for iy in 0..half {
                    for ix in 0..nx {
                        dof_map[iy * nx + ix] = dof_var.len();
                        dof_var.push(10.0 / 8.0);
                    }
                }
            }
        }
        let var = self.smoother.variance_field(&dof_map, &dof_var);
        let values = var
            .iter()
            .map(|v| v.sqrt() * self.spec.scaling)
            .collect();
        ScalarField::new(geom, values).unwrap()
    }
}

/// One-shot convenience; reuse a [`NoiseModel`] in loops.
pub fn gen_noise(spec: NoiseSpec, seed: u64) -> Result<ScalarField> {
    Ok(NoiseModel::new(spec)?.generate(seed))
}

const SIGNAL_CENTERS: [(f64, f64); 3] = [(3.0, 3.0), (7.0, 3.5), (4.5, 7.0)];
const SIGNAL_WEIGHTS: [f64; 3] = [2.0, 1.6, 1.8];
const SIGNAL_RADII: [f64; 3] = [1.2, 1.0, 1.4];

/// The simulation target: a mixture of three Gaussian bumps. Its level-4/3
/// excursion set is a union of closed lobes strictly inside the domain.
pub fn signal_mu(geometry: &GridGeometry) -> ScalarField {
    ScalarField::from_fn(*geometry, |x, y| {
        let mut s = 0.0;
        for k in 0..3 {
            let (cx, cy) = SIGNAL_CENTERS[k];
            let d2 = (x - cx).powi(2) + (y - cy).powi(2);
            s += SIGNAL_WEIGHTS[k] * (-d2 / (2.0 * SIGNAL_RADII[k].powi(2))).exp();
        }
        s
    })
}

/// Which boundary the bootstrap threshold is calibrated on in a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimBoundary {
    /// The true contour, extracted from the signal itself.
    TrueContour,
    /// The plug-in contour, extracted from the fitted mean of each trial.
    PluginContour,
}

impl SimBoundary {
    pub fn label(self) -> &'static str {
        match self {
            SimBoundary::TrueContour => "true",
            SimBoundary::PluginContour => "plugin",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub noise: NoiseSpec,
    pub n: usize,
    pub level: f64,
    pub alpha: f64,
    pub boot_reps: usize,
    pub trials: usize,
    pub boundary: SimBoundary,
    pub seed: u64,
    /// Skip the bootstrap and threshold at this fixed value instead
    /// (sensitivity handle; +infinity forces full coverage).
    pub fixed_threshold: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(kind: NoiseKind, n: usize) -> Self {
        Self {
            noise: NoiseSpec::standard(kind),
            n,
            level: DEFAULT_LEVEL,
            alpha: 0.1,
            boot_reps: 1000,
            trials: 1000,
            boundary: SimBoundary::PluginContour,
            seed: 0,
            fixed_threshold: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidParameter("need at least one trial".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need sample size n >= 2, got {}",
                self.n
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Aggregate of a coverage experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub noise_kind: NoiseKind,
    pub n: usize,
    pub boundary: SimBoundary,
    pub trials: usize,
    /// Fraction of trials where `upper ⊆ truth ⊆ lower` held.
    pub coverage: f64,
    /// Binomial standard error sqrt(p (1 - p) / trials).
    pub stderr: f64,
    /// Per-trial inclusion flags, in trial order.
    pub inclusion: Vec<bool>,
    pub mean_threshold: f64,
    /// Wall time of the whole experiment (not part of deterministic output).
    pub wall_seconds: f64,
}

impl CoverageReport {
    pub fn csv_header(timing: bool) -> String {
        let mut s = "noise,n,boundary_mode,trials,coverage,stderr,mean_a".to_string();
        if timing {
            s.push_str(",wall_seconds");
        }
        s
    }

    pub fn csv_row(&self, timing: bool) -> String {
        let mut s = format!(
            "{},{},{},{},{:.6},{:.6},{:.6}",
            self.noise_kind.id(),
            self.n,
            self.boundary.label(),
            self.trials,
            self.coverage,
            self.stderr,
            self.mean_threshold
        );
        if timing {
            s.push_str(&format!(",{:.3}", self.wall_seconds));
        }
        s
    }
}

pub fn reports_to_csv(reports: &[CoverageReport], timing: bool) -> String {
    let mut out = CoverageReport::csv_header(timing);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row(timing));
        out.push('\n');
    }
    out
}

fn fixed_threshold_masks(
    stack: &FieldStack,
    design: &DesignSpec,
    level: f64,
    a: f64,
    alpha: f64,
) -> Result<(CopeMasks, f64)> {
    let fit_result = fit(stack, design, FitOptions::default())?;
    let dev = standardized_deviation(&fit_result, design, level)?;
    let thr = Threshold {
        a,
        alpha,
        order_index: 0,
    };
    Ok((cope_sets(&dev, &thr)?, a))
}

/// Runs the Monte-Carlo coverage experiment of the configured boundary mode.
pub fn coverage_experiment(config: &ExperimentConfig) -> Result<CoverageReport> {
    Ok(coverage_experiment_paired(config, &[config.boundary])?
        .pop()
        .unwrap())
}

/// Runs several boundary modes on the same simulated trials (shared data and
/// shared multiplier streams), for paired comparisons of the two columns.
pub fn coverage_experiment_paired(
    config: &ExperimentConfig,
    boundaries: &[SimBoundary],
) -> Result<Vec<CoverageReport>> {
    config.validate()?;
    let start = Instant::now();
    let geometry = config.noise.geometry;
    let len = geometry.len();
    let mu = signal_mu(&geometry);
    let truth = mu.excursion_set(config.level)?;
    let true_contour = extract_boundary(&mu, config.level)?;
    let design = DesignSpec::intercept_only(config.n)?;
    let model = NoiseModel::new(config.noise)?;

    let mut inclusion: Vec<Vec<bool>> = vec![Vec::with_capacity(config.trials); boundaries.len()];
    let mut sum_a = vec![0.0f64; boundaries.len()];
    let mut values = vec![0.0f64; config.n * len];
    for trial in 0..config.trials {
        let trial_seed = rng::derive(config.seed, tag::TRIAL, trial as u64);
        for j in 0..config.n {
            let eps = model.generate(rng::derive(trial_seed, tag::FIELD, j as u64));
            let layer = &mut values[j * len..(j + 1) * len];
            for (out, (&m, &e)) in layer.iter_mut().zip(mu.values().iter().zip(eps.values())) {
                *out = m + e;
            }
        }
        let stack = FieldStack::from_values(geometry, config.n, values.clone())?;
        let boot_seed = rng::derive(trial_seed, tag::BOOTSTRAP, 0);
        for (bi, boundary) in boundaries.iter().enumerate() {
            let (masks, a) = match config.fixed_threshold {
                Some(a) => {
                    fixed_threshold_masks(&stack, &design, config.level, a, config.alpha)?
                }
                None => {
                    let cope_config = CopeConfig {
                        level: config.level,
                        alpha: config.alpha,
                        boot_reps: config.boot_reps,
                        seed: boot_seed,
                        boundary: BoundaryMode::PluginContour,
                        fit_options: FitOptions::default(),
                        whole_domain_fallback: true,
                    };
                    let result = match boundary {
                        SimBoundary::PluginContour => run_glm_cope(&stack, &design, &cope_config)?,
                        SimBoundary::TrueContour => run_glm_cope_on_region(
                            &stack,
                            &design,
                            &cope_config,
                            Region::Contour(&true_contour),
                        )?,
                    };
                    (result.masks, result.threshold.a)
                }
            };
            let report = verify_inclusion(&masks, &truth)?;
            inclusion[bi].push(report.both_ok);
            sum_a[bi] += if a.is_finite() { a } else { 0.0 };
        }
    }

    let wall = start.elapsed().as_secs_f64();
    Ok(boundaries
        .iter()
        .enumerate()
        .map(|(bi, &boundary)| {
            let hits = inclusion[bi].iter().filter(|&&b| b).count();
            let coverage = hits as f64 / config.trials as f64;
            CoverageReport {
                noise_kind: config.noise.kind,
                n: config.n,
                boundary,
                trials: config.trials,
                coverage,
                stderr: (coverage * (1.0 - coverage) / config.trials as f64).sqrt(),
                inclusion: inclusion[bi].clone(),
                mean_threshold: sum_a[bi] / config.trials as f64,
                wall_seconds: wall,
            }
        })
        .collect())
}

/// Exact two-sample Kolmogorov-Smirnov distance; inputs must be sorted.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    assert!(n > 0 && m > 0);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        let gap = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        if gap > d {
            d = gap;
        }
    }
    d
}

/// Side-by-side empirical laws of the standardized supremum on the true
/// level-4/3 boundary: direct simulation of the error field versus the
/// multiplier bootstrap from a single size-n sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdfComparison {
    /// sorted suprema from direct error-field simulation
    pub direct_sups: Vec<f64>,
    /// sorted suprema from the bootstrap sample
    pub bootstrap_sups: Vec<f64>,
    pub ks: f64,
}

impl CdfComparison {
    /// Both empirical cdfs tabulated on an even grid of `points` values.
    pub fn table(&self, points: usize) -> Vec<(f64, f64, f64)> {
        let hi = self
            .direct_sups
            .last()
            .copied()
            .unwrap_or(0.0)
            .max(self.bootstrap_sups.last().copied().unwrap_or(0.0));
        let cdf = |sorted: &[f64], x: f64| {
            sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
        };
        (0..points)
            .map(|k| {
                let x = hi * (k + 1) as f64 / points as f64;
                (x, cdf(&self.direct_sups, x), cdf(&self.bootstrap_sups, x))
            })
            .collect()
    }
}

pub fn cdf_comparison(
    noise: NoiseSpec,
    n: usize,
    boot_reps: usize,
    direct_trials: usize,
    seed: u64,
) -> Result<CdfComparison> {
    if n < 2 || boot_reps < 1 || direct_trials < 1 {
        return Err(Error::InvalidParameter(
            "cdf comparison needs n >= 2, boot_reps >= 1, direct_trials >= 1".into(),
        ));
    }
    let geometry = noise.geometry;
    let len = geometry.len();
    let mu = signal_mu(&geometry);
    let contour = extract_boundary(&mu, DEFAULT_LEVEL)?;
    if contour.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    let model = NoiseModel::new(noise)?;
    let sigma = model.sigma();

    let mut direct = Vec::with_capacity(direct_trials);
    for t in 0..direct_trials {
        let eps = model.generate(rng::derive(seed, tag::DIRECT_SIM, t as u64));
        let standardized: Vec<f64> = eps
            .values()
            .iter()
            .zip(sigma.values())
            .map(|(&e, &s)| e / s)
            .collect();
        let field = ScalarField::new(geometry, standardized)?;
        let sup = field
            .interpolate_on_contour(&contour)?
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        direct.push(sup);
    }

    let mut values = vec![0.0f64; n * len];
    for j in 0..n {
        let eps = model.generate(rng::derive(seed, tag::FIELD, j as u64));
        let layer = &mut values[j * len..(j + 1) * len];
        for (out, (&m, &e)) in layer.iter_mut().zip(mu.values().iter().zip(eps.values())) {
            *out = m + e;
        }
    }
    let stack = FieldStack::from_values(geometry, n, values)?;
    let design = DesignSpec::intercept_only(n)?;
    let fit_result = fit(&stack, &design, FitOptions::default())?;
    let sup_sample = sup_distribution_blocked(
        &fit_result.normalized_residuals,
        Region::Contour(&contour),
        boot_reps,
        rng::derive(seed, tag::BOOTSTRAP, 0),
        64,
    )?;
    let mut bootstrap = sup_sample.values().to_vec();

    direct.sort_unstable_by(f64::total_cmp);
    bootstrap.sort_unstable_by(f64::total_cmp);
    let ks = ks_distance(&direct, &bootstrap);
    Ok(CdfComparison {
        direct_sups: direct,
        bootstrap_sups: bootstrap,
        ks,
    })
}

/// Parses the plain-text `key = value` experiment format. Lines starting
/// with `#` (and blank lines) are ignored. Unknown keys are errors.
pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::new(NoiseKind::Noise1, 60);
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("line {}: expected key = value", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| {
            Error::InvalidParameter(format!("line {}: bad {what}: {value}", lineno + 1))
        };
        match key {
            "noise" => {
                config.noise =
                    NoiseSpec::standard(NoiseKind::from_id(value.parse().map_err(|_| bad("noise"))?)?)
            }
            "n" => config.n = value.parse().map_err(|_| bad("n"))?,
            "level" | "c" => config.level = value.parse().map_err(|_| bad("level"))?,
            "alpha" => config.alpha = value.parse().map_err(|_| bad("alpha"))?,
            "boot_reps" => config.boot_reps = value.parse().map_err(|_| bad("boot_reps"))?,
            "trials" => config.trials = value.parse().map_err(|_| bad("trials"))?,
            "seed" => config.seed = value.parse().map_err(|_| bad("seed"))?,
            "boundary" => {
                config.boundary = match value {
                    "true" => SimBoundary::TrueContour,
                    "plugin" => SimBoundary::PluginContour,
                    _ => return Err(bad("boundary (true|plugin)")),
                }
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "line {}: unknown key '{key}'",
                    lineno + 1
                )))
            }
        }
    }
    config.validate()?;
    Ok(config)
}
