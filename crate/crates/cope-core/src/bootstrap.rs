//! Gaussian multiplier bootstrap for the supremum of the limiting field.
//!
//! One realization multiplies the n (normalized) residual fields by i.i.d.
//! standard Gaussians and rescales by n^{-1/2}; conditional on the residuals
//! its covariance is the sample covariance of the residual fields. The
//! supremum of its absolute value over a boundary region, repeated M times,
//! yields the threshold `a`.
//!
//! Determinism contract: replicate m draws its multipliers from a
//! counter-keyed stream `(seed, m)`, and the per-cell accumulation runs over
//! layers in index order, so the sup sample is bitwise identical no matter
//! how replicates are chunked ([`sup_distribution`] vs
//! [`sup_distribution_blocked`] at any block size).

use crate::error::{Error, Result};
use crate::glm::FieldStack;
use crate::grid::{ContourSet, RegionMask, ScalarField};
use crate::rng;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Where the supremum is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    /// Interpolated plug-in boundary points.
    Contour(&'a ContourSet),
    /// A plain cell mask.
    Cells(&'a RegionMask),
}

/// Provenance of the region a sup sample was taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionDescriptor {
    Contour { points: usize, cells: usize },
    CellMask { cells: usize },
    /// A cell mask covering the whole valid domain (fallback mode).
    WholeDomain { cells: usize },
    /// Nothing to evaluate on (all cells floored); suprema are all zero.
    Degenerate,
}

/// The empirical law of the bootstrap supremum: M non-negative values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupSample {
    values: Vec<f64>,
    seed: u64,
    region: RegionDescriptor,
    residual_fingerprint: u64,
}

impl SupSample {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn region(&self) -> RegionDescriptor {
        self.region
    }

    pub fn residual_fingerprint(&self) -> u64 {
        self.residual_fingerprint
    }

    /// Rehydrates a sample from stored values (provenance fields verbatim).
    pub fn from_values(
        values: Vec<f64>,
        seed: u64,
        region: RegionDescriptor,
        residual_fingerprint: u64,
    ) -> Self {
        Self {
            values,
            seed,
            region,
            residual_fingerprint,
        }
    }

    /// Degenerate all-zero sample (used when no cell survives the floor).
    pub fn degenerate(m: usize, seed: u64, residual_fingerprint: u64) -> Self {
        Self {
            values: vec![0.0; m],
            seed,
            region: RegionDescriptor::Degenerate,
            residual_fingerprint,
        }
    }

    pub(crate) fn relabel_region(&mut self, region: RegionDescriptor) {
        self.region = region;
    }
}

/// A calibrated threshold: the smallest order statistic of the sup sample
/// whose left-closed empirical coverage reaches 1 - alpha.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Threshold {
    pub a: f64,
    pub alpha: f64,
    /// 1-based rank of the order statistic used.
    pub order_index: usize,
}

fn inv_sqrt(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

/// One multiplier-bootstrap realization: `n^{-1/2} sum_j g_j R_j(s)` cellwise.
pub fn bootstrap_realization(residuals: &FieldStack, multipliers: &[f64]) -> Result<ScalarField> {
    let n = residuals.n_layers();
    if multipliers.len() != n {
        return Err(Error::MultiplierLength {
            got: multipliers.len(),
            expected: n,
        });
    }
    let len = residuals.geometry().len();
    let mut out = vec![0.0; len];
    for (j, &g) in multipliers.iter().enumerate() {
        for (o, &r) in out.iter_mut().zip(residuals.layer(j)) {
            *o += g * r;
        }
    }
    let s = inv_sqrt(n);
    for o in &mut out {
        *o *= s;
    }
    match residuals.mask() {
        Some(m) => ScalarField::with_mask(*residuals.geometry(), out, m.to_vec()),
        None => ScalarField::new(*residuals.geometry(), out),
    }
}

/// The conditional covariance of the bootstrap field between two cells:
/// `n^{-1} sum_j R_j(s1) R_j(s2)`.
pub fn sample_covariance(residuals: &FieldStack, s1: usize, s2: usize) -> Result<f64> {
    for s in [s1, s2] {
        if s >= residuals.geometry().len() {
            return Err(Error::InvalidParameter(format!(
                "cell {s} out of range for grid of {} cells",
                residuals.geometry().len()
            )));
        }
        if !residuals.is_active(s) {
            return Err(Error::MaskedCell(s));
        }
    }
    let n = residuals.n_layers();
    let len = residuals.geometry().len();
    let mut acc = 0.0;
    for j in 0..n {
        let layer = residuals.layer(j);
        acc += layer[s1] * layer[s2];
        let _ = len;
    }
    Ok(acc / n as f64)
}

/// Region compiled for fast evaluation: the rows of the residual matrix that
/// matter, plus (for contours) the interpolation plan onto those rows.
struct CompiledRegion {
    /// sorted unique cell indices
    cells: Vec<usize>,
    /// (lo, hi, w_lo, w_hi) into `cells`, one per contour point
    points: Option<Vec<(usize, usize, f64, f64)>>,
    descriptor: RegionDescriptor,
}

fn compile_region(region: &Region, residuals: &FieldStack) -> Result<CompiledRegion> {
    match region {
        Region::Cells(mask) => {
            mask.geometry()
                .check_same(residuals.geometry(), "sup region")?;
            let cells = mask.cell_indices();
            if cells.is_empty() {
                return Err(Error::EmptyBoundary);
            }
            Ok(CompiledRegion {
                descriptor: RegionDescriptor::CellMask { cells: cells.len() },
                cells,
                points: None,
            })
        }
        Region::Contour(contour) => {
            contour
                .geometry()
                .check_same(residuals.geometry(), "sup region")?;
            if contour.is_empty() {
                return Err(Error::EmptyBoundary);
            }
            let cells = contour.touched_cells();
            let pos = |cell: usize| cells.binary_search(&cell).unwrap();
            let points = contour
                .points()
                .iter()
                .map(|p| (pos(p.cell_lo), pos(p.cell_hi), p.weight_lo, p.weight_hi))
                .collect();
            Ok(CompiledRegion {
                descriptor: RegionDescriptor::Contour {
                    points: contour.len(),
                    cells: cells.len(),
                },
                cells,
                points: Some(points),
            })
        }
    }
}

/// Gathers the residual matrix restricted to the region cells, cell-major.
fn gather(residuals: &FieldStack, cells: &[usize]) -> Vec<f64> {
    let n = residuals.n_layers();
    let mut e = vec![0.0; cells.len() * n];
    for j in 0..n {
        let layer = residuals.layer(j);
        for (ci, &cell) in cells.iter().enumerate() {
            e[ci * n + j] = layer[cell];
        }
    }
    e
}

fn sup_of_replicate(vals: &[f64], points: &Option<Vec<(usize, usize, f64, f64)>>) -> f64 {
    let mut sup = 0.0f64;
    match points {
        Some(pts) => {
            for &(lo, hi, _w_lo, w_hi) in pts {
                let v = (vals[lo] + w_hi * (vals[hi] - vals[lo])).abs();
                if v > sup {
                    sup = v;
                }
            }
        }
        None => {
            for &v in vals {
                let a = v.abs();
                if a > sup {
                    sup = a;
                }
            }
        }
    }
    sup
}

/// Empirical law of `sup_region |G~|` from M replicates keyed `(seed, m)`.
pub fn sup_distribution(
    residuals: &FieldStack,
    region: Region,
    m: usize,
    seed: u64,
) -> Result<SupSample> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    let compiled = compile_region(&region, residuals)?;
    let e = gather(residuals, &compiled.cells);
    let n = residuals.n_layers();
    let scale = inv_sqrt(n);
    let mut g = vec![0.0f64; n];
    let mut vals = vec![0.0f64; compiled.cells.len()];
    let mut sups = Vec::with_capacity(m);
    for rep in 0..m {
        let mut rng = rng::stream(seed, rep as u64);
        for gj in g.iter_mut() {
            *gj = rng.sample(StandardNormal);
        }
        for (ci, v) in vals.iter_mut().enumerate() {
            let row = &e[ci * n..(ci + 1) * n];
            let mut acc = 0.0;
            for (r, gj) in row.iter().zip(&g) {
                acc += r * gj;
            }
            *v = acc * scale;
        }
        sups.push(sup_of_replicate(&vals, &compiled.points));
    }
    Ok(SupSample {
        values: sups,
        seed,
        region: compiled.descriptor,
        residual_fingerprint: residuals.fingerprint(),
    })
}

/// Same distribution (and bitwise the same sample) as [`sup_distribution`],
/// evaluated block-wise as an (L_region x n) x (n x block) matrix product.
pub fn sup_distribution_blocked(
    residuals: &FieldStack,
    region: Region,
    m: usize,
    seed: u64,
    block: usize,
) -> Result<SupSample> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    if block == 0 {
        return Err(Error::InvalidParameter("block size must be positive".into()));
    }
    let compiled = compile_region(&region, residuals)?;
    let e = gather(residuals, &compiled.cells);
    let n = residuals.n_layers();
    let n_cells = compiled.cells.len();
    let scale = inv_sqrt(n);
    let mut sups = Vec::with_capacity(m);
    // multiplier block, layer-major: g[j * bs + t] is g_j of replicate start+t
    let mut g = vec![0.0f64; n * block];
    let mut vals = vec![0.0f64; n_cells * block];
    let mut start = 0;
    while start < m {
        let bs = block.min(m - start);
        for t in 0..bs {
            let mut rng = rng::stream(seed, (start + t) as u64);
            for j in 0..n {
                g[j * bs + t] = rng.sample(StandardNormal);
            }
        }
        let vals = &mut vals[..n_cells * bs];
        vals.fill(0.0);
        for ci in 0..n_cells {
            let row = &e[ci * n..(ci + 1) * n];
            let acc = &mut vals[ci * bs..(ci + 1) * bs];
            for (j, &r) in row.iter().enumerate() {
                let grow = &g[j * bs..(j + 1) * bs];
                for (a, &gv) in acc.iter_mut().zip(grow) {
                    *a += r * gv;
                }
            }
            for a in acc.iter_mut() {
                *a *= scale;
            }
        }
        let mut col = vec![0.0f64; n_cells];
        for t in 0..bs {
            for (ci, c) in col.iter_mut().enumerate() {
                *c = vals[ci * bs + t];
            }
            sups.push(sup_of_replicate(&col, &compiled.points));
        }
        start += bs;
    }
    Ok(SupSample {
        values: sups,
        seed,
        region: compiled.descriptor,
        residual_fingerprint: residuals.fingerprint(),
    })
}

/// Chooses `a` as the ceil((1-alpha) M)-th order statistic of the sup sample.
///
/// The rank arithmetic forgives a few ulps because (1-alpha)*M is usually not
/// exactly representable (0.9 * 5000 evaluates above 4500).
pub fn threshold(sample: &SupSample, alpha: f64) -> Result<Threshold> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let m = sample.m();
    let mut sorted = sample.values.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let target = (1.0 - alpha) * m as f64;
    let fudge = 4.0 * f64::EPSILON * target;
    let rank = ((target - fudge).ceil() as usize).clamp(1, m);
    Ok(Threshold {
        a: sorted[rank - 1],
        alpha,
        order_index: rank,
    })
}
