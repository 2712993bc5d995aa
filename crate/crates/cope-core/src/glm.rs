//! Mass-univariate least squares: the same small design matrix is fit
//! independently at every grid cell of a stack of co-registered fields.
//!
//! The cell loop is organised as layer-wise passes (one p x p factorization,
//! reused across all cells), so the dominant cost is the n x L product.

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, RegionMask, ScalarField};
use crate::linalg;
use serde::{Deserialize, Serialize};

/// `n` co-registered fields; the row dimension of the per-cell regression.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStack {
    geometry: GridGeometry,
    n_layers: usize,
    /// layer-major: `values[j * len .. (j+1) * len]` is layer j, row-major.
    values: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl FieldStack {
    pub fn from_values(geometry: GridGeometry, n_layers: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_layers * geometry.len() {
            return Err(Error::InvalidField(format!(
                "expected {} x {} values, got {}",
                n_layers,
                geometry.len(),
                values.len()
            )));
        }
        if n_layers == 0 {
            return Err(Error::InvalidField("stack needs at least one layer".into()));
        }
        Ok(Self {
            geometry,
            n_layers,
            values,
            mask: None,
        })
    }

    pub fn from_layers(layers: &[ScalarField]) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidField("stack needs at least one layer".into()))?;
        let geometry = *first.geometry();
        let mut values = Vec::with_capacity(layers.len() * geometry.len());
        for layer in layers {
            layer.geometry().check_same(&geometry, "from_layers")?;
            values.extend_from_slice(layer.values());
        }
        let mut stack = Self::from_values(geometry, layers.len(), values)?;
        stack.mask = first.mask().map(|m| m.to_vec());
        Ok(stack)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.geometry.len() {
            return Err(Error::InvalidField("mask length mismatch".into()));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn layer(&self, j: usize) -> &[f64] {
        let len = self.geometry.len();
        &self.values[j * len..(j + 1) * len]
    }

    pub fn layer_mut(&mut self, j: usize) -> &mut [f64] {
        let len = self.geometry.len();
        &mut self.values[j * len..(j + 1) * len]
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn is_active(&self, index: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[index])
    }

    pub fn layer_field(&self, j: usize) -> ScalarField {
        let f = ScalarField::new(self.geometry, self.layer(j).to_vec()).unwrap();
        match &self.mask {
            Some(m) => {
                ScalarField::with_mask(self.geometry, f.values().to_vec(), m.clone()).unwrap()
            }
            None => f,
        }
    }

    /// Values of one cell across all layers.
    pub fn column(&self, cell: usize) -> Vec<f64> {
        let len = self.geometry.len();
        (0..self.n_layers)
            .map(|j| self.values[j * len + cell])
            .collect()
    }

    /// FNV-1a over the value bit patterns; provenance only.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for v in &self.values {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}

/// Design matrix plus the derived standardization constants: `pi_n` is the
/// target diagonal entry of (X^T X)^{-1}, `v` the matching row of
/// (X^T X)^{-1/2} scaled by `pi_n^{-1/2}`, and `scale = |v| * sqrt(pi_n)` the
/// factor that turns the raw coefficient deviation into an asymptotically
/// unit-variance field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignSpec {
    n: usize,
    p: usize,
    /// row-major n x p
    x: Vec<f64>,
    coef_index: usize,
    xtx_inv: Vec<f64>,
    /// (X^T X)^{-1} X^T, row-major p x n; applied at every cell.
    proj: Vec<f64>,
    pi_n: f64,
    v: Vec<f64>,
    scale: f64,
    rcond: f64,
}

/// Builds a [`DesignSpec`] for the coefficient at `coef_index` (zero-based).
///
/// (X^T X)^{-1/2} is the symmetric square root, via eigendecomposition.
pub fn build_design(x: Vec<f64>, n: usize, p: usize, coef_index: usize) -> Result<DesignSpec> {
    if x.len() != n * p {
        return Err(Error::Design(format!(
            "design matrix needs {n} x {p} = {} entries, got {}",
            n * p,
            x.len()
        )));
    }
    if n < p {
        return Err(Error::Design(format!("need n >= p, got n = {n}, p = {p}")));
    }
    if coef_index >= p {
        return Err(Error::Design(format!(
            "coefficient index {coef_index} out of range for p = {p}"
        )));
    }
    let mut xtx = vec![0.0; p * p];
    for row in x.chunks_exact(p) {
        for i in 0..p {
            for j in 0..p {
                xtx[i * p + j] += row[i] * row[j];
            }
        }
    }
    let (eigvals, eigvecs) = linalg::sym_eigen(&xtx, p);
    let lambda_min = eigvals[0];
    let lambda_max = eigvals[p - 1];
    let rcond = if lambda_max > 0.0 {
        lambda_min / lambda_max
    } else {
        0.0
    };
    if !(rcond > 1e-12) {
        return Err(Error::Design(format!(
            "X^T X is singular or ill-conditioned: reciprocal condition number {rcond:.3e}"
        )));
    }
    let xtx_inv = linalg::sym_function(&eigvals, &eigvecs, p, |l| 1.0 / l);
    let inv_sqrt = linalg::sym_function(&eigvals, &eigvecs, p, |l| 1.0 / l.sqrt());
    // proj = (X^T X)^{-1} X^T
    let mut proj = vec![0.0; p * n];
    for (j, row) in x.chunks_exact(p).enumerate() {
        for i in 0..p {
            let mut s = 0.0;
            for k in 0..p {
                s += xtx_inv[i * p + k] * row[k];
            }
            proj[i * n + j] = s;
        }
    }
    let pi_n = xtx_inv[coef_index * p + coef_index];
    let v: Vec<f64> = (0..p)
        .map(|j| inv_sqrt[coef_index * p + j] / pi_n.sqrt())
        .collect();
    let v_norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = v_norm * pi_n.sqrt();
    if !(pi_n > 0.0) || !(scale > 0.0) {
        return Err(Error::Design(format!(
            "degenerate standardization constants: pi_n = {pi_n}, scale = {scale}"
        )));
    }
    Ok(DesignSpec {
        n,
        p,
        x,
        coef_index,
        xtx_inv,
        proj,
        pi_n,
        v,
        scale,
    rcond,
    })
}

impl DesignSpec {
    /// Intercept-only design: the per-cell estimate is the sample mean and
    /// `scale` reduces to 1/sqrt(n).
    pub fn intercept_only(n: usize) -> Result<Self> {
        build_design(vec![1.0; n], n, 1, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn coef_index(&self) -> usize {
        self.coef_index
    }

    pub fn xtx_inv(&self) -> &[f64] {
        &self.xtx_inv
    }

    pub fn pi_n(&self) -> f64 {
        self.pi_n
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn v_norm(&self) -> f64 {
        self.v.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rcond(&self) -> f64 {
        self.rcond
    }
}

/// Divisor of the residual sum of squares in the variance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceDivisor {
    /// n (the default; matches the plug-in estimator used downstream).
    SampleSize,
    /// n - p (opt-in unbiased variant).
    DegreesOfFreedom,
}

/// What to do at cells whose residual variance collapses to (numerical) zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FloorPolicy {
    /// Flag the cells; they are excluded from boundaries and suprema and the
    /// count is reported.
    Flag,
    /// Error out instead.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    pub variance_divisor: VarianceDivisor,
    pub floor: FloorPolicy,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            variance_divisor: VarianceDivisor::SampleSize,
            floor: FloorPolicy::Flag,
        }
    }
}

/// Per-cell least-squares output: coefficient surfaces, residuals, the
/// residual standard deviation and the normalized residuals used by the
/// multiplier bootstrap.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub coefficients: Vec<ScalarField>,
    pub residuals: FieldStack,
    pub sigma_hat: ScalarField,
    pub normalized_residuals: FieldStack,
    /// Cells where sigma_hat fell at or below the floor (1e-12 x grid median).
    pub floored: RegionMask,
    pub options: FitOptions,
}

impl FitResult {
    pub fn coefficient(&self, k: usize) -> &ScalarField {
        &self.coefficients[k]
    }

    pub fn floored_count(&self) -> usize {
        self.floored.count()
    }
}

/// Solves the normal equations at every cell.
///
/// Residuals satisfy X^T R = 0 per cell up to rounding; sigma_hat uses the
/// divisor selected in `options` (n by default).
pub fn fit(stack: &FieldStack, design: &DesignSpec, options: FitOptions) -> Result<FitResult> {
    if stack.n_layers() != design.n {
        return Err(Error::LayerMismatch {
            stack: stack.n_layers(),
            design: design.n,
        });
    }
    let geometry = *stack.geometry();
    let len = geometry.len();
    let (n, p) = (design.n, design.p);

    // B = proj * Y, as p layer-length passes per design row.
    let mut beta = vec![0.0; p * len];
    for k in 0..p {
        let brow = &mut beta[k * len..(k + 1) * len];
        for j in 0..n {
            let w = design.proj[k * n + j];
            if w == 0.0 {
                continue;
            }
            for (b, &y) in brow.iter_mut().zip(stack.layer(j)) {
                *b += w * y;
            }
        }
    }

    // R = Y - X B and the residual sum of squares.
    let mut residuals = vec![0.0; n * len];
    let mut sq = vec![0.0; len];
    for j in 0..n {
        let rrow = &mut residuals[j * len..(j + 1) * len];
        rrow.copy_from_slice(stack.layer(j));
        for k in 0..p {
            let w = design.x[j * p + k];
            if w == 0.0 {
                continue;
            }
            let brow = &beta[k * len..(k + 1) * len];
            for (r, &b) in rrow.iter_mut().zip(brow) {
                *r -= w * b;
            }
        }
        for (s, &r) in sq.iter_mut().zip(rrow.iter()) {
            *s += r * r;
        }
    }

    let divisor = match options.variance_divisor {
        VarianceDivisor::SampleSize => n as f64,
        VarianceDivisor::DegreesOfFreedom => (n - p) as f64,
    };
    let sigma: Vec<f64> = sq.iter().map(|&s| (s / divisor).sqrt()).collect();

    // Floor rule. The data scale enters alongside the grid median so that
    // exact fits are flagged even when every active sigma is pure rounding
    // noise (a median-only rule scales the threshold down with the noise);
    // <= rather than < so exact zeros are flagged when the median is zero.
    let mut active_sigmas: Vec<f64> = (0..len)
        .filter(|&i| stack.is_active(i))
        .map(|i| sigma[i])
        .collect();
    let y_scale = (0..len)
        .filter(|&i| stack.is_active(i))
        .flat_map(|i| (0..n).map(move |j| stack.layer(j)[i].abs()))
        .fold(0.0f64, f64::max);
    let floor = if active_sigmas.is_empty() {
        0.0
    } else {
        let mid = active_sigmas.len() / 2;
        active_sigmas.sort_unstable_by(f64::total_cmp);
        1e-12 * active_sigmas[mid].max(y_scale)
    };
    let floored_cells: Vec<bool> = (0..len)
        .map(|i| stack.is_active(i) && sigma[i] <= floor)
        .collect();
    let floored = RegionMask::new(geometry, floored_cells)?;
    if options.floor == FloorPolicy::Strict && floored.count() > 0 {
        return Err(Error::ZeroVariance {
            count: floored.count(),
        });
    }

    let mut normalized = vec![0.0; n * len];
    for j in 0..n {
        let rrow = &residuals[j * len..(j + 1) * len];
        let nrow = &mut normalized[j * len..(j + 1) * len];
        for i in 0..len {
            nrow[i] = if !stack.is_active(i) || floored.is_inside(i) {
                0.0
            } else {
                rrow[i] / sigma[i]
            };
        }
    }

    let make_field = |values: Vec<f64>| -> Result<ScalarField> {
        match stack.mask() {
            Some(m) => ScalarField::with_mask(geometry, values, m.to_vec()),
            None => ScalarField::new(geometry, values),
        }
    };
    let coefficients = (0..p)
        .map(|k| make_field(beta[k * len..(k + 1) * len].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let sigma_hat = make_field(sigma)?;
    let mut res_stack = FieldStack::from_values(geometry, n, residuals)?;
    let mut norm_stack = FieldStack::from_values(geometry, n, normalized)?;
    if let Some(m) = stack.mask() {
        res_stack = res_stack.with_mask(m.to_vec())?;
        norm_stack = norm_stack.with_mask(m.to_vec())?;
    }

    Ok(FitResult {
        coefficients,
        residuals: res_stack,
        sigma_hat,
        normalized_residuals: norm_stack,
        floored,
        options,
    })
}

/// The standardized deviation field `(bhat_k - c) / (scale * sigma_hat)`,
/// the quantity later thresholded at +-a.
///
/// At floored cells the ratio is undefined; it saturates to +-f64::MAX by the
/// sign of the numerator (0 on an exact tie), so that thresholding at any
/// finite a degrades to the plain comparison `bhat_k >= c` there.
pub fn standardized_deviation(fit: &FitResult, design: &DesignSpec, c: f64) -> Result<ScalarField> {
    if fit.coefficients.len() != design.p {
        return Err(Error::Design(format!(
            "fit has {} coefficients, design expects {}",
            fit.coefficients.len(),
            design.p
        )));
    }
    let bhat = &fit.coefficients[design.coef_index];
    let geometry = *bhat.geometry();
    let sigma = fit.sigma_hat.values();
    let scale = design.scale;
    let values: Vec<f64> = bhat
        .values()
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let num = b - c;
            if fit.floored.is_inside(i) {
                if num == 0.0 {
                    0.0
                } else {
                    num.signum() * f64::MAX
                }
            } else {
                num / (scale * sigma[i])
            }
        })
        .collect();
    match bhat.mask() {
        Some(m) => ScalarField::with_mask(geometry, values, m.to_vec()),
        None => ScalarField::new(geometry, values),
    }
}
