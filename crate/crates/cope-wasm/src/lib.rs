//! Interactive browser demo. One [`SimSession`] simulates a noisy sample of
//! the synthetic signal, fits the per-cell mean, bootstraps the supremum on
//! the plug-in boundary, and hands fields, contours and thresholds to the
//! page as flat arrays and JSON.
//!
//! Build for the web with the wasm32-unknown-unknown target plus
//! wasm-bindgen; everything here also compiles natively so the logic is
//! testable with plain `cargo test`.

use cope_core::bootstrap::{threshold, RegionDescriptor, SupSample};
use cope_core::contour::{contour_polylines, extract_boundary};
use cope_core::cope::{run_glm_cope_detailed, CopeConfig};
use cope_core::glm::{DesignSpec, FieldStack};
use cope_core::grid::ScalarField;
use cope_core::rng::{self, tag};
use cope_core::simlab::{signal_mu, NoiseKind, NoiseModel, NoiseSpec};
use wasm_bindgen::prelude::*;

fn err_js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn polylines_json(paths: &[Vec<(f64, f64)>]) -> serde_json::Value {
    serde_json::Value::Array(
        paths
            .iter()
            .map(|p| {
                serde_json::Value::Array(
                    p.iter()
                        .map(|&(x, y)| serde_json::json!([x, y]))
                        .collect(),
                )
            })
            .collect(),
    )
}

/// One simulated sample plus everything the page needs to explore it.
#[wasm_bindgen]
pub struct SimSession {
    level: f64,
    mu: ScalarField,
    mu_hat: ScalarField,
    deviation: ScalarField,
    sup_sorted: Vec<f64>,
    seed: u64,
    noise_example: ScalarField,
    noise_prefield: ScalarField,
}

#[wasm_bindgen]
impl SimSession {
    /// Simulates `n` observations of the signal under the chosen noise kind
    /// and calibrates the bootstrap sup sample on the plug-in boundary.
    #[wasm_bindgen(constructor)]
    pub fn new(
        noise_kind: u8,
        n: u32,
        boot_reps: u32,
        level: f64,
        seed: u32,
    ) -> Result<SimSession, JsError> {
        let n = n as usize;
        if n < 2 {
            return Err(JsError::new("need at least 2 observations"));
        }
        let spec = NoiseSpec::standard(NoiseKind::from_id(noise_kind).map_err(err_js)?);
        let model = NoiseModel::new(spec).map_err(err_js)?;
        let geometry = spec.geometry;
        let len = geometry.len();
        let mu = signal_mu(&geometry);
        let seed = seed as u64;

        let mut values = vec![0.0; n * len];
        for j in 0..n {
            let eps = model.generate(rng::derive(seed, tag::FIELD, j as u64));
            let layer = &mut values[j * len..(j + 1) * len];
            for (out, (&m, &e)) in layer.iter_mut().zip(mu.values().iter().zip(eps.values())) {
                *out = m + e;
            }
        }
        let stack = FieldStack::from_values(geometry, n, values).map_err(err_js)?;
        let design = DesignSpec::intercept_only(n).map_err(err_js)?;
        let config = CopeConfig::new(level, 0.1, boot_reps.max(1) as usize, rng::derive(seed, tag::BOOTSTRAP, 0));
        let run = run_glm_cope_detailed(&stack, &design, &config).map_err(err_js)?;

        let mut sup_sorted = run.result.sup_sample.values().to_vec();
        sup_sorted.sort_unstable_by(f64::total_cmp);
        let noise_prefield = model.prefield(rng::derive(seed, tag::FIELD, 0));
        let noise_example = model.generate(rng::derive(seed, tag::FIELD, 0));
        Ok(SimSession {
            level,
            mu,
            mu_hat: run.fit.coefficient(0).clone(),
            deviation: run.deviation,
            sup_sorted,
            seed,
            noise_example,
            noise_prefield,
        })
    }

    pub fn nx(&self) -> u32 {
        self.mu.geometry().nx() as u32
    }

    pub fn ny(&self) -> u32 {
        self.mu.geometry().ny() as u32
    }

    /// Physical domain extent [x0, y0, x1, y1] (cell edges included).
    pub fn extent(&self) -> Vec<f64> {
        let g = self.mu.geometry();
        let (sx, sy) = g.spacing();
        let (ox, oy) = g.origin();
        vec![
            ox - sx / 2.0,
            oy - sy / 2.0,
            ox + (g.nx() as f64 - 0.5) * sx,
            oy + (g.ny() as f64 - 0.5) * sy,
        ]
    }

    pub fn seed(&self) -> u32 {
        self.seed as u32
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// The fitted mean surface, row-major.
    pub fn mu_hat(&self) -> Vec<f64> {
        self.mu_hat.values().to_vec()
    }

    /// The true signal, row-major.
    pub fn signal(&self) -> Vec<f64> {
        self.mu.values().to_vec()
    }

    /// The standardized deviation surface, row-major.
    pub fn deviation(&self) -> Vec<f64> {
        self.deviation.values().to_vec()
    }

    /// Sorted bootstrap suprema.
    pub fn sup_sample(&self) -> Vec<f64> {
        self.sup_sorted.clone()
    }

    /// One noise realization (the first observation's error field).
    pub fn noise_example(&self) -> Vec<f64> {
        self.noise_example.values().to_vec()
    }

    /// The same realization before smoothing and scaling.
    pub fn noise_prefield(&self) -> Vec<f64> {
        self.noise_prefield.values().to_vec()
    }

    /// The calibrated threshold at confidence 1 - alpha.
    pub fn threshold(&self, alpha: f64) -> Result<f64, JsError> {
        let sample = SupSample::from_values(
            self.sup_sorted.clone(),
            self.seed,
            RegionDescriptor::Degenerate,
            0,
        );
        Ok(threshold(&sample, alpha).map_err(err_js)?.a)
    }

    /// All overlay geometry for a given alpha, as JSON:
    /// `{a, purple, red, green, truth}` where each entry is a list of
    /// polylines in physical coordinates.
    pub fn contours_json(&self, alpha: f64) -> Result<String, JsError> {
        let a = self.threshold(alpha)?;
        let purple = contour_polylines(&self.mu_hat, self.level).map_err(err_js)?;
        let red = contour_polylines(&self.deviation, a).map_err(err_js)?;
        let green = contour_polylines(&self.deviation, -a).map_err(err_js)?;
        let truth = contour_polylines(&self.mu, self.level).map_err(err_js)?;
        let doc = serde_json::json!({
            "a": a,
            "purple": polylines_json(&purple),
            "red": polylines_json(&red),
            "green": polylines_json(&green),
            "truth": polylines_json(&truth),
        });
        Ok(doc.to_string())
    }

    /// Count of plug-in boundary points (diagnostic shown on the page).
    pub fn boundary_points(&self) -> Result<u32, JsError> {
        let contour = extract_boundary(&self.mu_hat, self.level).map_err(err_js)?;
        Ok(contour.len() as u32)
    }
}
