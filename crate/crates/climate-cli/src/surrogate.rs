//! Synthetic two-period temperature-like stacks with a known excursion set,
//! standing in for restricted-access gridded climate data in end-to-end
//! tests and demos.
//!
//! The future-minus-past mean difference is `delta` inside a disk and zero
//! outside, so the true excursion set of the difference at any level below
//! `delta` is exactly the disk.

use crate::design::Period;
use crate::stackfile::CovariateRow;
use cope_core::glm::FieldStack;
use cope_core::grid::{GridGeometry, RegionMask, ScalarField};
use cope_core::rng::{self, tag};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub nx: usize,
    pub ny: usize,
    /// Observations per period (past and future each).
    pub n_per_period: usize,
    /// Mean difference inside the disk, in the same units as the level.
    pub delta: f64,
    /// Disk center in cell coordinates.
    pub center: (f64, f64),
    pub radius: f64,
    /// i.i.d. noise standard deviation per cell and observation.
    pub noise_sd: f64,
    /// Linear within-period trends per unit time.
    pub trend_a: f64,
    pub trend_b: f64,
    pub seed: u64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        // ~10^4 cells, 29 + 29 layers: the scale of a one-season analysis
        Self {
            nx: 115,
            ny: 87,
            n_per_period: 29,
            delta: 2.5,
            center: (57.0, 43.0),
            radius: 21.0,
            noise_sd: 0.25,
            trend_a: 0.01,
            trend_b: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Surrogate {
    pub spec: SurrogateSpec,
    pub stack: FieldStack,
    pub covariates: Vec<CovariateRow>,
    /// The baseline (past) mean surface.
    pub baseline: ScalarField,
    /// The true mean-difference surface (delta inside the disk, 0 outside).
    pub difference: ScalarField,
}

impl Surrogate {
    /// The true excursion set of the mean difference at `level`.
    pub fn truth(&self, level: f64) -> RegionMask {
        self.difference.excursion_set(level).unwrap()
    }
}

/// Centered, equally spaced times mimicking annual means: -14..14 for 29.
fn period_times(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 - (n as f64 - 1.0) / 2.0).collect()
}

pub fn generate(spec: &SurrogateSpec) -> cope_core::Result<Surrogate> {
    let geom = GridGeometry::unit(spec.nx, spec.ny)?;
    let baseline = ScalarField::from_fn(geom, |x, y| {
        10.0 + 0.02 * y - 0.005 * x + 1.5 * ((x * 0.07).sin() * (y * 0.05).cos())
    });
    let (cx, cy) = spec.center;
    let r2 = spec.radius * spec.radius;
    let difference = ScalarField::from_fn(geom, |x, y| {
        if (x - cx).powi(2) + (y - cy).powi(2) <= r2 {
            spec.delta
        } else {
            0.0
        }
    });
    let len = geom.len();
    let n = 2 * spec.n_per_period;
    let times = period_times(spec.n_per_period);
    let mut values = vec![0.0; n * len];
    let mut covariates = Vec::with_capacity(n);
    for j in 0..n {
        let (period, t) = if j < spec.n_per_period {
            (Period::A, times[j])
        } else {
            (Period::B, times[j - spec.n_per_period])
        };
        covariates.push(CovariateRow {
            layer: j,
            period,
            time: t,
        });
        let mut rng = rng::stream(rng::derive(spec.seed, tag::SURROGATE, j as u64), 0);
        let layer = &mut values[j * len..(j + 1) * len];
        for (i, v) in layer.iter_mut().enumerate() {
            let trend = match period {
                Period::A => spec.trend_a * t,
                Period::B => spec.trend_b * t,
            };
            let diff = match period {
                Period::A => 0.0,
                Period::B => difference.values()[i],
            };
            let noise: f64 = if spec.noise_sd > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                spec.noise_sd * z
            } else {
                0.0
            };
            *v = baseline.values()[i] + diff + trend + noise;
        }
    }
    let stack = FieldStack::from_values(geom, n, values)?;
    Ok(Surrogate {
        spec: *spec,
        stack,
        covariates,
        baseline,
        difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_has_the_advertised_truth() {
        let spec = SurrogateSpec {
            nx: 40,
            ny: 30,
            n_per_period: 5,
            center: (19.0, 14.0),
            radius: 8.0,
            ..Default::default()
        };
        let s = generate(&spec).unwrap();
        assert_eq!(s.stack.n_layers(), 10);
        let truth = s.truth(2.0);
        assert!(truth.count() > 0);
        assert!(truth.count() < s.stack.geometry().len());
        // disk oracle
        for iy in 0..30 {
            for ix in 0..40 {
                let inside = ((ix as f64 - spec.center.0).powi(2)
                    + (iy as f64 - spec.center.1).powi(2))
                    <= spec.radius * spec.radius;
                assert_eq!(truth.is_inside(iy * 40 + ix), inside);
            }
        }
    }

    #[test]
    fn surrogate_is_deterministic_in_the_seed() {
        let spec = SurrogateSpec {
            nx: 12,
            ny: 10,
            n_per_period: 3,
            ..Default::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.stack.layer(2), b.stack.layer(2));
        let c = generate(&SurrogateSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.stack.layer(2), c.stack.layer(2));
    }

    #[test]
    fn zero_noise_surrogate_is_exact() {
        let spec = SurrogateSpec {
            nx: 12,
            ny: 10,
            n_per_period: 3,
            noise_sd: 0.0,
            ..Default::default()
        };
        let s = generate(&spec).unwrap();
        // layer 0 is baseline + trend_a * t_0 exactly
        let t0 = period_times(3)[0];
        for (v, b) in s.stack.layer(0).iter().zip(s.baseline.values()) {
            assert_eq!(*v, b + spec.trend_a * t0);
        }
    }
}
