//! The two-period trend design: separate intercepts and centered linear
//! trends for a "past" and a "future" block of observations, with the first
//! coefficient equal to the between-period mean difference.
//!
//! Column order is (difference, past intercept, past trend, future trend):
//! row j reads [1{j in future}, 1, t_j or 0, 0 or t_j]. For n_a = n_b = n/2
//! and equally spaced times, the standardization constants collapse to
//! |v| = 1 and scale = 2/sqrt(n).

use crate::error::{CliError, Result};
use cope_core::glm::{build_design, DesignSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Period {
    A,
    B,
}

impl Period {
    pub fn label(self) -> &'static str {
        match self {
            Period::A => "a",
            Period::B => "b",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "a" | "A" => Ok(Period::A),
            "b" | "B" => Ok(Period::B),
            other => Err(CliError::Format(format!(
                "period must be 'a' or 'b', got '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoPeriodDesign {
    pub n_a: usize,
    pub n_b: usize,
    /// Centered time covariates, in row order within each period.
    pub t_a: Vec<f64>,
    pub t_b: Vec<f64>,
    /// Centering shifts that were subtracted from the supplied times.
    pub shift_a: f64,
    pub shift_b: f64,
    pub design: DesignSpec,
}

impl TwoPeriodDesign {
    pub fn n(&self) -> usize {
        self.n_a + self.n_b
    }

    /// True when the supplied times needed centering.
    pub fn was_recentered(&self) -> bool {
        self.shift_a.abs() > 1e-9 || self.shift_b.abs() > 1e-9
    }
}

fn center(t: &[f64]) -> (Vec<f64>, f64) {
    let shift = t.iter().sum::<f64>() / t.len() as f64;
    (t.iter().map(|v| v - shift).collect(), shift)
}

/// Builds the design from per-period time covariates, in block order
/// (all period-a rows, then all period-b rows). Times are re-centered to
/// sum zero within each period; the applied shifts are recorded.
pub fn build_two_period_design(t_a: &[f64], t_b: &[f64]) -> Result<TwoPeriodDesign> {
    let rows: Vec<(Period, f64)> = t_a
        .iter()
        .map(|&t| (Period::A, t))
        .chain(t_b.iter().map(|&t| (Period::B, t)))
        .collect();
    two_period_design_from_rows(&rows)
}

/// Same, but with rows in arbitrary order (e.g. straight from a covariate
/// sidecar). Row j of the design matrix matches observation j.
pub fn two_period_design_from_rows(rows: &[(Period, f64)]) -> Result<TwoPeriodDesign> {
    let raw_a: Vec<f64> = rows
        .iter()
        .filter(|(p, _)| *p == Period::A)
        .map(|&(_, t)| t)
        .collect();
    let raw_b: Vec<f64> = rows
        .iter()
        .filter(|(p, _)| *p == Period::B)
        .map(|&(_, t)| t)
        .collect();
    if raw_a.len() < 2 || raw_b.len() < 2 {
        return Err(CliError::Format(format!(
            "need at least 2 observations per period, got {} (a) and {} (b)",
            raw_a.len(),
            raw_b.len()
        )));
    }
    let (t_a, shift_a) = center(&raw_a);
    let (t_b, shift_b) = center(&raw_b);
    let n = rows.len();
    let mut x = Vec::with_capacity(n * 4);
    let (mut ia, mut ib) = (0usize, 0usize);
    for (p, _) in rows {
        match p {
            Period::A => {
                x.extend_from_slice(&[0.0, 1.0, t_a[ia], 0.0]);
                ia += 1;
            }
            Period::B => {
                x.extend_from_slice(&[1.0, 1.0, 0.0, t_b[ib]]);
                ib += 1;
            }
        }
    }
    let design = build_design(x, n, 4, 0)?;
    Ok(TwoPeriodDesign {
        n_a: t_a.len(),
        n_b: t_b.len(),
        t_a,
        t_b,
        shift_a,
        shift_b,
        design,
    })
}

/// Equally spaced centered times for a period of `n` observations with unit
/// spacing: -(n-1)/2, ..., (n-1)/2.
pub fn equally_spaced_times(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| j as f64 - (n as f64 - 1.0) / 2.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn xtx(design: &DesignSpec) -> Vec<f64> {
        let (n, p) = (design.n(), design.p());
        let x = design.x();
        let mut out = vec![0.0; p * p];
        for j in 0..n {
            for a in 0..p {
                for b in 0..p {
                    out[a * p + b] += x[j * p + a] * x[j * p + b];
                }
            }
        }
        out
    }

    #[test]
    fn tiny_design_matches_direct_multiplication() {
        let d = build_two_period_design(&[-0.5, 0.5], &[-0.5, 0.5]).unwrap();
        let got = xtx(&d.design);
        let expect = [
            2.0, 2.0, 0.0, 0.0, //
            2.0, 4.0, 0.0, 0.0, //
            0.0, 0.0, 0.5, 0.0, //
            0.0, 0.0, 0.0, 0.5,
        ];
        for (g, e) in got.iter().zip(expect) {
            assert!(close(*g, e, 1e-12), "{got:?}");
        }
    }

    #[test]
    fn balanced_design_constants() {
        for half in [2usize, 29, 100] {
            let t = equally_spaced_times(half);
            let d = build_two_period_design(&t, &t).unwrap();
            let n = (2 * half) as f64;
            assert!(close(d.design.pi_n(), 4.0 / n, 1e-10), "pi_n at n={n}");
            assert!(close(d.design.v_norm(), 1.0, 1e-10), "|v| at n={n}");
            assert!(close(d.design.scale(), 2.0 / n.sqrt(), 1e-10), "scale at n={n}");
        }
    }

    #[test]
    fn twenty_nine_plus_twenty_nine() {
        let t = equally_spaced_times(29);
        let d = build_two_period_design(&t, &t).unwrap();
        assert!(close(d.design.scale(), 2.0 / 58.0_f64.sqrt(), 1e-12));
    }

    #[test]
    fn uncentered_times_are_recentered_with_record() {
        let years: Vec<f64> = (1971..=1999).map(f64::from).collect();
        let future: Vec<f64> = (2041..=2069).map(f64::from).collect();
        let d = build_two_period_design(&years, &future).unwrap();
        assert!(d.was_recentered());
        assert!(close(d.shift_a, 1985.0, 1e-9));
        assert!(close(d.shift_b, 2055.0, 1e-9));
        assert!(close(d.t_a.iter().sum::<f64>(), 0.0, 1e-9));
        // same standardization as the pre-centered version
        assert!(close(d.design.scale(), 2.0 / 58.0_f64.sqrt(), 1e-10));
    }

    #[test]
    fn interleaved_rows_keep_row_order() {
        let rows = vec![
            (Period::B, 1.0),
            (Period::A, -1.0),
            (Period::A, 1.0),
            (Period::B, -1.0),
            (Period::A, 0.0),
            (Period::B, 0.0),
        ];
        let d = two_period_design_from_rows(&rows).unwrap();
        let x = d.design.x();
        // row 0 is period b with t = 1: [1, 1, 0, 1]
        assert_eq!(&x[0..4], &[1.0, 1.0, 0.0, 1.0]);
        // row 1 is period a with t = -1: [0, 1, -1, 0]
        assert_eq!(&x[4..8], &[0.0, 1.0, -1.0, 0.0]);
        // permutation leaves X^T X untouched
        let sorted = build_two_period_design(&[-1.0, 1.0, 0.0], &[1.0, -1.0, 0.0]).unwrap();
        for (a, b) in xtx(&d.design).iter().zip(xtx(&sorted.design)) {
            assert!(close(*a, b, 1e-12));
        }
    }

    #[test]
    fn degenerate_periods_are_rejected() {
        assert!(build_two_period_design(&[0.0], &[-0.5, 0.5]).is_err());
        // constant time within a period: zero column after centering
        let err = build_two_period_design(&[5.0, 5.0, 5.0], &[-1.0, 0.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("condition number"), "{err}");
    }
}
