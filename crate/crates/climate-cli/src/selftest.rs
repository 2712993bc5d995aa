//! A quick self-contained invariant battery for the `selftest` subcommand.

use crate::design::{build_two_period_design, equally_spaced_times};
use crate::stackfile::{read_stack, write_stack};
use cope_core::bootstrap::{
    sup_distribution, sup_distribution_blocked, threshold, Region, RegionDescriptor, SupSample,
    Threshold,
};
use cope_core::contour::extract_boundary;
use cope_core::cope::cope_sets;
use cope_core::glm::FieldStack;
use cope_core::grid::{GridGeometry, RegionMask, ScalarField};
use cope_core::rng;
use cope_core::smooth::{KernelShape, Smoother};
use rand::Rng;

type Check = (&'static str, fn() -> Result<(), String>);

fn expect(cond: bool, msg: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

fn nesting_holds() -> Result<(), String> {
    let g = GridGeometry::unit(9, 7).unwrap();
    let mut rng = rng::stream(101, 0);
    for _ in 0..200 {
        let values: Vec<f64> = (0..63).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let dev = ScalarField::new(g, values).unwrap();
        let a = rng.gen_range(0.0..3.0);
        let masks = cope_sets(
            &dev,
            &Threshold {
                a,
                alpha: 0.1,
                order_index: 0,
            },
        )
        .map_err(|e| e.to_string())?;
        expect(
            masks.upper.is_subset_of(&masks.point_estimate).unwrap()
                && masks.point_estimate.is_subset_of(&masks.lower).unwrap(),
            "nested masks violated",
        )?;
    }
    Ok(())
}

fn threshold_order_statistic() -> Result<(), String> {
    let s = SupSample::from_values(
        (1..=5000).map(f64::from).collect(),
        0,
        RegionDescriptor::Degenerate,
        0,
    );
    let t = threshold(&s, 0.1).map_err(|e| e.to_string())?;
    expect(t.order_index == 4500 && t.a == 4500.0, "order statistic off")
}

fn blocked_bootstrap_is_bitwise() -> Result<(), String> {
    let g = GridGeometry::unit(8, 8).unwrap();
    let mut rng = rng::stream(7, 0);
    let n = 9;
    let values: Vec<f64> = (0..n * 64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let stack = FieldStack::from_values(g, n, values).unwrap();
    let mask = RegionMask::full(g);
    let a = sup_distribution(&stack, Region::Cells(&mask), 64, 3).map_err(|e| e.to_string())?;
    for block in [1usize, 5, 64, 200] {
        let b = sup_distribution_blocked(&stack, Region::Cells(&mask), 64, 3, block)
            .map_err(|e| e.to_string())?;
        for (x, y) in a.values().iter().zip(b.values()) {
            expect(x.to_bits() == y.to_bits(), "blocked bootstrap diverged")?;
        }
    }
    Ok(())
}

fn smoothing_matches_reference() -> Result<(), String> {
    let g = GridGeometry::new(32, 32, 10.0 / 32.0, 10.0 / 32.0, (0.0, 0.0)).unwrap();
    let mut rng = rng::stream(5, 0);
    let field: Vec<f64> = (0..32 * 32).map(|_| rng.gen_range(-2.0..2.0)).collect();
    for shape in [KernelShape::Gaussian, KernelShape::Laplace] {
        let s = Smoother::new(g, shape, 1.0).map_err(|e| e.to_string())?;
        let fast = s.apply(&field);
        let slow = s.apply_direct(&field);
        for (a, b) in fast.iter().zip(&slow) {
            expect((a - b).abs() <= 1e-12, "fft smoothing drifted from reference")?;
        }
    }
    Ok(())
}

fn stack_round_trip() -> Result<(), String> {
    let g = GridGeometry::unit(6, 5).unwrap();
    let values: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).tan()).collect();
    let stack = FieldStack::from_values(g, 2, values).unwrap();
    let mut path = std::env::temp_dir();
    path.push(format!("cope-selftest-{}.cope", std::process::id()));
    write_stack(&path, &stack).map_err(|e| e.to_string())?;
    let back = read_stack(&path).map_err(|e| e.to_string())?;
    std::fs::remove_file(&path).ok();
    for j in 0..2 {
        for (a, b) in stack.layer(j).iter().zip(back.layer(j)) {
            expect(a.to_bits() == b.to_bits(), "stack round trip not bitwise")?;
        }
    }
    Ok(())
}

fn two_period_constants() -> Result<(), String> {
    let t = equally_spaced_times(29);
    let d = build_two_period_design(&t, &t).map_err(|e| e.to_string())?;
    expect(
        (d.design.scale() - 2.0 / 58.0_f64.sqrt()).abs() < 1e-10,
        "two-period scale is not 2/sqrt(n)",
    )?;
    expect((d.design.v_norm() - 1.0).abs() < 1e-10, "|v| is not 1")
}

fn contour_points_sit_on_level() -> Result<(), String> {
    let g = GridGeometry::unit(16, 16).unwrap();
    let f = ScalarField::from_fn(g, |x, y| ((x - 7.3) * 0.4).sin() + ((y - 6.1) * 0.3).cos());
    let c = 0.35;
    let contour = extract_boundary(&f, c).map_err(|e| e.to_string())?;
    expect(!contour.is_empty(), "expected a nonempty contour")?;
    for v in f.interpolate_on_contour(&contour).unwrap() {
        expect((v - c).abs() <= 1e-10, "contour point off the level")?;
    }
    Ok(())
}

pub struct SelftestOutcome {
    pub passed: usize,
    pub failed: Vec<(String, String)>,
}

pub fn run_selftest(mut log: impl FnMut(&str)) -> SelftestOutcome {
    let checks: Vec<Check> = vec![
        ("nested masks", nesting_holds),
        ("threshold order statistic", threshold_order_statistic),
        ("blocked bootstrap bitwise", blocked_bootstrap_is_bitwise),
        ("fft smoothing vs reference", smoothing_matches_reference),
        ("stack file round trip", stack_round_trip),
        ("two-period constants", two_period_constants),
        ("contour interpolation", contour_points_sit_on_level),
    ];
    let mut passed = 0;
    let mut failed = Vec::new();
    for (name, check) in checks {
        match check() {
            Ok(()) => {
                passed += 1;
                log(&format!("ok      {name}"));
            }
            Err(msg) => {
                log(&format!("FAILED  {name}: {msg}"));
                failed.push((name.to_string(), msg));
            }
        }
    }
    SelftestOutcome { passed, failed }
}
