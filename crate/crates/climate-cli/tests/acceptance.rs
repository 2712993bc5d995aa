//! Acceptance suite: every release-gating criterion as one test, each
//! printing a single PASS/FAIL line (run with `--nocapture` to see them).
//!
//! The Monte-Carlo coverage runs (criteria 3-5) share one set of experiment
//! results, computed once on first use; expect a few minutes of wall time.

use climate_cli::analysis::{analyze, AnalyzeOptions};
use climate_cli::design::{build_two_period_design, equally_spaced_times};
use climate_cli::stackfile::{write_covariates, write_stack};
use climate_cli::surrogate::{generate, SurrogateSpec};
use cope_core::bootstrap::{
    bootstrap_realization, sample_covariance, sup_distribution_blocked, Region, Threshold,
};
use cope_core::cope::cope_sets;
use cope_core::glm::{fit, FieldStack, FitOptions};
use cope_core::grid::{GridGeometry, RegionMask, ScalarField};
use cope_core::rng;
use cope_core::simlab::{
    cdf_comparison, coverage_experiment_paired, CoverageReport, ExperimentConfig, NoiseKind,
    NoiseSpec, SimBoundary,
};
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::LazyLock;
use std::time::Instant;

const COVERAGE_SEED: u64 = 20260808;

fn pass(criterion: &str, details: String) {
    println!("criterion {criterion}: PASS ({details})");
}

struct CoverageRuns {
    n1_60_true: CoverageReport,
    n1_60_plugin: CoverageReport,
    n1_240: CoverageReport,
    n2_60: CoverageReport,
    n2_240: CoverageReport,
    n3_60: CoverageReport,
    n3_240: CoverageReport,
}

/// The Table-1-style runs: 1000 trials, M = 1000 bootstrap replicates each.
static RUNS: LazyLock<CoverageRuns> = LazyLock::new(|| {
    let run = |kind: NoiseKind, n: usize, boundaries: &[SimBoundary]| {
        let mut config = ExperimentConfig::new(kind, n);
        config.trials = 1000;
        config.boot_reps = 1000;
        config.seed = COVERAGE_SEED;
        let t = Instant::now();
        let reports = coverage_experiment_paired(&config, boundaries).unwrap();
        eprintln!(
            "  [coverage run] noise {} n {}: {} in {:.0}s",
            kind.id(),
            n,
            reports
                .iter()
                .map(|r| format!("{} {:.4}+-{:.4}", r.boundary.label(), r.coverage, r.stderr))
                .collect::<Vec<_>>()
                .join(", "),
            t.elapsed().as_secs_f64()
        );
        reports
    };
    let both = [SimBoundary::TrueContour, SimBoundary::PluginContour];
    let plugin = [SimBoundary::PluginContour];
    let mut n1_60 = run(NoiseKind::Noise1, 60, &both).into_iter();
    CoverageRuns {
        n1_60_true: n1_60.next().unwrap(),
        n1_60_plugin: n1_60.next().unwrap(),
        n1_240: run(NoiseKind::Noise1, 240, &plugin).pop().unwrap(),
        n2_60: run(NoiseKind::Noise2, 60, &plugin).pop().unwrap(),
        n2_240: run(NoiseKind::Noise2, 240, &plugin).pop().unwrap(),
        n3_60: run(NoiseKind::Noise3, 60, &plugin).pop().unwrap(),
        n3_240: run(NoiseKind::Noise3, 240, &plugin).pop().unwrap(),
    }
});

#[test]
fn criterion_01_nesting_law() {
    // 1000 randomized (field, c, a) configurations; the nested inclusion
    // must hold in every single one.
    let mut rng = rng::stream(1001, 0);
    let geom = GridGeometry::unit(16, 12).unwrap();
    let mut failures = 0usize;
    for trial in 0..1000 {
        let smooth = trial % 2 == 0;
        let values: Vec<f64> = (0..192)
            .map(|i| {
                if smooth {
                    let (x, y) = ((i % 16) as f64, (i / 16) as f64);
                    (x * 0.4).sin() * (y * 0.3).cos() * 3.0 + rng.gen_range(-0.5..0.5)
                } else {
                    rng.gen_range(-50.0..50.0)
                }
            })
            .collect();
        let field = ScalarField::new(geom, values).unwrap();
        let c: f64 = rng.gen_range(-3.0..3.0);
        let a: f64 = rng.gen_range(0.0..4.0);
        let dev: Vec<f64> = field.values().iter().map(|v| v - c).collect();
        let dev = ScalarField::new(geom, dev).unwrap();
        let masks = cope_sets(
            &dev,
            &Threshold {
                a,
                alpha: 0.1,
                order_index: 0,
            },
        )
        .unwrap();
        let nested = masks.upper.is_subset_of(&masks.point_estimate).unwrap()
            && masks.point_estimate.is_subset_of(&masks.lower).unwrap();
        if !nested {
            failures += 1;
        }
    }
    assert_eq!(failures, 0, "nesting violated in {failures}/1000 configurations");
    pass("01 nesting law", "1000/1000 randomized configurations nested".into());
}

#[test]
fn criterion_02_bootstrap_covariance() {
    // 3x3 grid, n = 5 fixed residual layers, 2e5 replicates: the empirical
    // covariance of the bootstrap field matches the sample covariance
    // entrywise within 0.02.
    let geom = GridGeometry::unit(3, 3).unwrap();
    let n = 5;
    let mut seed_rng = rng::stream(77, 0);
    let values: Vec<f64> = (0..n * 9)
        .map(|_| seed_rng.sample::<f64, _>(StandardNormal))
        .collect();
    let residuals = FieldStack::from_values(geom, n, values).unwrap();
    let m = 200_000;
    let mut prod = vec![0.0f64; 81];
    let mut g = vec![0.0f64; n];
    for rep in 0..m {
        let mut r = rng::stream(4242, rep as u64);
        for gj in g.iter_mut() {
            *gj = r.sample(StandardNormal);
        }
        let field = bootstrap_realization(&residuals, &g).unwrap();
        let v = field.values();
        for i in 0..9 {
            for j in 0..9 {
                prod[i * 9 + j] += v[i] * v[j];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..9 {
        for j in 0..9 {
            let emp = prod[i * 9 + j] / m as f64;
            let expect = sample_covariance(&residuals, i, j).unwrap();
            worst = worst.max((emp - expect).abs());
        }
    }
    assert!(worst <= 0.02, "worst covariance error {worst:.4} > 0.02");
    pass(
        "02 bootstrap covariance",
        format!("worst entrywise error {worst:.4} <= 0.02 over 2e5 replicates"),
    );
}

#[test]
fn criterion_03_table1_replication() {
    let r1 = &RUNS.n1_60_plugin;
    assert!(
        (0.82..=0.91).contains(&r1.coverage),
        "noise 1, n=60 plug-in coverage {:.4} outside [0.82, 0.91]",
        r1.coverage
    );
    // Known red: the true noise-3 n=240 coverage of this testbed is
    // 0.931 +- 0.004 (3900 independent trials across seeds 1, 2026 and
    // 20260808), a hair above this window's top. On a fixed pixel grid the
    // inclusion event concentrates on boundary-straddling cells whose
    // standardized margins grow like sqrt(n), so large-n coverage drifts
    // conservatively above the nominal 0.9; where that bites depends on the
    // (unspecified upstream) signal geometry. The window is kept as stated
    // rather than widened to fit.
    let r3 = &RUNS.n3_240;
    assert!(
        (0.86..=0.93).contains(&r3.coverage),
        "noise 3, n=240 plug-in coverage {:.4} outside [0.86, 0.93] \
         (multi-seed consensus 0.931 +- 0.004; window edge sits below the \
         testbed's true value)",
        r3.coverage
    );
    pass(
        "03 table-1 replication",
        format!(
            "noise1 n=60: {:.4} in [0.82,0.91]; noise3 n=240: {:.4} in [0.86,0.93]",
            r1.coverage, r3.coverage
        ),
    );
}

#[test]
fn criterion_04_coverage_trend() {
    let pairs = [
        ("noise 1", &RUNS.n1_60_plugin, &RUNS.n1_240),
        ("noise 2", &RUNS.n2_60, &RUNS.n2_240),
        ("noise 3", &RUNS.n3_60, &RUNS.n3_240),
    ];
    let mut details = Vec::new();
    for (name, lo_n, hi_n) in pairs {
        let bound = lo_n.coverage - 2.0 * lo_n.stderr;
        assert!(
            hi_n.coverage >= bound,
            "{name}: coverage(240) = {:.4} < coverage(60) - 2 se = {bound:.4}",
            hi_n.coverage
        );
        details.push(format!(
            "{name} {:.3}->{:.3}",
            lo_n.coverage, hi_n.coverage
        ));
    }
    pass("04 coverage trend", details.join(", "));
}

#[test]
fn criterion_05_boundary_choice_insensitivity() {
    let t = &RUNS.n1_60_true;
    let p = &RUNS.n1_60_plugin;
    let diff = (t.coverage - p.coverage).abs();
    let pooled = (t.stderr.powi(2) + p.stderr.powi(2)).sqrt();
    assert!(
        diff <= 3.0 * pooled,
        "true vs plug-in coverage differ by {diff:.4} > 3 pooled se = {:.4}",
        3.0 * pooled
    );
    pass(
        "05 boundary-choice insensitivity",
        format!("|{:.4} - {:.4}| = {diff:.4} <= {:.4}", t.coverage, p.coverage, 3.0 * pooled),
    );
}

#[test]
fn criterion_06_two_period_constants() {
    for n in [4usize, 58, 200] {
        let t = equally_spaced_times(n / 2);
        let d = build_two_period_design(&t, &t).unwrap();
        let scale_err = (d.design.scale() - 2.0 / (n as f64).sqrt()).abs();
        let vnorm_err = (d.design.v_norm() - 1.0).abs();
        assert!(scale_err <= 1e-10, "n={n}: |scale - 2/sqrt(n)| = {scale_err:.2e}");
        assert!(vnorm_err <= 1e-10, "n={n}: ||v| - 1| = {vnorm_err:.2e}");
    }
    pass(
        "06 two-period constants",
        "scale = 2/sqrt(n) and |v| = 1 to 1e-10 for n in {4, 58, 200}".into(),
    );
}

#[test]
fn criterion_07_glm_orthogonality() {
    // random stack, L = 4096 cells, n = 240, p = 4 (two-period design with
    // times normalized to [-1, 1] so X entries are O(1))
    let t0 = Instant::now();
    let geom = GridGeometry::unit(64, 64).unwrap();
    let (n, p) = (240usize, 4usize);
    let half = n / 2;
    let times: Vec<f64> = (0..half)
        .map(|j| 2.0 * j as f64 / (half - 1) as f64 - 1.0)
        .collect();
    let d = build_two_period_design(&times, &times).unwrap();
    let mut data_rng = rng::stream(88, 0);
    let values: Vec<f64> = (0..n * geom.len())
        .map(|_| data_rng.gen_range(-5.0..5.0))
        .collect();
    let y_max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let stack = FieldStack::from_values(geom, n, values).unwrap();
    let res = fit(&stack, &d.design, FitOptions::default()).unwrap();
    let x = d.design.x();
    let mut worst = 0.0f64;
    for cell in 0..geom.len() {
        for k in 0..p {
            let mut dot = 0.0;
            for j in 0..n {
                dot += x[j * p + k] * res.residuals.layer(j)[cell];
            }
            worst = worst.max(dot.abs());
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(
        worst <= 1e-8 * y_max,
        "max |X^T R| = {worst:.3e} > 1e-8 |Y| = {:.3e}",
        1e-8 * y_max
    );
    pass(
        "07 glm orthogonality",
        format!("max |X^T R| = {worst:.2e} <= 1e-8 |Y|, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_08_cdf_check() {
    // bootstrap cdf (one n = 60 sample, M = 5000) vs direct simulation
    // (1e4 error fields) of the standardized supremum on the true boundary
    let cmp = cdf_comparison(NoiseSpec::standard(NoiseKind::Noise1), 60, 5000, 10_000, 7).unwrap();
    assert!(cmp.ks <= 0.05, "KS distance {:.4} > 0.05", cmp.ks);
    pass(
        "08 cdf check",
        format!("KS(bootstrap, direct) = {:.4} <= 0.05", cmp.ks),
    );
}

#[test]
fn criterion_09_performance() {
    // (a) M = 1000 whole-domain bootstrap, 64x64, n = 240, within 2 seconds
    let geom = GridGeometry::unit(64, 64).unwrap();
    let n = 240;
    let mut data_rng = rng::stream(5150, 0);
    let values: Vec<f64> = (0..n * geom.len())
        .map(|_| data_rng.sample::<f64, _>(StandardNormal))
        .collect();
    let residuals = FieldStack::from_values(geom, n, values).unwrap();
    let domain = RegionMask::full(geom);
    let t0 = Instant::now();
    let sup = sup_distribution_blocked(&residuals, Region::Cells(&domain), 1000, 3, 64).unwrap();
    let boot_secs = t0.elapsed().as_secs_f64();
    assert_eq!(sup.values().len(), 1000);
    assert!(boot_secs <= 2.0, "whole-domain bootstrap took {boot_secs:.2}s > 2s");

    // (b) the full surrogate analysis (L ~ 1e4 cells, n = 58, M = 1000,
    // ingestion + fit + bootstrap + masks + serialization + figure) in 5s
    let dir = {
        let mut p = std::env::temp_dir();
        p.push(format!("cope-acceptance-perf-{}", std::process::id()));
        std::fs::create_dir_all(&p).unwrap();
        p
    };
    let surrogate = generate(&SurrogateSpec::default()).unwrap();
    let stack_path = dir.join("stack.cope");
    let cov_path = dir.join("covs.csv");
    write_stack(&stack_path, &surrogate.stack).unwrap();
    write_covariates(&cov_path, &surrogate.covariates).unwrap();
    let opts = AnalyzeOptions {
        boot_reps: 1000,
        out_prefix: dir.join("out"),
        ..Default::default()
    };
    let t0 = Instant::now();
    let out = analyze(&stack_path, &cov_path, &opts).unwrap();
    let analyze_secs = t0.elapsed().as_secs_f64();
    assert!(out.result.masks.upper.count() > 0);
    assert!(analyze_secs <= 5.0, "surrogate analysis took {analyze_secs:.2}s > 5s");
    std::fs::remove_dir_all(&dir).ok();
    pass(
        "09 performance",
        format!("bootstrap {boot_secs:.2}s <= 2s; full analysis {analyze_secs:.2}s <= 5s"),
    );
}

#[test]
fn criterion_10_simulate_determinism() {
    let dir = {
        let mut p = std::env::temp_dir();
        p.push(format!("cope-acceptance-det-{}", std::process::id()));
        std::fs::create_dir_all(&p).unwrap();
        p
    };
    let out_csv = dir.join("run.csv");
    let run = || {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_climate-cli"))
            .args(["simulate", "--noise", "2", "--n", "24", "--trials", "25"])
            .args(["--boot-reps", "300", "--boundary", "plugin", "--seed", "7"])
            .args(["--out", out_csv.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(&out_csv).unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second, "simulate output differs between identical runs");
    assert!(!first.is_empty());
    std::fs::remove_dir_all(&dir).ok();
    pass(
        "10 simulate determinism",
        format!("two identical runs produced byte-identical CSV ({} bytes)", first.len()),
    );
}
