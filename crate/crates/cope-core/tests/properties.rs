//! Property tests for the grid/contour/cope invariants.

use cope_core::bootstrap::{threshold, RegionDescriptor, SupSample, Threshold};
use cope_core::contour::extract_boundary;
use cope_core::cope::cope_sets;
use cope_core::grid::{GridGeometry, ScalarField};
use proptest::prelude::*;

fn field_strategy(nx: usize, ny: usize) -> impl Strategy<Value = ScalarField> {
    prop::collection::vec(-10.0f64..10.0, nx * ny).prop_map(move |values| {
        ScalarField::new(GridGeometry::unit(nx, ny).unwrap(), values).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn excursion_monotone_in_level(field in field_strategy(8, 6), c1 in -5.0f64..5.0, dc in 0.0f64..5.0) {
        let m_hi = field.excursion_set(c1 + dc).unwrap();
        let m_lo = field.excursion_set(c1).unwrap();
        prop_assert!(m_hi.is_subset_of(&m_lo).unwrap());
    }

    #[test]
    fn excursion_matches_pointwise_scan(field in field_strategy(7, 5), c in -8.0f64..8.0) {
        let mask = field.excursion_set(c).unwrap();
        for (i, &v) in field.values().iter().enumerate() {
            prop_assert_eq!(mask.is_inside(i), v >= c);
        }
    }

    #[test]
    fn contour_points_sit_on_the_level(field in field_strategy(9, 9), c in -6.0f64..6.0) {
        let contour = extract_boundary(&field, c).unwrap();
        let values = field.interpolate_on_contour(&contour).unwrap();
        for v in values {
            prop_assert!((v - c).abs() <= 1e-10);
        }
    }

    #[test]
    fn interpolation_of_constants_is_exact(field in field_strategy(8, 8), c in -4.0f64..4.0, k in -7.0f64..7.0) {
        let contour = extract_boundary(&field, c).unwrap();
        let constant = ScalarField::constant(*field.geometry(), k);
        for v in constant.interpolate_on_contour(&contour).unwrap() {
            prop_assert_eq!(v, k);
        }
    }

    #[test]
    fn interpolated_values_stay_between_flanking_cells(
        field in field_strategy(8, 8),
        probe in field_strategy(8, 8),
        c in -4.0f64..4.0,
    ) {
        let contour = extract_boundary(&field, c).unwrap();
        let values = probe.interpolate_on_contour(&contour).unwrap();
        for (p, v) in contour.points().iter().zip(values) {
            let a = probe.values()[p.cell_lo];
            let b = probe.values()[p.cell_hi];
            prop_assert!(v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12);
        }
    }

    #[test]
    fn cope_masks_nest_for_any_threshold(field in field_strategy(8, 8), a in 0.0f64..6.0) {
        let thr = Threshold { a, alpha: 0.1, order_index: 0 };
        let masks = cope_sets(&field, &thr).unwrap();
        prop_assert!(masks.upper.is_subset_of(&masks.point_estimate).unwrap());
        prop_assert!(masks.point_estimate.is_subset_of(&masks.lower).unwrap());
        prop_assert!(masks.band.is_subset_of(&masks.lower).unwrap());
    }

    #[test]
    fn threshold_coverage_property(values in prop::collection::vec(0.0f64..50.0, 1..400), alpha in 0.01f64..0.99) {
        let m = values.len();
        let sample = SupSample::from_values(values, 0, RegionDescriptor::Degenerate, 0);
        let t = threshold(&sample, alpha).unwrap();
        let frac = sample.values().iter().filter(|&&v| v <= t.a).count() as f64 / m as f64;
        prop_assert!(frac >= 1.0 - alpha - 1e-9);
        prop_assert!(t.order_index >= 1 && t.order_index <= m);
    }
}

#[test]
fn interpolation_bound_holds_over_a_thousand_random_fields() {
    use rand::Rng;
    let geom = GridGeometry::unit(10, 8).unwrap();
    let mut rng = cope_core::rng::stream(2024, 0);
    for _ in 0..1000 {
        let field = ScalarField::new(
            geom,
            (0..80).map(|_| rng.gen_range(-5.0..5.0)).collect(),
        )
        .unwrap();
        let probe = ScalarField::new(
            geom,
            (0..80).map(|_| rng.gen_range(-5.0..5.0)).collect(),
        )
        .unwrap();
        let contour = extract_boundary(&field, rng.gen_range(-2.0..2.0)).unwrap();
        for (p, v) in contour
            .points()
            .iter()
            .zip(probe.interpolate_on_contour(&contour).unwrap())
        {
            let lo = probe.values()[p.cell_lo].min(probe.values()[p.cell_hi]);
            let hi = probe.values()[p.cell_lo].max(probe.values()[p.cell_hi]);
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}
