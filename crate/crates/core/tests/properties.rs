use std::path::Path;

use proptest::prelude::*;

use tatopt::io::{decode_field, encode_field};
use tatopt::placement::{centered_arc, place_threshold, BoundaryGeometry, BoundaryProfile, SensorArcs};
use tatopt::tv::{prox_tv_grid, tv_grid};
use tatopt::{fft_forward, fft_inverse, Grid2D, RealField};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_round_trip(values in prop::collection::vec(-10.0f64..10.0, 64)) {
        let grid = Grid2D::new(4.0, 8).unwrap();
        let f = RealField::from_values(grid, values).unwrap();
        let back = fft_inverse(&fft_forward(&f));
        for (a, b) in back.values().iter().zip(f.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn field_encoding_round_trips(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 16)) {
        let f = RealField::from_values(Grid2D::new(2.0, 4).unwrap(), values).unwrap();
        prop_assert_eq!(decode_field(&encode_field(&f), Path::new("p")).unwrap(), f);
    }

    #[test]
    fn threshold_measure_and_sandwich(
        psi in prop::collection::vec(0.0f64..5.0, 128),
        fraction in 0.05f64..0.95,
    ) {
        let geom = BoundaryGeometry::ellipse(1.0, 0.7, 128).unwrap();
        let out = place_threshold(&BoundaryProfile::new(psi.clone()).unwrap(), fraction, &geom).unwrap();
        let weights: Vec<f64> = geom.speed_samples().iter().map(|s| s * geom.dtheta()).collect();
        let wmax = weights.iter().cloned().fold(0.0, f64::max);
        let measure: f64 = out.indicator.active().iter().zip(&weights).filter(|(a, _)| **a).map(|(_, w)| w).sum();
        prop_assert!((measure - fraction * geom.perimeter()).abs() <= wmax + 1e-12);
        for (&v, &on) in psi.iter().zip(out.indicator.active()) {
            prop_assert!(v <= out.lambda || on);
            prop_assert!(!on || v >= out.lambda);
        }
    }

    #[test]
    fn centred_arc_has_requested_length(center in 0.0f64..std::f64::consts::TAU, frac in 0.01f64..0.99) {
        let geom = BoundaryGeometry::ellipse(1.0, 0.6, 512).unwrap();
        let ell = frac * geom.perimeter();
        let arc = centered_arc(&geom, center, ell).unwrap();
        let len = geom.arc_length_ccw(arc.starts()[0], arc.ends()[0]);
        prop_assert!((len - ell).abs() <= 1e-9 * geom.perimeter());
    }

    #[test]
    fn spaced_arcs_are_accepted(offset in 0.0f64..std::f64::consts::TAU, n in 1usize..6) {
        let geom = BoundaryGeometry::circle(1.0, 256).unwrap();
        let step = std::f64::consts::TAU / n as f64;
        let starts: Vec<f64> = (0..n).map(|k| offset + k as f64 * step).collect();
        let arcs = SensorArcs::new(&geom, starts, 0.5 * step).unwrap();
        prop_assert!(arcs.gaps(&geom).iter().all(|&g| g >= 0.5 * step - 1e-9));
    }

    #[test]
    fn prox_never_increases_tv(values in prop::collection::vec(0.0f64..1.0, 16), lambda in 0.0f64..0.5) {
        let v = prox_tv_grid(&values, 4, lambda, 100, 0.125);
        prop_assert!(tv_grid(&v, 4) <= tv_grid(&values, 4) + 1e-12);
        let mean_in: f64 = values.iter().sum();
        let mean_out: f64 = v.iter().sum();
        prop_assert!((mean_in - mean_out).abs() <= 1e-9);
    }
}
