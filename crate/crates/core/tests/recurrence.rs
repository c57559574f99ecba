use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use ifs_core::nonwandering::{
    estimate_omega, is_recurrent, refinement_consistent, Grid, RecurrenceParams,
};
use ifs_core::{scenarios, Point};

/// Closed-form orbit of the rotation example: reach the positive axis at
/// `2pi - th`, then halve the distance to the unit circle every `pi`.
fn rotation_orbit(r: f64, th: f64, t: f64) -> Point {
    let first = TAU - th;
    if t < first {
        return Point::polar(r, th + t).unwrap();
    }
    let n = 1 + ((t - first) / PI).floor() as i32;
    let rn = 1.0 + (r - 1.0) / 2f64.powi(n);
    Point::polar(rn, PI + (t - first - (n - 1) as f64 * PI)).unwrap()
}

fn closest_return(r: f64, th: f64, p: &RecurrenceParams) -> f64 {
    let x = Point::polar(r, th).unwrap();
    let steps = (p.horizon / p.sample_step) as usize;
    (0..=steps)
        .map(|k| k as f64 * p.sample_step)
        .filter(|&t| t >= p.t_min)
        .map(|t| rotation_orbit(r, th, t).distance(&x))
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn recurrence_agrees_with_the_closed_form(r in 1.0f64..1.3, th in 0.05f64..TAU - 0.05) {
        let sc = scenarios::example_2_1();
        let p = RecurrenceParams::new(0.05, 0.5, 30.0, 1e-3);
        let gap = closest_return(r, th, &p);
        prop_assume!(gap < 0.5 * p.eps_ball || gap > 1.5 * p.eps_ball);
        let rec = is_recurrent(&sc, &Point::polar(r, th).unwrap(), &p).unwrap();
        prop_assert_eq!(rec.recurrent, gap < p.eps_ball, "closest return {}", gap);
        prop_assert!(!rec.zeno);
    }
}

#[test]
fn oracle_orbit_matches_the_simulator() {
    let sc = scenarios::example_2_1();
    for (r, th) in [(1.0, PI), (1.7, 0.3), (2.0, 5.0)] {
        for k in 1..40 {
            let t = 0.37 * k as f64;
            let a = ifs_core::phi(&sc, &Point::polar(r, th).unwrap(), t).unwrap();
            assert!(
                a.distance(&rotation_orbit(r, th, t)) < 1e-9,
                "({r}, {th}) at {t}"
            );
        }
    }
}

#[test]
fn finer_grids_keep_the_coarse_estimate() {
    let sc = scenarios::example_2_1();
    let p = RecurrenceParams::new(0.1, 0.5, 30.0, 1e-3);
    let coarse = estimate_omega(&sc, &Grid::over(&sc.domain, 20).unwrap(), &p).unwrap();
    let fine = estimate_omega(&sc, &Grid::over(&sc.domain, 40).unwrap(), &p).unwrap();
    assert!(coarse.flagged_count() > 0);
    assert!(refinement_consistent(&coarse, &fine));
}
