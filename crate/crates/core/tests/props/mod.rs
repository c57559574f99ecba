//! Property suites shared by the core integration tests and the acceptance
//! gate. Each suite runs a deterministic proptest runner and reports the
//! first minimal counterexample.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use ifs_core::impulse::first_hit;
use ifs_core::measure::{
    lift_from_quotient, push_to_quotient, tv, DiscreteMeasure, Partition, MASS_TOL,
};
use ifs_core::quotient::{project, psi, GluingGraph};
use ifs_core::{build_trajectory, phi, sample_impulsive_set, scenarios, Error, Point, Scenario};

pub type Suite = (&'static str, fn() -> Result<(), String>);

pub const SUITES: &[Suite] = &[
    ("semigroup", semigroup),
    ("segments_follow_base_flow", segments_follow_base_flow),
    ("right_continuity", right_continuity),
    ("tau_positive", tau_positive),
    ("deterministic_trajectories", deterministic_trajectories),
    ("pushforward_functorial", pushforward_functorial),
    ("pushforward_inverse", pushforward_inverse),
    ("mass_conservation", mass_conservation),
    ("tv_range", tv_range),
    ("pseudometric_axioms", pseudometric_axioms),
    ("metric_positivity", metric_positivity),
    ("projection_glues_jumps", projection_glues_jumps),
    ("psi_semigroup", psi_semigroup),
    ("quotient_round_trip", quotient_round_trip),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn examples() -> [Scenario; 2] {
    [scenarios::example_2_1(), scenarios::example_2_2()]
}

fn annulus_point() -> impl Strategy<Value = Point> {
    (1.0f64..=2.0, 0.0f64..TAU).prop_map(|(r, th)| Point::polar(r, th).unwrap())
}

fn lower_arc_point() -> impl Strategy<Value = Point> {
    (PI + 0.01..TAU - 0.01).prop_map(|th| Point::polar(1.0, th).unwrap())
}

fn err(e: Error) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn measure_on_annulus() -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((annulus_point(), 0.01f64..1.0), 1..20)
        .prop_map(|atoms| DiscreteMeasure::normalized(atoms).unwrap())
}

/// `phi(x, s + t) = phi(phi(x, s), t)`.
pub fn semigroup() -> Result<(), String> {
    run(
        48,
        (0usize..2, annulus_point(), 0.0f64..4.0, 0.0f64..4.0),
        |(k, x, s, t)| {
            let sc = &examples()[k];
            let direct = phi(sc, &x, s + t).map_err(err)?;
            let mid = phi(sc, &x, s).map_err(err)?;
            let composed = phi(sc, &mid, t).map_err(err)?;
            prop_assert!(
                direct.distance(&composed) <= 1e-6,
                "{direct:?} vs {composed:?}"
            );
            Ok(())
        },
    )
}

/// Inside a segment the trajectory is the base flow from the segment start.
pub fn segments_follow_base_flow() -> Result<(), String> {
    run(
        48,
        (0usize..2, annulus_point(), 0.0f64..1.0),
        |(k, x, u)| {
            let sc = &examples()[k];
            let traj = build_trajectory(sc, &x, 12.0).map_err(err)?;
            for seg in &traj.segments {
                let t = seg.t_start + u * seg.duration;
                let a = traj.state_at(&sc.flow, t, 0.0).map_err(err)?;
                let b = sc.flow.advance(&seg.start, t - seg.t_start).map_err(err)?;
                prop_assert!(a.distance(&b) <= 1e-8);
            }
            Ok(())
        },
    )
}

pub fn right_continuity() -> Result<(), String> {
    run(32, (0usize..2, annulus_point()), |(k, x)| {
        let sc = &examples()[k];
        let traj = build_trajectory(sc, &x, 12.0).map_err(err)?;
        for e in &traj.events {
            prop_assert_eq!(phi(sc, &x, e.time).map_err(err)?, e.image);
        }
        Ok(())
    })
}

/// Hits come strictly after `tau_min`, on `D`, in increasing order.
pub fn tau_positive() -> Result<(), String> {
    run(64, (0usize..2, annulus_point()), |(k, x)| {
        let sc = &examples()[k];
        let tol = sc.knobs.hit_bisection_tol;
        if let Some(hit) = first_hit(sc, &x, 20.0).map_err(err)? {
            prop_assert!(hit.tau > sc.knobs.tau_min);
        }
        let traj = build_trajectory(sc, &x, 20.0).map_err(err)?;
        let mut last = 0.0;
        for e in &traj.events {
            prop_assert!(e.time > last);
            last = e.time;
            prop_assert!(sc.surface.section.eval_point(&e.hit).unwrap().abs() <= tol);
            prop_assert!(sc.surface.constraint.eval_point(&e.hit).unwrap() >= -tol);
            prop_assert_eq!(sc.map.apply(&e.hit).unwrap(), e.image);
        }
        Ok(())
    })
}

pub fn deterministic_trajectories() -> Result<(), String> {
    run(16, (0usize..2, annulus_point()), |(k, x)| {
        let a = build_trajectory(&examples()[k], &x, 15.0).map_err(err)?;
        let b = build_trajectory(&examples()[k], &x, 15.0).map_err(err)?;
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        Ok(())
    })
}

/// `(g o f)_* = g_* o f_*`, exactly.
pub fn pushforward_functorial() -> Result<(), String> {
    run(
        64,
        (measure_on_annulus(), 0.0f64..3.0, 0.0f64..3.0),
        |(mu, s, t)| {
            let sc = scenarios::example_2_1();
            let f = |x: &Point| phi(&sc, x, s);
            let g = |x: &Point| phi(&sc, x, t);
            let composed = mu.pushforward(|x| g(&f(x)?)).map_err(err)?;
            let stepwise = mu
                .pushforward(f)
                .map_err(err)?
                .pushforward(g)
                .map_err(err)?;
            prop_assert_eq!(composed, stepwise);
            Ok(())
        },
    )
}

/// `(f^{-1})_* o f_* = id` for an invertible map (a rigid rotation).
pub fn pushforward_inverse() -> Result<(), String> {
    run(64, (measure_on_annulus(), -10.0f64..10.0), |(mu, a)| {
        let rot = |x: &Point, a: f64| Point::polar(x.coords()[0], x.coords()[1] + a).map_err(err);
        let back = mu
            .pushforward(|x| rot(x, a).map_err(|_| Error::OutOfDomain))
            .map_err(err)?;
        let back = back
            .pushforward(|x| rot(x, -a).map_err(|_| Error::OutOfDomain))
            .map_err(err)?;
        for ((p, w), (q, v)) in mu.atoms().iter().zip(back.atoms()) {
            prop_assert!(p.distance(q) <= 1e-12);
            prop_assert_eq!(w, v);
        }
        Ok(())
    })
}

pub fn mass_conservation() -> Result<(), String> {
    run(
        32,
        (measure_on_annulus(), 0.0f64..3.0, 1usize..400),
        |(mu, t, n)| {
            let sc = scenarios::example_2_1();
            prop_assert!((mu.total_mass() - 1.0).abs() <= MASS_TOL);
            let pushed = mu.pushforward(|x| phi(&sc, x, t)).map_err(err)?;
            prop_assert!((pushed.total_mass() - 1.0).abs() <= MASS_TOL);
            let kb = ifs_core::measure::kb_average(&sc, &Point::polar(1.3, t).unwrap(), 0.05, n)
                .map_err(err)?;
            prop_assert!((kb.total_mass() - 1.0).abs() <= MASS_TOL);
            let kept = mu.restrict(|x| x.coords()[0] < 1.5);
            if let Ok(kept) = kept {
                prop_assert!((kept.total_mass() - 1.0).abs() <= MASS_TOL);
            }
            Ok(())
        },
    )
}

pub fn tv_range() -> Result<(), String> {
    run(
        64,
        (measure_on_annulus(), measure_on_annulus(), 1usize..32),
        |(mu, nu, m)| {
            let part = Partition::grid_over(&scenarios::example_2_1().domain, m).unwrap();
            let d = tv(&part, &mu, &nu).map_err(err)?;
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(tv(&part, &mu, &mu).map_err(err)?, 0.0);
            Ok(())
        },
    )
}

fn graph() -> (Scenario, GluingGraph) {
    let sc = scenarios::example_2_1();
    let g = GluingGraph::build(&sc, 16).unwrap();
    (sc, g)
}

pub fn pseudometric_axioms() -> Result<(), String> {
    let (sc, g) = graph();
    run(
        200,
        (annulus_point(), annulus_point(), annulus_point()),
        |(a, b, c)| {
            let (a, b, c) = (
                project(&sc, &a).unwrap(),
                project(&sc, &b).unwrap(),
                project(&sc, &c).unwrap(),
            );
            let ab = g.distance(&a, &b);
            let ba = g.distance(&b, &a);
            let bc = g.distance(&b, &c);
            let ac = g.distance(&a, &c);
            prop_assert!(ab >= 0.0 && g.distance(&a, &a) == 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(ac <= ab + bc + 1e-9, "{ac} > {ab} + {bc}");
            Ok(())
        },
    )
}

/// Distinct classes at least 0.05 apart, away from the gluing, stay apart.
pub fn metric_positivity() -> Result<(), String> {
    let (sc, g) = graph();
    let away = |p: &Point| {
        let e = p.embed();
        e[1].abs() > 0.1
    };
    run(64, (annulus_point(), annulus_point()), |(a, b)| {
        prop_assume!(away(&a) && away(&b) && a.distance(&b) >= 0.05);
        let d = g.distance(&project(&sc, &a).unwrap(), &project(&sc, &b).unwrap());
        prop_assert!(d > 0.01, "{d}");
        Ok(())
    })
}

/// `pi o I = pi` on `D`.
pub fn projection_glues_jumps() -> Result<(), String> {
    for sc in examples() {
        let d = sample_impulsive_set(&sc, 16).map_err(|e| e.to_string())?;
        for x in d.iter().take(50) {
            let a = project(&sc, x).map_err(|e| e.to_string())?;
            let b = project(&sc, &sc.map.apply(x).unwrap()).map_err(|e| e.to_string())?;
            if a != b {
                return Err(format!("{x:?}: {a:?} != {b:?}"));
            }
        }
    }
    Ok(())
}

pub fn psi_semigroup() -> Result<(), String> {
    let sc = scenarios::example_2_1();
    run(
        48,
        (lower_arc_point(), 0.0f64..3.0, 0.0f64..3.0),
        |(x, s, t)| {
            let q = project(&sc, &x).unwrap();
            let direct = psi(&sc, &q, s + t).map_err(err)?;
            let composed = psi(&sc, &psi(&sc, &q, s).map_err(err)?, t).map_err(err)?;
            prop_assert!(direct.canonical().distance(composed.canonical()) <= 1e-6);
            Ok(())
        },
    )
}

/// `lift(push(mu)) = mu` atom for atom off `D`.
pub fn quotient_round_trip() -> Result<(), String> {
    let sc = scenarios::example_2_1();
    run(64, measure_on_annulus(), |mu| {
        let Ok(mu) = mu.restrict(|x| !sc.in_d(x).unwrap()) else {
            return Ok(());
        };
        let back = lift_from_quotient(&push_to_quotient(&sc, &mu).map_err(err)?).map_err(err)?;
        prop_assert_eq!(back, mu);
        Ok(())
    })
}
