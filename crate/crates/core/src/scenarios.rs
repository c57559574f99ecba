//! Built-in scenarios on the annulus `1 <= r <= 2`.
//!
//! The shipped TOML files describe the same systems; a test in the CLI crate
//! keeps the two in sync.

use crate::expr::{Expr, FieldExpr};
use crate::flow::BaseFlow;
use crate::impulse::{Crossing, ImpulseMap, ImpulseSurface, Knobs, Scenario};
use crate::point::{Chart, Domain};

fn expr(src: &str) -> Expr {
    Expr::parse(src, Chart::Polar2d, 2).expect("built-in expression")
}

fn field(src: &str) -> FieldExpr {
    FieldExpr::parse(src, 2, Chart::Polar2d).expect("built-in field")
}

fn annulus() -> Domain {
    Domain::annulus(1.0, 2.0).expect("built-in domain")
}

/// `D` is the positive x-axis, crossed counter-clockwise.
fn positive_axis() -> ImpulseSurface {
    ImpulseSurface::new(expr("sin(th)"), expr("cos(th)"), Crossing::Ascending)
}

fn build(
    name: &str,
    flow: BaseFlow,
    surface: ImpulseSurface,
    map: ImpulseMap,
    horizon: f64,
) -> Scenario {
    let knobs = Knobs {
        horizon_default: horizon,
        ..Knobs::default()
    };
    Scenario::new(name, annulus(), flow, surface, map, knobs).expect("built-in scenario")
}

/// Rotation with `I(r, 0) = (-(1 + r) / 2, 0)`.
pub fn example_2_1() -> Scenario {
    let map = ImpulseMap::new(field("(1 + r) / 2; pi"), Some(field("2 * r - 1; 0")));
    build("example21", BaseFlow::Rotation, positive_axis(), map, 50.0)
}

/// Contraction towards the unit circle with the single-point set
/// `D = {(1, 0)}` and `I(1, 0) = (2, 0)`.
pub fn example_2_2() -> Scenario {
    let surface = ImpulseSurface::new(
        expr("sin(th)"),
        expr("1e-12 - abs(r - 1) - (1 - cos(th))"),
        Crossing::Ascending,
    );
    let map = ImpulseMap::new(field("r + 1; th"), Some(field("r - 1; th")));
    build("example22", BaseFlow::Contraction, surface, map, 20.0)
}

/// Jumps land `5e-7` radians before `D`, so impulses accumulate.
pub fn zeno() -> Scenario {
    let map = ImpulseMap::new(field("r; th - 5e-7"), Some(field("r; th + 5e-7")));
    build("zeno", BaseFlow::Rotation, positive_axis(), map, 20.0)
}

/// `I` is the identity on `D`.
pub fn identity_on_d() -> Scenario {
    let map = ImpulseMap::new(field("r; th"), Some(field("r; th")));
    build(
        "identity-on-d",
        BaseFlow::Rotation,
        positive_axis(),
        map,
        20.0,
    )
}

/// [`example_2_1`] with jump images pushed `0.1` outwards while the gluing still
/// uses the original map.
pub fn corrupted_impulse() -> Scenario {
    let map = ImpulseMap::new(field("(1 + r) / 2 + 0.1; pi"), Some(field("2 * r - 1; 0")))
        .with_gluing(field("(1 + r) / 2; pi"));
    build(
        "corrupted-impulse",
        BaseFlow::Rotation,
        positive_axis(),
        map,
        50.0,
    )
}

/// Contraction with `D = {(r, 0) : r >= 1.5}`, away from the limit circle.
pub fn detached_d() -> Scenario {
    let surface = ImpulseSurface::new(
        expr("sin(th)"),
        expr("r - 1.5 - 10 * (1 - cos(th))"),
        Crossing::Ascending,
    );
    let map = ImpulseMap::new(field("r; pi"), Some(field("r; 0")));
    build("detached-d", BaseFlow::Contraction, surface, map, 20.0)
}

/// All built-in scenarios by name.
pub fn by_name(name: &str) -> Option<Scenario> {
    Some(match name {
        "example21" => example_2_1(),
        "example22" => example_2_2(),
        "zeno" => zeno(),
        "identity-on-d" => identity_on_d(),
        "corrupted-impulse" => corrupted_impulse(),
        "detached-d" => detached_d(),
        _ => return None,
    })
}
