//! Continuous base semiflows.

use crate::error::{Error, Result};
use crate::expr::FieldExpr;
use crate::point::{Chart, Domain, Point, MAX_DIM};

/// Default fixed integration step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Integration blows up once the state norm exceeds this multiple of the
/// largest domain norm.
pub const ESCAPE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub enum BaseFlow {
    /// `r' = 0, th' = 1` in the polar chart.
    Rotation,
    /// `r' = 1 - r, th' = 1` in the polar chart.
    Contraction,
    /// Classical RK4 with a fixed step on a user field.
    Numeric(NumericFlow),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericFlow {
    field: FieldExpr,
    step: f64,
    escape_radius: f64,
}

impl NumericFlow {
    pub fn new(field: FieldExpr, step: f64, domain: &Domain) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::ScenarioInvalid(
                "integration step must be positive".into(),
            ));
        }
        if field.chart() != domain.chart() || field.dim() != domain.dim() {
            return Err(Error::ScenarioInvalid(
                "vector field does not match the domain chart".into(),
            ));
        }
        Ok(Self {
            field,
            step,
            escape_radius: ESCAPE_FACTOR * domain.max_norm(),
        })
    }

    pub fn field(&self) -> &FieldExpr {
        &self.field
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// One RK4 step of length `dt` from `x`.
    pub(crate) fn rk4_step(&self, x: &Point, dt: f64) -> Result<Point> {
        let dim = x.dim();
        let y = x.raw();
        let f = |s: &[f64; MAX_DIM]| self.field.eval_raw(s).map_err(Error::from);
        let shifted = |k: &[f64; MAX_DIM], a: f64| {
            let mut out = y;
            for i in 0..dim {
                out[i] += a * k[i];
            }
            out
        };
        let k1 = f(&y)?;
        let k2 = f(&shifted(&k1, 0.5 * dt))?;
        let k3 = f(&shifted(&k2, 0.5 * dt))?;
        let k4 = f(&shifted(&k3, dt))?;
        let mut out = y;
        for i in 0..dim {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let p = Point::from_raw(x.chart(), dim, out);
        let bad = p.validate().is_err()
            || crate::point::euclid(&p.embed(), &[0.0; MAX_DIM]) > self.escape_radius;
        if bad {
            return Err(Error::Diverged { t: dt });
        }
        Ok(p)
    }

    /// Whole steps of length `h`, then one partial step.
    pub(crate) fn integrate(&self, x: &Point, t: f64) -> Result<Point> {
        let full = libm::floor(t / self.step) as u64;
        let mut p = *x;
        for k in 0..full {
            p = self
                .rk4_step(&p, self.step)
                .map_err(|e| relabel_divergence(e, (k + 1) as f64 * self.step))?;
        }
        let rest = t - full as f64 * self.step;
        if rest > 0.0 {
            p = self
                .rk4_step(&p, rest)
                .map_err(|e| relabel_divergence(e, t))?;
        }
        Ok(p)
    }
}

fn relabel_divergence(e: Error, t: f64) -> Error {
    match e {
        Error::Diverged { .. } => Error::Diverged { t },
        other => other,
    }
}

impl BaseFlow {
    pub fn numeric(field: FieldExpr, step: f64, domain: &Domain) -> Result<Self> {
        Ok(BaseFlow::Numeric(NumericFlow::new(field, step, domain)?))
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, BaseFlow::Numeric(_))
    }

    /// The vector field of this flow as an expression (closed forms included).
    pub fn field_source(&self) -> &'static str {
        match self {
            BaseFlow::Rotation => "0; 1",
            BaseFlow::Contraction => "1 - r; 1",
            BaseFlow::Numeric(_) => "",
        }
    }

    pub fn check_chart(&self, chart: Chart) -> Result<()> {
        match self {
            BaseFlow::Rotation | BaseFlow::Contraction if chart != Chart::Polar2d => Err(
                Error::ScenarioInvalid("closed-form flows live in the polar2d chart".into()),
            ),
            BaseFlow::Numeric(n) if n.field.chart() != chart => Err(Error::ChartMismatch),
            _ => Ok(()),
        }
    }

    /// `phi_t(x)` for `t >= 0`.
    pub fn advance(&self, x: &Point, t: f64) -> Result<Point> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidPoint(
                "flow time must be finite and non-negative",
            ));
        }
        if t == 0.0 {
            return Ok(*x);
        }
        match self {
            BaseFlow::Rotation => {
                let [r, th, ..] = polar_coords(x)?;
                Ok(Point::from_raw(Chart::Polar2d, 2, [r, th + t, 0.0, 0.0]))
            }
            BaseFlow::Contraction => {
                let [r, th, ..] = polar_coords(x)?;
                let r = 1.0 + (r - 1.0) * libm::exp(-t);
                Ok(Point::from_raw(Chart::Polar2d, 2, [r, th + t, 0.0, 0.0]))
            }
            BaseFlow::Numeric(n) => {
                if x.chart() != n.field.chart() {
                    return Err(Error::ChartMismatch);
                }
                n.integrate(x, t)
            }
        }
    }

    /// Upper bound on the Cartesian speed of the flow over the domain, when
    /// one is known in closed form.
    pub fn speed_bound(&self, domain: &Domain) -> Option<f64> {
        let Domain::Annulus { r_min, r_max } = *domain else {
            return None;
        };
        match self {
            BaseFlow::Rotation => Some(r_max),
            BaseFlow::Contraction => {
                // |v|^2 = (1 - r)^2 + r^2 is convex in r.
                let v = |r: f64| libm::sqrt((1.0 - r) * (1.0 - r) + r * r);
                Some(v(r_min).max(v(r_max)))
            }
            BaseFlow::Numeric(_) => None,
        }
    }
}

fn polar_coords(x: &Point) -> Result<[f64; MAX_DIM]> {
    if x.chart() != Chart::Polar2d {
        return Err(Error::ChartMismatch);
    }
    Ok(x.raw())
}

/// Free-function form of [`BaseFlow::advance`].
pub fn base_flow(flow: &BaseFlow, x: &Point, t: f64) -> Result<Point> {
    flow.advance(x, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{LN_2, PI, TAU};

    fn annulus() -> Domain {
        Domain::annulus(1.0, 2.0).unwrap()
    }

    #[test]
    fn rotation_half_turn() {
        let x = Point::polar(1.0, PI).unwrap();
        let y = BaseFlow::Rotation.advance(&x, PI).unwrap().normalized();
        assert!(y.distance(&Point::polar(1.0, 0.0).unwrap()) < 1e-15);
        assert!(y.coords()[1] < 1e-15 || (TAU - y.coords()[1]) < 1e-15);
    }

    #[test]
    fn contraction_closed_form() {
        let x = Point::polar(2.0, 0.0).unwrap();
        let y = BaseFlow::Contraction.advance(&x, LN_2).unwrap();
        assert!((y.coords()[0] - 1.5).abs() < 1e-15);
        assert!((y.coords()[1] - LN_2).abs() < 1e-15);
    }

    #[test]
    fn zero_time_is_identity() {
        let x = Point::polar(1.7, 0.3).unwrap();
        assert_eq!(BaseFlow::Rotation.advance(&x, 0.0).unwrap(), x);
        assert_eq!(BaseFlow::Contraction.advance(&x, 0.0).unwrap(), x);
        let f = FieldExpr::parse("1 - r; 1", 2, Chart::Polar2d).unwrap();
        let n = BaseFlow::numeric(f, 1e-3, &annulus()).unwrap();
        assert_eq!(n.advance(&x, 0.0).unwrap(), x);
    }

    #[test]
    fn closed_forms_require_polar_chart() {
        assert!(BaseFlow::Rotation.check_chart(Chart::Cartesian).is_err());
        let x = Point::cartesian(&[1.0, 0.0]).unwrap();
        assert_eq!(
            BaseFlow::Rotation.advance(&x, 1.0).unwrap_err(),
            Error::ChartMismatch
        );
    }

    #[test]
    fn numeric_matches_closed_form() {
        let f = FieldExpr::parse("1 - r; 1", 2, Chart::Polar2d).unwrap();
        let n = BaseFlow::numeric(f, 1e-3, &annulus()).unwrap();
        let x = Point::polar(2.0, 0.0).unwrap();
        let a = n.advance(&x, 2.5).unwrap();
        let b = BaseFlow::Contraction.advance(&x, 2.5).unwrap();
        assert!(a.distance(&b) < 1e-10);
    }

    #[test]
    fn blow_up_is_reported() {
        let d = Domain::new_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let f = FieldExpr::parse("x1 * x1; 0", 2, Chart::Cartesian).unwrap();
        let n = BaseFlow::numeric(f, 1e-3, &d).unwrap();
        let x = Point::cartesian(&[1.0, 0.0]).unwrap();
        // x1(t) = 1 / (1 - t) leaves every bounded set before t = 1.
        assert!(matches!(n.advance(&x, 2.0), Err(Error::Diverged { .. })));
    }

    #[test]
    fn speed_bounds() {
        assert_eq!(BaseFlow::Rotation.speed_bound(&annulus()), Some(2.0));
        let c = BaseFlow::Contraction.speed_bound(&annulus()).unwrap();
        assert!((c - 5f64.sqrt()).abs() < 1e-15);
    }
}
