//! Impulsive dynamical systems `(X, phi, D, I)`.
//!
//! The impulsive set is `D = {x : s(x) = 0, c(x) >= 0}` for a section `s` and
//! a constraint `c`. Base trajectories are scanned on the fixed step grid of
//! the scenario; a sign change of `s` in the configured direction is refined
//! by bisection in time and accepted when `c >= 0` at the refined root.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::{Expr, FieldExpr};
use crate::flow::{BaseFlow, NumericFlow};
use crate::point::{Chart, Domain, Point, MAX_DIM, POINT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Crossing {
    Ascending,
    Descending,
    Any,
}

impl Crossing {
    /// Whether `s` changes from `a` to `b` in this direction.
    #[inline]
    fn crosses(self, a: f64, b: f64) -> bool {
        let up = a < 0.0 && b >= 0.0;
        let down = a > 0.0 && b <= 0.0;
        match self {
            Crossing::Ascending => up,
            Crossing::Descending => down,
            Crossing::Any => up || down,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSurface {
    pub section: Expr,
    pub constraint: Expr,
    pub crossing: Crossing,
}

impl ImpulseSurface {
    pub fn new(section: Expr, constraint: Expr, crossing: Crossing) -> Self {
        Self {
            section,
            constraint,
            crossing,
        }
    }

    /// `|s(x)| <= tol` and `c(x) >= -tol`.
    pub fn contains(&self, x: &Point, tol: f64) -> Result<bool> {
        Ok(self.section.eval_point(x)?.abs() <= tol && self.constraint.eval_point(x)? >= -tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseMap {
    forward: FieldExpr,
    inverse: Option<FieldExpr>,
    gluing: Option<FieldExpr>,
}

impl ImpulseMap {
    pub fn new(forward: FieldExpr, inverse: Option<FieldExpr>) -> Self {
        Self {
            forward,
            inverse,
            gluing: None,
        }
    }

    /// Uses `gluing` instead of the jump map to build the quotient relation.
    /// The declared inverse, if any, then inverts `gluing`.
    pub fn with_gluing(mut self, gluing: FieldExpr) -> Self {
        self.gluing = Some(gluing);
        self
    }

    pub fn forward(&self) -> &FieldExpr {
        &self.forward
    }

    pub fn inverse(&self) -> Option<&FieldExpr> {
        self.inverse.as_ref()
    }

    pub fn gluing(&self) -> Option<&FieldExpr> {
        self.gluing.as_ref()
    }

    /// The jump `I(x)`.
    pub fn apply(&self, x: &Point) -> Result<Point> {
        self.forward.map_point(x)
    }

    /// The map that defines the equivalence relation `x ~ I(x)`.
    pub fn relation(&self) -> &FieldExpr {
        self.gluing.as_ref().unwrap_or(&self.forward)
    }

    pub fn relate(&self, x: &Point) -> Result<Point> {
        self.relation().map_point(x)
    }
}

/// Numeric knobs shared by every algorithm on a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Knobs {
    pub h: f64,
    pub hit_bisection_tol: f64,
    pub tau_min: f64,
    pub zeno_min_gap: f64,
    pub zeno_max_impulses: usize,
    pub horizon_default: f64,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            h: 1e-3,
            hit_bisection_tol: 1e-12,
            tau_min: 1e-9,
            zeno_min_gap: 1e-6,
            zeno_max_impulses: 100_000,
            horizon_default: 50.0,
        }
    }
}

impl Knobs {
    pub fn validate(&self) -> Result<()> {
        let reals = [
            self.h,
            self.hit_bisection_tol,
            self.tau_min,
            self.zeno_min_gap,
            self.horizon_default,
        ];
        if reals.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.zeno_max_impulses == 0 {
            return Err(Error::ScenarioInvalid(
                "all knobs must be strictly positive".into(),
            ));
        }
        if self.tau_min >= self.zeno_min_gap {
            return Err(Error::ScenarioInvalid(
                "tau_min must be below zeno_min_gap".into(),
            ));
        }
        Ok(())
    }
}

/// A complete impulsive dynamical system plus its numeric knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub domain: Domain,
    pub flow: BaseFlow,
    pub surface: ImpulseSurface,
    pub map: ImpulseMap,
    pub knobs: Knobs,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        flow: BaseFlow,
        surface: ImpulseSurface,
        map: ImpulseMap,
        knobs: Knobs,
    ) -> Result<Self> {
        knobs.validate()?;
        let chart = domain.chart();
        flow.check_chart(chart)?;
        let exprs = [&surface.section, &surface.constraint];
        if exprs.iter().any(|e| e.chart() != chart) {
            return Err(Error::ScenarioInvalid(
                "section and constraint must use the domain chart".into(),
            ));
        }
        let maps = [
            Some(&map.forward),
            map.inverse.as_ref(),
            map.gluing.as_ref(),
        ];
        for m in maps.into_iter().flatten() {
            if m.chart() != chart || m.dim() != domain.dim() || m.components().len() != domain.dim()
            {
                return Err(Error::ScenarioInvalid(
                    "impulse maps must be self-maps of the domain chart".into(),
                ));
            }
        }
        Ok(Self {
            name: name.into(),
            domain,
            flow,
            surface,
            map,
            knobs,
        })
    }

    pub fn chart(&self) -> Chart {
        self.domain.chart()
    }

    pub fn in_d(&self, x: &Point) -> Result<bool> {
        self.surface.contains(x, self.knobs.hit_bisection_tol)
    }

    /// Checks the map invariants on a sample of `D`: images stay in the
    /// domain and the declared inverse undoes the relation map.
    pub fn audit_maps(&self, n_samples: usize) -> Result<()> {
        let sample = sample_impulsive_set(self, n_samples)?;
        for d in &sample {
            if !self.domain.contains(d) {
                return Err(Error::ScenarioInvalid(
                    "impulsive set leaves the domain".into(),
                ));
            }
            if !self.domain.contains(&self.map.apply(d)?) {
                return Err(Error::ScenarioInvalid(
                    "impulse image leaves the domain".into(),
                ));
            }
            let g = self.map.relate(d)?;
            if !self.domain.contains(&g) {
                return Err(Error::ScenarioInvalid(
                    "gluing image leaves the domain".into(),
                ));
            }
            if let Some(inv) = &self.map.inverse {
                if inv.map_point(&g)?.distance(d) > POINT_TOL {
                    return Err(Error::ScenarioInvalid(
                        "declared inverse does not invert the map".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Evaluates the base flow from a fixed origin at increasing times, reusing
/// the RK4 grid states of numeric flows so results match [`BaseFlow::advance`]
/// bit for bit.
#[derive(Debug)]
pub struct Cursor<'a> {
    flow: &'a BaseFlow,
    origin: Point,
    grid: Option<NumericGrid<'a>>,
}

#[derive(Debug)]
struct NumericGrid<'a> {
    nf: &'a NumericFlow,
    k: u64,
    state: Point,
    prev: Point,
}

impl<'a> Cursor<'a> {
    pub fn new(flow: &'a BaseFlow, origin: Point) -> Self {
        let grid = match flow {
            BaseFlow::Numeric(nf) => Some(NumericGrid {
                nf,
                k: 0,
                state: origin,
                prev: origin,
            }),
            _ => None,
        };
        Self { flow, origin, grid }
    }

    pub fn at(&mut self, t: f64) -> Result<Point> {
        let Some(g) = self.grid.as_mut() else {
            return self.flow.advance(&self.origin, t);
        };
        if t == 0.0 {
            return Ok(self.origin);
        }
        let h = g.nf.step();
        let k = libm::floor(t / h) as u64;
        while g.k < k {
            let next = g.nf.rk4_step(&g.state, h)?;
            g.prev = g.state;
            g.state = next;
            g.k += 1;
        }
        let base = if k == g.k {
            g.state
        } else if k + 1 == g.k {
            g.prev
        } else {
            // Only reachable when stepping backwards by more than one step.
            return g.nf.integrate(&self.origin, t);
        };
        let rest = t - k as f64 * h;
        if rest > 0.0 {
            g.nf.rk4_step(&base, rest)
        } else {
            Ok(base)
        }
    }
}

/// A first impulsive time together with the point where `D` is reached.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hit {
    pub tau: f64,
    pub point: Point,
}

/// Smallest `t` in `(tau_min, horizon]` at which the base trajectory of `x`
/// crosses `D`, or `None`.
pub fn first_hit(sc: &Scenario, x: &Point, horizon: f64) -> Result<Option<Hit>> {
    if !sc.domain.contains(x) {
        return Err(Error::OutOfDomain);
    }
    let k = &sc.knobs;
    let surf = &sc.surface;
    let section = |p: &Point| surf.section.eval_point(p);
    let mut cur = Cursor::new(&sc.flow, *x);

    let s0 = section(x)?;
    let p_min = cur.at(k.tau_min)?;
    let s_min = section(&p_min)?;
    // Starting on D is allowed; reaching D within tau_min otherwise is not.
    if !surf.contains(x, k.hit_bisection_tol)? && surf.crossing.crosses(s0, s_min) {
        let root = bisect(sc, &mut cur, 0.0, k.tau_min, s0)?;
        if surf.constraint.eval_point(&root.point)? >= 0.0 {
            return Err(Error::ScenarioInvalid(alloc::format!(
                "first impulsive time {} is not above tau_min",
                root.tau
            )));
        }
    }
    if !(horizon > k.tau_min) {
        return Ok(None);
    }

    let mut a = k.tau_min;
    let mut sa = s_min;
    let mut j = libm::floor(k.tau_min / k.h) as u64 + 1;
    loop {
        let b = (j as f64 * k.h).min(horizon);
        let pb = cur.at(b)?;
        let sb = section(&pb)?;
        if surf.crossing.crosses(sa, sb) {
            let root = bisect(sc, &mut cur, a, b, sa)?;
            if surf.constraint.eval_point(&root.point)? >= 0.0 {
                return Ok(Some(root));
            }
        }
        if b >= horizon {
            return Ok(None);
        }
        a = b;
        sa = sb;
        j += 1;
    }
}

fn bisect(sc: &Scenario, cur: &mut Cursor<'_>, mut a: f64, mut b: f64, mut sa: f64) -> Result<Hit> {
    let tol = sc.knobs.hit_bisection_tol;
    let crossing = sc.surface.crossing;
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let sm = sc.surface.section.eval_point(&cur.at(m)?)?;
        if crossing.crosses(sa, sm) {
            b = m;
        } else {
            a = m;
            sa = sm;
        }
    }
    Ok(Hit {
        tau: b,
        point: cur.at(b)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Segment {
    pub t_start: f64,
    pub start: Point,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImpulseEvent {
    pub time: f64,
    pub hit: Point,
    pub image: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Truncation {
    HorizonReached,
    ZenoAbort,
}

/// Base-flow segments joined by impulse events.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImpulsiveTrajectory {
    pub start: Point,
    pub horizon: f64,
    pub segments: Vec<Segment>,
    pub events: Vec<ImpulseEvent>,
    pub truncation: Truncation,
}

impl ImpulsiveTrajectory {
    /// Time of the event that triggered a Zeno abort.
    pub fn abort_time(&self) -> Option<f64> {
        match self.truncation {
            Truncation::ZenoAbort => self.events.last().map(|e| e.time),
            Truncation::HorizonReached => None,
        }
    }

    /// `gamma_x(t)`; right-continuous at the impulsive times. Event times
    /// are only known to `tol`, so a jump within `tol` after `t` counts as
    /// already taken.
    pub fn state_at(&self, flow: &BaseFlow, t: f64, tol: f64) -> Result<Point> {
        if let Some(abort) = self.abort_time() {
            if t >= abort {
                return Err(Error::BeyondAbort { abort_time: abort });
            }
        }
        if !(t >= 0.0) || t > self.horizon {
            return Err(Error::InvalidPoint("time outside the trajectory horizon"));
        }
        let idx = self
            .segments
            .partition_point(|s| s.t_start <= t + tol)
            .max(1)
            - 1;
        let seg = &self.segments[idx];
        flow.advance(&seg.start, (t - seg.t_start).max(0.0))
    }
}

/// Follows the inductive construction: flow to the first hit, jump through
/// `I`, repeat, until the horizon or a Zeno guard trips.
pub fn build_trajectory(sc: &Scenario, x: &Point, horizon: f64) -> Result<ImpulsiveTrajectory> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidPoint(
            "horizon must be finite and non-negative",
        ));
    }
    let k = &sc.knobs;
    let mut segments = Vec::new();
    let mut events: Vec<ImpulseEvent> = Vec::new();
    let mut t = 0.0;
    let mut cur = *x;
    let truncation = loop {
        match first_hit(sc, &cur, horizon - t)? {
            None => {
                segments.push(Segment {
                    t_start: t,
                    start: cur,
                    duration: horizon - t,
                });
                break Truncation::HorizonReached;
            }
            Some(hit) => {
                segments.push(Segment {
                    t_start: t,
                    start: cur,
                    duration: hit.tau,
                });
                let image = sc.map.apply(&hit.point)?;
                if !sc.domain.contains(&image) {
                    return Err(Error::ScenarioInvalid(
                        "impulse image leaves the domain".into(),
                    ));
                }
                let time = t + hit.tau;
                let short_gap = !events.is_empty() && hit.tau < k.zeno_min_gap;
                events.push(ImpulseEvent {
                    time,
                    hit: hit.point,
                    image,
                });
                if short_gap || events.len() > k.zeno_max_impulses {
                    break Truncation::ZenoAbort;
                }
                t = time;
                cur = image;
            }
        }
    };
    Ok(ImpulsiveTrajectory {
        start: *x,
        horizon,
        segments,
        events,
        truncation,
    })
}

/// The impulsive semiflow `phi(t, x)`.
pub fn phi(sc: &Scenario, x: &Point, t: f64) -> Result<Point> {
    if t == 0.0 {
        if !sc.domain.contains(x) {
            return Err(Error::OutOfDomain);
        }
        return Ok(*x);
    }
    // The extra step keeps the event containing `t` on an untruncated scan
    // interval, so events up to `t` are identical to those of longer runs.
    let traj = build_trajectory(sc, x, t + sc.knobs.h)?;
    traj.state_at(&sc.flow, t, sc.knobs.hit_bisection_tol)
}

/// Samples `D` by root-solving `s = 0` along coordinate lines of an
/// `n`-per-axis grid over the chart ranges, keeping roots with `c >= 0`.
/// The result is deduplicated and sorted lexicographically.
pub fn sample_impulsive_set(sc: &Scenario, n: usize) -> Result<Vec<Point>> {
    let n = n.max(2);
    let dim = sc.domain.dim();
    let chart = sc.chart();
    let (lo, hi) = sc.domain.chart_ranges();
    let tol = sc.knobs.hit_bisection_tol;
    let s = &sc.surface.section;
    let c = &sc.surface.constraint;
    let scan = 4 * n;
    let lin =
        |axis: usize, i: usize, m: usize| lo[axis] + (hi[axis] - lo[axis]) * i as f64 / m as f64;

    let mut found: Vec<Point> = Vec::new();
    let mut keep = |coords: [f64; MAX_DIM]| -> Result<()> {
        let p = Point::from_raw(chart, dim, coords);
        if p.validate().is_ok() && c.eval_point(&p)? >= -tol {
            found.push(p);
        }
        Ok(())
    };
    for axis in 0..dim {
        let others = dim - 1;
        let lines = n.pow(others as u32);
        for line in 0..lines {
            let mut base = [0.0; MAX_DIM];
            let mut rem = line;
            for o in (0..dim).filter(|&o| o != axis) {
                base[o] = lin(o, rem % n, n - 1);
                rem /= n;
            }
            let at = |v: f64| {
                let mut q = base;
                q[axis] = v;
                q
            };
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..=scan {
                let v = lin(axis, i, scan);
                let q = at(v);
                let sv = s.eval_raw(&q);
                if !sv.is_finite() {
                    prev = None;
                    continue;
                }
                if sv.abs() <= tol {
                    keep(q)?;
                } else if let Some((pv, ps)) = prev {
                    if ps.abs() > tol && (ps < 0.0) != (sv < 0.0) {
                        let (mut a, mut b, mut sa) = (pv, v, ps);
                        for _ in 0..200 {
                            let m = 0.5 * (a + b);
                            if m <= a || m >= b {
                                break;
                            }
                            let sm = s.eval_raw(&at(m));
                            if (sa < 0.0) != (sm < 0.0) {
                                b = m;
                            } else {
                                a = m;
                                sa = sm;
                            }
                        }
                        keep(at(0.5 * (a + b)))?;
                    }
                }
                prev = Some((v, sv));
            }
        }
    }
    found.sort_by(|a, b| a.lex_cmp(b));
    let mut out: Vec<Point> = Vec::with_capacity(found.len());
    for p in found {
        if !out
            .iter()
            .rev()
            .take(64)
            .any(|q| q.distance(&p) <= POINT_TOL)
            && !out.iter().any(|q| q.distance(&p) <= POINT_TOL)
        {
            out.push(p);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeparationReport {
    pub samples: usize,
    pub min_gap: f64,
    pub pass: bool,
}

/// Minimum distance from `I(D)` to `D` over a sample of `D`; a positive gap
/// rules out accumulating impulsive times.
pub fn check_separation(sc: &Scenario, n_samples: usize) -> Result<SeparationReport> {
    if n_samples == 0 {
        return Err(Error::InvalidPoint("need at least one sample"));
    }
    let sample = sample_impulsive_set(sc, n_samples)?;
    if sample.is_empty() {
        return Err(Error::DegenerateSection);
    }
    let mut min_gap = f64::INFINITY;
    for d in &sample {
        let img = sc.map.apply(d)?;
        for e in &sample {
            min_gap = min_gap.min(img.distance(e));
        }
    }
    Ok(SeparationReport {
        samples: sample.len(),
        min_gap,
        pass: min_gap > sc.knobs.zeno_min_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;
    use core::f64::consts::{FRAC_PI_2, PI, TAU};

    fn p(r: f64, th: f64) -> Point {
        Point::polar(r, th).unwrap()
    }

    #[test]
    fn first_hit_rotation() {
        let sc = scenarios::example_2_1();
        let hit = first_hit(&sc, &p(1.5, 1.5 * PI), 50.0).unwrap().unwrap();
        assert!((hit.tau - FRAC_PI_2).abs() < 1e-10);
        assert!(hit.point.distance(&p(1.5, 0.0)) < 1e-10);

        let hit = first_hit(&sc, &p(1.0, PI), 50.0).unwrap().unwrap();
        assert!((hit.tau - PI).abs() < 1e-10);
        assert!(hit.point.distance(&p(1.0, 0.0)) < 1e-10);
    }

    #[test]
    fn spiral_never_reaches_the_single_point() {
        let sc = scenarios::example_2_2();
        assert_eq!(first_hit(&sc, &p(2.0, 0.0), 20.0).unwrap(), None);
    }

    #[test]
    fn horizon_excludes_later_hits() {
        let sc = scenarios::example_2_1();
        assert_eq!(first_hit(&sc, &p(1.0, PI), 3.0).unwrap(), None);
    }

    #[test]
    fn starting_on_d_waits_for_the_next_pass() {
        let sc = scenarios::example_2_1();
        let hit = first_hit(&sc, &p(1.2, 0.0), 50.0).unwrap().unwrap();
        assert!((hit.tau - TAU).abs() < 1e-10);
    }

    #[test]
    fn hits_inside_tau_min_invalidate_the_scenario() {
        let sc = scenarios::example_2_1();
        let err = first_hit(&sc, &p(1.2, -1e-10), 50.0).unwrap_err();
        assert!(matches!(err, Error::ScenarioInvalid(_)), "{err:?}");
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let sc = scenarios::example_2_1();
        assert_eq!(
            first_hit(&sc, &p(0.5, 0.0), 1.0).unwrap_err(),
            Error::OutOfDomain
        );
    }

    #[test]
    fn rotation_period_pi_cycle() {
        let sc = scenarios::example_2_1();
        let traj = build_trajectory(&sc, &p(1.0, PI), 3.5 * PI).unwrap();
        assert_eq!(traj.truncation, Truncation::HorizonReached);
        assert_eq!(traj.events.len(), 3);
        let minus_one = Point::cartesian(&[-1.0, 0.0]).unwrap();
        for (n, e) in traj.events.iter().enumerate() {
            assert!((e.time - (n + 1) as f64 * PI).abs() < 1e-9);
            assert!(e.hit.distance(&p(1.0, 0.0)) < 1e-9);
            let img = Point::cartesian(&e.image.embed()[..2]).unwrap();
            assert!(img.distance(&minus_one) < 1e-12);
        }
        assert_eq!(traj.segments.len(), 4);
    }

    #[test]
    fn contraction_single_jump() {
        let sc = scenarios::example_2_2();
        let traj = build_trajectory(&sc, &p(1.0, FRAC_PI_2), 20.0).unwrap();
        assert_eq!(traj.events.len(), 1);
        let e = traj.events[0];
        assert!((e.time - 1.5 * PI).abs() < 1e-9);
        assert!(e.hit.distance(&p(1.0, 0.0)) < 1e-9);
        assert!(e.image.distance(&p(2.0, 0.0)) < 1e-12);
    }

    #[test]
    fn zeno_guards() {
        let sc = scenarios::zeno();
        let traj = build_trajectory(&sc, &p(1.5, PI), 20.0).unwrap();
        assert_eq!(traj.truncation, Truncation::ZenoAbort);
        assert_eq!(traj.events.len(), 2);

        let mut sc = scenarios::zeno();
        sc.knobs.zeno_min_gap = 1e-8;
        sc.knobs.zeno_max_impulses = 50;
        let traj = build_trajectory(&sc, &p(1.5, PI), 20.0).unwrap();
        assert_eq!(traj.truncation, Truncation::ZenoAbort);
        assert_eq!(traj.events.len(), 51);
        let abort = traj.abort_time().unwrap();
        assert!(matches!(
            traj.state_at(&sc.flow, abort + 1.0, 0.0),
            Err(Error::BeyondAbort { .. })
        ));
        assert!(traj.state_at(&sc.flow, abort - 1e-6, 0.0).is_ok());
    }

    #[test]
    fn phi_examples() {
        let sc = scenarios::example_2_1();
        let y = phi(&sc, &p(1.0, PI), PI).unwrap();
        assert!(y.distance(&p(1.0, PI)) < 1e-12);

        let sc2 = scenarios::example_2_2();
        let y = phi(&sc2, &p(1.0, 0.0), TAU).unwrap();
        assert!(y.distance(&p(2.0, 0.0)) < 1e-10);

        let x = p(1.3, 0.7);
        assert_eq!(phi(&sc, &x, 0.0).unwrap(), x);
    }

    #[test]
    fn phi_is_right_continuous_at_events() {
        let sc = scenarios::example_2_1();
        let x = p(1.7, 2.0);
        let traj = build_trajectory(&sc, &x, 20.0).unwrap();
        for e in &traj.events {
            assert_eq!(phi(&sc, &x, e.time).unwrap(), e.image);
            assert_eq!(traj.state_at(&sc.flow, e.time, 0.0).unwrap(), e.image);
        }
    }

    #[test]
    fn separation() {
        let r = check_separation(&scenarios::example_2_1(), 16).unwrap();
        assert!((r.min_gap - 2.0).abs() < 1e-12 && r.pass, "{r:?}");
        let r = check_separation(&scenarios::example_2_2(), 16).unwrap();
        assert!((r.min_gap - 1.0).abs() < 1e-12 && r.pass, "{r:?}");
        let r = check_separation(&scenarios::identity_on_d(), 16).unwrap();
        assert!(r.min_gap == 0.0 && !r.pass, "{r:?}");
        let r = check_separation(&scenarios::zeno(), 16).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn impulsive_set_samples() {
        let d = sample_impulsive_set(&scenarios::example_2_2(), 16).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d[0].distance(&p(1.0, 0.0)) < 1e-12);
        let d = sample_impulsive_set(&scenarios::example_2_1(), 16).unwrap();
        assert!(d.len() > 16);
        for q in &d {
            let e = q.embed();
            assert!(e[1].abs() < 1e-12 && e[0] >= 1.0 - 1e-12 && e[0] <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn knob_validation() {
        let mut k = Knobs::default();
        assert!(k.validate().is_ok());
        k.tau_min = 1e-5;
        assert!(k.validate().is_err());
        let k = Knobs {
            h: 0.0,
            ..Knobs::default()
        };
        assert!(k.validate().is_err());
    }

    #[test]
    fn map_audit() {
        scenarios::example_2_1().audit_maps(16).unwrap();
        scenarios::example_2_2().audit_maps(16).unwrap();
        let sc = scenarios::example_2_1();
        let bad_inverse = FieldExpr::parse("2 * r; 0", 2, Chart::Polar2d).unwrap();
        let broken = Scenario {
            map: ImpulseMap::new(sc.map.forward().clone(), Some(bad_inverse)),
            ..sc
        };
        assert!(broken.audit_maps(16).is_err());
    }
}
