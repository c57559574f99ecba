//! Grid estimates of the non-wandering set.
//!
//! A point is flagged when its impulsive orbit comes back within `eps_ball`
//! of itself at some sampled time in `[t_min, horizon]`. Returning orbits are
//! non-wandering; the converse fails in general, so the estimate is an
//! orbit-return proxy rather than the neighbourhood definition.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::impulse::{first_hit, sample_impulsive_set, Cursor, Scenario};
use crate::point::{euclid, Chart, Domain, Point, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecurrenceParams {
    pub eps_ball: f64,
    pub t_min: f64,
    pub horizon: f64,
    pub sample_step: f64,
}

impl RecurrenceParams {
    pub fn new(eps_ball: f64, t_min: f64, horizon: f64, sample_step: f64) -> Self {
        Self {
            eps_ball,
            t_min,
            horizon,
            sample_step,
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let positive = [self.eps_ball, self.horizon, self.sample_step];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(self.t_min >= 0.0) {
            return Err(Error::ScenarioInvalid(
                "recurrence parameters must be positive".into(),
            ));
        }
        if self.t_min >= self.horizon {
            return Err(Error::ScenarioInvalid(
                "t_min must be below the horizon".into(),
            ));
        }
        if self.eps_ball >= 0.5 * domain.diameter() {
            return Err(Error::ScenarioInvalid(
                "eps_ball must be below half the domain diameter".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of an orbit-return test.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Recurrence {
    pub recurrent: bool,
    /// Earliest sampled time at which the orbit is back within `eps_ball`.
    pub first_return: Option<f64>,
    /// The orbit tripped a Zeno guard before returning.
    pub zeno: bool,
}

/// Orbit-return test on the sample grid `k * sample_step` plus the jump
/// images at the impulsive times.
pub fn is_recurrent(sc: &Scenario, x: &Point, p: &RecurrenceParams) -> Result<Recurrence> {
    if !sc.domain.contains(x) {
        return Err(Error::OutOfDomain);
    }
    let knobs = &sc.knobs;
    let eps = p.eps_ball;
    let step = p.sample_step;
    let speed = sc.flow.speed_bound(&sc.domain);
    let found = |t: f64| {
        Ok(Recurrence {
            recurrent: true,
            first_return: Some(t),
            zeno: false,
        })
    };

    let mut t0 = 0.0;
    let mut start = *x;
    let mut events = 0usize;
    loop {
        let hit = first_hit(sc, &start, p.horizon - t0)?;
        let t_end = hit.map_or(p.horizon, |h| t0 + h.tau);
        // Samples strictly before the hit belong to this segment; the last
        // segment also owns the horizon itself.
        let mut k = libm::ceil(t0.max(p.t_min) / step) as u64;
        let mut cur = Cursor::new(&sc.flow, start);
        loop {
            let t = k as f64 * step;
            if t > t_end || (hit.is_some() && t >= t_end) {
                break;
            }
            let y = cur.at(t - t0)?;
            let d = y.distance(x);
            if d < eps {
                return found(t);
            }
            k += match speed {
                Some(v) if v > 0.0 => (libm::floor((d - eps) / (v * step)) as u64).max(1),
                _ => 1,
            };
        }
        let Some(hit) = hit else {
            break;
        };
        let image = sc.map.apply(&hit.point)?;
        if !sc.domain.contains(&image) {
            return Err(Error::ScenarioInvalid(
                "impulse image leaves the domain".into(),
            ));
        }
        events += 1;
        if (events > 1 && hit.tau < knobs.zeno_min_gap) || events > knobs.zeno_max_impulses {
            return Ok(Recurrence {
                recurrent: false,
                first_return: None,
                zeno: true,
            });
        }
        t0 = t_end;
        start = image;
        if t0 >= p.t_min && image.distance(x) < eps {
            return found(t0);
        }
    }
    Ok(Recurrence {
        recurrent: false,
        first_return: None,
        zeno: false,
    })
}

/// Cell-centred grid over the Cartesian bounding box of a domain.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    pub dim: usize,
    pub res: [usize; MAX_DIM],
    pub lo: [f64; MAX_DIM],
    pub hi: [f64; MAX_DIM],
}

impl Grid {
    /// `res` cells per axis over the bounding box of `domain`.
    pub fn over(domain: &Domain, res: usize) -> Result<Self> {
        if res == 0 {
            return Err(Error::ScenarioInvalid(
                "grid resolution must be positive".into(),
            ));
        }
        let (lo, hi) = domain.bounding_box();
        let dim = domain.dim();
        let mut r = [1; MAX_DIM];
        r[..dim].fill(res);
        Ok(Self {
            dim,
            res: r,
            lo,
            hi,
        })
    }

    pub fn len(&self) -> usize {
        self.res[..self.dim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self) -> [f64; MAX_DIM] {
        let mut c = [0.0; MAX_DIM];
        for i in 0..self.dim {
            c[i] = (self.hi[i] - self.lo[i]) / self.res[i] as f64;
        }
        c
    }

    /// Length of a cell diagonal: the "one grid cell" tolerance.
    pub fn cell_diagonal(&self) -> f64 {
        euclid(&self.cell(), &[0.0; MAX_DIM])
    }

    /// Cartesian centre of cell `index` (first axis varies fastest).
    pub fn center(&self, index: usize) -> [f64; MAX_DIM] {
        let cell = self.cell();
        let mut out = [0.0; MAX_DIM];
        let mut rem = index;
        for i in 0..self.dim {
            let k = rem % self.res[i];
            rem /= self.res[i];
            out[i] = self.lo[i] + (k as f64 + 0.5) * cell[i];
        }
        out
    }

    /// Centre of cell `index` in `chart`, if it is a valid point.
    pub fn point(&self, index: usize, chart: Chart) -> Option<Point> {
        Point::from_embedded(chart, &self.center(index)[..self.dim]).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSample {
    pub index: usize,
    pub point: Point,
    pub flagged: bool,
    pub first_return: Option<f64>,
    pub zeno: bool,
}

/// Classifies one grid cell; `None` when its centre is outside the domain.
pub fn classify(
    sc: &Scenario,
    grid: &Grid,
    p: &RecurrenceParams,
    index: usize,
) -> Result<Option<GridSample>> {
    let Some(point) = grid.point(index, sc.chart()) else {
        return Ok(None);
    };
    if !sc.domain.contains(&point) {
        return Ok(None);
    }
    let rec = is_recurrent(sc, &point, p)?;
    Ok(Some(GridSample {
        index,
        point,
        flagged: rec.recurrent,
        first_return: rec.first_return,
        zeno: rec.zeno,
    }))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OmegaEstimate {
    pub grid: Grid,
    pub params: RecurrenceParams,
    /// In-domain cells, sorted by grid index.
    pub samples: Vec<GridSample>,
}

impl OmegaEstimate {
    /// Assembles classified cells in grid order.
    pub fn from_samples(
        grid: Grid,
        params: RecurrenceParams,
        mut samples: Vec<GridSample>,
    ) -> Self {
        samples.sort_by_key(|s| s.index);
        Self {
            grid,
            params,
            samples,
        }
    }

    pub fn flagged(&self) -> impl Iterator<Item = &Point> + '_ {
        self.samples.iter().filter(|s| s.flagged).map(|s| &s.point)
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged().count()
    }

    pub fn zeno_count(&self) -> usize {
        self.samples.iter().filter(|s| s.zeno).count()
    }

    /// Matching tolerance against the estimate: a point is "on" it when it is
    /// within `eps_ball` or one cell diagonal of a flagged cell.
    pub fn tolerance(&self) -> f64 {
        self.params.eps_ball.max(self.grid.cell_diagonal())
    }

    pub fn distance_to_flagged(&self, x: &Point) -> f64 {
        self.flagged()
            .map(|f| f.distance(x))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Classifies every grid cell in index order.
pub fn estimate_omega(sc: &Scenario, grid: &Grid, p: &RecurrenceParams) -> Result<OmegaEstimate> {
    if grid.is_empty() {
        return Err(Error::Degenerate);
    }
    p.validate(&sc.domain)?;
    let mut samples = Vec::new();
    for index in 0..grid.len() {
        if let Some(s) = classify(sc, grid, p, index)? {
            samples.push(s);
        }
    }
    Ok(OmegaEstimate::from_samples(*grid, *p, samples))
}

/// `tau_D`: zero on `D`, the first impulsive time elsewhere, `+inf` when `D`
/// is not reached before the horizon of the estimate.
pub fn tau_d(sc: &Scenario, omega: &OmegaEstimate, x: &Point) -> Result<f64> {
    let tol = sc.knobs.hit_bisection_tol;
    if sc.surface.section.eval_point(x)?.abs() <= tol && sc.surface.constraint.eval_point(x)? >= 0.0
    {
        return Ok(0.0);
    }
    Ok(first_hit(sc, x, omega.params.horizon)?.map_or(f64::INFINITY, |h| h.tau))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TauDProfile {
    pub samples: Vec<(Point, f64)>,
    pub scale: f64,
    /// Largest `|tau_D(x) - tau_D(y)|` over sampled pairs at most `scale` apart.
    pub modulus: f64,
    pub discontinuous: bool,
    /// Indices of the pair attaining the modulus.
    pub worst: Option<(usize, usize)>,
}

impl TauDProfile {
    pub fn from_samples(samples: Vec<(Point, f64)>, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidPoint("scale must be positive"));
        }
        if samples.len() < 2 {
            return Err(Error::Degenerate);
        }
        let mut modulus = 0.0;
        let mut worst = None;
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                let (a, ta) = samples[i];
                let (b, tb) = samples[j];
                if a.distance(&b) > scale {
                    continue;
                }
                // +inf is a single point of the compactified half-line.
                let gap = if ta == tb { 0.0 } else { (ta - tb).abs() };
                if gap > modulus {
                    modulus = gap;
                    worst = Some((i, j));
                }
            }
        }
        Ok(Self {
            samples,
            scale,
            modulus,
            discontinuous: modulus > 10.0 * scale,
            worst,
        })
    }

    pub fn worst_pair(&self) -> Option<(Point, Point)> {
        self.worst
            .map(|(i, j)| (self.samples[i].0, self.samples[j].0))
    }
}

/// Profiles `tau_D` on the probes that belong to the estimate.
///
/// Grid centres are too coarse to resolve `tau_D`, so callers supply probe
/// points (typically a dense curve). A probe is kept when it lies within
/// `eps_ball` plus one cell of a flagged cell and passes the orbit-return
/// test at the finer radius `probe_eps`.
pub fn continuity_report(
    sc: &Scenario,
    omega: &OmegaEstimate,
    probes: &[Point],
    probe_eps: f64,
    scale: f64,
) -> Result<TauDProfile> {
    let near = omega.params.eps_ball + omega.grid.cell_diagonal();
    let params = RecurrenceParams {
        eps_ball: probe_eps,
        ..omega.params
    };
    let mut samples = Vec::new();
    for x in probes {
        if !sc.domain.contains(x) || omega.distance_to_flagged(x) > near {
            continue;
        }
        if is_recurrent(sc, x, &params)?.recurrent {
            samples.push((*x, tau_d(sc, omega, x)?));
        }
    }
    TauDProfile::from_samples(samples, scale)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HypothesisAudit {
    pub tau_d_continuous: bool,
    pub image_in_omega_minus_d: bool,
    pub omega_cap_d_empty: bool,
    /// `D` samples found on the estimate.
    pub d_on_omega: Vec<Point>,
    /// Subset of `d_on_omega` whose image fails the check.
    pub bad_images: Vec<Point>,
}

/// Checks the hypotheses under which invariant measures exist against an
/// estimate.
pub fn audit_hypotheses(
    sc: &Scenario,
    omega: &OmegaEstimate,
    profile: &TauDProfile,
    d_samples: usize,
) -> Result<HypothesisAudit> {
    let d = sample_impulsive_set(sc, d_samples)?;
    if d.is_empty() {
        return Err(Error::DegenerateSection);
    }
    let tol = omega.tolerance();
    let eps = omega.params.eps_ball;
    let mut d_on_omega = Vec::new();
    let mut bad_images = Vec::new();
    for x in &d {
        if omega.distance_to_flagged(x) > tol {
            continue;
        }
        d_on_omega.push(*x);
        let img = sc.map.apply(x)?;
        let to_d = d
            .iter()
            .map(|q| q.distance(&img))
            .fold(f64::INFINITY, f64::min);
        if omega.distance_to_flagged(&img) > tol || to_d <= eps {
            bad_images.push(*x);
        }
    }
    Ok(HypothesisAudit {
        tau_d_continuous: !profile.discontinuous,
        image_in_omega_minus_d: bad_images.is_empty(),
        omega_cap_d_empty: d_on_omega.is_empty(),
        d_on_omega,
        bad_images,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InvarianceReport {
    pub checked: usize,
    pub max_dist_to_flagged: f64,
    pub min_dist_to_d: f64,
    /// Flagged point and time whose image comes closest to `D`.
    pub closest_to_d: Option<(Point, f64)>,
    pub pass: bool,
}

/// Flows every flagged point farther than `eps_ball` from `D` for each time
/// and records how far the images stray from the estimate and how close
/// they come to `D`.
pub fn forward_invariance(
    sc: &Scenario,
    omega: &OmegaEstimate,
    times: &[f64],
    d_samples: usize,
) -> Result<InvarianceReport> {
    let d = sample_impulsive_set(sc, d_samples)?;
    let eps = omega.params.eps_ball;
    let to_d = |x: &Point| {
        d.iter()
            .map(|q| q.distance(x))
            .fold(f64::INFINITY, f64::min)
    };
    let mut report = InvarianceReport {
        checked: 0,
        max_dist_to_flagged: 0.0,
        min_dist_to_d: f64::INFINITY,
        closest_to_d: None,
        pass: true,
    };
    for x in omega.flagged() {
        if to_d(x) <= eps {
            continue;
        }
        for &t in times {
            let y = crate::impulse::phi(sc, x, t)?;
            report.checked += 1;
            report.max_dist_to_flagged = report
                .max_dist_to_flagged
                .max(omega.distance_to_flagged(&y));
            let gap = to_d(&y);
            if gap < report.min_dist_to_d {
                report.min_dist_to_d = gap;
                report.closest_to_d = Some((*x, t));
            }
        }
    }
    report.pass = report.max_dist_to_flagged <= 2.0 * eps && report.min_dist_to_d > 0.5 * eps;
    Ok(report)
}

/// Every flagged cell of `coarse` has a flagged cell of `fine` within one
/// coarse cell diagonal.
pub fn refinement_consistent(coarse: &OmegaEstimate, fine: &OmegaEstimate) -> bool {
    let tol = coarse.grid.cell_diagonal();
    coarse.flagged().all(|x| fine.distance_to_flagged(x) <= tol)
}
