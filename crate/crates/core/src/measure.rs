//! Discrete probability measures and invariance defects.
//!
//! For an atomic measure the push-forward `f_* mu (B) = mu(f^{-1}(B))` is
//! simply "move every atom, keep its weight", so functoriality holds exactly.
//! Invariance is measured as total variation on a fixed partition.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::impulse::{build_trajectory, phi, Cursor, Scenario, Truncation};
use crate::nonwandering::OmegaEstimate;
use crate::point::{Chart, Domain, Point, MAX_DIM};
use crate::quotient::{project, QuotientPoint};

/// Weights must sum to one within this tolerance.
pub const MASS_TOL: f64 = 1e-12;

/// Atoms lighter than this are ignored by support checks.
pub const SUPPORT_WEIGHT_MIN: f64 = 1e-6;

/// Compensated (Neumaier) sum.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if libm::fabs(sum) >= libm::fabs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscreteMeasure<P = Point> {
    atoms: Vec<(P, f64)>,
}

impl<P> DiscreteMeasure<P> {
    /// Atoms with positive weights summing to one.
    pub fn new(atoms: Vec<(P, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms"));
        }
        if atoms.iter().any(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidMeasure("weights must be positive"));
        }
        let total = neumaier_sum(atoms.iter().map(|a| a.1));
        if libm::fabs(total - 1.0) > MASS_TOL {
            return Err(Error::InvalidMeasure("weights must sum to one"));
        }
        Ok(Self { atoms })
    }

    /// Rescales positive weights to total mass one.
    pub fn normalized(mut atoms: Vec<(P, f64)>) -> Result<Self> {
        let total = neumaier_sum(atoms.iter().map(|a| a.1));
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMeasure("total mass must be positive"));
        }
        for a in atoms.iter_mut() {
            a.1 /= total;
        }
        Self::new(atoms)
    }

    pub fn dirac(p: P) -> Self {
        Self {
            atoms: vec![(p, 1.0)],
        }
    }

    pub fn uniform(points: Vec<P>) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        Self::normalized(points.into_iter().map(|p| (p, w)).collect())
    }

    pub fn atoms(&self) -> &[(P, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        neumaier_sum(self.atoms.iter().map(|a| a.1))
    }

    /// `f_* mu`. Fails with the indices of every atom where `f` fails.
    pub fn pushforward<Q>(&self, mut f: impl FnMut(&P) -> Result<Q>) -> Result<DiscreteMeasure<Q>> {
        let mut out = Vec::with_capacity(self.atoms.len());
        let mut bad = Vec::new();
        for (i, (p, w)) in self.atoms.iter().enumerate() {
            match f(p) {
                Ok(q) => out.push((q, *w)),
                Err(_) => bad.push(i),
            }
        }
        if !bad.is_empty() {
            return Err(Error::PartialMap(bad));
        }
        Ok(DiscreteMeasure { atoms: out })
    }

    /// Restriction to the atoms satisfying `keep`, renormalized.
    pub fn restrict(&self, mut keep: impl FnMut(&P) -> bool) -> Result<Self>
    where
        P: Clone,
    {
        Self::normalized(
            self.atoms
                .iter()
                .filter(|(p, _)| keep(p))
                .cloned()
                .collect(),
        )
    }
}

/// Anything that can be binned by a partition of the ambient space.
pub trait Located {
    fn location(&self) -> Point;
}

impl Located for Point {
    fn location(&self) -> Point {
        *self
    }
}

/// Quotient points are binned at their canonical representative.
impl Located for QuotientPoint {
    fn location(&self) -> Point {
        *self.canonical()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Partition {
    /// Uniform box grid over `[lo, hi]` with `res` cells per axis, plus one
    /// trailing cell for everything outside the box.
    Grid {
        dim: usize,
        lo: [f64; MAX_DIM],
        hi: [f64; MAX_DIM],
        res: usize,
    },
    /// Two cells: `{g <= 0}` and `{g > 0}`.
    Split(Expr),
}

impl Partition {
    /// `res` cells per axis over the Cartesian bounding box of `domain`.
    pub fn grid_over(domain: &Domain, res: usize) -> Result<Self> {
        if res == 0 {
            return Err(Error::InvalidMeasure(
                "partition resolution must be positive",
            ));
        }
        let (lo, hi) = domain.bounding_box();
        Ok(Partition::Grid {
            dim: domain.dim(),
            lo,
            hi,
            res,
        })
    }

    pub fn split(g: Expr) -> Self {
        Partition::Split(g)
    }

    pub fn cell_count(&self) -> usize {
        match self {
            Partition::Grid { dim, res, .. } => res.pow(*dim as u32) + 1,
            Partition::Split(_) => 2,
        }
    }

    pub fn cell_of(&self, p: &Point) -> Result<usize> {
        match self {
            Partition::Grid { dim, lo, hi, res } => {
                let e = p.embed();
                let mut idx = 0;
                let mut stride = 1;
                for i in 0..*dim {
                    if !(e[i] >= lo[i] && e[i] <= hi[i]) {
                        return Ok(self.cell_count() - 1);
                    }
                    let w = (hi[i] - lo[i]) / *res as f64;
                    let k = (libm::floor((e[i] - lo[i]) / w) as usize).min(res - 1);
                    idx += k * stride;
                    stride *= res;
                }
                Ok(idx)
            }
            Partition::Split(g) => {
                let q = match (g.chart(), p.chart()) {
                    (a, b) if a == b => *p,
                    (c, _) => Point::from_embedded(c, &p.embed()[..p.embed_dim()])?,
                };
                Ok(usize::from(g.eval_point(&q)? > 0.0))
            }
        }
    }

    /// Mass of every cell.
    pub fn histogram<P: Located>(&self, mu: &DiscreteMeasure<P>) -> Result<Vec<f64>> {
        let mut h = vec![0.0; self.cell_count()];
        for (p, w) in mu.atoms() {
            h[self.cell_of(&p.location())?] += w;
        }
        Ok(h)
    }
}

/// `(1/2) sum |a - b|` over cells.
pub fn tv_histograms(a: &[f64], b: &[f64]) -> f64 {
    let s = 0.5 * neumaier_sum(a.iter().zip(b).map(|(x, y)| libm::fabs(x - y)));
    s.clamp(0.0, 1.0)
}

/// Total variation between two measures on a partition.
pub fn tv<P: Located, Q: Located>(
    part: &Partition,
    mu: &DiscreteMeasure<P>,
    nu: &DiscreteMeasure<Q>,
) -> Result<f64> {
    Ok(tv_histograms(&part.histogram(mu)?, &part.histogram(nu)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectReport {
    pub t: f64,
    pub tv_defect: f64,
    pub partition: Partition,
    /// Cell with the largest mass change and that change.
    pub worst_cell: Option<(usize, f64)>,
}

/// Compares `mu` with its image `nu` cell by cell.
pub fn defect_report<P: Located, Q: Located>(
    t: f64,
    part: &Partition,
    mu: &DiscreteMeasure<P>,
    nu: &DiscreteMeasure<Q>,
) -> Result<DefectReport> {
    let a = part.histogram(mu)?;
    let b = part.histogram(nu)?;
    let mut worst: Option<(usize, f64)> = None;
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        let d = libm::fabs(x - y);
        if d > 0.0 && worst.is_none_or(|w| d > w.1) {
            worst = Some((i, d));
        }
    }
    Ok(DefectReport {
        t,
        tv_defect: tv_histograms(&a, &b),
        partition: part.clone(),
        worst_cell: worst,
    })
}

/// TV distance between `(phi_t)_* mu` and `mu` on `part`.
pub fn invariance_defect(
    sc: &Scenario,
    mu: &DiscreteMeasure,
    t: f64,
    part: &Partition,
) -> Result<DefectReport> {
    let pushed = mu.pushforward(|x| phi(sc, x, t))?;
    defect_report(t, part, mu, &pushed)
}

/// Cesàro average `(1/N) sum_{k<N} delta_{phi(x0, k delta)}`.
pub fn kb_average(sc: &Scenario, x0: &Point, delta: f64, n: usize) -> Result<DiscreteMeasure> {
    if n == 0 || !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidMeasure("need N >= 1 and delta > 0"));
    }
    let t_last = (n - 1) as f64 * delta;
    let traj = build_trajectory(sc, x0, t_last + sc.knobs.h)?;
    if let (Truncation::ZenoAbort, Some(abort)) = (traj.truncation, traj.abort_time()) {
        if abort <= t_last {
            return Err(Error::BeyondAbort { abort_time: abort });
        }
    }
    let tol = sc.knobs.hit_bisection_tol;
    let w = 1.0 / n as f64;
    let mut atoms = Vec::with_capacity(n);
    let mut seg = 0;
    let mut cur = Cursor::new(&sc.flow, traj.segments[0].start);
    for k in 0..n {
        let t = k as f64 * delta;
        // Same right-continuity convention as `ImpulsiveTrajectory::state_at`.
        while seg + 1 < traj.segments.len() && traj.segments[seg + 1].t_start <= t + tol {
            seg += 1;
            cur = Cursor::new(&sc.flow, traj.segments[seg].start);
        }
        let s = &traj.segments[seg];
        atoms.push((cur.at((t - s.t_start).max(0.0))?, w));
    }
    DiscreteMeasure::normalized(atoms)
}

/// `n` equal atoms at angles `th0 + (th1 - th0) k / n`, `k = 1..=n`, on the
/// circle of radius `r`.
pub fn uniform_on_arc(r: f64, th0: f64, th1: f64, n: usize) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidMeasure("need at least one atom"));
    }
    let pts = (1..=n)
        .map(|k| Point::polar(r, th0 + (th1 - th0) * k as f64 / n as f64))
        .collect::<Result<Vec<_>>>()?;
    DiscreteMeasure::uniform(pts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SupportReport {
    pub max_dist: f64,
    pub pass: bool,
    pub worst: Option<Point>,
}

/// Largest distance from a non-negligible atom to the flagged set.
pub fn support_in_omega(mu: &DiscreteMeasure, omega: &OmegaEstimate, eps: f64) -> SupportReport {
    let mut max_dist: f64 = 0.0;
    let mut worst = None;
    for (p, w) in mu.atoms() {
        if *w < SUPPORT_WEIGHT_MIN {
            continue;
        }
        let d = omega.distance_to_flagged(p);
        if d > max_dist || worst.is_none() {
            max_dist = max_dist.max(d);
            worst = Some(*p);
        }
    }
    SupportReport {
        max_dist,
        pass: max_dist <= eps,
        worst,
    }
}

/// Weight of the atoms with `|s| <= margin` and `c >= -margin`.
pub fn mass_near_d(sc: &Scenario, mu: &DiscreteMeasure, margin: f64) -> Result<f64> {
    if !(margin > 0.0) {
        return Err(Error::InvalidMeasure("margin must be positive"));
    }
    let mut near = Vec::new();
    for (p, w) in mu.atoms() {
        if sc.surface.contains(p, margin)? {
            near.push(*w);
        }
    }
    Ok(neumaier_sum(near))
}

/// `pi_* mu`; only defined for measures living off `D`.
pub fn push_to_quotient(
    sc: &Scenario,
    mu: &DiscreteMeasure,
) -> Result<DiscreteMeasure<QuotientPoint>> {
    let mut out = Vec::with_capacity(mu.len());
    for (p, w) in mu.atoms() {
        if sc.in_d(p)? {
            return Err(Error::IllPosedAtD);
        }
        out.push((project(sc, p)?, *w));
    }
    Ok(DiscreteMeasure { atoms: out })
}

/// Inverse of [`push_to_quotient`] through the canonical representatives.
pub fn lift_from_quotient(nu: &DiscreteMeasure<QuotientPoint>) -> Result<DiscreteMeasure> {
    let mut out = Vec::with_capacity(nu.len());
    for (q, w) in nu.atoms() {
        if q.class.canonical_in_d {
            return Err(Error::IllPosedAtD);
        }
        out.push((*q.canonical(), *w));
    }
    Ok(DiscreteMeasure { atoms: out })
}

/// The split partition `{r <= r0}` / `{r > r0}` in the polar chart.
pub fn radial_split(r0: f64) -> Result<Partition> {
    let g = Expr::parse(&alloc::format!("r - {r0:e}"), Chart::Polar2d, 2)?;
    Ok(Partition::split(g))
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
    fn construction_checks_mass() {
        assert!(DiscreteMeasure::new(vec![(p(1.0, 0.0), 0.5), (p(1.0, 1.0), 0.5)]).is_ok());
        assert!(DiscreteMeasure::new(vec![(p(1.0, 0.0), 0.5)]).is_err());
        assert!(DiscreteMeasure::new(vec![(p(1.0, 0.0), -0.5), (p(1.0, 0.0), 1.5)]).is_err());
        assert!(DiscreteMeasure::<Point>::new(vec![]).is_err());
        let mu = DiscreteMeasure::uniform((0..7).map(|k| p(1.5, k as f64)).collect()).unwrap();
        assert!((mu.total_mass() - 1.0).abs() <= MASS_TOL);
    }

    #[test]
    fn pushforward_basics() {
        let mu = DiscreteMeasure::dirac(Point::cartesian(&[1.0, 0.0]).unwrap());
        let same = mu.pushforward(|x| Ok(*x)).unwrap();
        assert_eq!(same, mu);
        let rot = mu
            .pushforward(|x| Point::cartesian(&[-x.coords()[0], -x.coords()[1]]))
            .unwrap();
        assert_eq!(rot.atoms()[0].0.coords(), &[-1.0, -0.0]);
    }

    #[test]
    fn partial_maps_list_offending_atoms() {
        let mu = DiscreteMeasure::uniform(vec![p(1.0, 0.0), p(2.0, 0.0), p(1.5, 0.0)]).unwrap();
        let err = mu
            .pushforward(|x| {
                if x.coords()[0] > 1.2 {
                    Err(Error::OutOfDomain)
                } else {
                    Ok(*x)
                }
            })
            .unwrap_err();
        assert_eq!(err, Error::PartialMap(vec![1, 2]));
    }

    #[test]
    fn grid_partition_cells() {
        let part = Partition::grid_over(&Domain::annulus(1.0, 2.0).unwrap(), 4).unwrap();
        assert_eq!(part.cell_count(), 17);
        let c = Point::cartesian(&[-1.9, -1.9]).unwrap();
        // Cartesian points are binned by their coordinates too.
        assert_eq!(part.cell_of(&c).unwrap(), 0);
        assert_eq!(part.cell_of(&p(2.0, 0.0)).unwrap(), 4 * 2 + 3);
        assert_eq!(part.cell_of(&p(3.0, 0.0)).unwrap(), 16);
    }

    #[test]
    fn split_partition() {
        let part = radial_split(1.001).unwrap();
        assert_eq!(part.cell_of(&p(1.0, 2.0)).unwrap(), 0);
        assert_eq!(part.cell_of(&p(1.002, 2.0)).unwrap(), 1);
    }

    #[test]
    fn tv_bounds() {
        let part = Partition::grid_over(&Domain::annulus(1.0, 2.0).unwrap(), 8).unwrap();
        let a = DiscreteMeasure::dirac(p(1.5, 0.0));
        let b = DiscreteMeasure::dirac(p(1.5, PI));
        assert_eq!(tv(&part, &a, &a).unwrap(), 0.0);
        assert_eq!(tv(&part, &a, &b).unwrap(), 1.0);
    }

    #[test]
    fn kb_single_atom_is_dirac() {
        let sc = scenarios::example_2_1();
        let x0 = p(1.0, PI);
        let mu = kb_average(&sc, &x0, 0.01, 1).unwrap();
        assert_eq!(mu, DiscreteMeasure::dirac(x0));
    }

    #[test]
    fn kb_atoms_match_phi() {
        let sc = scenarios::example_2_1();
        let x0 = p(1.3, 2.0);
        let mu = kb_average(&sc, &x0, 0.37, 60).unwrap();
        for (k, (a, _)) in mu.atoms().iter().enumerate() {
            let b = phi(&sc, &x0, k as f64 * 0.37).unwrap();
            assert!(a.distance(&b) < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn zero_time_defect_is_zero() {
        let sc = scenarios::example_2_1();
        let mu = uniform_on_arc(1.0, PI, TAU, 64).unwrap();
        let part = Partition::grid_over(&sc.domain, 16).unwrap();
        assert_eq!(
            invariance_defect(&sc, &mu, 0.0, &part).unwrap().tv_defect,
            0.0
        );
    }

    #[test]
    fn support_and_mass_near_d() {
        let sc = scenarios::example_2_1();
        assert_eq!(
            mass_near_d(&sc, &DiscreteMeasure::dirac(p(1.0, 0.0)), 1e-3).unwrap(),
            1.0
        );
        let off = uniform_on_arc(1.0, 3.5, 5.0, 10).unwrap();
        assert_eq!(mass_near_d(&sc, &off, 1e-3).unwrap(), 0.0);

        let grid = crate::nonwandering::Grid::over(&sc.domain, 4).unwrap();
        let params = crate::nonwandering::RecurrenceParams::new(0.01, 0.5, 50.0, 1e-3);
        let flagged = crate::nonwandering::GridSample {
            index: 0,
            point: p(1.0, 1.5 * PI),
            flagged: true,
            first_return: Some(PI),
            zeno: false,
        };
        let om = OmegaEstimate::from_samples(grid, params, vec![flagged]);
        let mu =
            DiscreteMeasure::normalized(vec![(p(1.0, 1.5 * PI), 1.0), (p(2.0, FRAC_PI_2), 1e-9)])
                .unwrap();
        let rep = support_in_omega(&mu, &om, 0.02);
        assert!(rep.pass && rep.max_dist < 1e-12);
        let rep = support_in_omega(&DiscreteMeasure::dirac(p(2.0, 1.5 * PI)), &om, 0.02);
        assert!(!rep.pass && (rep.max_dist - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quotient_round_trip() {
        let sc = scenarios::example_2_1();
        let mu = uniform_on_arc(1.0, PI, TAU - 0.01, 50).unwrap();
        let q = push_to_quotient(&sc, &mu).unwrap();
        assert_eq!(lift_from_quotient(&q).unwrap(), mu);
        let on_d = DiscreteMeasure::dirac(p(1.5, 0.0));
        assert_eq!(
            push_to_quotient(&sc, &on_d).unwrap_err(),
            Error::IllPosedAtD
        );
    }
}
