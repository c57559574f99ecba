//! The gluing relation `x ~ I(x)` and the quotient semiflow.
//!
//! Two points are related when `x = y`, `y = I(x)`, `x = I(y)` or
//! `I(x) = I(y)`. Classes are finite, so the quotient pseudometric is
//! computed as a hop-limited shortest path on a graph over sampled atoms:
//! Euclidean edges between every pair plus zero-cost edges inside a class.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::impulse::{first_hit, phi, sample_impulsive_set, Scenario};
use crate::point::{Point, MAX_DIM, POINT_TOL};

/// Class hops allowed on a chain; a path may use `2 * K + 1` edges.
pub const CLASS_HOPS: usize = 4;

/// D samples used to invert `I` when no inverse is declared.
const PREIMAGE_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquivClass {
    /// Members in lexicographic order of their embeddings.
    pub members: Vec<Point>,
    pub canonical: Point,
    /// No member lies off `D`.
    pub canonical_in_d: bool,
}

/// `pi(x)`, carried as the class of `x`.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuotientPoint {
    pub class: EquivClass,
}

impl QuotientPoint {
    pub fn canonical(&self) -> &Point {
        &self.class.canonical
    }

    pub fn members(&self) -> &[Point] {
        &self.class.members
    }
}

/// Same class: canonical representatives agree to [`POINT_TOL`].
impl PartialEq for QuotientPoint {
    fn eq(&self, other: &Self) -> bool {
        self.canonical().distance(other.canonical()) <= POINT_TOL
    }
}

/// `I^{-1}({y})` for the relation map.
pub fn preimages(sc: &Scenario, y: &Point) -> Result<Vec<Point>> {
    if let Some(inv) = sc.map.inverse() {
        // The declared inverse is trusted only where it really inverts.
        let Ok(x) = inv.map_point(y) else {
            return Ok(Vec::new());
        };
        let ok =
            sc.domain.contains(&x) && sc.in_d(&x)? && sc.map.relate(&x)?.distance(y) <= POINT_TOL;
        return Ok(if ok { vec![x] } else { Vec::new() });
    }
    let sample = sample_impulsive_set(sc, PREIMAGE_SAMPLES)?;
    if sample.is_empty() {
        return Err(Error::PreimageUnavailable);
    }
    search_preimages(sc, &sample, y)
}

/// Root search for `I(x) = y` along chords between neighbouring `D` samples.
fn search_preimages(sc: &Scenario, sample: &[Point], y: &Point) -> Result<Vec<Point>> {
    let chart = sc.chart();
    let dim = sc.domain.dim();
    let residual = |p: &Point| -> f64 { sc.map.relate(p).map_or(f64::INFINITY, |q| q.distance(y)) };
    let mut out: Vec<Point> = Vec::new();
    let mut consider = |p: Point| -> Result<()> {
        if residual(&p) <= POINT_TOL
            && sc.domain.contains(&p)
            && sc.in_d(&p)?
            && !out.iter().any(|q| q.distance(&p) <= 1e-7)
        {
            out.push(p);
        }
        Ok(())
    };
    for (i, a) in sample.iter().enumerate() {
        consider(*a)?;
        // Chords to the two nearest samples.
        let mut near: Vec<(f64, usize)> = sample
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, b)| (a.distance(b), j))
            .collect();
        near.sort_by(|u, v| u.0.total_cmp(&v.0));
        for &(_, j) in near.iter().take(2) {
            let ea = a.embed();
            let eb = sample[j].embed();
            let at = |u: f64| -> Option<Point> {
                let mut e = [0.0; MAX_DIM];
                for k in 0..dim {
                    e[k] = ea[k] + u * (eb[k] - ea[k]);
                }
                let p = Point::from_embedded(chart, &e[..dim]).ok()?;
                project_to_section(sc, p)
            };
            let f = |u: f64| at(u).map_or(f64::INFINITY, |p| residual(&p));
            let u = golden_min(f, 0.0, 1.0);
            if let Some(p) = at(u) {
                consider(p)?;
            }
        }
    }
    out.sort_by(|a, b| a.lex_cmp(b));
    Ok(out)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Newton steps on `s` with a central-difference gradient in chart
/// coordinates.
fn project_to_section(sc: &Scenario, p: Point) -> Option<Point> {
    let s = &sc.surface.section;
    let dim = p.dim();
    let mut x = p.raw();
    let tol = sc.knobs.hit_bisection_tol;
    for _ in 0..30 {
        let v = s.eval_raw(&x);
        if !v.is_finite() {
            return None;
        }
        if v.abs() <= tol {
            break;
        }
        let mut g = [0.0; MAX_DIM];
        let mut norm2 = 0.0;
        for i in 0..dim {
            let h = 1e-7 * (1.0 + x[i].abs());
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            g[i] = (s.eval_raw(&xp) - s.eval_raw(&xm)) / (2.0 * h);
            norm2 += g[i] * g[i];
        }
        if !(norm2 > 0.0) {
            return None;
        }
        for i in 0..dim {
            x[i] -= v * g[i] / norm2;
        }
    }
    let q = Point::from_raw(p.chart(), dim, x);
    q.validate().ok()?;
    Some(q)
}

/// `C_x = {x, I(x)} ∪ I^{-1}({x}) ∪ I^{-1}({I(x)})` for `x` in `D`, and
/// `{x} ∪ I^{-1}({x})` otherwise.
pub fn class_of(sc: &Scenario, x: &Point) -> Result<EquivClass> {
    if !sc.domain.contains(x) {
        return Err(Error::OutOfDomain);
    }
    let mut members = vec![*x];
    if sc.in_d(x)? {
        let y = sc.map.relate(x)?;
        members.push(y);
        members.extend(preimages(sc, &y)?);
    }
    members.extend(preimages(sc, x)?);

    let mut uniq: Vec<Point> = Vec::with_capacity(members.len());
    for m in members {
        if !uniq.iter().any(|u| u.distance(&m) <= POINT_TOL) {
            uniq.push(m);
        }
    }
    uniq.sort_by(|a, b| a.lex_cmp(b));
    let mut canonical = None;
    for m in &uniq {
        if !sc.in_d(m)? {
            canonical = Some(*m);
            break;
        }
    }
    let canonical_in_d = canonical.is_none();
    Ok(EquivClass {
        canonical: canonical.unwrap_or(uniq[0]),
        members: uniq,
        canonical_in_d,
    })
}

/// The natural projection `pi`.
pub fn project(sc: &Scenario, x: &Point) -> Result<QuotientPoint> {
    Ok(QuotientPoint {
        class: class_of(sc, x)?,
    })
}

/// `psi_t(pi(x)) = pi(phi_t(x))`, evaluated through the canonical member.
pub fn psi(sc: &Scenario, q: &QuotientPoint, t: f64) -> Result<QuotientPoint> {
    if q.class.canonical_in_d {
        return Err(Error::IllPosedAtD);
    }
    project(sc, &phi(sc, q.canonical(), t)?)
}

/// Flows on the quotient directly: follow the base flow and, on reaching `D`,
/// continue from the off-`D` member of the hit's class. Unlike
/// `pi(phi_t(x))` this never evaluates the jump map itself.
pub fn glued_flow(sc: &Scenario, x: &Point, t: f64) -> Result<QuotientPoint> {
    let tol = sc.knobs.hit_bisection_tol;
    let mut t0 = 0.0;
    let mut cur = *x;
    let mut jumps = 0usize;
    loop {
        let rest = t - t0;
        match first_hit(sc, &cur, rest + sc.knobs.h)? {
            Some(hit) if hit.tau <= rest + tol => {
                let class = class_of(sc, &hit.point)?;
                if class.canonical_in_d {
                    return Err(Error::IllPosedAtD);
                }
                jumps += 1;
                if jumps > sc.knobs.zeno_max_impulses {
                    return Err(Error::BeyondAbort { abort_time: t0 });
                }
                t0 += hit.tau;
                cur = class.canonical;
            }
            _ => return project(sc, &sc.flow.advance(&cur, rest.max(0.0))?),
        }
    }
}

/// Atoms for the quotient pseudometric.
#[derive(Debug, Clone)]
pub struct GluingGraph {
    atoms: Vec<Point>,
    class_id: Vec<usize>,
    hop_limit: usize,
}

impl GluingGraph {
    /// Atoms are a sample of `D` and their images under the relation map.
    pub fn build(sc: &Scenario, d_samples: usize) -> Result<Self> {
        let d = sample_impulsive_set(sc, d_samples)?;
        let mut atoms = Vec::with_capacity(2 * d.len());
        let mut class_id = Vec::with_capacity(2 * d.len());
        for (i, x) in d.iter().enumerate() {
            atoms.push(*x);
            class_id.push(i);
            atoms.push(sc.map.relate(x)?);
            class_id.push(i);
        }
        let mut g = Self {
            atoms,
            class_id,
            hop_limit: 2 * CLASS_HOPS + 1,
        };
        g.merge_coincident();
        Ok(g)
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    /// Whether atoms `i` and `j` are joined by a zero-cost edge.
    pub fn glued(&self, i: usize, j: usize) -> bool {
        self.class_id[i] == self.class_id[j]
    }

    /// Coincident atoms share a class (`I(x) = I(y)` chains).
    fn merge_coincident(&mut self) {
        let n = self.atoms.len();
        for i in 0..n {
            for j in i + 1..n {
                if self.class_id[i] != self.class_id[j]
                    && self.atoms[i].distance(&self.atoms[j]) <= POINT_TOL
                {
                    let (from, to) = (self.class_id[j], self.class_id[i]);
                    for c in self.class_id.iter_mut() {
                        if *c == from {
                            *c = to;
                        }
                    }
                }
            }
        }
    }

    /// Quotient distance between two classes: shortest chain from any member
    /// of `a` to any member of `b` with at most `2 * K + 1` edges.
    pub fn distance(&self, a: &QuotientPoint, b: &QuotientPoint) -> f64 {
        if a == b {
            return 0.0;
        }
        let mut g = self.clone();
        let next = g.class_id.iter().max().map_or(0, |m| m + 1);
        let src: Vec<usize> = (0..a.members().len()).map(|k| g.atoms.len() + k).collect();
        g.atoms.extend_from_slice(a.members());
        g.class_id
            .extend(core::iter::repeat_n(next, a.members().len()));
        let dst: Vec<usize> = (0..b.members().len()).map(|k| g.atoms.len() + k).collect();
        g.atoms.extend_from_slice(b.members());
        g.class_id
            .extend(core::iter::repeat_n(next + 1, b.members().len()));
        g.merge_coincident();

        let n = g.atoms.len();
        let mut dist = vec![f64::INFINITY; n];
        for &s in &src {
            dist[s] = 0.0;
        }
        for _ in 0..g.hop_limit {
            let mut nd = dist.clone();
            for i in 0..n {
                if !dist[i].is_finite() {
                    continue;
                }
                for j in 0..n {
                    let w = if g.class_id[i] == g.class_id[j] {
                        0.0
                    } else {
                        g.atoms[i].distance(&g.atoms[j])
                    };
                    if dist[i] + w < nd[j] {
                        nd[j] = dist[i] + w;
                    }
                }
            }
            dist = nd;
        }
        dst.iter().map(|&j| dist[j]).fold(f64::INFINITY, f64::min)
    }
}

/// Free-function form of [`GluingGraph::distance`].
pub fn quotient_distance(g: &GluingGraph, a: &QuotientPoint, b: &QuotientPoint) -> f64 {
    g.distance(a, b)
}

/// Largest quotient distance between the glued flow of `x` and `pi(phi_t(x))`
/// over samples and times. Zero when the jump map agrees with the gluing.
pub fn conjugacy_residual(
    sc: &Scenario,
    g: &GluingGraph,
    samples: &[Point],
    times: &[f64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in samples {
        for &t in times {
            let lhs = glued_flow(sc, x, t)?;
            let rhs = project(sc, &phi(sc, x, t)?)?;
            worst = worst.max(g.distance(&lhs, &rhs));
        }
    }
    Ok(worst)
}
