//! Points, charts and the ambient metric.
//!
//! Every point is measured in the Euclidean metric of its Cartesian
//! embedding; polar points `(r, th)` embed as `(r cos th, r sin th)`. Angles
//! accumulate freely inside computations and are only wrapped to `[0, 2pi)`
//! by [`Point::normalized`].

use core::f64::consts::TAU;

use crate::error::{Error, Result};

/// Largest supported state dimension.
pub const MAX_DIM: usize = 4;

/// Tolerance used when two computed points are meant to be the same point.
pub const POINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Chart {
    Cartesian,
    Polar2d,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    chart: Chart,
    dim: u8,
    coords: [f64; MAX_DIM],
}

impl Point {
    pub fn cartesian(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::InvalidPoint("dimension out of range"));
        }
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        let p = Self::from_raw(Chart::Cartesian, coords.len(), c);
        p.validate()?;
        Ok(p)
    }

    pub fn polar(r: f64, th: f64) -> Result<Self> {
        let p = Self::from_raw(Chart::Polar2d, 2, [r, th, 0.0, 0.0]);
        p.validate()?;
        Ok(p)
    }

    /// Builds a point in `chart` from chart coordinates without validation.
    pub(crate) fn from_raw(chart: Chart, dim: usize, coords: [f64; MAX_DIM]) -> Self {
        Self {
            chart,
            dim: dim as u8,
            coords,
        }
    }

    /// Builds a point from chart coordinates, checking the point invariants.
    pub fn from_coords(chart: Chart, coords: &[f64]) -> Result<Self> {
        match chart {
            Chart::Cartesian => Self::cartesian(coords),
            Chart::Polar2d => match coords {
                [r, th] => Self::polar(*r, *th),
                _ => Err(Error::InvalidPoint("polar points have two coordinates")),
            },
        }
    }

    /// Inverse of [`Point::embed`]: polar angles come back in `[0, 2pi)`.
    pub fn from_embedded(chart: Chart, xs: &[f64]) -> Result<Self> {
        match chart {
            Chart::Cartesian => Self::cartesian(xs),
            Chart::Polar2d => match xs {
                [x, y] => {
                    let r = libm::hypot(*x, *y);
                    Self::polar(r, wrap_angle(libm::atan2(*y, *x)))
                }
                _ => Err(Error::InvalidPoint("polar points embed in the plane")),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coords().iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate"));
        }
        if self.chart == Chart::Polar2d && self.coords[0] <= 0.0 {
            return Err(Error::InvalidPoint("polar radius must be positive"));
        }
        Ok(())
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    pub(crate) fn raw(&self) -> [f64; MAX_DIM] {
        self.coords
    }

    /// Cartesian coordinates of the point.
    pub fn embed(&self) -> [f64; MAX_DIM] {
        match self.chart {
            Chart::Cartesian => self.coords,
            Chart::Polar2d => {
                let [r, th, ..] = self.coords;
                let (s, c) = libm::sincos(th);
                [r * c, r * s, 0.0, 0.0]
            }
        }
    }

    /// Dimension of the Cartesian embedding.
    pub fn embed_dim(&self) -> usize {
        self.dim()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        if self.chart == Chart::Polar2d && other.chart == Chart::Polar2d {
            // (r1 - r2)^2 + 4 r1 r2 sin^2(dth / 2): no cancellation for nearby points.
            let [r1, t1, ..] = self.coords;
            let [r2, t2, ..] = other.coords;
            let half = libm::sin(0.5 * (t1 - t2));
            let dr = r1 - r2;
            return libm::sqrt(dr * dr + 4.0 * r1 * r2 * half * half);
        }
        euclid(&self.embed(), &other.embed())
    }

    /// Same point with a polar angle wrapped to `[0, 2pi)`.
    pub fn normalized(&self) -> Point {
        let mut p = *self;
        if p.chart == Chart::Polar2d {
            p.coords[1] = wrap_angle(p.coords[1]);
        }
        p
    }

    /// Lexicographic order of the Cartesian embeddings.
    pub fn lex_cmp(&self, other: &Point) -> core::cmp::Ordering {
        let a = self.embed();
        let b = other.embed();
        for i in 0..MAX_DIM {
            match a[i].total_cmp(&b[i]) {
                core::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        core::cmp::Ordering::Equal
    }
}

pub fn wrap_angle(th: f64) -> f64 {
    let mut w = libm::fmod(th, TAU);
    if w < 0.0 {
        w += TAU;
    }
    // Tiny negative inputs round up to exactly TAU.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub(crate) fn euclid(a: &[f64; MAX_DIM], b: &[f64; MAX_DIM]) -> f64 {
    let mut s = 0.0;
    for i in 0..MAX_DIM {
        let d = a[i] - b[i];
        s += d * d;
    }
    libm::sqrt(s)
}

/// The phase space `X`: a closed box in Cartesian coordinates or a closed
/// annulus in the polar chart.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Domain {
    Box {
        dim: usize,
        lo: [f64; MAX_DIM],
        hi: [f64; MAX_DIM],
    },
    Annulus {
        r_min: f64,
        r_max: f64,
    },
}

const DOMAIN_SLACK: f64 = 1e-9;

impl Domain {
    pub fn new_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.len() > MAX_DIM {
            return Err(Error::ScenarioInvalid(
                "box bounds must have matching dimension".into(),
            ));
        }
        if lo
            .iter()
            .zip(hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::ScenarioInvalid(
                "box bounds must satisfy lo < hi".into(),
            ));
        }
        let mut l = [0.0; MAX_DIM];
        let mut h = [0.0; MAX_DIM];
        l[..lo.len()].copy_from_slice(lo);
        h[..hi.len()].copy_from_slice(hi);
        Ok(Domain::Box {
            dim: lo.len(),
            lo: l,
            hi: h,
        })
    }

    pub fn annulus(r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
            return Err(Error::ScenarioInvalid(
                "annulus needs 0 < r_min < r_max".into(),
            ));
        }
        Ok(Domain::Annulus { r_min, r_max })
    }

    pub fn chart(&self) -> Chart {
        match self {
            Domain::Box { .. } => Chart::Cartesian,
            Domain::Annulus { .. } => Chart::Polar2d,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { dim, .. } => *dim,
            Domain::Annulus { .. } => 2,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        if p.chart() != self.chart() || p.dim() != self.dim() {
            return false;
        }
        match self {
            Domain::Box { dim, lo, hi } => (0..*dim).all(|i| {
                let c = p.coords()[i];
                c >= lo[i] - DOMAIN_SLACK && c <= hi[i] + DOMAIN_SLACK
            }),
            Domain::Annulus { r_min, r_max } => {
                let r = p.coords()[0];
                r >= r_min - DOMAIN_SLACK && r <= r_max + DOMAIN_SLACK
            }
        }
    }

    /// Cartesian bounding box `(lo, hi)` of the domain.
    pub fn bounding_box(&self) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
        match *self {
            Domain::Box { lo, hi, .. } => (lo, hi),
            Domain::Annulus { r_max, .. } => ([-r_max, -r_max, 0.0, 0.0], [r_max, r_max, 0.0, 0.0]),
        }
    }

    /// Chart-coordinate ranges, used to scan for the impulsive set.
    pub fn chart_ranges(&self) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
        match *self {
            Domain::Box { lo, hi, .. } => (lo, hi),
            Domain::Annulus { r_min, r_max } => ([r_min, 0.0, 0.0, 0.0], [r_max, TAU, 0.0, 0.0]),
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        euclid(&lo, &hi)
    }

    /// Largest Euclidean norm of a point of the domain.
    pub fn max_norm(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        let mut s = 0.0;
        for i in 0..MAX_DIM {
            let m = lo[i].abs().max(hi[i].abs());
            s += m * m;
        }
        libm::sqrt(s)
    }
}
