//! Parallel drivers for the embarrassingly parallel loops. Results are
//! collected in input order, so they match the sequential versions exactly.

use rayon::prelude::*;

use ifs_core::measure::{defect_report, DefectReport, DiscreteMeasure, Partition};
use ifs_core::nonwandering::{classify, Grid, OmegaEstimate, RecurrenceParams};
use ifs_core::quotient::{glued_flow, project, GluingGraph};
use ifs_core::{phi, Error, Point, Result, Scenario};

pub fn estimate_omega(sc: &Scenario, grid: &Grid, p: &RecurrenceParams) -> Result<OmegaEstimate> {
    if grid.is_empty() {
        return Err(Error::Degenerate);
    }
    p.validate(&sc.domain)?;
    let cells = (0..grid.len())
        .into_par_iter()
        .map(|i| classify(sc, grid, p, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(OmegaEstimate::from_samples(
        *grid,
        *p,
        cells.into_iter().flatten().collect(),
    ))
}

/// `(phi_t)_* mu`, failing with every atom whose orbit is undefined at `t`.
pub fn push_phi(sc: &Scenario, mu: &DiscreteMeasure, t: f64) -> Result<DiscreteMeasure> {
    let mapped: Vec<_> = mu
        .atoms()
        .par_iter()
        .map(|(x, w)| phi(sc, x, t).map(|y| (y, *w)))
        .collect();
    let bad: Vec<usize> = mapped
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_err())
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::PartialMap(bad));
    }
    DiscreteMeasure::new(mapped.into_iter().map(|r| r.expect("checked")).collect())
}

pub fn invariance_defect(
    sc: &Scenario,
    mu: &DiscreteMeasure,
    t: f64,
    part: &Partition,
) -> Result<DefectReport> {
    defect_report(t, part, mu, &push_phi(sc, mu, t)?)
}

pub fn conjugacy_residual(
    sc: &Scenario,
    g: &GluingGraph,
    samples: &[Point],
    times: &[f64],
) -> Result<f64> {
    let per_sample = samples
        .par_iter()
        .map(|x| {
            let mut worst: f64 = 0.0;
            for &t in times {
                let lhs = glued_flow(sc, x, t)?;
                let rhs = project(sc, &phi(sc, x, t)?)?;
                worst = worst.max(g.distance(&lhs, &rhs));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_sample.into_iter().fold(0.0, f64::max))
}
