//! Scenario files.
//!
//! A scenario is a TOML document describing the system and any number of
//! named experiment blocks. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;

use serde::Deserialize;

use ifs_core::flow::DEFAULT_STEP;
use ifs_core::{
    BaseFlow, Chart, Crossing, Domain, Expr, FieldExpr, ImpulseMap, ImpulseSurface, Knobs, Point,
    Scenario,
};

use crate::error::CliError;

/// A number, or a constant expression such as `"3*pi/2"`.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Real {
    Number(f64),
    Expr(String),
}

impl Real {
    pub fn value(&self) -> Result<f64, CliError> {
        match self {
            Real::Number(v) => Ok(*v),
            Real::Expr(src) => Ok(Expr::parse(src, Chart::Cartesian, 1)
                .and_then(|e| e.eval_constant())
                .map_err(|e| CliError::Schema(format!("constant `{src}`: {e}")))?),
        }
    }
}

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real::Number(v)
    }
}

fn values(xs: &[Real]) -> Result<Vec<f64>, CliError> {
    xs.iter().map(Real::value).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub chart: Chart,
    pub domain: DomainSpec,
    pub flow: FlowSpec,
    pub section: SectionSpec,
    pub impulse: ImpulseSpec,
    #[serde(default)]
    pub knobs: KnobSpec,
    #[serde(default)]
    pub experiments: BTreeMap<String, Experiment>,
    #[serde(default)]
    pub expected: Expected,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    Annulus(AnnulusSpec),
    Box(BoxSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusSpec {
    pub r_min: f64,
    pub r_max: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum FlowKind {
    Rotation,
    Contraction,
    Field,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub kind: FlowKind,
    pub field: Option<String>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub s: String,
    pub c: String,
    pub crossing: Crossing,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseSpec {
    pub forward: String,
    pub inverse: Option<String>,
    pub gluing: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnobSpec {
    pub h: Option<f64>,
    pub hit_bisection_tol: Option<f64>,
    pub tau_min: Option<f64>,
    pub zeno_min_gap: Option<f64>,
    pub zeno_max_impulses: Option<usize>,
    pub horizon_default: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub simulate: Option<SimulateSpec>,
    pub separation: Option<SeparationSpec>,
    pub omega: Option<OmegaSpec>,
    pub taud: Option<TaudSpec>,
    pub measure: Option<MeasureSpec>,
    pub candidate: Option<CandidateSpec>,
    pub quotient: Option<QuotientSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub x0: String,
    pub horizon: Option<Real>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationSpec {
    pub samples: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaSpec {
    pub grid: usize,
    pub eps_ball: f64,
    pub t_min: f64,
    pub horizon: f64,
    pub sample_step: Option<f64>,
}

/// `tau_D` is probed on the circle of radius `probe_radius`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaudSpec {
    pub probe_radius: f64,
    pub probes: usize,
    pub probe_eps: Option<f64>,
    pub scale: f64,
    pub d_samples: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub x0: String,
    pub delta: f64,
    pub n: usize,
    pub partition: usize,
    pub times: Vec<Real>,
    pub margin: f64,
    pub support_eps: f64,
}

/// Uniform atoms on an arc, tested against a radial split.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    pub radius: f64,
    pub th0: Real,
    pub th1: Real,
    pub atoms: usize,
    pub split_radius: f64,
    pub t: Real,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuotientSpec {
    pub d_samples: usize,
    pub samples: usize,
    pub times: Vec<Real>,
}

/// Outcomes `verify` must reproduce; absent keys are not checked.
#[derive(Debug, Clone, Default, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub zeno_abort: Option<bool>,
    pub separation_pass: Option<bool>,
    pub tau_d_continuous: Option<bool>,
    pub image_in_omega_minus_d: Option<bool>,
    pub omega_cap_d_empty: Option<bool>,
    pub max_defect: Option<f64>,
    pub max_mass_near_d: Option<f64>,
    pub support_in_omega: Option<bool>,
    pub min_candidate_defect: Option<f64>,
    pub max_conjugacy_residual: Option<f64>,
    pub min_conjugacy_residual: Option<f64>,
}

impl Experiment {
    pub fn omega(&self) -> Result<&OmegaSpec, CliError> {
        self.omega.as_ref().ok_or_else(|| missing("omega"))
    }
}

fn missing(block: &str) -> CliError {
    CliError::Schema(format!("experiment has no `{block}` block"))
}

pub fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    block.as_ref().ok_or_else(|| missing(name))
}

fn schema(what: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Schema(format!("{what}: {e}"))
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))
    }

    pub fn experiment(&self, name: &str) -> Result<&Experiment, CliError> {
        self.experiments
            .get(name)
            .ok_or_else(|| CliError::Schema(format!("no experiment named `{name}`")))
    }

    pub fn knobs(&self) -> Knobs {
        let d = Knobs::default();
        let k = &self.knobs;
        Knobs {
            h: k.h.unwrap_or(d.h),
            hit_bisection_tol: k.hit_bisection_tol.unwrap_or(d.hit_bisection_tol),
            tau_min: k.tau_min.unwrap_or(d.tau_min),
            zeno_min_gap: k.zeno_min_gap.unwrap_or(d.zeno_min_gap),
            zeno_max_impulses: k.zeno_max_impulses.unwrap_or(d.zeno_max_impulses),
            horizon_default: k.horizon_default.unwrap_or(d.horizon_default),
        }
    }

    /// Builds and validates the system described by the file.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let chart = self.chart;
        let domain = match (&self.domain, chart) {
            (DomainSpec::Annulus(a), Chart::Polar2d) => Domain::annulus(a.r_min, a.r_max)?,
            (DomainSpec::Box(b), Chart::Cartesian) => Domain::new_box(&b.lo, &b.hi)?,
            _ => return Err(CliError::Schema("domain does not match chart".into())),
        };
        let dim = domain.dim();
        let knobs = self.knobs();
        let scalar =
            |what: &str, src: &str| Expr::parse(src, chart, dim).map_err(|e| schema(what, e));
        let field =
            |what: &str, src: &str| FieldExpr::parse(src, dim, chart).map_err(|e| schema(what, e));

        let flow = match (&self.flow.kind, &self.flow.field) {
            (FlowKind::Rotation, None) => BaseFlow::Rotation,
            (FlowKind::Contraction, None) => BaseFlow::Contraction,
            (FlowKind::Field, Some(src)) => {
                let step = self.flow.step.unwrap_or(knobs.h.min(DEFAULT_STEP));
                BaseFlow::numeric(field("flow.field", src)?, step, &domain)?
            }
            (FlowKind::Field, None) => {
                return Err(CliError::Schema("flow.field is required".into()))
            }
            (_, Some(_)) => {
                return Err(CliError::Schema("flow.field needs kind = \"field\"".into()))
            }
        };
        let surface = ImpulseSurface::new(
            scalar("section.s", &self.section.s)?,
            scalar("section.c", &self.section.c)?,
            self.section.crossing,
        );
        let inverse = self
            .impulse
            .inverse
            .as_deref()
            .map(|s| field("impulse.inverse", s))
            .transpose()?;
        let mut map = ImpulseMap::new(field("impulse.forward", &self.impulse.forward)?, inverse);
        if let Some(g) = &self.impulse.gluing {
            map = map.with_gluing(field("impulse.gluing", g)?);
        }
        let sc = Scenario::new(self.name.clone(), domain, flow, surface, map, knobs)?;
        sc.audit_maps(32)?;
        Ok(sc)
    }
}

/// Parses `"1, pi"` into a point of `chart`.
pub fn parse_point(src: &str, chart: Chart) -> Result<Point, CliError> {
    let coords = src
        .split(',')
        .map(|part| Real::Expr(part.trim().to_string()).value())
        .collect::<Result<Vec<_>, _>>()?;
    Point::from_coords(chart, &coords).map_err(|e| schema(&format!("point `{src}`"), e))
}

impl MeasureSpec {
    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        values(&self.times)
    }
}

impl QuotientSpec {
    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        values(&self.times)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_accept_expressions() {
        assert_eq!(Real::Number(2.5).value().unwrap(), 2.5);
        let v = Real::Expr("3*pi/2".into()).value().unwrap();
        assert!((v - 1.5 * std::f64::consts::PI).abs() < 1e-15);
        assert!(Real::Expr("r".into()).value().is_err());
    }

    #[test]
    fn points_parse() {
        let p = parse_point("1, pi", Chart::Polar2d).unwrap();
        assert_eq!(p.coords(), &[1.0, std::f64::consts::PI]);
        assert!(parse_point("1", Chart::Polar2d).is_err());
        assert!(parse_point("0, 1", Chart::Polar2d).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
            name = "x"
            chart = "polar2d"
            colour = "blue"
            [domain]
            r_min = 1.0
            r_max = 2.0
            [flow]
            kind = "rotation"
            [section]
            s = "sin(th)"
            c = "cos(th)"
            crossing = "ascending"
            [impulse]
            forward = "r; th"
        "#;
        let err = ScenarioFile::parse(text).unwrap_err();
        assert!(matches!(err, CliError::Schema(_)));
        let ok = text.replace("colour = \"blue\"", "");
        ScenarioFile::parse(&ok).unwrap().scenario().unwrap();
    }
}
