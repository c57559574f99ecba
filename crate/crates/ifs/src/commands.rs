//! Command implementations. Every command writes `<command>.json` (and any
//! point clouds) into the output directory.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use ifs_core::impulse::{sample_impulsive_set, Cursor};
use ifs_core::measure::{
    kb_average, mass_near_d, radial_split, support_in_omega, uniform_on_arc, Partition,
};
use ifs_core::nonwandering::{audit_hypotheses, continuity_report, HypothesisAudit, TauDProfile};
use ifs_core::quotient::{class_of, GluingGraph};
use ifs_core::{
    build_trajectory, check_separation, Grid, ImpulsiveTrajectory, OmegaEstimate, Point,
    RecurrenceParams, Scenario, Truncation,
};

use crate::config::{parse_point, require, Experiment, ScenarioFile};
use crate::error::CliError;
use crate::output::{coord_headers, coords, fmt_real, point, real, sha256_hex, write_csv, Report};
use crate::par;

/// Default spacing of trajectory samples in `simulate`.
pub const DEFAULT_DT: f64 = 0.01;

/// Events listed individually in a simulate report.
const MAX_REPORTED_EVENTS: usize = 1000;

#[derive(Debug)]
pub struct Context {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub hash: String,
    pub out: PathBuf,
}

impl Context {
    pub fn load(path: &Path, out: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Schema(e.to_string()))?;
        let file = ScenarioFile::parse(text)?;
        let scenario = file.scenario()?;
        Ok(Self {
            file,
            scenario,
            hash: sha256_hex(&bytes),
            out: out.to_path_buf(),
        })
    }

    fn report(
        &self,
        command: &str,
        experiment: Option<&str>,
        parameters: Value,
        results: Value,
    ) -> Report {
        Report {
            command: command.into(),
            scenario: self.scenario.name.clone(),
            scenario_hash: self.hash.clone(),
            experiment: experiment.map(Into::into),
            parameters,
            results,
            verdicts: BTreeMap::new(),
        }
    }

    fn dim(&self) -> usize {
        self.scenario.domain.dim()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimulateArgs {
    pub x0: Option<String>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
}

pub fn simulate(ctx: &Context, experiment: &str, args: &SimulateArgs) -> Result<Report, CliError> {
    let spec = match (&args.x0, args.horizon) {
        (Some(_), Some(_)) => None,
        _ => Some(require(
            &ctx.file.experiment(experiment)?.simulate,
            "simulate",
        )?),
    };
    let x0_src = args
        .x0
        .clone()
        .unwrap_or_else(|| spec.expect("spec").x0.clone());
    let x0 = parse_point(&x0_src, ctx.scenario.chart())?;
    let horizon = match (args.horizon, spec.and_then(|s| s.horizon.as_ref())) {
        (Some(h), _) => h,
        (None, Some(h)) => h.value()?,
        (None, None) => ctx.scenario.knobs.horizon_default,
    };
    let dt = args.dt.or(spec.and_then(|s| s.dt)).unwrap_or(DEFAULT_DT);
    if dt.is_nan() || dt <= 0.0 {
        return Err(CliError::Schema("dt must be positive".into()));
    }
    if !ctx.scenario.domain.contains(&x0) {
        return Err(CliError::Core(ifs_core::Error::OutOfDomain));
    }
    let traj = build_trajectory(&ctx.scenario, &x0, horizon)?;

    let mut header = vec!["t".to_string()];
    header.extend(coord_headers(ctx.dim()));
    header.extend(["segment_index".to_string(), "is_event".to_string()]);
    write_csv(
        &ctx.out.join("trajectory.csv"),
        &header,
        &trajectory_rows(&ctx.scenario, &traj, dt)?,
    )?;

    let events: Vec<Value> = traj
        .events
        .iter()
        .take(MAX_REPORTED_EVENTS)
        .map(|e| json!({"time": real(e.time), "hit": point(&e.hit), "image": point(&e.image)}))
        .collect();
    let mut results = json!({
        "event_count": traj.events.len(),
        "events": events,
        "truncation": truncation_name(traj.truncation),
    });
    if let Some(abort) = traj.abort_time() {
        results["abort_time"] = real(abort);
        results["note"] =
            Value::from("impulsive times accumulate; trajectory truncated at the abort");
    }
    let params = json!({"x0": point(&x0), "horizon": real(horizon), "dt": real(dt)});
    let report = ctx.report("simulate", Some(experiment), params, results);
    report.write(&ctx.out)?;
    match traj.abort_time() {
        Some(abort) => Err(CliError::Zeno(abort)),
        None => Ok(report),
    }
}

fn truncation_name(t: Truncation) -> &'static str {
    match t {
        Truncation::HorizonReached => "horizon_reached",
        Truncation::ZenoAbort => "zeno_abort",
    }
}

/// One row at `t = 0`, samples on the `k * dt` grid strictly inside each
/// segment, a hit row and an image row per event, and a final row at the
/// horizon.
fn trajectory_rows(
    sc: &Scenario,
    traj: &ImpulsiveTrajectory,
    dt: f64,
) -> Result<Vec<Vec<String>>, CliError> {
    let row = |t: f64, p: &Point, seg: usize, event: bool| {
        let mut r = vec![fmt_real(t)];
        r.extend(coords(p));
        r.push(seg.to_string());
        r.push(u8::from(event).to_string());
        r
    };
    let mut rows = vec![row(0.0, &traj.start, 0, false)];
    for (i, seg) in traj.segments.iter().enumerate() {
        let end = seg.t_start + seg.duration;
        let mut cur = Cursor::new(&sc.flow, seg.start);
        let mut k = (seg.t_start / dt).floor() as u64 + 1;
        loop {
            let t = k as f64 * dt;
            if t >= end {
                break;
            }
            if t > seg.t_start {
                rows.push(row(t, &cur.at(t - seg.t_start)?, i, false));
            }
            k += 1;
        }
        match traj.events.get(i) {
            Some(e) => {
                rows.push(row(e.time, &e.hit, i, true));
                rows.push(row(e.time, &e.image, i + 1, true));
            }
            None if traj.horizon > 0.0 => {
                rows.push(row(
                    traj.horizon,
                    &cur.at(traj.horizon - seg.t_start)?,
                    i,
                    false,
                ));
            }
            None => {}
        }
    }
    Ok(rows)
}

fn recurrence_params(
    ctx: &Context,
    exp: &Experiment,
) -> Result<(Grid, RecurrenceParams), CliError> {
    let spec = exp.omega()?;
    let grid = Grid::over(&ctx.scenario.domain, spec.grid)?;
    let step = spec.sample_step.unwrap_or(ctx.scenario.knobs.h);
    let p = RecurrenceParams::new(spec.eps_ball, spec.t_min, spec.horizon, step);
    p.validate(&ctx.scenario.domain)?;
    Ok((grid, p))
}

pub fn compute_omega(ctx: &Context, exp: &Experiment) -> Result<(Value, OmegaEstimate), CliError> {
    let (grid, p) = recurrence_params(ctx, exp)?;
    let om = par::estimate_omega(&ctx.scenario, &grid, &p)?;
    let params = json!({
        "grid": grid.res[0],
        "eps_ball": real(p.eps_ball),
        "t_min": real(p.t_min),
        "horizon": real(p.horizon),
        "sample_step": real(p.sample_step),
    });
    Ok((params, om))
}

fn omega_results(om: &OmegaEstimate) -> Value {
    let norms: Vec<f64> = om.flagged().map(norm).collect();
    json!({
        "in_domain": om.samples.len(),
        "flagged": om.flagged_count(),
        "zeno_aborts": om.zeno_count(),
        "cell_diagonal": real(om.grid.cell_diagonal()),
        "tolerance": real(om.tolerance()),
        "flagged_norm_min": real(norms.iter().copied().fold(f64::INFINITY, f64::min)),
        "flagged_norm_max": real(norms.iter().copied().fold(0.0, f64::max)),
    })
}

fn norm(p: &Point) -> f64 {
    p.embed().iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn write_omega_csv(ctx: &Context, om: &OmegaEstimate) -> Result<(), CliError> {
    let mut header = coord_headers(ctx.dim());
    header.extend(["flagged".to_string(), "first_return_time".to_string()]);
    let rows: Vec<Vec<String>> = om
        .samples
        .iter()
        .map(|s| {
            let mut r = coords(&s.point);
            r.push(u8::from(s.flagged).to_string());
            r.push(s.first_return.map(fmt_real).unwrap_or_default());
            r
        })
        .collect();
    write_csv(&ctx.out.join("omega.csv"), &header, &rows)
}

pub fn omega(ctx: &Context, experiment: &str) -> Result<Report, CliError> {
    let exp = ctx.file.experiment(experiment)?;
    let (params, om) = compute_omega(ctx, exp)?;
    write_omega_csv(ctx, &om)?;
    let mut report = ctx.report("omega", Some(experiment), params, omega_results(&om));
    report
        .verdicts
        .insert("omega_nonempty".into(), om.flagged_count() > 0);
    report.write(&ctx.out)?;
    Ok(report)
}

fn probes(radius: f64, n: usize) -> Result<Vec<Point>, CliError> {
    (0..n)
        .map(|k| Point::polar(radius, TAU * k as f64 / n as f64).map_err(CliError::from))
        .collect()
}

struct TaudOutcome {
    params: Value,
    results: Value,
    profile: TauDProfile,
    audit: HypothesisAudit,
}

fn taud_section(
    ctx: &Context,
    exp: &Experiment,
    om: &OmegaEstimate,
) -> Result<TaudOutcome, CliError> {
    let spec = require(&exp.taud, "taud")?;
    let sc = &ctx.scenario;
    let probe_eps = spec.probe_eps.unwrap_or(om.params.eps_ball / 10.0);
    let pts = match sc.chart() {
        ifs_core::Chart::Polar2d => probes(spec.probe_radius, spec.probes)?,
        ifs_core::Chart::Cartesian => {
            // Cartesian scenarios probe the flagged cells themselves.
            om.flagged().copied().collect()
        }
    };
    let profile = continuity_report(sc, om, &pts, probe_eps, spec.scale)?;
    let audit = audit_hypotheses(sc, om, &profile, spec.d_samples)?;
    let worst = profile
        .worst_pair()
        .map(|(a, b)| json!([point(&a), point(&b)]));
    let results = json!({
        "samples": profile.samples.len(),
        "modulus": real(profile.modulus),
        "discontinuous": profile.discontinuous,
        "worst_pair": worst,
        "tau_d_continuous": audit.tau_d_continuous,
        "image_in_omega_minus_d": audit.image_in_omega_minus_d,
        "omega_cap_d_empty": audit.omega_cap_d_empty,
        "d_on_omega": audit.d_on_omega.len(),
        "bad_images": audit.bad_images.iter().map(point).collect::<Vec<_>>(),
    });
    let params = json!({
        "probe_radius": real(spec.probe_radius),
        "probes": spec.probes,
        "probe_eps": real(probe_eps),
        "scale": real(spec.scale),
        "d_samples": spec.d_samples,
    });
    Ok(TaudOutcome {
        params,
        results,
        profile,
        audit,
    })
}

fn write_taud_csv(ctx: &Context, profile: &TauDProfile) -> Result<(), CliError> {
    let mut header = coord_headers(ctx.dim());
    header.push("tau_d".into());
    let rows: Vec<Vec<String>> = profile
        .samples
        .iter()
        .map(|(p, t)| {
            let mut r = coords(p);
            r.push(fmt_real(*t));
            r
        })
        .collect();
    write_csv(&ctx.out.join("taud.csv"), &header, &rows)
}

pub fn taud(ctx: &Context, experiment: &str) -> Result<Report, CliError> {
    let exp = ctx.file.experiment(experiment)?;
    require(&exp.taud, "taud")?;
    let (omega_params, om) = compute_omega(ctx, exp)?;
    let out = taud_section(ctx, exp, &om)?;
    write_taud_csv(ctx, &out.profile)?;
    let params = json!({"omega": omega_params, "taud": out.params});
    let mut report = ctx.report("taud", Some(experiment), params, out.results);
    report
        .verdicts
        .insert("tau_d_continuous".into(), out.audit.tau_d_continuous);
    report.write(&ctx.out)?;
    Ok(report)
}

struct MeasureOutcome {
    params: Value,
    results: Value,
    max_defect: f64,
    mass_near_d: f64,
    support_pass: bool,
}

fn measure_section(
    ctx: &Context,
    exp: &Experiment,
    om: &OmegaEstimate,
) -> Result<MeasureOutcome, CliError> {
    let spec = require(&exp.measure, "measure")?;
    let sc = &ctx.scenario;
    let x0 = parse_point(&spec.x0, sc.chart())?;
    let mu = kb_average(sc, &x0, spec.delta, spec.n)?;
    let part = Partition::grid_over(&sc.domain, spec.partition)?;
    let times = spec.times()?;
    let mut defects = Vec::new();
    let mut max_defect: f64 = 0.0;
    for &t in &times {
        let d = par::invariance_defect(sc, &mu, t, &part)?;
        max_defect = max_defect.max(d.tv_defect);
        defects.push(json!({
            "t": real(t),
            "tv_defect": real(d.tv_defect),
            "worst_cell": d.worst_cell.map(|(i, m)| json!({"index": i, "mass_change": real(m)})),
        }));
    }
    let near = mass_near_d(sc, &mu, spec.margin)?;
    let support = support_in_omega(&mu, om, spec.support_eps);

    let mut header = coord_headers(ctx.dim());
    header.push("weight".into());
    let rows: Vec<Vec<String>> = mu
        .atoms()
        .iter()
        .map(|(p, w)| {
            let mut r = coords(p);
            r.push(fmt_real(*w));
            r
        })
        .collect();
    write_csv(&ctx.out.join("measure.csv"), &header, &rows)?;

    Ok(MeasureOutcome {
        params: json!({
            "x0": point(&x0),
            "delta": real(spec.delta),
            "n": spec.n,
            "partition": spec.partition,
            "times": times.iter().copied().map(real).collect::<Vec<_>>(),
            "margin": real(spec.margin),
            "support_eps": real(spec.support_eps),
        }),
        results: json!({
            "defects": defects,
            "max_defect": real(max_defect),
            "mass_near_d": real(near),
            "support_max_dist": real(support.max_dist),
            "support_in_omega": support.pass,
        }),
        max_defect,
        mass_near_d: near,
        support_pass: support.pass,
    })
}

fn candidate_section(ctx: &Context, exp: &Experiment) -> Result<(Value, Value, f64), CliError> {
    let spec = require(&exp.candidate, "candidate")?;
    let sc = &ctx.scenario;
    let (th0, th1, t) = (spec.th0.value()?, spec.th1.value()?, spec.t.value()?);
    let mu = uniform_on_arc(spec.radius, th0, th1, spec.atoms)?;
    let part = radial_split(spec.split_radius)?;
    let d = par::invariance_defect(sc, &mu, t, &part)?;
    let params = json!({
        "radius": real(spec.radius),
        "th0": real(th0),
        "th1": real(th1),
        "atoms": spec.atoms,
        "split_radius": real(spec.split_radius),
        "t": real(t),
    });
    Ok((params, json!({"tv_defect": real(d.tv_defect)}), d.tv_defect))
}

/// Flagged cells farther than `eps_ball` from `D`, thinned to `n` by a fixed
/// stride.
fn omega_samples(
    sc: &Scenario,
    om: &OmegaEstimate,
    n: usize,
    d_samples: usize,
) -> Result<Vec<Point>, CliError> {
    let d = sample_impulsive_set(sc, d_samples)?;
    let eps = om.params.eps_ball;
    let off: Vec<Point> = om
        .flagged()
        .filter(|x| d.iter().all(|q| q.distance(x) > eps))
        .copied()
        .collect();
    if off.len() <= n {
        return Ok(off);
    }
    Ok((0..n).map(|k| off[k * off.len() / n]).collect())
}

fn quotient_section(
    ctx: &Context,
    exp: &Experiment,
    om: &OmegaEstimate,
) -> Result<(Value, Value, f64), CliError> {
    let spec = require(&exp.quotient, "quotient")?;
    let sc = &ctx.scenario;
    let times = spec.times()?;
    let g = GluingGraph::build(sc, spec.d_samples)?;
    let samples = omega_samples(sc, om, spec.samples, spec.d_samples)?;
    let residual = par::conjugacy_residual(sc, &g, &samples, &times)?;
    let d = sample_impulsive_set(sc, spec.d_samples)?;
    let classes = d
        .iter()
        .step_by((d.len() / 8).max(1))
        .map(|x| class_of(sc, x).map(|c| c.members.iter().map(point).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>, _>>()?;
    let params = json!({
        "d_samples": spec.d_samples,
        "samples": spec.samples,
        "times": times.iter().copied().map(real).collect::<Vec<_>>(),
    });
    let results = json!({
        "atoms": g.atoms().len(),
        "samples_used": samples.len(),
        "conjugacy_residual": real(residual),
        "classes": classes,
    });
    Ok((params, results, residual))
}

pub fn measure(ctx: &Context, experiment: &str) -> Result<Report, CliError> {
    let exp = ctx.file.experiment(experiment)?;
    if exp.measure.is_none() && exp.candidate.is_none() {
        return Err(CliError::Schema(
            "experiment has no `measure` or `candidate` block".into(),
        ));
    }
    let mut params = json!({});
    let mut results = json!({});
    let mut report_verdicts = BTreeMap::new();
    if exp.measure.is_some() {
        let (omega_params, om) = compute_omega(ctx, exp)?;
        let m = measure_section(ctx, exp, &om)?;
        params["omega"] = omega_params;
        params["measure"] = m.params;
        results["measure"] = m.results;
        report_verdicts.insert("support_in_omega".to_string(), m.support_pass);
    }
    if exp.candidate.is_some() {
        let (p, r, _) = candidate_section(ctx, exp)?;
        params["candidate"] = p;
        results["candidate"] = r;
    }
    let mut report = ctx.report("measure", Some(experiment), params, results);
    report.verdicts = report_verdicts;
    report.write(&ctx.out)?;
    Ok(report)
}

pub fn quotient(ctx: &Context, experiment: &str) -> Result<Report, CliError> {
    let exp = ctx.file.experiment(experiment)?;
    require(&exp.quotient, "quotient")?;
    let (omega_params, om) = compute_omega(ctx, exp)?;
    let (p, r, _) = quotient_section(ctx, exp, &om)?;
    let report = ctx.report(
        "quotient",
        Some(experiment),
        json!({"omega": omega_params, "quotient": p}),
        r,
    );
    report.write(&ctx.out)?;
    Ok(report)
}

/// Runs every block of the experiment and compares with `[expected]`.
/// Succeeds when every expectation is met, including expected failures.
pub fn verify(ctx: &Context, experiment: &str) -> Result<Report, CliError> {
    let exp = ctx.file.experiment(experiment)?;
    let expected = &ctx.file.expected;
    let sc = &ctx.scenario;
    let mut params = json!({});
    let mut results = json!({});
    let mut verdicts = BTreeMap::new();
    let mut observed: BTreeMap<&str, Value> = BTreeMap::new();

    if let Some(spec) = &exp.simulate {
        let x0 = parse_point(&spec.x0, sc.chart())?;
        let horizon = match &spec.horizon {
            Some(h) => h.value()?,
            None => sc.knobs.horizon_default,
        };
        let traj = build_trajectory(sc, &x0, horizon)?;
        params["simulate"] = json!({"x0": point(&x0), "horizon": real(horizon)});
        results["simulate"] = json!({
            "event_count": traj.events.len(),
            "truncation": truncation_name(traj.truncation),
        });
        observed.insert(
            "zeno_abort",
            Value::from(traj.truncation == Truncation::ZenoAbort),
        );
    }
    if let Some(spec) = &exp.separation {
        let sep = check_separation(sc, spec.samples)?;
        params["separation"] = json!({"samples": spec.samples});
        results["separation"] =
            json!({"min_gap": real(sep.min_gap), "pass": sep.pass, "d_points": sep.samples});
        observed.insert("separation_pass", Value::from(sep.pass));
    }
    let needs_omega = exp.taud.is_some() || exp.measure.is_some() || exp.quotient.is_some();
    if exp.omega.is_some() || needs_omega {
        let (omega_params, om) = compute_omega(ctx, exp)?;
        params["omega"] = omega_params;
        results["omega"] = omega_results(&om);
        verdicts.insert("omega_nonempty".to_string(), om.flagged_count() > 0);
        if exp.taud.is_some() {
            let t = taud_section(ctx, exp, &om)?;
            params["taud"] = t.params;
            results["taud"] = t.results;
            observed.insert("tau_d_continuous", Value::from(t.audit.tau_d_continuous));
            observed.insert(
                "image_in_omega_minus_d",
                Value::from(t.audit.image_in_omega_minus_d),
            );
            observed.insert("omega_cap_d_empty", Value::from(t.audit.omega_cap_d_empty));
        }
        if exp.measure.is_some() {
            let m = measure_section(ctx, exp, &om)?;
            params["measure"] = m.params;
            results["measure"] = m.results;
            observed.insert("max_defect", real(m.max_defect));
            observed.insert("max_mass_near_d", real(m.mass_near_d));
            observed.insert("support_in_omega", Value::from(m.support_pass));
        }
        if exp.quotient.is_some() {
            let (p, r, residual) = quotient_section(ctx, exp, &om)?;
            params["quotient"] = p;
            results["quotient"] = r;
            observed.insert("max_conjugacy_residual", real(residual));
            observed.insert("min_conjugacy_residual", real(residual));
        }
    }
    if exp.candidate.is_some() {
        let (p, r, defect) = candidate_section(ctx, exp)?;
        params["candidate"] = p;
        results["candidate"] = r;
        observed.insert("min_candidate_defect", real(defect));
    }

    let expected_map =
        serde_json::to_value(expected).map_err(|e| CliError::Schema(e.to_string()))?;
    let mut mismatches = Vec::new();
    for (key, want) in expected_map.as_object().into_iter().flatten() {
        if want.is_null() {
            continue;
        }
        let Some(got) = observed.get(key.as_str()) else {
            return Err(CliError::Schema(format!(
                "expected `{key}` but the experiment does not compute it"
            )));
        };
        let ok = match (want, got) {
            (Value::Bool(w), Value::Bool(g)) => w == g,
            (w, g) => {
                let (w, g) = (
                    w.as_f64().unwrap_or(f64::NAN),
                    g.as_f64().unwrap_or(f64::NAN),
                );
                if key.starts_with("max_") {
                    g <= w
                } else {
                    g >= w
                }
            }
        };
        if !ok {
            mismatches.push(format!("{key}: expected {want}, observed {got}"));
        }
        verdicts.insert(key.clone(), ok);
    }
    results["expected"] = expected_map;

    let mut report = ctx.report("verify", Some(experiment), params, results);
    report.verdicts = verdicts;
    report.write(&ctx.out)?;
    if !report.passed() {
        let mut all = mismatches;
        if all.is_empty() {
            all.push("estimate of the non-wandering set is empty".into());
        }
        return Err(CliError::Audit(all.join("; ")));
    }
    Ok(report)
}
