//! Batch runs: configuration parsing with per-scenario defaults and output writing.
//!
//! A configuration is a JSON object. The scenario's defaults are laid down first, the file
//! is merged over them, and `key=value` overrides (dotted paths, JSON values) come last.
//! The merged document is then deserialized strictly, so unknown keys are rejected with
//! their path.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::assembly::Assembler;
use crate::complex::{DeRhamComplex, SpaceTag};
use crate::diagnostics::{DiagnosticsRecord, Energies};
use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::mesh::{BoxDomain, HexMesh, MappingSpec};
use crate::mms::{
    fit_order, interpolation_sweep, CaseParams, ErrorReport, ManufacturedCase, SweepAxis, SweepPoint, Variable,
};
use crate::scalar::vec3::V3;
use crate::scheme::{HallMhdScheme, RunOutput, SchemeParams, SimulationState, SourceSpec};
use crate::vtk::{write_snapshot, NamedField};

/// Version of the CSV column sets, recorded in `schema.json`.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    TemporalConvergence,
    SpatialConvergence,
    StructurePreservation,
    Custom,
}

impl Scenario {
    pub fn is_sweep(self) -> bool {
        matches!(self, Scenario::TemporalConvergence | Scenario::SpatialConvergence)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// `u0 = B0 = (z(z-1) cos(pi x) sin(pi y), z(1-z) sin(pi x) cos(pi y), 0)`, no forcing.
    Structure,
    /// The manufactured solution with its force and magnetic source.
    Manufactured,
    /// All fields zero, no forcing.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write `fields_XXXX.vtk` every this many iterations (and at `k = 0`); 0 disables.
    pub vtk_every: usize,
    /// Sample points per element and axis in VTK snapshots.
    pub vtk_samples: usize,
    /// Write `checkpoint_XXXX.json` every this many iterations; 0 disables.
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Elements per axis, `K`.
    pub elements: usize,
    /// Polynomial degree `N`.
    pub degree: usize,
    pub domain: BoxDomain<f64>,
    pub mapping: MappingSpec<f64>,
    pub params: SchemeParams,
    pub initial: InitialCondition,
    /// Sweep grid for the convergence scenarios: `K` values (default `[elements]`).
    pub sweep_elements: Option<Vec<usize>>,
    /// Sweep grid for the convergence scenarios: time steps (default `[params.dt]`).
    pub sweep_dts: Option<Vec<f64>>,
    pub output: OutputConfig,
    /// Continue a single run from a checkpoint instead of the initial condition.
    pub resume_from: Option<PathBuf>,
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_string(), message: message.into() }
}

fn scenario_defaults(s: Scenario) -> Value {
    let unit = json!({ "lo": [0.0, 0.0, 0.0], "hi": [1.0, 1.0, 1.0] });
    let tau = 2.0 * std::f64::consts::PI;
    let cube = json!({ "lo": [0.0, 0.0, 0.0], "hi": [tau, tau, tau] });
    let affine = json!({ "kind": "identity_affine", "c": 0.0 });
    let output = json!({ "dir": "output", "vtk_every": 0, "vtk_samples": 3, "checkpoint_every": 0 });
    let unit_params = json!({ "r_f": 1.0, "r_m": 1.0, "c_lorentz": 1.0, "h_hall": 1.0, "t_final": 1.0 });
    let mut v = match s {
        Scenario::StructurePreservation => json!({
            "elements": 9,
            "degree": 2,
            "domain": unit,
            "mapping": { "kind": "crazy", "c": 0.1 },
            "params": { "r_f": 100.0, "r_m": 100.0, "c_lorentz": 1.0, "h_hall": 1.0, "dt": 0.01, "t_final": 1.0 },
            "initial": "structure",
        }),
        Scenario::TemporalConvergence => json!({
            "elements": 6,
            "degree": 3,
            "domain": cube,
            "mapping": affine,
            "params": unit_params,
            "initial": "manufactured",
            "sweep_dts": (9..=14).map(|d| 1.0 / d as f64).collect::<Vec<_>>(),
        }),
        Scenario::SpatialConvergence => json!({
            "elements": 16,
            "degree": 1,
            "domain": cube,
            "mapping": affine,
            "params": merge(unit_params, json!({ "dt": 0.01 })),
            "initial": "manufactured",
            "sweep_elements": (8..=13).map(|k| 2 * k).collect::<Vec<usize>>(),
        }),
        Scenario::Custom => json!({
            "elements": 4,
            "degree": 1,
            "domain": unit,
            "mapping": affine,
            "params": {},
        }),
    };
    let obj = v.as_object_mut().unwrap();
    obj.insert("scenario".into(), serde_json::to_value(s).unwrap());
    obj.insert("output".into(), output);
    obj.entry("sweep_elements").or_insert(Value::Null);
    obj.entry("sweep_dts").or_insert(Value::Null);
    obj.insert("resume_from".into(), Value::Null);
    // SchemeParams defaults fill whatever the scenario leaves open
    let base = serde_json::to_value(SchemeParams::default()).unwrap();
    let p = obj.remove("params").unwrap();
    obj.insert("params".into(), merge(base, p));
    v
}

/// Recursive object merge; non-object values in `over` replace those in `base`.
fn merge(base: Value, over: Value) -> Value {
    match (base, over) {
        (Value::Object(mut b), Value::Object(o)) => {
            for (k, v) in o {
                let merged = match b.remove(&k) {
                    Some(old) => merge(old, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            Value::Object(b)
        }
        (_, o) => o,
    }
}

/// Applies `key.sub=value`; the value is parsed as JSON, falling back to a string.
fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(assignment, "override must have the form key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(config_error(assignment, "empty key"));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(m) => m,
            _ => return Err(config_error(&parts[..i].join("."), "not an object")),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

impl RunConfig {
    /// Parses a configuration document (possibly empty) plus overrides.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut user: Value = if text.trim().is_empty() {
            Value::Object(Map::new())
        } else {
            serde_json::from_str(text).map_err(|e| config_error("", format!("invalid JSON: {e}")))?
        };
        if !user.is_object() {
            return Err(config_error("", "the configuration must be a JSON object"));
        }
        for o in overrides {
            apply_override(&mut user, o)?;
        }
        let scenario_value = user.get("scenario").cloned().ok_or_else(|| config_error("scenario", "missing required field"))?;
        let scenario: Scenario = serde_json::from_value(scenario_value)
            .map_err(|e| config_error("scenario", e.to_string()))?;
        let doc = merge(scenario_defaults(scenario), user);
        let cfg: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            config_error(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_error("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(p.dt.is_finite() && p.dt > 0.0) {
            return Err(config_error("params.dt", "must be positive"));
        }
        if !(p.t_final.is_finite() && p.t_final > 0.0) {
            return Err(config_error("params.t_final", "must be positive"));
        }
        if self.elements == 0 {
            return Err(config_error("elements", "must be at least 1"));
        }
        if self.degree == 0 {
            return Err(config_error("degree", "must be at least 1"));
        }
        if self.output.vtk_samples < 2 {
            return Err(config_error("output.vtk_samples", "must be at least 2"));
        }
        if let Some(ks) = &self.sweep_elements {
            if ks.is_empty() || ks.contains(&0) {
                return Err(config_error("sweep_elements", "must be a non-empty list of positive integers"));
            }
        }
        if let Some(dts) = &self.sweep_dts {
            if dts.is_empty() || dts.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                return Err(config_error("sweep_dts", "must be a non-empty list of positive numbers"));
            }
        }
        if self.scenario.is_sweep() && self.initial != InitialCondition::Manufactured {
            return Err(config_error("initial", "convergence scenarios use the manufactured solution"));
        }
        if self.scenario.is_sweep() && self.resume_from.is_some() {
            return Err(config_error("resume_from", "only single runs can be resumed"));
        }
        p.validate().map_err(|e| config_error("params", e.to_string()))
    }

    /// Configurations of a convergence sweep, `K` outer and `dt` inner.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let ks = self.sweep_elements.clone().unwrap_or_else(|| vec![self.elements]);
        let dts = self.sweep_dts.clone().unwrap_or_else(|| vec![self.params.dt]);
        ks.iter()
            .flat_map(|&k| dts.iter().map(move |&dt| SweepPoint { degree: self.degree, elements: k, dt }))
            .collect()
    }

    fn sweep_axis(&self) -> SweepAxis {
        match self.scenario {
            Scenario::SpatialConvergence => SweepAxis::Spatial,
            _ => SweepAxis::Temporal,
        }
    }
}

/// `z(z-1) cos(pi x) sin(pi y), z(1-z) sin(pi x) cos(pi y), 0`.
pub fn structure_field(x: &V3<f64>, _t: f64) -> V3<f64> {
    use std::f64::consts::PI;
    let z = x[2];
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    [z * (z - 1.0) * cx * sy, z * (1.0 - z) * sx * cy, 0.0]
}

#[derive(Debug, Serialize)]
struct ErrorRow {
    degree: usize,
    elements: usize,
    dt: f64,
    iterations: usize,
    variable: &'static str,
    error: f64,
}

#[derive(Debug, Serialize)]
struct OrderRow {
    variable: &'static str,
    order: f64,
    reference_order: f64,
}

/// What a finished execution produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<DiagnosticsRecord>,
    pub reports: Vec<ErrorReport>,
    pub orders: Vec<(Variable, f64)>,
    pub reference_orders: Vec<(Variable, f64)>,
    /// Energies of the initial state of a single run.
    pub initial: Option<Energies>,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| config_error("output.dir", format!("cannot create {}: {e}", dir.display())))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_schema(dir: &Path) -> Result<()> {
    let diag = diagnostics_header();
    let schema = json!({
        "version": CSV_SCHEMA_VERSION,
        "diagnostics.csv": diag,
        "errors.csv": ["degree", "elements", "dt", "iterations", "variable", "error"],
        "orders.csv": ["variable", "order", "reference_order"],
    });
    write_json(&dir.join("schema.json"), &schema)
}

/// Runs the configured scenario and writes every output file.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary> {
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    write_json(&dir.join("config.resolved.json"), cfg)?;
    write_schema(dir)?;
    if cfg.scenario.is_sweep() {
        execute_sweep(cfg)
    } else {
        let (records, report, initial) = execute_single(cfg, cfg.elements, cfg.params.dt, dir)?;
        let reports: Vec<ErrorReport> = report.into_iter().collect();
        if !reports.is_empty() {
            write_errors(&dir.join("errors.csv"), &reports)?;
        }
        Ok(RunSummary { records, reports, orders: Vec::new(), reference_orders: Vec::new(), initial: Some(initial) })
    }
}

fn write_errors(path: &Path, reports: &[ErrorReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in reports {
        for (v, e) in &r.errors {
            w.serialize(ErrorRow {
                degree: r.degree,
                elements: r.elements,
                dt: r.dt,
                iterations: r.iterations,
                variable: v.name(),
                error: *e,
            })
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn execute_sweep(cfg: &RunConfig) -> Result<RunSummary> {
    let points = cfg.sweep_points();
    let axis = cfg.sweep_axis();
    let mut reports = Vec::with_capacity(points.len());
    let mut records = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let sub = cfg.output.dir.join(format!("run_{i:02}_n{}_k{}", p.degree, p.elements));
        create_dir(&sub)?;
        let sub_cfg = RunConfig {
            elements: p.elements,
            params: SchemeParams { dt: p.dt, ..cfg.params.clone() },
            output: OutputConfig { dir: sub.clone(), ..cfg.output.clone() },
            ..cfg.clone()
        };
        write_json(&sub.join("config.resolved.json"), &sub_cfg)?;
        let (recs, report, _) = execute_single(cfg, p.elements, p.dt, &sub)?;
        records.extend(recs);
        reports.push(report.expect("convergence scenarios measure errors"));
    }
    write_errors(&cfg.output.dir.join("errors.csv"), &reports)?;

    let x: Vec<f64> = points
        .iter()
        .map(|p| match axis {
            SweepAxis::Temporal => p.dt,
            SweepAxis::Spatial => 2.0 * std::f64::consts::PI / p.elements as f64,
        })
        .collect();
    let orders: Vec<(Variable, f64)> = Variable::ALL
        .iter()
        .map(|&v| {
            let e: Vec<f64> = reports.iter().map(|r| r.error(v).unwrap_or(f64::NAN)).collect();
            (v, fit_order(&x, &e))
        })
        .collect();
    let reference_orders = if axis == SweepAxis::Spatial {
        let case = ManufacturedCase::build(CaseParams::from_scheme(&cfg.params))?;
        interpolation_sweep(&case, &points, cfg.mapping, cfg.params.t_final)?.orders
    } else {
        Vec::new()
    };
    let mut w = csv::Writer::from_path(cfg.output.dir.join("orders.csv")).map_err(csv_error)?;
    for (v, o) in &orders {
        let r = reference_orders.iter().find(|(w, _)| w == v).map_or(f64::NAN, |(_, r)| *r);
        w.serialize(OrderRow { variable: v.name(), order: *o, reference_order: r }).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(RunSummary { records, reports, orders, reference_orders, initial: None })
}

/// One simulation into `dir`; returns the diagnostics, the errors for manufactured data and
/// the initial energies.
fn execute_single(
    cfg: &RunConfig,
    elements: usize,
    dt: f64,
    dir: &Path,
) -> Result<(Vec<DiagnosticsRecord>, Option<ErrorReport>, Energies)> {
    let params = SchemeParams { dt, ..cfg.params.clone() };
    let mesh = HexMesh::build(elements, cfg.domain, cfg.mapping)?;
    let asm = Assembler::new(Arc::new(DeRhamComplex::build(mesh, cfg.degree)?))?;
    let case = match cfg.initial {
        InitialCondition::Manufactured => Some(ManufacturedCase::build(CaseParams::from_scheme(&params))?),
        _ => None,
    };
    let (u0, b0, h0) = match cfg.initial {
        InitialCondition::Manufactured => case.as_ref().unwrap().initial_fields(&asm),
        InitialCondition::Structure => {
            let u = asm.interpolate(SpaceTag::D, &structure_field, 0.0);
            let h = asm.interpolate(SpaceTag::C0, &structure_field, 0.0);
            (u.clone(), u, h)
        }
        InitialCondition::Zero => {
            let cx = asm.complex();
            let z = |s| DiscreteField::zeros(s, cx.dim(s), Default::default());
            (z(SpaceTag::D), z(SpaceTag::D), z(SpaceTag::C0))
        }
    };
    let sources = case.map(|c| c.sources()).unwrap_or_else(SourceSpec::default);
    let mut scheme = HallMhdScheme::new(asm, params.clone(), sources)?;

    let mut diag = csv::Writer::from_path(dir.join("diagnostics.csv")).map_err(csv_error)?;
    let out = &cfg.output;
    let complex = scheme.assembler().complex_arc();
    let snapshot = |st: &SimulationState<f64>| -> Result<()> {
        let path = dir.join(format!("fields_{:04}.vtk", st.k));
        let mut f = BufWriter::new(File::create(path)?);
        let fields = [
            NamedField { name: "u", field: &st.u },
            NamedField { name: "omega", field: &st.omega },
            NamedField { name: "B", field: &st.b },
            NamedField { name: "j", field: &st.j },
            NamedField { name: "H", field: &st.h },
            NamedField { name: "E", field: &st.e },
            NamedField { name: "P", field: &st.p },
        ];
        let title = format!("k = {}: u, omega, B, j at t^k; H at t^(k+1/2); E, P at t^(k-1/2)", st.k);
        write_snapshot(&mut f, &complex, &fields, out.vtk_samples, &title)?;
        f.flush()?;
        Ok(())
    };
    let start = match &cfg.resume_from {
        Some(path) => {
            let (st, saved) = SimulationState::load_checkpoint(path)?;
            if saved.dt != params.dt {
                log::warn!("checkpoint was written with dt = {}, continuing with dt = {}", saved.dt, params.dt);
            }
            st
        }
        None => scheme.initialize(u0, b0, h0)?,
    };
    if out.vtk_every > 0 {
        snapshot(&start)?;
    }
    let result: RunOutput<f64> = scheme.resume(start, |st, rec| {
        diag.serialize(rec).map_err(csv_error)?;
        diag.flush()?;
        log::info!(
            "k = {:4}  t = {:.6}  E = {:.12e}  law residual = {:.2e}  |Du| = {:.2e}  |DB| = {:.2e}",
            rec.k,
            rec.t,
            rec.total,
            rec.energy_law_residual,
            rec.div_u,
            rec.div_b
        );
        if out.vtk_every > 0 && st.k % out.vtk_every == 0 {
            snapshot(st)?;
        }
        if out.checkpoint_every > 0 && st.k % out.checkpoint_every == 0 {
            st.save_checkpoint(&dir.join(format!("checkpoint_{:04}.json", st.k)), &params)?;
        }
        Ok(())
    })?;
    diag.flush()?;
    drop(diag);
    if result.records.is_empty() {
        // still leave a header so consumers can parse the file
        let mut w = csv::Writer::from_path(dir.join("diagnostics.csv")).map_err(csv_error)?;
        w.write_record(diagnostics_header()).map_err(csv_error)?;
        w.flush()?;
    }
    let report = match case {
        Some(c) => Some(ErrorReport {
            degree: cfg.degree,
            elements,
            dt,
            iterations: result.state.k,
            errors: c.errors(scheme.assembler(), &result.state, dt)?,
        }),
        None => None,
    };
    Ok((result.records, report, result.initial))
}

fn diagnostics_header() -> Vec<&'static str> {
    vec![
        "k", "t", "kinetic", "magnetic", "total", "dual_magnetic", "dissipation", "energy_law_residual",
        "energy_law_applies", "div_u", "div_b", "div_dual_current", "u_max", "b_max", "step1_residual",
        "step2_residual",
    ]
}
