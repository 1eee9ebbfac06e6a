//! Scenario execution: dispatch to the core checks and collect rows.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use invariance_core::checks::{
    check_covariant_derivative, check_form_invariance, christoffel_transform, classify, geometric_invariance_suite, tensor_defects, Chart,
    ChartMap, Christoffel, ObjectivityMode, DEFAULT_TOL,
};
use invariance_core::expr::{parse_field_expr, Bindings, CompiledExpr, SpaceTimePoint, TensorValue};
use invariance_core::frames::{FrameTransform, NsSymmetrySpec};
use invariance_core::mechanics::{
    check_force_frame_indifference, check_galilean_covariance, check_noninertial_closure, integrate, ForceModel, InertialTerms,
    RefConvention, References, State, Structure, CLOSURE_TOL,
};
use invariance_core::ns::{
    check_decomposed_symmetry, check_ns_symmetry, check_rotation_control, screen_closure, Ensemble, FlowState, DEFAULT_NU, ENSEMBLE_SEED,
    ENSEMBLE_SIZE,
};
use invariance_core::sampling::{random_galilei_specs, sample_points, DEFAULT_POINTS, DEFAULT_SEED};
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::build::{self, v3};
use crate::report::{LegOut, Report, Row, Status};
use crate::scenario::*;

/// Command-line overrides and output switches.
#[derive(Clone, Copy, Debug, Default)]
pub struct Options {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub strict: bool,
    pub no_timestamp: bool,
}

/// Scenario-level settings after applying the overrides.
struct Ctx {
    tol: f64,
    seed: u64,
    n_points: usize,
    points: Vec<SpaceTimePoint>,
}

enum Failure {
    Schema(String),
    Exec(String),
}

fn schema(e: String) -> Failure {
    Failure::Schema(e)
}

fn exec(e: impl ToString) -> Failure {
    Failure::Exec(e.to_string())
}

pub fn digest(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    let hex: String = d.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn stem(source: &str) -> &str {
    source.rsplit_once('.').map_or(source, |(s, _)| s)
}

/// Run a scenario file; unreadable files are schema errors.
pub fn run_scenario(path: &Path, opts: &Options) -> Report {
    let source = file_name(path);
    match fs::read(path) {
        Ok(bytes) => run_bytes(&source, &bytes, opts),
        Err(e) => Report::blank(stem(&source), &source, digest(&[]))
            .fail_with(Status::SchemaError, format!("cannot read {}: {e}", path.display())),
    }
}

/// Run scenario text; `source` names it in the report.
pub fn run_bytes(source: &str, bytes: &[u8], opts: &Options) -> Report {
    let start = Instant::now();
    let mut report = Report::blank(stem(source), source, digest(bytes));
    let parsed = std::str::from_utf8(bytes).map_err(|e| format!("not UTF-8: {e}")).and_then(parse_scenario);
    let mut report = match parsed {
        Err(e) => report.fail_with(Status::SchemaError, e),
        Ok(sc) => {
            report.scenario = sc.name.clone();
            report.kind = Some(sc.check.kind().to_string());
            let n_points = sc.points.unwrap_or(DEFAULT_POINTS);
            let seed = opts.seed.or(sc.seed).unwrap_or(DEFAULT_SEED);
            let ctx = Ctx { tol: opts.tol.or(sc.tolerance).unwrap_or(DEFAULT_TOL), seed, n_points, points: sample_points(n_points, seed) };
            report.tolerance = Some(ctx.tol);
            report.seed = Some(ctx.seed);
            report.points = Some(ctx.n_points);
            let outcome = catch_unwind(AssertUnwindSafe(|| dispatch(&sc.check, &ctx)))
                .unwrap_or_else(|p| Err(Failure::Exec(format!("internal error: {}", panic_text(&p)))));
            match outcome {
                Ok(rows) => report.finish(rows, &sc.expect, opts.strict),
                Err(Failure::Schema(e)) => report.fail_with(Status::SchemaError, e),
                Err(Failure::Exec(e)) => report.fail_with(Status::ExecutionError, e),
            }
        }
    };
    if !opts.no_timestamp {
        report.runtime_ms = Some(start.elapsed().as_millis() as u64);
        report.timestamp = Some(SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
    }
    report
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panic".into())
}

/// Scenario files (`*.scn`) of a directory, sorted by path.
pub fn scenario_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "scn"))
        .collect();
    files.sort();
    Ok(files)
}

/// Run every scenario of `dir` on up to `jobs` threads; reports are sorted
/// by scenario name, then source file.
pub fn run_suite(dir: &Path, opts: &Options, jobs: usize) -> std::io::Result<Vec<Report>> {
    let files = scenario_files(dir)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(std::io::Error::other)?;
    let mut reports: Vec<Report> = pool.install(|| files.par_iter().map(|f| run_scenario(f, opts)).collect());
    reports.sort_by(|a, b| (&a.scenario, &a.source).cmp(&(&b.scenario, &b.source)));
    Ok(reports)
}

fn dispatch(check: &Check, ctx: &Ctx) -> Result<Vec<Row>, Failure> {
    match check {
        Check::Tensor(c) => quantities(c, Legs::Tensor, ctx),
        Check::Objectivity(c) => quantities(c, Legs::Objectivity, ctx),
        Check::Relative(c) => quantities(c, Legs::Relative, ctx),
        Check::Christoffel(c) => christoffel(c, ctx),
        Check::GeometricSuite(_) => Ok(geometric()),
        Check::Mechanics(c) => mechanics(&c.problem, ctx),
        Check::NsSymmetry(c) => ns_symmetry(c, ctx),
        Check::Decomposed(c) => decomposed(c, ctx),
        Check::ClosureScreen(c) => closure(c, ctx),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Legs {
    Tensor,
    Objectivity,
    Relative,
}

fn quantities(c: &QuantityCheck, legs: Legs, ctx: &Ctx) -> Result<Vec<Row>, Failure> {
    let transforms = build::transform_set(c, ctx.seed).map_err(schema)?;
    let built = c.quantities.iter().map(build::quantity).collect::<Result<Vec<_>, _>>().map_err(schema)?;
    if built.is_empty() {
        return Err(schema("no quantities given".into()));
    }
    let names: Vec<&str> = built.iter().map(|b| b.quantity.name.as_str()).collect();
    if build::unique_ids(names.iter().copied()).iter().zip(&names).any(|(a, b)| a != b) {
        return Err(schema("quantity names must be unique".into()));
    }
    if legs == Legs::Relative && !built.iter().any(|b| b.quantity.is_relative()) {
        return Err(schema("a relative check needs a quantity that uses the spin `Omega`".into()));
    }
    let mut rows = Vec::new();
    for b in &built {
        let q = &b.quantity;
        let mode = b.mode.unwrap_or(build::mode(c.mode));
        let mut row = Row::new(&q.name);
        for spec in &transforms {
            if legs == Legs::Tensor {
                let r = check_form_invariance(q, spec, &ctx.points, ctx.tol).map_err(exec)?;
                row.add("tensor", LegOut::from_leg(r.leg, ctx.tol));
            } else {
                let v = classify(q, spec, &ctx.points, ctx.tol, mode).map_err(exec)?;
                row.add("tensor", LegOut::from_leg(v.tensor, ctx.tol));
                row.add("objective", LegOut::from_leg(v.objective, ctx.tol));
                if let Some(r) = v.relative_objective {
                    row.add("relative_objective", LegOut::from_leg(r, ctx.tol));
                }
            }
            if let Some(d) = &b.expected_defect {
                let tol = b.defect_tolerance.unwrap_or(ctx.tol);
                row.add("defect", LegOut::new(defect_residual(q, spec, d, &ctx.points)?, tol));
            }
        }
        let mode_name = match mode {
            ObjectivityMode::Explicit => "explicit",
            ObjectivityMode::Full => "full",
        };
        rows.push(row.details(json!({ "transforms": transforms.len(), "mode": mode_name, "relative": q.is_relative() })));
    }
    Ok(rows)
}

/// Largest deviation of the tensor defect from the expected expression,
/// with `Omega` bound to the spin of the transform.
fn defect_residual(
    q: &invariance_core::checks::Quantity,
    spec: &FrameTransform,
    expected: &invariance_core::expr::FieldExpr,
    points: &[SpaceTimePoint],
) -> Result<f64, Failure> {
    let defects = tensor_defects(q, spec, points).map_err(exec)?;
    let c = CompiledExpr::new(expected);
    let spin = spec.spin().ok_or_else(|| schema(format!("expected defect needs a transform with a spin, found {}", spec.label())))?;
    let b: Bindings = [("Omega".to_string(), TensorValue::Matrix(spin))].into();
    let mut worst = 0.0f64;
    let mut valid = 0;
    for (p, d) in points.iter().zip(defects) {
        let Some(d) = d else { continue };
        let pn = spec.map_point(p);
        let e = c.eval(&pn, &b).map_err(exec)?;
        worst = worst.max(d.max_abs_diff(&e));
        valid += 1;
    }
    if valid == 0 {
        return Err(exec("no valid points for the defect comparison"));
    }
    Ok(worst)
}

fn chart(c: ChartName) -> Chart {
    match c {
        ChartName::Identity => Chart::Identity,
        ChartName::Spherical => Chart::Spherical,
        ChartName::Cylindrical => Chart::Cylindrical,
    }
}

fn christoffel(c: &ChristoffelCheck, ctx: &Ctx) -> Result<Vec<Row>, Failure> {
    if c.charts.is_empty() {
        return Err(schema("no charts given".into()));
    }
    let covector = c.covector.as_deref().map(parse_field_expr).transpose().map_err(|e| schema(format!("covector: {e}")))?;
    let n = c.points.unwrap_or(50);
    let labels: Vec<&str> = c.charts.iter().map(|k| chart(*k).name()).collect();
    let ids = build::unique_ids(labels);
    let mut rows = Vec::new();
    for (k, id) in c.charts.iter().zip(ids) {
        let ch = chart(*k);
        let map = ChartMap::new(ch);
        let mut worst = 0.0f64;
        for p in ch.sample(n, ctx.seed) {
            let g = christoffel_transform(&Christoffel::zero(), &map, &p.x).map_err(exec)?;
            worst = worst.max(g.max_abs_diff(&ch.reference_christoffel(&p.x)));
        }
        let mut row = Row::new(id).leg("closed_form", LegOut::new(worst, ctx.tol));
        if let Some(a) = &covector {
            let r = check_covariant_derivative(a, &ch, &ch.sample(ctx.n_points, ctx.seed), ctx.tol).map_err(exec)?;
            row.add("covariant", LegOut::from_leg(r.covariant.leg, ctx.tol));
            row.add("partial", LegOut::from_leg(r.partial.leg, ctx.tol));
        }
        rows.push(row.details(json!({ "closed_form_points": n })));
    }
    Ok(rows)
}

fn geometric() -> Vec<Row> {
    let r = geometric_invariance_suite();
    r.cases
        .iter()
        .map(|c| {
            Row::new(format!("{}/{}", c.frame, c.object))
                .leg("invariant", LegOut::new(c.residual, invariance_core::checks::INVARIANT_TOL))
                .details(json!({ "expected_invariant": c.expected_invariant, "matches": c.matches, "points": r.points }))
        })
        .collect()
}

fn state(x0: [f64; 3], v0: [f64; 3]) -> State {
    State::new(0.0, v3(x0), v3(v0))
}

fn mechanics(p: &MechanicsProblem, ctx: &Ctx) -> Result<Vec<Row>, Failure> {
    match p {
        MechanicsProblem::Oscillator { kappa, mass, x0, v0, dt, steps, accuracy } => {
            let m = ForceModel::oscillator(*kappa, *mass, References::default()).map_err(|e| schema(e.to_string()))?;
            let tr = integrate(&m, state(*x0, *v0), *dt, *steps).map_err(exec)?;
            let w = (kappa / mass).sqrt();
            let (x0, v0) = (v3(*x0), v3(*v0));
            let err = tr.samples.iter().map(|s| (s.x - (x0 * (w * s.t).cos() + v0 * ((w * s.t).sin() / w))).amax()).fold(0.0, f64::max);
            Ok(vec![Row::new("oscillator")
                .leg("closed_form", LegOut::new(err, *accuracy))
                .details(json!({ "omega": w, "t_end": tr.last().t, "samples": tr.samples.len() }))])
        }
        MechanicsProblem::DragGravity { a, g, mass, centre, x0, v0, dt, steps, accuracy } => {
            let m = ForceModel::drag_gravity(*a, *g, *mass, References::at_rest(v3(*centre))).map_err(|e| schema(e.to_string()))?;
            let tr = integrate(&m, state(*x0, *v0), *dt, *steps).map_err(exec)?;
            let down = (v3(*centre) - tr.last().x).normalize();
            let terminal = down * (mass * g / a);
            let err = (tr.last().v - terminal).amax();
            Ok(vec![Row::new("drag_gravity")
                .leg("terminal_velocity", LegOut::new(err, *accuracy))
                .details(json!({ "terminal_speed": mass * g / a, "final_velocity": tr.last().v.as_slice(), "t_end": tr.last().t }))])
        }
        MechanicsProblem::GalileanCovariance { models, transforms, x0, v0, dt, steps } => {
            let specs = random_galilei_specs(transforms.count, transforms.seed.unwrap_or(ctx.seed));
            if specs.is_empty() || models.is_empty() {
                return Err(schema("galilean covariance needs models and transforms".into()));
            }
            let labels: Vec<&str> = models.iter().map(|m| model_label(*m)).collect();
            let mut rows = Vec::new();
            for (m, id) in models.iter().zip(build::unique_ids(labels)) {
                let model = named_model(*m);
                let mut row = Row::new(id);
                let mut worst = 0.0f64;
                for g in &specs {
                    let r = check_galilean_covariance(&model, state(*x0, *v0), *dt, *steps, g).map_err(exec)?;
                    worst = worst.max(r.residual);
                    // Residual in units of the dt^4 error scale.
                    row.add("covariance", LegOut { pass: r.pass, ..LegOut::new(r.residual / r.scale, 10.0) });
                }
                rows.push(row.details(json!({ "max_state_difference": worst, "transforms": specs.len() })));
            }
            Ok(rows)
        }
        MechanicsProblem::Closure { axis, rate, phase, shift, tau, terms, x0, v0, dt, steps, accuracy } => {
            let spec = build::euclidean(*axis, *rate, *phase, shift.as_deref(), *tau).map_err(schema)?;
            if terms.is_empty() {
                return Err(schema("closure needs at least one term set".into()));
            }
            let model = ForceModel::drag_gravity_default();
            let tr = integrate(&model, state(*x0, *v0), *dt, *steps).map_err(exec)?;
            let tol = accuracy.unwrap_or(CLOSURE_TOL);
            let labels: Vec<&str> = terms.iter().map(|t| terms_label(*t)).collect();
            let mut rows = Vec::new();
            for (t, id) in terms.iter().zip(build::unique_ids(labels)) {
                let terms = match t {
                    TermsName::Full => InertialTerms::Full,
                    TermsName::WithoutDragTerm => InertialTerms::WithoutDragTerm,
                };
                let r = check_noninertial_closure(&model, &spec, &tr, tol, terms).map_err(exec)?;
                rows.push(
                    Row::new(id)
                        .leg("residual", LegOut::from_leg(r.leg, tol))
                        .details(json!({ "witness": r.witness, "valid_points": r.valid_points })),
                );
            }
            Ok(rows)
        }
        MechanicsProblem::FrameIndifference { force, conventions, transforms } => {
            let refs = build::references(&force.refs);
            let model = match (&force.custom, &force.invariant) {
                (Some(f), None) => ForceModel::parse_custom(f, refs, force.mass, force.params.clone()),
                (None, Some([f1, f2])) => ForceModel::parse_invariant(f1, f2, refs, force.mass, force.params.clone()),
                _ => return Err(schema("force needs exactly one of `custom` and `invariant`".into())),
            }
            .map_err(|e| schema(e.to_string()))?;
            let specs = random_galilei_specs(transforms.count, transforms.seed.unwrap_or(ctx.seed));
            if specs.is_empty() || conventions.is_empty() {
                return Err(schema("frame indifference needs conventions and transforms".into()));
            }
            let structure = model.structure();
            let mut rows = vec![Row::new("structure").leg("invariant_form", LegOut::flag(structure == Structure::Invariant)).details(
                match &structure {
                    Structure::Invariant => json!({ "violation": null }),
                    Structure::Absolute(s) => json!({ "violation": s }),
                },
            )];
            let labels: Vec<&str> = conventions.iter().map(|c| convention_label(*c)).collect();
            for (c, id) in conventions.iter().zip(build::unique_ids(labels)) {
                let conv = match c {
                    ConventionName::Transported => RefConvention::Transported,
                    ConventionName::Frozen => RefConvention::Frozen,
                };
                let mut row = Row::new(id);
                for g in &specs {
                    let r = check_force_frame_indifference(&model, g, &ctx.points, ctx.tol, conv).map_err(exec)?;
                    row.add("indifference", LegOut::from_leg(r.leg, ctx.tol));
                }
                rows.push(row.details(json!({ "transforms": specs.len() })));
            }
            Ok(rows)
        }
    }
}

fn model_label(m: ModelName) -> &'static str {
    match m {
        ModelName::Oscillator => "oscillator",
        ModelName::DragGravity => "drag_gravity",
    }
}

fn named_model(m: ModelName) -> ForceModel {
    match m {
        ModelName::Oscillator => ForceModel::oscillator(1.0, 1.0, References::default()).expect("unit oscillator"),
        ModelName::DragGravity => ForceModel::drag_gravity_default(),
    }
}

fn terms_label(t: TermsName) -> &'static str {
    match t {
        TermsName::Full => "full",
        TermsName::WithoutDragTerm => "without_drag_term",
    }
}

fn convention_label(c: ConventionName) -> &'static str {
    match c {
        ConventionName::Transported => "transported",
        ConventionName::Frozen => "frozen",
    }
}

fn symmetries(list: &[SymmetrySpec]) -> Result<Vec<(String, NsSymmetrySpec)>, Failure> {
    let specs = list.iter().map(build::symmetry).collect::<Result<Vec<_>, _>>().map_err(schema)?;
    let ids = build::unique_ids(specs.iter().map(|s| s.tag()));
    Ok(ids.into_iter().zip(specs).collect())
}

fn ns_symmetry(c: &NsCheck, ctx: &Ctx) -> Result<Vec<Row>, Failure> {
    let specs = symmetries(&c.symmetries)?;
    if specs.is_empty() && c.rotation_controls.is_empty() {
        return Err(schema("no symmetries or rotation controls given".into()));
    }
    let state = FlowState::library(build::solution(c.solution), c.nu.unwrap_or(DEFAULT_NU)).map_err(exec)?;
    let mut rows = Vec::new();
    for (id, spec) in &specs {
        let v = check_ns_symmetry(&state, spec, &ctx.points, ctx.tol).map_err(exec)?;
        rows.push(Row::new(id).leg("residual", LegOut::from_leg(v.leg, ctx.tol)).details(json!({
            "transform": v.transform,
            "max_continuity": v.max_continuity,
            "max_momentum": v.max_momentum,
            "nu": v.nu,
            "witness": v.witness,
            "valid_points": v.valid_points,
        })));
    }
    let ids = build::unique_ids(c.rotation_controls.iter().map(|_| "rotation"));
    for (r, id) in c.rotation_controls.iter().zip(ids) {
        let rot = build::rotation(r.axis, r.rate, r.phase).map_err(schema)?;
        let v = check_rotation_control(&state, &rot, &ctx.points, ctx.tol).map_err(exec)?;
        rows.push(Row::new(id).leg("residual", LegOut::from_leg(v.leg, ctx.tol)).details(json!({
            "transform": v.transform,
            "picks_up_frame_terms": v.picks_up_frame_terms,
            "max_continuity": v.max_continuity,
            "max_momentum": v.max_momentum,
            "witness": v.witness,
        })));
    }
    Ok(rows)
}

fn decomposed(c: &DecomposedCheck, ctx: &Ctx) -> Result<Vec<Row>, Failure> {
    let specs = symmetries(&c.symmetries)?;
    if specs.is_empty() {
        return Err(schema("no symmetries given".into()));
    }
    let mean = FlowState::library(build::solution(c.mean), c.nu.unwrap_or(DEFAULT_NU)).map_err(exec)?;
    let size = c.size.unwrap_or(ENSEMBLE_SIZE);
    let seed = c.ensemble_seed.unwrap_or(ENSEMBLE_SEED);
    let ens = Ensemble::synthetic(size, seed, mean).map_err(exec)?;
    let mut rows = Vec::new();
    for (id, spec) in &specs {
        let r = check_decomposed_symmetry(&ens, spec, &ctx.points, ctx.tol).map_err(exec)?;
        rows.push(
            Row::new(id)
                .leg("mean_preservation", LegOut::new(r.mean_preservation, ctx.tol))
                .leg("split", LegOut::new(r.split, ctx.tol))
                .leg("tau", LegOut::new(r.tau, ctx.tol))
                .details(json!({ "tau_factor": r.tau_factor, "ensemble_size": size, "ensemble_seed": seed, "witness": r.witness })),
        );
    }
    Ok(rows)
}

fn closure(c: &ClosureCheck, ctx: &Ctx) -> Result<Vec<Row>, Failure> {
    let model = build::closure_model(&c.model).map_err(schema)?;
    let specs = symmetries(&c.symmetries)?;
    let list: Vec<NsSymmetrySpec> = specs.iter().map(|(_, s)| s.clone()).collect();
    let report = screen_closure(&model, &list, &ctx.points, ctx.tol).map_err(exec)?;
    let mut rows = vec![Row::new("structure")
        .leg("structural", LegOut::flag(report.structural_violation.is_none()))
        .details(json!({ "violation": report.structural_violation }))];
    let mut screened = report.rows.iter();
    for (id, spec) in &specs {
        if let NsSymmetrySpec::S6 { .. } = spec {
            let l = report.planar_limit.as_ref().ok_or_else(|| exec("planar limit missing"))?;
            rows.push(
                Row::new(id)
                    .leg("declared", LegOut::flag(l.declared))
                    .leg("phi2", LegOut::new(l.max_phi2, ctx.tol))
                    .leg("phi4", LegOut::new(l.max_phi4, ctx.tol))
                    .leg("velocity_dependence", LegOut::new(l.velocity_dependence, ctx.tol)),
            );
            continue;
        }
        let r = screened.next().ok_or_else(|| exec("screening row missing"))?;
        let mut row = Row::new(id).leg("assembled", LegOut::new(r.assembled_residual, ctx.tol));
        if let Some(p) = r.phi_residual {
            row.add("phi", LegOut::new(p, ctx.tol));
        }
        rows.push(row.details(json!({ "factors": r.factors, "valid_points": r.valid_points })));
    }
    Ok(rows)
}
