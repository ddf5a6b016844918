//! One pipeline per scenario kind.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_rational::Ratio;
use serde::Deserialize;
use serde_json::{json, Value};

use coupling_core::apath::{concat_split, flow_commutation_residual, inverse_split, reassemble, split_l_path, AlgebroidPath};
use coupling_core::chart::sphere::{area_density, integrate_two_form};
use coupling_core::coupling::{
    assemble_dirac, coupling_generators, dirac_closure_residual, leaf_two_form, splitting_bracket_residual,
    VerticalBivector,
};
use coupling_core::dual::{constants, Dual};
use coupling_core::examples;
use coupling_core::expr::{expression_field, scalar_function};
use coupling_core::fibration::{Connection, HorizontalForm};
use coupling_core::groupoid::{
    coupling_form, integrated_data_check, multiplicativity_residual, orthogonality_residual, pair_form,
    presymplectic_nondegeneracy,
};
use coupling_core::monodromy::{
    hopf_sphere_bundle, integrability_verdict, so3_lattice, so3_sphere_bundle, transgress, transgress_flat,
    CouplingBundle, SphereFamily, Verdict as Integrability,
};
use coupling_core::yang_mills::{
    hopf_example, prehamiltonian_residual, so3_coadjoint_fiber, so3_sample_connection, trivial_torus,
    ymh_geometric_data, HamiltonianFiber, PrincipalData, ScalarFn,
};
use coupling_core::{check_coupling_conditions, CoordinateDomain, Field, FiberedSpace, GeometricData, Valence};

use crate::report::{Check, Verdict};
use crate::scenario::{InputError, Number, Scenario};

/// Accumulates the checks, details and effective grid of one run.
pub struct Run<'a> {
    pub scenario: &'a Scenario,
    pub checks: Vec<Check>,
    pub details: BTreeMap<String, Value>,
    pub grid: BTreeMap<String, usize>,
}

impl<'a> Run<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        Run { scenario, checks: Vec::new(), details: BTreeMap::new(), grid: BTreeMap::new() }
    }

    fn grid(&mut self, name: &str, default: usize) -> usize {
        let v = self.scenario.grid_or(name, default);
        self.grid.insert(name.to_string(), v);
        v
    }

    fn tol(&self, name: &str, default: f64) -> f64 {
        self.scenario.tolerance_or(name, default)
    }

    fn below(&mut self, name: &str, residual: f64, default: f64) {
        let t = self.tol(name, default);
        self.checks.push(Check::below(name, residual, t));
    }

    fn above(&mut self, name: &str, residual: f64, default: f64) {
        let t = self.tol(name, default);
        self.checks.push(Check::above(name, residual, t));
    }

    /// Records a numerical failure as a failing check named after the stage.
    fn numeric<T>(&mut self, stage: &str, r: coupling_core::Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.checks.push(Check::below(stage, f64::NAN, 0.0).with_note(e.to_string()));
                None
            }
        }
    }

    fn detail(&mut self, key: impl Into<String>, v: Value) {
        self.details.insert(key.into(), v);
    }
}

pub fn run(run: &mut Run) -> Result<(), InputError> {
    use crate::scenario::Kind::*;
    match run.scenario.kind {
        CouplingCheck => coupling_check(run),
        YmhBuild => ymh_build(run),
        Transgress => transgression(run),
        So3Integrability => so3_integrability(run),
        Apath => apath(run),
        GroupoidCheck => groupoid_check(run),
    }
}

fn input(e: coupling_core::Error) -> InputError {
    InputError(e.to_string())
}

fn moment(f: &Option<String>, var: &str) -> Result<Option<ScalarFn>, InputError> {
    f.as_deref().map(|s| scalar_function(s, var).map_err(input)).transpose()
}

const CONDITIONS_TOLERANCE: f64 = 1e-8;

fn coupling_conditions(run: &mut Run, data: &GeometricData, points: &[Vec<f64>]) {
    let t = run.tol("conditions", CONDITIONS_TOLERANCE);
    if let Some(r) = run.numeric("conditions", check_coupling_conditions(data, points, t)) {
        for (name, v) in coupling_core::CouplingReport::NAMES.iter().zip(r.residuals) {
            run.below(name, v, CONDITIONS_TOLERANCE);
        }
    }
}

fn dirac_closure(run: &mut Run, data: &GeometricData, points: &[Vec<f64>]) {
    let r = coupling_generators(data).and_then(|g| dirac_closure_residual(data, &g, points));
    if let Some(r) = run.numeric("dirac-closure", r) {
        run.below("dirac-closure", r, CONDITIONS_TOLERANCE);
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InlineData {
    base: Vec<String>,
    fiber: Vec<String>,
    #[serde(default = "default_half_width")]
    base_half_width: f64,
    #[serde(default = "default_half_width")]
    fiber_half_width: f64,
    pi_v: Vec<String>,
    connection: Vec<String>,
    omega_h: Vec<String>,
}

fn default_half_width() -> f64 {
    1.5
}

/// Components on the total space, in the coordinates `base ++ fiber`.
fn components(d: &InlineData, what: &str, values: usize, sources: &[String]) -> Result<Field, InputError> {
    let names: Vec<&str> = d.base.iter().chain(&d.fiber).map(String::as_str).collect();
    let domain = CoordinateDomain::cube(names.len(), 1.0);
    expression_field(domain, Valence::ValuedForm { degree: 0, values }, &names, sources)
        .map_err(|e| InputError(format!("inline {what}: {e}")))
}

fn inline_data(d: &InlineData) -> Result<GeometricData, InputError> {
    let (m, n) = (d.base.len(), d.fiber.len());
    if m == 0 || n == 0 {
        return Err(InputError("inline data needs base and fiber coordinates".into()));
    }
    let space = FiberedSpace::new(CoordinateDomain::cube(m, d.base_half_width), CoordinateDomain::cube(n, d.fiber_half_width));
    let pi = components(d, "pi_v", n * (n - 1) / 2, &d.pi_v)?.evaluator().clone();
    let conn = components(d, "connection", n * m, &d.connection)?.evaluator().clone();
    let omega = components(d, "omega_h", m * (m - 1) / 2, &d.omega_h)?.evaluator().clone();
    let pi_v = VerticalBivector::new(space.clone(), move |e| pi(e));
    let connection = Connection::new(space.clone(), move |b, x| {
        let e: Vec<Dual> = b.iter().chain(x).copied().collect();
        conn(&e)
    });
    let omega_h = HorizontalForm::new(space, 2, move |e| omega(e));
    GeometricData::new(pi_v, connection, omega_h).map_err(input)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingInputs {
    example: Option<String>,
    f: Option<String>,
    inline: Option<InlineData>,
    #[serde(default)]
    checks: Vec<String>,
}

fn named_data(example: &str, f: Option<ScalarFn>) -> Result<GeometricData, InputError> {
    match (example, f) {
        ("hopf", Some(f)) => Ok(examples::hopf(f)),
        (_, Some(_)) => Err(InputError(format!("field `f` only applies to the hopf example, not {example:?}"))),
        (name, None) => examples::instance(name).map(|i| i.data).map_err(input),
    }
}

fn coupling_check(run: &mut Run) -> Result<(), InputError> {
    let inputs: CouplingInputs = run.scenario.inputs()?;
    let seed = run.scenario.seed;
    let count = run.grid("points", 32);
    if inputs.example.as_deref() == Some("suite") {
        return oracle_suite(run, count);
    }
    let f = moment(&inputs.f, "x")?;
    let hopf_f = f.clone().unwrap_or_else(examples::default_hopf_moment);
    let data = match (&inputs.example, &inputs.inline) {
        (Some(name), None) => named_data(name, f)?,
        (None, Some(d)) => inline_data(d)?,
        _ => return Err(InputError("coupling-check needs exactly one of `example` and `inline`".into())),
    };
    let is_hopf = inputs.example.as_deref() == Some("hopf");
    let mut checks = inputs.checks.clone();
    if checks.is_empty() {
        checks = vec!["conditions".into(), "closure".into()];
        if is_hopf {
            checks.push("leaf".into());
        }
    }
    let points = data.space().samples(count, seed);
    for c in &checks {
        match c.as_str() {
            "conditions" => coupling_conditions(run, &data, &points),
            "closure" => dirac_closure(run, &data, &points),
            "leaf" if is_hopf => {
                let mut worst: f64 = 0.0;
                for p in &points {
                    let frame = assemble_dirac(&data, p);
                    if let Some(leaf) = run.numeric("leaf-two-form", leaf_two_form(&frame, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0])) {
                        let expected = hopf_f(Dual::constant(p[2])).re() * area_density(&constants(&p[..2])).re();
                        worst = worst.max((leaf.value - expected).abs());
                    }
                }
                run.below("leaf-two-form", worst, 1e-8);
            }
            "splitting" => {
                let (v, w, a, b) = examples::bracket_sections(data.space());
                let pts: Vec<Vec<f64>> = points.iter().take(count.min(16)).cloned().collect();
                if let Some(r) = run.numeric("splitting", splitting_bracket_residual(&data, &v, &w, &a, &b, &pts)) {
                    run.below("split-vertical", r.vertical, 1e-6);
                    run.below("split-mixed", r.mixed, 1e-6);
                    run.below("split-horizontal", r.horizontal, 1e-6);
                    run.below("split-anchor", r.anchor, 1e-6);
                }
            }
            other => return Err(InputError(format!("unknown coupling-check check {other:?}"))),
        }
    }
    Ok(())
}

/// Agreement of the coupling conditions and the Dirac closure residual on
/// every instance of the suite.
fn oracle_suite(run: &mut Run, count: usize) -> Result<(), InputError> {
    let threshold = run.tol("agreement", 1e-6);
    for inst in examples::suite() {
        let pts = inst.data.space().samples(count, run.scenario.seed);
        let name = format!("agreement:{}", inst.name);
        let report = check_coupling_conditions(&inst.data, &pts, threshold);
        let closure = coupling_generators(&inst.data).and_then(|g| dirac_closure_residual(&inst.data, &g, &pts));
        let (Some(report), Some(closure)) = (run.numeric(&name, report), run.numeric(&name, closure)) else {
            continue;
        };
        let by_conditions = report.is_coupling();
        let by_closure = closure < threshold;
        let verdict = if by_conditions == by_closure && by_conditions == inst.coupling { Verdict::Pass } else { Verdict::Fail };
        run.checks.push(
            Check::below(name, closure, threshold)
                .with_verdict(verdict)
                .with_note(format!("conditions max {:.3e}; coupling expected: {}", report.max(), inst.coupling)),
        );
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct YmhInputs {
    example: String,
    f: Option<String>,
}

fn ymh_build(run: &mut Run) -> Result<(), InputError> {
    let inputs: YmhInputs = run.scenario.inputs()?;
    let f = moment(&inputs.f, "x")?;
    let (principal, fiber): (PrincipalData, HamiltonianFiber) = match (inputs.example.as_str(), f) {
        ("hopf", f) => hopf_example(f.unwrap_or_else(examples::default_hopf_moment)),
        (name, Some(_)) => return Err(InputError(format!("field `f` only applies to the hopf example, not {name:?}"))),
        ("so3-coadjoint", None) => (so3_sample_connection(3), so3_coadjoint_fiber(coupling_core::yang_mills::FIBER_HALF_WIDTH)),
        ("trivial-torus", None) => trivial_torus(1.0),
        (name, None) => return Err(InputError(format!("unknown ymh-build example {name:?}"))),
    };
    let seed = run.scenario.seed;
    let count = run.grid("points", 32);
    let group = principal.group.clone();
    run.below("group-consistency", group.consistency_defect(), 1e-12);
    let base_pts = principal.base().samples(count, seed);
    let r = principal.bianchi_residual(&base_pts);
    if let Some(r) = run.numeric("bianchi", r) {
        run.below("bianchi", r, 1e-8);
    }
    let fiber_pts = fiber.domain().samples(count, seed);
    if let Some(r) = run.numeric("fiber-homomorphism", fiber.homomorphism_defect(&group, &fiber_pts)) {
        run.below("fiber-homomorphism", r, 1e-8);
    }
    if let Some(r) = run.numeric("fiber-hamiltonian", fiber.hamiltonian_defect(&group, &fiber_pts)) {
        run.below("fiber-hamiltonian", r, 1e-8);
    }
    let elements: Vec<Vec<f64>> = (0..3).map(|k| (0..group.dim()).map(|i| 0.3 * (k as f64 + 1.0) - 0.2 * i as f64).collect()).collect();
    run.below("moment-equivariance", fiber.equivariance_defect(&group, &elements, &fiber_pts), 1e-8);
    let d = fiber.domain().clone();
    let n = d.dim();
    let tests = vec![
        Field::covector(d.clone(), move |x| (0..n).map(|i| (x[i] * 0.7).sin() + x[(i + 1) % n] * x[i] * 0.2).collect()),
        Field::covector(d.clone(), move |x| (0..n).map(|i| x[i] * x[i] * 0.3 + 1.0).collect()),
    ];
    let few: Vec<Vec<f64>> = fiber_pts.iter().take(8).cloned().collect();
    if let Some(r) = run.numeric("prehamiltonian", prehamiltonian_residual(&fiber, &group, &tests, &few)) {
        run.below("prehamiltonian", r, 1e-6);
    }
    if let Some(data) = run.numeric("ymh-data", ymh_geometric_data(&principal, &fiber)) {
        let pts = data.space().samples(count, seed);
        coupling_conditions(run, &data, &pts);
        dirac_closure(run, &data, &pts);
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
enum FamilySpec {
    RoundSphere,
    Cap { theta: f64 },
    Meridians {
        #[serde(default)]
        tilt: f64,
    },
    Circles { from: f64, to: f64 },
}

impl FamilySpec {
    fn build(&self) -> SphereFamily {
        match self {
            FamilySpec::RoundSphere => SphereFamily::round_sphere(),
            FamilySpec::Cap { theta } => SphereFamily::cap(*theta),
            FamilySpec::Meridians { tilt } => SphereFamily::meridians(*tilt),
            FamilySpec::Circles { from, to } => SphereFamily::circles(*from, *to),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TransgressInputs {
    bundle: String,
    f: Option<String>,
    x0: Vec<f64>,
    families: Vec<FamilySpec>,
    expected: Option<Number>,
}

fn transgression(run: &mut Run) -> Result<(), InputError> {
    let inputs: TransgressInputs = run.scenario.inputs()?;
    if inputs.families.is_empty() {
        return Err(InputError("transgress needs at least one family".into()));
    }
    let bundle: CouplingBundle = match inputs.bundle.as_str() {
        "hopf" => {
            let f = moment(&inputs.f, "x")?.unwrap_or_else(examples::default_hopf_moment);
            hopf_sphere_bundle(f).map_err(input)?
        }
        "so3" => {
            let f = moment(&inputs.f, "r")?.unwrap_or_else(|| Arc::new(|r| r * 2.0 + 1.0));
            so3_sphere_bundle(f, 4.0)
        }
        other => return Err(InputError(format!("unknown bundle {other:?}; expected hopf or so3"))),
    };
    if inputs.x0.len() != bundle.fiber().dim() {
        return Err(InputError(format!("x0 needs {} coordinates", bundle.fiber().dim())));
    }
    let (n_t, n_eps, nodes) = (run.grid("n_t", 128), run.grid("n_eps", 128), run.grid("nodes", 48));
    let area = integrate_two_form(|_, uv| area_density(&constants(uv)).re(), 64, 128);
    run.below("sphere-area", (area - 4.0 * PI).abs() / (4.0 * PI), 1e-6);
    let mut first = None;
    for entry in &inputs.families {
        let family = entry.build().with_grid(n_t, n_eps);
        let name = format!("flat-oracle:{}", family.name);
        let Some(path) = run.numeric(&name, transgress(&bundle, &family, &inputs.x0)) else { continue };
        let endpoint = path.endpoint();
        first.get_or_insert(endpoint.clone());
        run.detail(format!("endpoint:{}", family.name), json!(endpoint));
        if let Some(flat) = run.numeric(&name, transgress_flat(&bundle, &family, &inputs.x0, nodes)) {
            let scale = flat.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            let diff = endpoint.iter().zip(&flat).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            run.below(&name, diff / scale, 1e-4);
        }
    }
    if let (Some(expected), Some(endpoint)) = (&inputs.expected, first) {
        let e = expected.value()?;
        run.below("expected", (endpoint[0] - e).abs() / e.abs().max(1e-300), 1e-4);
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct So3Inputs {
    f: String,
    radii: Vec<f64>,
    exact_slope: Option<String>,
    expected_generator: Option<Number>,
}

fn parse_ratio(s: &str) -> Result<Ratio<i64>, InputError> {
    let bad = || InputError(format!("exact_slope {s:?} is not a rational p/q"));
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim().parse::<i64>().map_err(|_| bad())?, q.trim().parse::<i64>().map_err(|_| bad())?),
        None => (s.trim().parse::<i64>().map_err(|_| bad())?, 1),
    };
    if q == 0 {
        return Err(bad());
    }
    Ok(Ratio::new(p, q))
}

fn so3_integrability(run: &mut Run) -> Result<(), InputError> {
    let inputs: So3Inputs = run.scenario.inputs()?;
    if inputs.radii.is_empty() || inputs.radii.iter().any(|r| !(0.0..3.0).contains(r)) {
        return Err(InputError("radii must be non-empty and lie in [0, 3)".into()));
    }
    let f = scalar_function(&inputs.f, "r").map_err(input)?;
    let slope = inputs.exact_slope.as_deref().map(parse_ratio).transpose()?;
    let expected = inputs.expected_generator.as_ref().map(Number::value).transpose()?;
    let n = run.grid("n", 128);
    let Some(report) = run.numeric("lattice", so3_lattice(f, &inputs.radii, n)) else { return Ok(()) };
    for s in &report.samples {
        let r = s.point.iter().map(|c| c * c).sum::<f64>().sqrt();
        run.detail(format!("generator:r={r}"), json!({ "generator": s.generator, "center_dim": s.center_dim, "covector": s.covector }));
        if let Some(e) = expected {
            if s.center_dim == 0 {
                run.below(&format!("generator-zero:r={r}"), s.generator.abs(), 1e-8);
            } else {
                run.below(&format!("generator:r={r}"), (s.generator - e).abs() / e.abs().max(1e-300), 1e-4);
            }
        }
    }
    run.below("lattice-constancy", report.constancy_deviation, report.tolerance);
    let Some(v) = run.numeric("integrability", integrability_verdict(&report, slope)) else { return Ok(()) };
    let verdict = match v.verdict {
        Integrability::IntegrableCandidate => Verdict::IntegrableCandidate,
        Integrability::NonIntegrable => Verdict::NonIntegrable,
        Integrability::Inconclusive => Verdict::Inconclusive,
    };
    let residual = v.slope_mismatch.unwrap_or(v.constancy_deviation);
    run.checks.push(Check::below("integrability", residual, v.tolerance).with_verdict(verdict).with_note(v.reason));
    Ok(())
}

#[derive(Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case", deny_unknown_fields)]
enum ApathInputs {
    FlowCommutation {
        #[serde(default = "default_m0")]
        m0: Vec<f64>,
        #[serde(default = "default_step")]
        step: f64,
    },
    SplitRoundTrip { example: String },
}

fn default_m0() -> Vec<f64> {
    vec![0.6, 0.0, 0.8]
}

fn default_step() -> f64 {
    1e-3
}

fn apath(run: &mut Run) -> Result<(), InputError> {
    match run.scenario.inputs()? {
        ApathInputs::FlowCommutation { m0, step } => {
            if m0.len() != 3 || !(step > 0.0 && step <= 0.1) {
                return Err(InputError("flow-commutation needs m0 in R^3 and 0 < step <= 0.1".into()));
            }
            let grid = run.grid("grid", 10);
            let family = examples::so3_flow_family();
            let fiber = so3_coadjoint_fiber(2.0);
            let coarse = flow_commutation_residual(&family, &fiber, &m0, grid, step);
            let Some(coarse) = run.numeric("flow-commutation", coarse) else { return Ok(()) };
            run.below("flow-commutation", coarse.residual, 1e-6);
            let fine = flow_commutation_residual(&family, &fiber, &m0, grid, step / 2.0);
            if let Some(fine) = run.numeric("refinement-ratio", fine) {
                run.detail("residual-half-step", json!(fine.residual));
                run.above("refinement-ratio", coarse.residual / fine.residual, 8.0);
            }
        }
        ApathInputs::SplitRoundTrip { example } => {
            let data = examples::instance(&example).map_err(input)?.data;
            let intervals = run.grid("intervals", 120);
            let (m, n) = (data.space().base_dim(), data.space().fiber_dim());
            let e0: Vec<f64> = data
                .space()
                .total()
                .bounds()
                .iter()
                .enumerate()
                .map(|(i, (lo, hi))| 0.5 * (lo + hi) + 0.1 * (hi - lo) * ((i as f64) * 0.7).sin())
                .collect();
            let path = AlgebroidPath::integrate(
                &data,
                &e0,
                move |t| (0..m).map(|i| 0.4 * ((i as f64 + 1.0) * t).cos() - 0.1 * i as f64).collect(),
                move |t| (0..n).map(|a| 0.2 * (t + a as f64).sin()).collect(),
                intervals,
            );
            let Some(path) = run.numeric("a-path", path) else { return Ok(()) };
            run.below("a-path", path.residual(&data), 1e-6);
            let Some(split) = run.numeric("split", split_l_path(&data, &path)) else { return Ok(()) };
            run.below("split-vertical", split.vertical_residual(&data), 1e-6);
            if let Some(back) = run.numeric("round-trip", reassemble(&data, &split)) {
                run.below("round-trip", back.distance(&path), 1e-6);
            }
            let looped = inverse_split(&data, &split).and_then(|inv| concat_split(&data, &split, &inv)).and_then(|l| reassemble(&data, &l));
            if let Some(l) = run.numeric("loop", looped) {
                let gap = l.start().iter().zip(l.end()).fold(0.0f64, |w, (a, b)| w.max((a - b).abs()));
                run.below("loop", gap, 1e-8);
            }
        }
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InlineForm {
    coords: Vec<String>,
    #[serde(default = "default_half_width")]
    half_width: f64,
    omega: Vec<String>,
    pi: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupoidInputs {
    example: Option<String>,
    form: Option<InlineForm>,
}

fn integrated(run: &mut Run, name: &str, data: &GeometricData, count: usize) {
    let suffix = |check: &str| if name.is_empty() { check.to_string() } else { format!("{check}:{name}") };
    let seed = run.scenario.seed;
    let omega = coupling_form(data).and_then(|w| pair_form(&w));
    let Some((groupoid, omega)) = run.numeric(&suffix("coupling-form"), omega) else { return };
    run.below(&suffix("multiplicativity"), multiplicativity_residual(&groupoid, &omega, count, seed), 1e-12);
    let Some(r) = run.numeric(&suffix("integrated-data"), integrated_data_check(data, count, seed)) else { return };
    run.below(&suffix("closedness"), r.closedness_residual, 1e-10);
    let t = run.tol("fiber-nondegeneracy", 1e-9);
    run.checks.push(
        Check::above(suffix("fiber-nondegeneracy"), r.vertical_min_singular, t)
            .with_note(format!("intersection dimension {}", r.fiber_intersection_dim)),
    );
    run.below(&suffix("omega-h"), r.omega_h_residual, 1e-8);
    run.below(&suffix("hor-projection"), r.hor_projection_residual, 1e-10);
    run.below(&suffix("hor-orthogonality"), r.hor_orthogonality_residual, 1e-10);
}

fn groupoid_check(run: &mut Run) -> Result<(), InputError> {
    let inputs: GroupoidInputs = run.scenario.inputs()?;
    let count = run.grid("arrows", 16);
    let seed = run.scenario.seed;
    match (&inputs.example, &inputs.form) {
        (Some(name), None) if name == "suite" => {
            for inst in examples::suite().into_iter().filter(|i| i.coupling) {
                if coupling_form(&inst.data).is_ok() {
                    integrated(run, inst.name, &inst.data, count);
                }
            }
        }
        (Some(name), None) => {
            let data = examples::instance(name).map_err(input)?.data;
            integrated(run, "", &data, count);
        }
        (None, Some(form)) => {
            let names: Vec<&str> = form.coords.iter().map(String::as_str).collect();
            let domain = CoordinateDomain::cube(names.len(), form.half_width);
            let w = expression_field(domain.clone(), Valence::Form(2), &names, &form.omega).map_err(input)?;
            let Some((groupoid, omega)) = run.numeric("pair-form", pair_form(&w)) else { return Ok(()) };
            run.below("multiplicativity", multiplicativity_residual(&groupoid, &omega, count, seed), 1e-12);
            let r = presymplectic_nondegeneracy(&groupoid, &omega, count, seed);
            run.detail("triple-kernel-dim", json!(r.triple_kernel_dim));
            run.checks.push(
                Check::below("source-kernel-dim", r.source_kernel_dim as f64, run.tol("source-kernel-dim", 0.5))
                    .with_note(format!("ker Omega ∩ ker ds ∩ ker dt has dimension {}", r.triple_kernel_dim)),
            );
            if let Some(pi) = &form.pi {
                let pi = expression_field(domain, Valence::BIVECTOR, &names, pi).map_err(input)?;
                if let Some(r) = run.numeric("orthogonality", orthogonality_residual(&groupoid, &omega, &pi, count, seed)) {
                    run.below("orthogonality", r, 1e-10);
                }
            }
        }
        _ => return Err(InputError("groupoid-check needs exactly one of `example` and `form`".into())),
    }
    Ok(())
}
