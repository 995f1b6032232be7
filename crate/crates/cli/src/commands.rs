use std::path::PathBuf;

use eds_core::darboux::{
    anti_isomorphic, build_projection, check_darboux, check_reciprocal, coefficients_depend_only_on_base1,
    derived_tangential_frame, evaluation_map, fingerprint_numeric, lift_frame, normalize_structure, reciprocal_frame,
    system_symmetries, verify_tangential_symmetry, DarbouxProjection, Fingerprint, GridSpec, LieAlgebraPresentation,
    Side, Structure,
};
use eds_core::decomposable::Status;
use eds_core::expr::{reconstruct_rational, Certification, ZeroVerdict};
use eds_core::geometry::VectorField;
use eds_core::solver::{
    default_initial_point, integrate_surface, residual_check, restrict_to_lift, tangency_check, Curve, Tolerances,
};
use eds_core::Error as CoreError;
use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::{json, Map, Value};

use crate::report::Report;
use crate::spec::{SpecError, SystemSpec};

/// Residual bound for `lift` when the spec names a PDE residual.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Max coefficient error of a reconstructed reciprocal frame.
pub const RECONSTRUCTION_TOL: f64 = 1e-6;
/// Relative rank tolerance for the tangency test on lifted surfaces.
pub const TANGENCY_RANK_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Check,
    Invariants,
    Symmetries,
    Reciprocal,
    Prolong,
    Lift,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Invariants => "invariants",
            Command::Symmetries => "symmetries",
            Command::Reciprocal => "reciprocal",
            Command::Prolong => "prolong",
            Command::Lift => "lift",
        }
    }
}

/// Command-specific options beyond the spec file.
#[derive(Clone, Debug, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub gamma1: Option<String>,
    pub gamma2: Option<String>,
    pub grid: Option<Vec<usize>>,
    pub urange: Option<(f64, f64)>,
    pub vrange: Option<(f64, f64)>,
    pub m0: Option<Vec<f64>>,
}

/// A CSV artifact produced alongside the report.
pub struct Artifact {
    pub csv: String,
}

#[derive(Debug)]
pub enum RunError {
    /// Input problems: exit code 3.
    Usage(String),
    /// Failures inside a computation.
    Core(CoreError),
}

impl From<SpecError> for RunError {
    fn from(e: SpecError) -> RunError {
        RunError::Usage(e.to_string())
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> RunError {
        RunError::Core(e)
    }
}

type Run<T> = std::result::Result<T, RunError>;

pub fn run(cmd: Command, spec: &SystemSpec, opts: &Options) -> Run<(Report, Option<Artifact>)> {
    let mut report = Report::new(cmd.as_str(), spec);
    let artifact = match cmd {
        Command::Check => {
            check(spec, &mut report)?;
            None
        }
        Command::Invariants => {
            invariants(spec, &mut report)?;
            None
        }
        Command::Symmetries => {
            symmetries(spec, &mut report)?;
            None
        }
        Command::Reciprocal => reciprocal(spec, opts, &mut report)?,
        Command::Prolong => {
            prolong(spec, &mut report)?;
            None
        }
        Command::Lift => Some(lift(spec, opts, &mut report)?),
    };
    Ok((report, artifact))
}

fn verdict_status(v: ZeroVerdict) -> Status {
    match v {
        ZeroVerdict::Zero(_) => Status::Ok,
        ZeroVerdict::NonZero => Status::Fail,
        ZeroVerdict::Unknown => Status::Indeterminate,
    }
}

fn certification(v: ZeroVerdict) -> Option<Certification> {
    match v {
        ZeroVerdict::Zero(c) => Some(c),
        _ => None,
    }
}

fn verdict_json(v: ZeroVerdict) -> Value {
    json!({
        "verdict": match v {
            ZeroVerdict::Zero(_) => "zero",
            ZeroVerdict::NonZero => "nonzero",
            ZeroVerdict::Unknown => "unknown",
        },
        "certification": certification(v).map(Certification::as_str),
    })
}

fn class_json(c: eds_core::decomposable::Class) -> Value {
    json!([c.s, c.k, c.l])
}

fn fields_json(fields: &[VectorField]) -> Value {
    Value::Array(fields.iter().map(|x| Value::String(x.to_string())).collect())
}

pub fn fingerprint_json(fp: &Fingerprint) -> Value {
    json!({
        "dim": fp.dim,
        "abelian": fp.abelian,
        "derived_series": fp.derived_series,
        "lower_central_series": fp.lower_central_series,
        "center_dim": fp.center_dim,
        "killing_rank": fp.killing_rank,
        "killing_signature": [fp.killing_signature.0, fp.killing_signature.1],
    })
}

/// Nonzero `c^k_{ij}` with `i < j`, indices from 1.
fn structure_json(c: &Structure) -> Value {
    let s = c.dim();
    let mut out = Vec::new();
    for i in 0..s {
        for j in i + 1..s {
            for k in 0..s {
                let v = c.get(i, j, k);
                if *v != BigRational::from_integer(BigInt::from(0)) {
                    out.push(json!([i + 1, j + 1, k + 1, v.to_string()]));
                }
            }
        }
    }
    Value::Array(out)
}

fn check(spec: &SystemSpec, report: &mut Report) -> Run<()> {
    let sys = spec.system()?;
    let dec = sys.check()?;
    // rank and containment decisions are SVD ranks at sample points
    report.check("decomposable", dec.status, Some(Certification::Numeric), dec.failures.clone());
    report.set("class", class_json(dec.class));
    report.set("constant_rank", json!(dec.constant_rank));
    report.set("complementary", json!(dec.complementary));
    let count_f = sys.f().count_invariants()?;
    let count_g = sys.g().count_invariants()?;
    report.set("invariant_counts", json!({"F": count_f, "G": count_g}));
    let class = sys.class();
    if spec.invariants.of_f.is_empty() && spec.invariants.of_g.is_empty() {
        let mut reasons = vec![format!(
            "F has {count_f} invariants (need {}), G has {count_g} (need {})",
            class.l, class.k
        )];
        let status = if count_f < class.l || count_g < class.k {
            Status::Fail
        } else {
            reasons.push("no invariants supplied; transversality not checked".into());
            Status::Indeterminate
        };
        report.check("darboux", status, Some(Certification::Numeric), reasons);
        return Ok(());
    }
    let d = check_darboux(&sys, &spec.invariants)?;
    // counts, independence and transversality are numeric ranks; each
    // invariant verdict carries its own certification below
    report.check("darboux", d.status, Some(Certification::Numeric), d.failures.clone());
    let mut list = Vec::new();
    for v in &d.verdicts {
        let inv = match v.side {
            Side::F => &spec.invariants.of_f[v.index],
            Side::G => &spec.invariants.of_g[v.index],
        };
        report.check(
            &format!("invariant_{}[{}]", v.side, v.index + 1),
            verdict_status(v.verdict),
            certification(v.verdict),
            vec![],
        );
        let mut m = verdict_json(v.verdict);
        m["side"] = json!(v.side.to_string());
        m["expr"] = json!(inv.expr.to_string());
        list.push(m);
    }
    report.set("invariants", Value::Array(list));
    report.set(
        "darboux_conditions",
        json!({
            "rank_condition": d.rank_condition,
            "independent": d.independent,
            "transversal": d.transversality,
        }),
    );
    Ok(())
}

fn invariants(spec: &SystemSpec, report: &mut Report) -> Run<()> {
    let sys = spec.system()?;
    let class = sys.class();
    let count_f = sys.f().count_invariants()?;
    let count_g = sys.g().count_invariants()?;
    report.set("class", class_json(class));
    report.set("invariant_counts", json!({"F": count_f, "G": count_g}));
    let enough = count_f >= class.l && count_g >= class.k;
    report.check(
        "counts",
        if enough { Status::Ok } else { Status::Fail },
        Some(Certification::Numeric),
        if enough {
            Vec::new()
        } else {
            vec![format!("need {} of F and {} of G", class.l, class.k)]
        },
    );
    let mut list = Vec::new();
    for (side, invs, d) in [(Side::F, &spec.invariants.of_f, sys.f()), (Side::G, &spec.invariants.of_g, sys.g())] {
        for (i, inv) in invs.iter().enumerate() {
            let c = d.verify_invariant(&inv.expr);
            let reasons = match c.verdict {
                ZeroVerdict::NonZero => vec![format!("{} is not annihilated by {side}", inv.expr)],
                ZeroVerdict::Unknown => vec![format!("{}: undecided", inv.expr)],
                ZeroVerdict::Zero(_) => Vec::new(),
            };
            report.check(
                &format!("invariant_{side}[{}]", i + 1),
                verdict_status(c.verdict),
                certification(c.verdict),
                reasons,
            );
            let mut m = verdict_json(c.verdict);
            m["side"] = json!(side.to_string());
            m["expr"] = json!(inv.expr.to_string());
            list.push(m);
        }
    }
    report.set("invariants", Value::Array(list));
    Ok(())
}

fn projection(spec: &SystemSpec) -> Run<DarbouxProjection> {
    let sys = spec.system()?;
    if spec.invariants.of_f.is_empty() || spec.invariants.of_g.is_empty() {
        return Err(RunError::Usage("field 'invariant_F': invariants of both F and G are required".into()));
    }
    Ok(build_projection(&sys, &spec.invariants)?)
}

fn base_frames(spec: &SystemSpec, proj: &DarbouxProjection) -> Run<(Option<Vec<VectorField>>, Option<Vec<VectorField>>)> {
    let parse = |lines: &[crate::spec::Located], chart| -> Run<Option<Vec<VectorField>>> {
        if lines.is_empty() {
            return Ok(None);
        }
        lines
            .iter()
            .map(|l| VectorField::parse(chart, &l.text).map_err(|e| RunError::from(l.error(e))))
            .collect::<Run<Vec<_>>>()
            .map(Some)
    };
    Ok((parse(&spec.base_frame_f, proj.base1())?, parse(&spec.base_frame_g, proj.base2())?))
}

fn presentation_json(pres: &LieAlgebraPresentation, proj: &DarbouxProjection, report: &mut Report, label: &str) -> Run<Value> {
    let mut m = Map::new();
    m.insert("frame".into(), fields_json(&pres.frame));
    let base = coefficients_depend_only_on_base1(pres, proj);
    m.insert("coefficients_on_base1".into(), verdict_json(base));
    match &pres.constants {
        Some(c) => {
            m.insert("structure_constants".into(), structure_json(c));
            m.insert("fingerprint".into(), fingerprint_json(&c.fingerprint()?));
            m.insert("certification".into(), json!("symbolic"));
            report.check(&format!("{label}.jacobi"), status_of(c.satisfies_jacobi()), Some(Certification::Symbolic), vec![]);
        }
        None => {
            let center = proj.system().chart().center();
            let tol = proj.system().chart().policy().tolerance;
            let coeffs = pres.coeffs_at(&center)?;
            m.insert("fingerprint".into(), fingerprint_json(&fingerprint_numeric(&coeffs, tol)?));
            m.insert("certification".into(), json!("numeric"));
            if pres.dim() == 2 {
                match normalize_structure(pres, proj) {
                    Ok(n) => {
                        let mu: Vec<Vec<String>> =
                            n.mu.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect();
                        m.insert("normalized_frame".into(), fields_json(&n.presentation.frame));
                        m.insert("mu".into(), json!(mu));
                        if let Some(c) = &n.presentation.constants {
                            m.insert("normalized_structure_constants".into(), structure_json(c));
                        }
                    }
                    Err(e) => {
                        m.insert("normalization".into(), json!(e.to_string()));
                    }
                }
            }
        }
    }
    Ok(Value::Object(m))
}

fn status_of(ok: bool) -> Status {
    if ok {
        Status::Ok
    } else {
        Status::Fail
    }
}

fn symmetries(spec: &SystemSpec, report: &mut Report) -> Run<()> {
    let proj = projection(spec)?;
    report.set("class", class_json(proj.system().class()));
    report.set("target", json!(proj.target().coords()));
    let (bf, bg) = base_frames(spec, &proj)?;
    let lift = lift_frame(&proj, bf, bg)?;
    report.check(
        "lifts_commute",
        verdict_status(lift.commute),
        certification(lift.commute),
        vec![],
    );
    report.set(
        "lifts",
        json!({"F": fields_json(&lift.lifts_f), "G": fields_json(&lift.lifts_g)}),
    );
    let mut derived = Map::new();
    let mut pres_f = None;
    for side in [Side::F, Side::G] {
        let pres = derived_tangential_frame(&proj, &lift, side)?;
        let label = format!("derived_{side}");
        derived.insert(side.to_string(), presentation_json(&pres, &proj, report, &label)?);
        if side == Side::F {
            pres_f = Some(pres);
        }
    }
    report.set("derived_tangential", Value::Object(derived));
    if let Some(p) = pres_f.filter(|p| p.constants.is_some()) {
        report.set("system_symmetries", fields_json(&system_symmetries(&p, &proj)?));
    }

    for (side, fields) in [(Side::F, &spec.symmetries_f), (Side::G, &spec.symmetries_g)] {
        if fields.is_empty() {
            continue;
        }
        let mut rows = Vec::new();
        for (i, x) in fields.iter().enumerate() {
            let r = verify_tangential_symmetry(x, &proj, side)?;
            let mut reasons = Vec::new();
            if !r.vertical.is_zero() {
                reasons.push(format!("not vertical ({})", r.vertical));
            }
            if r.preserves != Status::Ok {
                reasons.push(format!("bracket with {side}: {}", r.preserves.as_str()));
            }
            let cert = certification(r.vertical).map(|c| c.weaker(Certification::Numeric));
            report.check(&format!("symmetry_{side}[{}]", i + 1), r.status, cert, reasons);
            rows.push(json!({"field": x.to_string(), "status": r.status.as_str()}));
        }
        let mut brackets = Vec::new();
        for i in 0..fields.len() {
            for j in i + 1..fields.len() {
                brackets.push(fields[i].bracket(&fields[j])?.zero_verdict());
            }
        }
        let all = ZeroVerdict::all(brackets);
        report.check(&format!("symmetry_{side}.commute"), verdict_status(all), certification(all), vec![]);
        let pres = LieAlgebraPresentation::new(proj.system().chart(), fields.clone(), Some(side))?;
        let label = format!("symmetry_{side}");
        let summary = presentation_json(&pres, &proj, report, &label)?;
        report.set(&label, json!({"fields": rows, "algebra": summary}));
    }
    Ok(())
}

fn axes_for(spec: &SystemSpec, counts: &[usize]) -> Run<Vec<(f64, f64, usize)>> {
    let coords = spec.chart.coords();
    let counts: Vec<usize> = match counts.len() {
        1 => vec![counts[0]; coords.len()],
        n if n == coords.len() => counts.to_vec(),
        _ => return Err(RunError::Usage(format!("--grid needs 1 or {} node counts", coords.len()))),
    };
    Ok(coords
        .iter()
        .zip(counts)
        .map(|(c, n)| {
            let (lo, hi) = spec.policy().interval(c);
            (lo, hi, n)
        })
        .collect())
}

/// `α = ev(B)⁻¹ ev(A)` at `point`, as rationals when every entry is close to
/// one with a small denominator.
fn rational_alpha(a: &[VectorField], b: &[VectorField], point: &[f64]) -> Run<Option<Vec<Vec<BigRational>>>> {
    let ea = evaluation_map(a, point)?;
    let eb = evaluation_map(b, point)?;
    let Some(inv) = eb.try_inverse() else { return Ok(None) };
    let alpha = inv * ea;
    let mut out = Vec::new();
    for r in 0..alpha.nrows() {
        let mut row = Vec::new();
        for c in 0..alpha.ncols() {
            match reconstruct_rational(alpha[(r, c)], 1000, 1e-10) {
                Some(q) => row.push(q),
                None => return Ok(None),
            }
        }
        out.push(row);
    }
    Ok(Some(out))
}

fn reciprocal(spec: &SystemSpec, opts: &Options, report: &mut Report) -> Run<Option<Artifact>> {
    if spec.frame_a.is_empty() || spec.frame_b.is_empty() {
        return Err(RunError::Usage("field 'frame_A': frame_A and frame_B are required".into()));
    }
    let chart = &spec.chart;
    let tol = spec.policy().tolerance;
    let r = check_reciprocal(&spec.frame_a, &spec.frame_b, None)?;
    let mut reasons = Vec::new();
    if !r.commute.is_zero() {
        reasons.push(format!("frames do not commute ({})", r.commute));
    }
    if !(r.transitive_a && r.transitive_b) {
        reasons.push("a frame is not locally transitive".into());
    }
    if r.anti_iso_residual >= tol {
        reasons.push(format!("anti-isomorphism residual {:.3e}", r.anti_iso_residual));
    }
    let status = if r.ok(tol) {
        Status::Ok
    } else if r.commute == ZeroVerdict::Unknown {
        Status::Indeterminate
    } else {
        Status::Fail
    };
    report.check("reciprocal", status, certification(r.commute).map(|c| c.weaker(Certification::Numeric)), reasons);
    report.set("anti_isomorphism_residual", json!(r.anti_iso_residual));
    let pa = LieAlgebraPresentation::new(chart, spec.frame_a.clone(), None)?;
    let pb = LieAlgebraPresentation::new(chart, spec.frame_b.clone(), None)?;
    let center = chart.center();
    let (Some(ca), Some(cb)) = (&pa.constants, &pb.constants) else {
        report.check(
            "structure",
            Status::Fail,
            None,
            vec!["structure coefficients are not constant".into()],
        );
        return Ok(None);
    };
    report.set(
        "structure_constants",
        json!({"A": structure_json(ca), "B": structure_json(cb)}),
    );
    report.set("fingerprint", fingerprint_json(&ca.fingerprint()?));
    match rational_alpha(&spec.frame_a, &spec.frame_b, &center)? {
        Some(alpha) => {
            let ok = anti_isomorphic(ca, cb, &alpha);
            let shown: Vec<Vec<String>> = alpha.iter().map(|r| r.iter().map(|q| q.to_string()).collect()).collect();
            report.set("alpha", json!(shown));
            report.check("anti_isomorphic", status_of(ok), Some(Certification::Symbolic), vec![]);
        }
        None => report.check(
            "anti_isomorphic",
            Status::Indeterminate,
            None,
            vec!["evaluation map at the center is not rational".into()],
        ),
    }

    let counts = opts.grid.clone().unwrap_or_else(|| vec![21]);
    let grid = GridSpec {
        axes: axes_for(spec, &counts)?,
        ..GridSpec::uniform(chart.dim(), 0.0, 1.0, 2)
    };
    let g = reciprocal_frame(&pa, &center, &grid)?;
    report.set("grid_commutator_residual", json!(g.residual));
    let ea = evaluation_map(&spec.frame_a, &center)?;
    let eb = evaluation_map(&spec.frame_b, &center)?;
    if (ea - eb).amax() < 1e-12 {
        let flat: Vec<_> = spec.frame_b.iter().flat_map(|x| x.coeffs().iter().cloned()).collect();
        let compiled = eds_core::expr::Compiled::new(&flat, chart.coords())?;
        let n = chart.dim();
        let mut worst = 0.0_f64;
        for (idx, vals) in g.values.iter().enumerate() {
            let want = compiled.eval(&g.node_point(idx))?;
            for (f, row) in vals.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    worst = worst.max((v - want[f * n + c]).abs());
                }
            }
        }
        report.set("reconstruction_error", json!(worst));
        let reasons = if worst < RECONSTRUCTION_TOL {
            vec![]
        } else {
            vec![format!("max coefficient error {worst:.3e}")]
        };
        report.check(
            "reconstruction",
            status_of(worst < RECONSTRUCTION_TOL),
            Some(Certification::Numeric),
            reasons,
        );
    }
    Ok(opts.out.as_ref().map(|_| Artifact { csv: g.to_csv() }))
}

fn prolong(spec: &SystemSpec, report: &mut Report) -> Run<()> {
    let sys = spec.system()?;
    let p = sys.prolong()?;
    let dec = p.check()?;
    report.set("class", class_json(sys.class()));
    report.set("prolonged_class", class_json(dec.class));
    report.set("coordinates", json!(p.chart().coords()));
    report.set(
        "generators",
        json!({"F": fields_json(p.f().generators()), "G": fields_json(p.g().generators())}),
    );
    report.check("decomposable", dec.status, Some(Certification::Numeric), dec.failures);
    Ok(())
}

fn lift(spec: &SystemSpec, opts: &Options, report: &mut Report) -> Run<Artifact> {
    let proj = projection(spec)?;
    let pick = |flag: &Option<String>, file: &Option<String>, name: &str| -> Run<String> {
        flag.clone()
            .or_else(|| file.clone())
            .ok_or_else(|| RunError::Usage(format!("--{name} is required")))
    };
    let g1 = pick(&opts.gamma1, &spec.gamma1, "gamma1")?;
    let g2 = pick(&opts.gamma2, &spec.gamma2, "gamma2")?;
    let urange = opts.urange.or(spec.urange).unwrap_or((0.0, 1.0));
    let vrange = opts.vrange.or(spec.vrange).unwrap_or((0.0, 1.0));
    let (nu, nv) = match &opts.grid {
        Some(g) if g.len() == 2 => (g[0], g[1]),
        Some(_) => return Err(RunError::Usage("--grid for lift is NxM".into())),
        None => spec.grid.unwrap_or((21, 21)),
    };
    if nu < 2 || nv < 2 {
        return Err(RunError::Usage("grid needs at least 2 nodes per axis".into()));
    }
    let curve = |param: &str, text: &str, range| -> Run<Curve> {
        Curve::parse(param, text, range).map_err(|e| RunError::Usage(format!("curve '{text}': {e}")))
    };
    let dirs = restrict_to_lift(&proj, curve("u", &g1, urange)?, curve("v", &g2, vrange)?)?;
    let nodes = |(lo, hi): (f64, f64), n: usize| -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    };
    let (u, v) = (nodes(urange, nu), nodes(vrange, nv));
    let m0 = match opts.m0.clone().or_else(|| spec.m0.clone()) {
        Some(m) => m,
        None => default_initial_point(&proj, &dirs, urange.0, vrange.0)?,
    };
    if m0.len() != spec.chart.dim() {
        return Err(RunError::Usage(format!("--m0 needs {} values", spec.chart.dim())));
    }
    let t = spec.policy().tolerance;
    let tol = Tolerances { atol: t, rtol: t };
    let surface = integrate_surface(&dirs, &m0, (urange.0, vrange.0), &u, &v, tol)?;
    report.set("target", json!(proj.target().coords()));
    report.set("gamma1", json!(g1));
    report.set("gamma2", json!(g2));
    report.set("grid", json!([nu, nv]));
    report.set("urange", json!([urange.0, urange.1]));
    report.set("vrange", json!([vrange.0, vrange.1]));
    report.set("m0", json!(m0));
    report.set("ode_tolerance", json!({"atol": t, "rtol": t}));
    report.set("defect", json!({"max": surface.defect, "in_tolerances": surface.defect_ratio}));
    report.set(
        "projection_error",
        json!({"max": surface.projection_error, "in_tolerances": surface.projection_ratio}),
    );
    // measured in units of atol + rtol·|y|
    let bound = 10.0;
    report.check(
        "path_independence",
        status_of(surface.defect_ratio < bound),
        Some(Certification::Numeric),
        vec![format!("defect {:.3e} = {:.2} tolerances", surface.defect, surface.defect_ratio)],
    );
    report.check(
        "projection",
        status_of(surface.projection_ratio < bound),
        Some(Certification::Numeric),
        vec![format!("error {:.3e} = {:.2} tolerances", surface.projection_error, surface.projection_ratio)],
    );
    if nu >= 3 && nv >= 3 {
        let sys = proj.system();
        let tc = tangency_check(&surface, sys.f(), sys.g(), TANGENCY_RANK_TOL)?;
        report.check(
            "tangency",
            status_of(tc.ok()),
            Some(Certification::Numeric),
            vec![format!("{} of {} interior nodes fail", tc.failures.len(), tc.checked)],
        );
    }
    if let Some(res) = &spec.pde_residual {
        let indep = spec.independent.clone().unwrap_or_else(|| ["x".into(), "y".into()]);
        let r = residual_check(&surface, &res.text, [indep[0].as_str(), indep[1].as_str()])
            .map_err(|e| RunError::from(res.error(e)))?;
        report.set("residual", json!({"expr": res.text, "max": r.max, "nodes": r.nodes, "bound": RESIDUAL_TOL}));
        let mut reasons = vec![format!("max {:.3e} over {} nodes", r.max, r.nodes)];
        reasons.extend(r.warning);
        report.check("residual", status_of(r.max < RESIDUAL_TOL), Some(Certification::Numeric), reasons);
    }
    Ok(Artifact { csv: surface.to_csv() })
}
