//! Darboux integrability, the Darboux projection and the Lie algebras of
//! tangential symmetries on its fibers.

mod algebra;
mod frames;
mod reciprocal;

use std::sync::Arc;

use nalgebra::DMatrix;

pub use algebra::{fingerprint_numeric, normalize_at, normalize_structure, Fingerprint, Normalized, Structure};
pub use frames::{
    coefficients_depend_only_on_base1, derived_tangential_frame, lift_frame, structure_constants,
    system_symmetries, verify_tangential_symmetry, LieAlgebraPresentation, LiftedFrame, Side, SymmetryReport,
};
pub use reciprocal::{anti_isomorphic, check_reciprocal, evaluation_map, reciprocal_frame, GridFrame, GridSpec, ReciprocalReport};

use crate::decomposable::{DecomposableSystem, Status};
use crate::error::{Error, Result};
use crate::expr::{zero_verdicts, Certification, Compiled, NormalForm, SamplingPolicy, ZeroVerdict};
use crate::geometry::{functionally_independent, Chart, Submersion, VectorField};
use crate::linalg::{numeric_rank, RANK_TOL};

/// A named invariant; the name becomes a coordinate of the base.
#[derive(Clone, Debug)]
pub struct Invariant {
    pub name: Option<String>,
    pub expr: NormalForm,
}

impl Invariant {
    pub fn new(expr: NormalForm) -> Invariant {
        Invariant { name: None, expr }
    }

    pub fn named(name: &str, expr: NormalForm) -> Invariant {
        Invariant {
            name: Some(name.to_string()),
            expr,
        }
    }
}

/// Invariants `I` of `F` and `J` of `G`.
#[derive(Clone, Debug, Default)]
pub struct InvariantSet {
    pub of_f: Vec<Invariant>,
    pub of_g: Vec<Invariant>,
}

impl InvariantSet {
    pub fn parse(chart: &Chart, of_f: &[&str], of_g: &[&str]) -> Result<InvariantSet> {
        let p = |v: &[&str]| -> Result<Vec<Invariant>> {
            v.iter().map(|s| Ok(Invariant::new(chart.parse(s)?))).collect()
        };
        Ok(InvariantSet {
            of_f: p(of_f)?,
            of_g: p(of_g)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct InvariantVerdict {
    pub side: Side,
    pub index: usize,
    pub verdict: ZeroVerdict,
}

#[derive(Clone, Debug)]
pub struct DarbouxReport {
    pub status: Status,
    pub n_f: usize,
    pub n_g: usize,
    pub count_f: usize,
    pub count_g: usize,
    pub rank_condition: bool,
    pub independent: bool,
    pub transversality: bool,
    pub verdicts: Vec<InvariantVerdict>,
    pub certification: Option<Certification>,
    pub failures: Vec<String>,
}

impl DarbouxReport {
    pub fn ok(&self) -> bool {
        self.status == Status::Ok
    }
}

/// Decides Darboux integrability with the supplied invariants.
pub fn check_darboux(sys: &DecomposableSystem, inv: &InvariantSet) -> Result<DarbouxReport> {
    let class = sys.class();
    let mut failures = Vec::new();
    let mut status = Status::Ok;
    let mut certification: Option<Certification> = None;
    let mut verdicts = Vec::new();
    for (side, list, d) in [(Side::F, &inv.of_f, sys.f()), (Side::G, &inv.of_g, sys.g())] {
        for (i, invariant) in list.iter().enumerate() {
            let check = d.verify_invariant(&invariant.expr);
            match check.verdict {
                ZeroVerdict::Zero(c) => {
                    certification = Some(certification.map_or(c, |old| old.weaker(c)));
                }
                ZeroVerdict::NonZero => {
                    status = Status::Fail;
                    failures.push(format!("{} is not an invariant of {side}", invariant.expr));
                }
                ZeroVerdict::Unknown => {
                    status = status.and(Status::Indeterminate);
                    failures.push(format!("could not decide whether {} is an invariant of {side}", invariant.expr));
                }
            }
            verdicts.push(InvariantVerdict {
                side,
                index: i,
                verdict: check.verdict,
            });
        }
    }
    let n_f = inv.of_f.len();
    let n_g = inv.of_g.len();
    let rank_condition = n_f == class.l && n_g == class.k;
    if !rank_condition {
        status = Status::Fail;
        failures.push(format!(
            "need {} invariants of F and {} of G, got {n_f} and {n_g}",
            class.l, class.k
        ));
    }
    let count_f = sys.f().count_invariants()?;
    let count_g = sys.g().count_invariants()?;
    if count_f < class.l {
        status = Status::Fail;
        failures.push(format!("F has only {count_f} invariants, fewer than rank G = {}", class.l));
    }
    if count_g < class.k {
        status = Status::Fail;
        failures.push(format!("G has only {count_g} invariants, fewer than rank F = {}", class.k));
    }

    let chart = sys.chart();
    let points = sys.v().sample_points();
    let mut independent = true;
    for list in [&inv.of_f, &inv.of_g] {
        let forms: Vec<NormalForm> = list.iter().map(|i| i.expr.clone()).collect();
        for p in points {
            if !functionally_independent(chart, &forms, p).unwrap_or(false) {
                independent = false;
            }
        }
    }
    if !independent {
        status = Status::Fail;
        failures.push("invariants are not functionally independent".into());
    }
    let all: Vec<NormalForm> = inv.of_g.iter().chain(&inv.of_f).map(|i| i.expr.clone()).collect();
    let transversality = !all.is_empty() && transversal(sys, &all)?;
    if !transversality {
        status = Status::Fail;
        failures.push("invariants are not transversal to F + G".into());
    }
    Ok(DarbouxReport {
        status,
        n_f,
        n_g,
        count_f,
        count_g,
        rank_condition,
        independent,
        transversality,
        verdicts,
        certification,
        failures,
    })
}

/// Jacobian of all invariants applied to the generators of `V` has full rank
/// `k + l` at every sample point.
fn transversal(sys: &DecomposableSystem, functions: &[NormalForm]) -> Result<bool> {
    let gens = sys.v().generators();
    let forms: Vec<NormalForm> = functions
        .iter()
        .flat_map(|f| gens.iter().map(move |x| x.apply(f)))
        .collect();
    let compiled = Compiled::new(&forms, sys.chart().coords())?;
    let want = sys.class().k + sys.class().l;
    if functions.len() < want {
        return Ok(false);
    }
    for p in sys.v().sample_points() {
        let Ok(vals) = compiled.eval(p) else { return Ok(false) };
        let m = DMatrix::from_row_slice(functions.len(), gens.len(), &vals);
        if numeric_rank(&m, RANK_TOL) < want {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `π = π₁ × π₂ : M → B₁ × B₂`, where `B₁` carries the invariants of `G` and
/// `B₂` those of `F`.
#[derive(Clone, Debug)]
pub struct DarbouxProjection {
    system: DecomposableSystem,
    submersion: Submersion,
    base1: Arc<Chart>,
    base2: Arc<Chart>,
    vertical: Vec<VectorField>,
}

fn target_name(chart: &Chart, inv: &Invariant, prefix: &str, k: usize, used: &[String]) -> String {
    if let Some(n) = &inv.name {
        return n.clone();
    }
    if let Some(s) = inv.expr.as_symbol() {
        return s.to_string();
    }
    let mut name = format!("{prefix}{k}");
    while chart.table().contains(&name) || used.contains(&name) {
        name.push('_');
    }
    name
}

/// Sample box for a target coordinate: the source interval for bare
/// coordinates, otherwise the range of values at the source sample points.
fn target_box(chart: &Chart, inv: &Invariant, values: &[f64]) -> (f64, f64) {
    if let Some(s) = inv.expr.as_symbol() {
        return chart.policy().interval(&s);
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() || hi - lo < 1e-6 {
        return chart.policy().default_box;
    }
    (lo, hi)
}

pub fn build_projection(sys: &DecomposableSystem, inv: &InvariantSet) -> Result<DarbouxProjection> {
    let class = sys.class();
    if inv.of_f.len() != class.l || inv.of_g.len() != class.k {
        return Err(Error::Invalid("invariant counts do not match the ranks of G and F".into()));
    }
    let chart = sys.chart();
    let mut used = Vec::new();
    let mut names1 = Vec::new();
    for (k, i) in inv.of_g.iter().enumerate() {
        let n = target_name(chart, i, "J", k + 1, &used);
        used.push(n.clone());
        names1.push(n);
    }
    let mut names2 = Vec::new();
    for (k, i) in inv.of_f.iter().enumerate() {
        let n = target_name(chart, i, "I", k + 1, &used);
        used.push(n.clone());
        names2.push(n);
    }
    let ordered: Vec<&Invariant> = inv.of_g.iter().chain(&inv.of_f).collect();
    let components: Vec<NormalForm> = ordered.iter().map(|i| i.expr.clone()).collect();
    let compiled = Compiled::new(&components, chart.coords())?;
    let images: Vec<Vec<f64>> = sys
        .v()
        .sample_points()
        .iter()
        .filter_map(|p| compiled.eval(p).ok())
        .collect();
    let mut policy = SamplingPolicy {
        exclusions: Vec::new(),
        boxes: Default::default(),
        ..chart.policy().clone()
    };
    for (a, (name, i)) in names1.iter().chain(&names2).zip(&ordered).enumerate() {
        let vals: Vec<f64> = images.iter().map(|v| v[a]).collect();
        policy.boxes.insert(name.clone(), target_box(chart, i, &vals));
    }
    let all_names: Vec<String> = names1.iter().chain(&names2).cloned().collect();
    let target = Chart::with_policy(&all_names, policy.clone())?;
    let base1 = Chart::with_policy(&names1, policy.clone())?;
    let base2 = Chart::with_policy(&names2, policy)?;
    let submersion = Submersion::new(chart, &target, components)?;

    // dπ(F) = TB₁ × 0 and dπ(G) = 0 × TB₂
    let k = class.k;
    for (d, own, other) in [(sys.f(), 0..k, k..k + class.l), (sys.g(), k..k + class.l, 0..k)] {
        let pushed: Vec<Vec<NormalForm>> = d
            .generators()
            .iter()
            .map(|x| submersion.pushforward_components(x))
            .collect::<Result<_>>()?;
        let off: Vec<NormalForm> = pushed.iter().flat_map(|c| c[other.clone()].to_vec()).collect();
        if ZeroVerdict::all(zero_verdicts(&off, chart.policy())) == ZeroVerdict::NonZero {
            return Err(Error::Invalid("a characteristic system does not project onto its base factor".into()));
        }
        let on: Vec<NormalForm> = pushed.iter().flat_map(|c| c[own.clone()].to_vec()).collect();
        let cc = Compiled::new(&on, chart.coords())?;
        let width = own.len();
        for p in d.sample_points() {
            let vals = cc.eval(p)?;
            let m = DMatrix::from_row_slice(d.generators().len(), width, &vals);
            if numeric_rank(&m, RANK_TOL) < width {
                return Err(Error::Invalid("transversality failure: dπ(V) does not span TB".into()));
            }
        }
    }
    let vertical = submersion.vertical_frame()?;
    if vertical.len() != class.s {
        return Err(Error::Degenerate(format!(
            "fiber dimension {} differs from s = {}",
            vertical.len(),
            class.s
        )));
    }
    if class.s > 0 {
        let r = sys.v().rank_of_fields(&vertical)?;
        if r != class.s {
            return Err(Error::Degenerate(format!("ker dπ has rank {r}, expected {}", class.s)));
        }
    }
    Ok(DarbouxProjection {
        system: sys.clone(),
        submersion,
        base1,
        base2,
        vertical,
    })
}

impl DarbouxProjection {
    pub fn system(&self) -> &DecomposableSystem {
        &self.system
    }

    pub fn submersion(&self) -> &Submersion {
        &self.submersion
    }

    pub fn base1(&self) -> &Arc<Chart> {
        &self.base1
    }

    pub fn base2(&self) -> &Arc<Chart> {
        &self.base2
    }

    pub fn target(&self) -> &Arc<Chart> {
        self.submersion.target()
    }

    /// Frame of `Z = ker dπ`.
    pub fn vertical(&self) -> &[VectorField] {
        &self.vertical
    }

    pub fn fiber_dim(&self) -> usize {
        self.vertical.len()
    }

    /// Components of `π₁` (invariants of `G`).
    pub fn components1(&self) -> &[NormalForm] {
        &self.submersion.components()[..self.base1.dim()]
    }

    /// Components of `π₂` (invariants of `F`).
    pub fn components2(&self) -> &[NormalForm] {
        &self.submersion.components()[self.base1.dim()..]
    }

    /// Coordinate frame `∂/∂b` of one base factor.
    pub fn coordinate_frame(&self, side: Side) -> Result<Vec<VectorField>> {
        let chart = match side {
            Side::F => &self.base1,
            Side::G => &self.base2,
        };
        chart.coords().iter().map(|c| VectorField::coordinate(chart, c)).collect()
    }
}
