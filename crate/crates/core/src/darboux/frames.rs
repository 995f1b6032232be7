use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::algebra::Structure;
use super::DarbouxProjection;
use crate::decomposable::Status;
use crate::error::{Error, Result};
use crate::expr::{reconstruct_rational, zero_verdict, zero_verdicts, Compiled, NormalForm, Symbol, ZeroVerdict};
use crate::geometry::{Chart, Containment, Distribution, VectorField};
use crate::linalg::solve_symbolic;

/// Which characteristic system an object belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    F,
    G,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::F => Side::G,
            Side::G => Side::F,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::F => "F",
            Side::G => "G",
        })
    }
}

/// Commuting base frames on `B₁`, `B₂` and their lifts into `F`, `G`.
#[derive(Clone, Debug)]
pub struct LiftedFrame {
    pub base_f: Vec<VectorField>,
    pub base_g: Vec<VectorField>,
    pub lifts_f: Vec<VectorField>,
    pub lifts_g: Vec<VectorField>,
    /// Combined verdict on `[F_i, G_j] = 0`.
    pub commute: ZeroVerdict,
}

impl LiftedFrame {
    pub fn lifts(&self, side: Side) -> &[VectorField] {
        match side {
            Side::F => &self.lifts_f,
            Side::G => &self.lifts_g,
        }
    }
}

fn distribution(proj: &DarbouxProjection, side: Side) -> &Distribution {
    match side {
        Side::F => proj.system().f(),
        Side::G => proj.system().g(),
    }
}

fn check_commuting(fields: &[VectorField], what: &str) -> Result<()> {
    for (i, a) in fields.iter().enumerate() {
        for b in &fields[i + 1..] {
            if a.bracket(b)?.zero_verdict() == ZeroVerdict::NonZero {
                return Err(Error::Invalid(format!("{what} base frame does not commute")));
            }
        }
    }
    Ok(())
}

fn lift_side(proj: &DarbouxProjection, side: Side, base: &[VectorField]) -> Result<Vec<VectorField>> {
    let (chart, comps) = match side {
        Side::F => (proj.base1(), proj.components1()),
        Side::G => (proj.base2(), proj.components2()),
    };
    let d = distribution(proj, side);
    let gens = d.generators();
    if gens.len() != chart.dim() || base.len() != chart.dim() {
        return Err(Error::Invalid(format!(
            "{side}: need {} generators and base fields, got {} and {}",
            chart.dim(),
            gens.len(),
            base.len()
        )));
    }
    for b in base {
        if !b.chart().same_as(chart) {
            return Err(Error::ChartMismatch(format!("{side} base frame is not on the base chart")));
        }
    }
    let pull: BTreeMap<Symbol, NormalForm> = chart
        .coords()
        .iter()
        .zip(comps)
        .map(|(n, c)| (Symbol::from(n.as_str()), c.clone()))
        .collect();
    // A[b][a] = X_a(πᵇ), B[b][i] = F̃ᵢᵇ ∘ π
    let a: Vec<Vec<NormalForm>> = comps.iter().map(|c| gens.iter().map(|x| x.apply(c)).collect()).collect();
    let b: Vec<Vec<NormalForm>> = (0..chart.dim())
        .map(|row| base.iter().map(|f| f.coeffs()[row].substitute(&pull)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let src = proj.system().chart();
    let sol = solve_symbolic(&a, &b, src.coords(), d.sample_points())?;
    (0..base.len())
        .map(|i| {
            let weights: Vec<NormalForm> = sol.solution.iter().map(|row| row[i].clone()).collect();
            VectorField::combination(src, &weights, gens)
        })
        .collect()
}

/// Lifts commuting base frames (default: coordinate frames) to `F` and `G`.
pub fn lift_frame(
    proj: &DarbouxProjection,
    base_f: Option<Vec<VectorField>>,
    base_g: Option<Vec<VectorField>>,
) -> Result<LiftedFrame> {
    let base_f = match base_f {
        Some(b) => b,
        None => proj.coordinate_frame(Side::F)?,
    };
    let base_g = match base_g {
        Some(b) => b,
        None => proj.coordinate_frame(Side::G)?,
    };
    check_commuting(&base_f, "F")?;
    check_commuting(&base_g, "G")?;
    let lifts_f = lift_side(proj, Side::F, &base_f)?;
    let lifts_g = lift_side(proj, Side::G, &base_g)?;
    let mut verdicts = Vec::new();
    for x in &lifts_f {
        for y in &lifts_g {
            verdicts.push(x.bracket(y)?.zero_verdict());
        }
    }
    let commute = ZeroVerdict::all(verdicts);
    if commute == ZeroVerdict::NonZero {
        return Err(Error::Invalid("lifted frames do not commute".into()));
    }
    Ok(LiftedFrame {
        base_f,
        base_g,
        lifts_f,
        lifts_g,
        commute,
    })
}

/// A frame of vertical fields with its structure coefficient functions
/// `c[i][j][k]`: `[X_i, X_j] = Σ_k c[i][j][k] X_k`.
#[derive(Clone, Debug)]
pub struct LieAlgebraPresentation {
    pub side: Option<Side>,
    pub chart: Arc<Chart>,
    pub frame: Vec<VectorField>,
    pub coeffs: Vec<Vec<Vec<NormalForm>>>,
    /// Present when every coefficient is a rational constant.
    pub constants: Option<Structure>,
}

impl LieAlgebraPresentation {
    pub fn new(chart: &Arc<Chart>, frame: Vec<VectorField>, side: Option<Side>) -> Result<LieAlgebraPresentation> {
        let coeffs = structure_constants(chart, &frame)?;
        let constants = constant_structure(chart, &coeffs)?;
        Ok(LieAlgebraPresentation {
            side,
            chart: chart.clone(),
            frame,
            coeffs,
            constants,
        })
    }

    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    /// Structure coefficients evaluated at a point.
    pub fn coeffs_at(&self, point: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let s = self.dim();
        let flat: Vec<NormalForm> = self.coeffs.iter().flatten().flatten().cloned().collect();
        let vals = Compiled::new(&flat, self.chart.coords())?.eval(point)?;
        Ok((0..s)
            .map(|i| (0..s).map(|j| (0..s).map(|k| vals[(i * s + j) * s + k]).collect()).collect())
            .collect())
    }
}

/// Solves `[X_i, X_j] = Σ c^k_{ij} X_k` in the frame. Antisymmetry is exact
/// by construction; fails when some bracket leaves the span.
pub fn structure_constants(chart: &Arc<Chart>, frame: &[VectorField]) -> Result<Vec<Vec<Vec<NormalForm>>>> {
    let s = frame.len();
    let mut c = vec![vec![vec![NormalForm::zero(); s]; s]; s];
    if s == 0 {
        return Ok(c);
    }
    let n = chart.dim();
    let mut pairs = Vec::new();
    let mut rhs_fields = Vec::new();
    for i in 0..s {
        for j in i + 1..s {
            pairs.push((i, j));
            rhs_fields.push(frame[i].bracket(&frame[j])?);
        }
    }
    if pairs.is_empty() {
        return Ok(c);
    }
    let a: Vec<Vec<NormalForm>> = (0..n).map(|r| frame.iter().map(|x| x.coeffs()[r].clone()).collect()).collect();
    let b: Vec<Vec<NormalForm>> = (0..n).map(|r| rhs_fields.iter().map(|x| x.coeffs()[r].clone()).collect()).collect();
    let regular: Vec<NormalForm> = frame.iter().flat_map(|x| x.coeffs().iter().cloned()).collect();
    let reference = chart.sample_points(&regular)?;
    let sol = solve_symbolic(&a, &b, chart.coords(), &reference)?;
    if ZeroVerdict::all(zero_verdicts(&sol.residuals, chart.policy())) == ZeroVerdict::NonZero {
        return Err(Error::Solve("frame is not closed under brackets".into()));
    }
    for (col, &(i, j)) in pairs.iter().enumerate() {
        for k in 0..s {
            let v = sol.solution[k][col].clone();
            c[j][i][k] = v.neg();
            c[i][j][k] = v;
        }
    }
    Ok(c)
}

/// Rational constants, when every coefficient is one (literally, or
/// numerically constant with a Zero verdict on the difference).
fn constant_structure(chart: &Chart, coeffs: &[Vec<Vec<NormalForm>>]) -> Result<Option<Structure>> {
    let s = coeffs.len();
    let flat: Vec<&NormalForm> = coeffs.iter().flatten().flatten().collect();
    let mut values = Vec::with_capacity(flat.len());
    let mut pending = Vec::new();
    for (idx, c) in flat.iter().enumerate() {
        match c.as_constant() {
            Some(k) => values.push(k),
            None => {
                values.push(BigRational::zero());
                pending.push(idx);
            }
        }
    }
    if !pending.is_empty() {
        let forms: Vec<NormalForm> = pending.iter().map(|&i| flat[i].clone()).collect();
        let points = match chart.sample_points(&forms) {
            Ok(p) => p,
            Err(_) => return Ok(None),
        };
        let compiled = Compiled::new(&forms, chart.coords())?;
        let first = compiled.eval(&points[0])?;
        for (slot, &idx) in pending.iter().enumerate() {
            let Some(k) = reconstruct_rational(first[slot], 10_000, 1e-10) else {
                return Ok(None);
            };
            let diff = forms[slot].sub(&NormalForm::constant(k.clone()));
            if !zero_verdict(&diff, chart.policy()).is_zero() {
                return Ok(None);
            }
            values[idx] = k;
        }
    }
    let mut it = values.into_iter();
    let c = (0..s)
        .map(|_| (0..s).map(|_| (0..s).map(|_| it.next().unwrap()).collect()).collect())
        .collect();
    Ok(Some(Structure::new(c)?))
}

/// Brackets the lifts of one side until the vertical fields so produced span
/// the fibers.
pub fn derived_tangential_frame(
    proj: &DarbouxProjection,
    lift: &LiftedFrame,
    side: Side,
) -> Result<LieAlgebraPresentation> {
    let chart = proj.system().chart().clone();
    let s = proj.fiber_dim();
    if s == 0 {
        return LieAlgebraPresentation::new(&chart, Vec::new(), Some(side));
    }
    let v = proj.system().v();
    let lifts = lift.lifts(side).to_vec();
    let mut frame: Vec<VectorField> = Vec::new();
    let mut rank = 0;
    // pairs of lifts first, then lifts against new vertical fields, then
    // vertical fields among themselves
    let mut frontier: Vec<VectorField> = Vec::new();
    for (i, a) in lifts.iter().enumerate() {
        for b in &lifts[i + 1..] {
            let x = a.bracket(b)?;
            if try_adjoin(v, &mut frame, &mut rank, x)? {
                frontier.push(frame.last().unwrap().clone());
            }
            if rank == s {
                break;
            }
        }
    }
    let mut rounds = 0;
    while rank < s && !frontier.is_empty() {
        rounds += 1;
        if rounds > chart.dim() {
            return Err(Error::IterationCap(rounds));
        }
        let mut next = Vec::new();
        let current = frame.clone();
        'outer: for y in &frontier {
            for a in lifts.iter().chain(&current) {
                if rank == s {
                    break 'outer;
                }
                let x = a.bracket(y)?;
                if try_adjoin(v, &mut frame, &mut rank, x)? {
                    next.push(frame.last().unwrap().clone());
                }
            }
        }
        frontier = next;
    }
    if rank < s {
        return Err(Error::Degenerate(format!(
            "derived {side} frame spans only {rank} of {s} fiber directions"
        )));
    }
    LieAlgebraPresentation::new(&chart, frame, Some(side))
}

fn try_adjoin(v: &Distribution, frame: &mut Vec<VectorField>, rank: &mut usize, x: VectorField) -> Result<bool> {
    if x.is_literal_zero() {
        return Ok(false);
    }
    frame.push(x);
    let r = v.rank_of_fields(frame)?;
    if r > *rank {
        *rank = r;
        Ok(true)
    } else {
        frame.pop();
        Ok(false)
    }
}

/// Zero when the structure coefficients of a side-F presentation are
/// annihilated by `G` and by the vertical frame (hence functions on `B₁`).
pub fn coefficients_depend_only_on_base1(pres: &LieAlgebraPresentation, proj: &DarbouxProjection) -> ZeroVerdict {
    let side = pres.side.unwrap_or(Side::F);
    let other = distribution(proj, side.other());
    let mut forms = Vec::new();
    for c in pres.coeffs.iter().flatten().flatten() {
        if c.as_constant().is_some() {
            continue;
        }
        for x in other.generators().iter().chain(proj.vertical()) {
            forms.push(x.apply(c));
        }
    }
    if forms.is_empty() {
        return ZeroVerdict::Zero(crate::expr::Certification::Symbolic);
    }
    ZeroVerdict::all(zero_verdicts(&forms, proj.system().chart().policy()))
}

#[derive(Clone, Debug)]
pub struct SymmetryReport {
    pub status: Status,
    pub vertical: ZeroVerdict,
    pub preserves: Status,
}

impl SymmetryReport {
    pub fn ok(&self) -> bool {
        self.status == Status::Ok
    }
}

/// `X ∈ ker dπ` and `[X, D] ⊆ D` for the chosen side's distribution.
pub fn verify_tangential_symmetry(x: &VectorField, proj: &DarbouxProjection, side: Side) -> Result<SymmetryReport> {
    let vertical = proj.submersion().vertical_verdict(x)?;
    let d = distribution(proj, side);
    let mut preserves = Status::Ok;
    for y in d.generators() {
        let b = x.bracket(y)?;
        if b.is_literal_zero() {
            continue;
        }
        preserves = preserves.and(match d.contains(&b)? {
            Containment::Contained => Status::Ok,
            Containment::NotContained => Status::Fail,
            Containment::Indeterminate => Status::Indeterminate,
        });
    }
    let v = match vertical {
        ZeroVerdict::Zero(_) => Status::Ok,
        ZeroVerdict::NonZero => Status::Fail,
        ZeroVerdict::Unknown => Status::Indeterminate,
    };
    Ok(SymmetryReport {
        status: v.and(preserves),
        vertical,
        preserves,
    })
}

/// Center of a constant-structure presentation, as fields oriented so the
/// first nonvanishing coefficient is positive, keeping those that are
/// symmetries of both `F` and `G`.
pub fn system_symmetries(pres: &LieAlgebraPresentation, proj: &DarbouxProjection) -> Result<Vec<VectorField>> {
    let structure = pres
        .constants
        .as_ref()
        .ok_or_else(|| Error::Invalid("structure coefficients are not constant; normalize first".into()))?;
    let center = pres.chart.center();
    let mut out = Vec::new();
    for basis in structure.center() {
        let weights: Vec<NormalForm> = basis.iter().map(|q| NormalForm::constant(q.clone())).collect();
        let mut x = VectorField::combination(&pres.chart, &weights, &pres.frame)?;
        if leading_sign(&x, &center) < 0 {
            x = x.neg();
        }
        let f = verify_tangential_symmetry(&x, proj, Side::F)?;
        let g = verify_tangential_symmetry(&x, proj, Side::G)?;
        if f.ok() && g.ok() {
            out.push(x);
        }
    }
    Ok(out)
}

fn leading_sign(x: &VectorField, point: &[f64]) -> i8 {
    for c in x.coeffs() {
        if c.is_zero() {
            continue;
        }
        if let Some(k) = c.as_constant() {
            return if k.is_negative() { -1 } else { 1 };
        }
        if let Ok(v) = Compiled::new(std::slice::from_ref(c), x.chart().coords()).and_then(|cc| cc.eval(point)) {
            if v[0].abs() > 1e-12 {
                return if v[0] < 0.0 { -1 } else { 1 };
            }
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darboux::build_projection;
    use crate::darboux::tests::{liouville, wave};

    #[test]
    fn wave_lifts_and_derived_frame() {
        let (sys, inv) = wave();
        let proj = build_projection(&sys, &inv).unwrap();
        let lift = lift_frame(&proj, None, None).unwrap();
        let chart = sys.chart();
        assert_eq!(lift.lifts_f[0], VectorField::parse(chart, "d/dx + p*d/dz").unwrap());
        assert_eq!(lift.lifts_g[1], VectorField::parse(chart, "d/dq").unwrap());
        assert!(lift.commute.is_zero());
        let pres = derived_tangential_frame(&proj, &lift, Side::F).unwrap();
        assert_eq!(pres.frame, vec![VectorField::parse(chart, "-d/dz").unwrap()]);
        let syms = system_symmetries(&pres, &proj).unwrap();
        assert_eq!(syms, vec![VectorField::parse(chart, "d/dz").unwrap()]);
    }

    #[test]
    fn liouville_derived_frame_is_vertical() {
        let (sys, inv) = liouville();
        let proj = build_projection(&sys, &inv).unwrap();
        let lift = lift_frame(&proj, None, None).unwrap();
        for side in [Side::F, Side::G] {
            let pres = derived_tangential_frame(&proj, &lift, side).unwrap();
            assert_eq!(pres.dim(), 3);
            for x in &pres.frame {
                assert!(proj.submersion().vertical_verdict(x).unwrap().is_zero());
                for y in lift.lifts(side.other()) {
                    assert!(x.bracket(y).unwrap().zero_verdict().is_zero());
                }
            }
            assert!(coefficients_depend_only_on_base1(&pres, &proj).is_zero());
        }
    }

    #[test]
    fn symmetry_checks_on_wave() {
        let (sys, inv) = wave();
        let proj = build_projection(&sys, &inv).unwrap();
        let dz = VectorField::parse(sys.chart(), "d/dz").unwrap();
        assert!(verify_tangential_symmetry(&dz, &proj, Side::F).unwrap().ok());
        assert!(verify_tangential_symmetry(&dz, &proj, Side::G).unwrap().ok());
        let dp = VectorField::parse(sys.chart(), "d/dp").unwrap();
        let r = verify_tangential_symmetry(&dp, &proj, Side::F).unwrap();
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.vertical, ZeroVerdict::NonZero);
    }

    #[test]
    fn coefficient_in_b2_direction_is_detected() {
        let (sys, inv) = wave();
        let proj = build_projection(&sys, &inv).unwrap();
        let chart = sys.chart();
        let pres = LieAlgebraPresentation {
            side: Some(Side::F),
            chart: chart.clone(),
            frame: vec![VectorField::parse(chart, "d/dz").unwrap()],
            coeffs: vec![vec![vec![chart.parse("q").unwrap()]]],
            constants: None,
        };
        assert_eq!(coefficients_depend_only_on_base1(&pres, &proj), ZeroVerdict::NonZero);
    }

    #[test]
    fn structure_constants_are_antisymmetric() {
        let chart = Chart::new(["x", "y", "z"]).unwrap();
        let frame: Vec<VectorField> = ["d/dx", "d/dy + x*d/dz", "d/dz"]
            .iter()
            .map(|s| VectorField::parse(&chart, s).unwrap())
            .collect();
        let c = structure_constants(&chart, &frame).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert!(c[i][j][k].add(&c[j][i][k]).is_zero());
                }
            }
        }
        assert_eq!(c[0][1][2], NormalForm::one());
    }
}
