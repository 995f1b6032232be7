//! Integral surfaces by lifting base curves: restrict `F ⊕ G` over
//! `γ₁ × γ₂` and integrate the resulting rank-2 distribution.

pub mod ode;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;

use crate::darboux::DarbouxProjection;
use crate::error::{Error, Result};
use crate::expr::{Compiled, NormalForm, SymbolKind, SymbolTable};
use crate::geometry::Distribution;
pub use ode::{integrate, StepStats, Tolerances};

/// `γ(τ)` in the coordinates of one base factor.
#[derive(Clone, Debug)]
pub struct Curve {
    pub param: String,
    pub components: Vec<NormalForm>,
    pub interval: (f64, f64),
    value: Compiled,
    velocity: Compiled,
}

impl Curve {
    pub fn new(param: &str, components: Vec<NormalForm>, interval: (f64, f64)) -> Result<Curve> {
        for c in &components {
            for s in c.symbols() {
                if &*s != param {
                    return Err(Error::UndeclaredSymbol(s.to_string()));
                }
            }
        }
        let names = [param.to_string()];
        let derivs: Vec<NormalForm> = components.iter().map(|c| c.derivative(param)).collect();
        let curve = Curve {
            param: param.to_string(),
            value: Compiled::new(&components, &names)?,
            velocity: Compiled::new(&derivs, &names)?,
            components,
            interval,
        };
        // sampled nonvanishing velocity
        for i in 0..=16 {
            let t = interval.0 + (interval.1 - interval.0) * i as f64 / 16.0;
            let v = curve.velocity(t)?;
            if v.iter().all(|x| x.abs() < 1e-12) {
                return Err(Error::Degenerate(format!("curve velocity vanishes at {}={t}", curve.param)));
            }
        }
        Ok(curve)
    }

    /// Parses comma-separated component expressions in the parameter.
    pub fn parse(param: &str, text: &str, interval: (f64, f64)) -> Result<Curve> {
        let table = SymbolTable::coordinates([param]);
        let components = text
            .split(',')
            .map(|s| crate::expr::parse_expr(s.trim(), &table).and_then(|e| e.to_normal()))
            .collect::<Result<Vec<_>>>()?;
        Curve::new(param, components, interval)
    }

    pub fn point(&self, t: f64) -> Result<Vec<f64>> {
        self.value.eval(&[t])
    }

    pub fn velocity(&self, t: f64) -> Result<Vec<f64>> {
        self.velocity.eval(&[t])
    }
}

struct SideLift {
    gens: Compiled,
    /// `X_a(πᵇ)` flattened `[a][b]`.
    push: Compiled,
    rank: usize,
}

impl SideLift {
    fn new(d: &Distribution, comps: &[NormalForm]) -> Result<SideLift> {
        let coords = d.chart().coords();
        let gens: Vec<NormalForm> = d.generators().iter().flat_map(|x| x.coeffs().iter().cloned()).collect();
        let push: Vec<NormalForm> = d
            .generators()
            .iter()
            .flat_map(|x| comps.iter().map(move |c| x.apply(c)))
            .collect();
        Ok(SideLift {
            gens: Compiled::new(&gens, coords)?,
            push: Compiled::new(&push, coords)?,
            rank: comps.len(),
        })
    }

    /// The vector of `D` at `m` projecting to `target`.
    fn direction(&self, m: &[f64], target: &[f64], n: usize) -> Result<Vec<f64>> {
        let na = self.gens.len() / n;
        let push = self.push.eval(m).map_err(left)?;
        let a = DMatrix::from_fn(self.rank, na, |b, a| push[a * self.rank + b]);
        let svd = a.svd(true, true);
        let w = svd
            .solve(&DVector::from_column_slice(target), 1e-12)
            .map_err(|e| Error::Degenerate(e.to_string()))?;
        let g = self.gens.eval(m).map_err(left)?;
        let mut out = vec![0.0; n];
        for (ai, wa) in w.iter().enumerate() {
            for i in 0..n {
                out[i] += wa * g[ai * n + i];
            }
        }
        Ok(out)
    }
}

fn left(e: Error) -> Error {
    match e {
        Error::Singular(s) => Error::LeftDomain(s),
        other => other,
    }
}

/// The two direction fields spanning `W` over `π⁻¹(γ₁ × γ₂)`.
pub struct Directions {
    n: usize,
    coords: Vec<String>,
    gamma1: Curve,
    gamma2: Curve,
    f: SideLift,
    g: SideLift,
    proj_map: Compiled,
}

pub fn restrict_to_lift(proj: &DarbouxProjection, gamma1: Curve, gamma2: Curve) -> Result<Directions> {
    let sys = proj.system();
    if gamma1.components.len() != proj.base1().dim() || gamma2.components.len() != proj.base2().dim() {
        return Err(Error::Invalid("curve dimensions do not match the base factors".into()));
    }
    let chart = sys.chart();
    Ok(Directions {
        n: chart.dim(),
        coords: chart.coords().to_vec(),
        f: SideLift::new(sys.f(), proj.components1())?,
        g: SideLift::new(sys.g(), proj.components2())?,
        proj_map: Compiled::new(proj.submersion().components(), chart.coords())?,
        gamma1,
        gamma2,
    })
}

impl Directions {
    /// Vector in `F` projecting to `γ₁′(u)`.
    pub fn u_direction(&self, m: &[f64], u: f64) -> Result<Vec<f64>> {
        self.f.direction(m, &self.gamma1.velocity(u)?, self.n)
    }

    /// Vector in `G` projecting to `γ₂′(v)`.
    pub fn v_direction(&self, m: &[f64], v: f64) -> Result<Vec<f64>> {
        self.g.direction(m, &self.gamma2.velocity(v)?, self.n)
    }

    pub fn gamma1(&self) -> &Curve {
        &self.gamma1
    }

    pub fn gamma2(&self) -> &Curve {
        &self.gamma2
    }

    /// `max |π(m) − (γ₁(u), γ₂(v))|`.
    pub fn projection_error(&self, m: &[f64], u: f64, v: f64) -> Result<f64> {
        Ok(self.projection_gap(m, u, v, Tolerances::default())?.0)
    }

    /// Absolute and tolerance-scaled projection error.
    fn projection_gap(&self, m: &[f64], u: f64, v: f64, tol: Tolerances) -> Result<(f64, f64)> {
        let pm = self.proj_map.eval(m)?;
        let want: Vec<f64> = self.gamma1.point(u)?.into_iter().chain(self.gamma2.point(v)?).collect();
        Ok(scaled_gap(&pm, &want, tol))
    }

    /// Finite-difference bracket of the direction fields at `(m, u, v)`,
    /// measured as its distance from `span{U, V}`.
    pub fn frobenius_residual(&self, m: &[f64], u: f64, v: f64, h: f64) -> Result<f64> {
        // flows are well defined for fixed parameters, so difference along them
        let uu = self.u_direction(m, u)?;
        let vv = self.v_direction(m, v)?;
        let shift = |x: &[f64], d: &[f64], s: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + s * b).collect() };
        let dv_along_u = {
            let p = self.v_direction(&shift(m, &uu, h), v)?;
            let q = self.v_direction(&shift(m, &uu, -h), v)?;
            p.iter().zip(&q).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>()
        };
        let du_along_v = {
            let p = self.u_direction(&shift(m, &vv, h), u)?;
            let q = self.u_direction(&shift(m, &vv, -h), u)?;
            p.iter().zip(&q).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>()
        };
        let bracket: Vec<f64> = dv_along_u.iter().zip(&du_along_v).map(|(a, b)| a - b).collect();
        let basis = DMatrix::from_fn(self.n, 2, |i, j| if j == 0 { uu[i] } else { vv[i] });
        let b = DVector::from_vec(bracket);
        let svd = basis.clone().svd(true, true);
        let coef = svd.solve(&b, 1e-12).map_err(|e| Error::Degenerate(e.to_string()))?;
        Ok((basis * coef - b).amax())
    }
}

/// Surface nodes over a `(u, v)` grid, row-major with `v` fastest.
#[derive(Clone, Debug)]
pub struct IntegralSurface {
    pub coords: Vec<String>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub tangent_u: Vec<Vec<f64>>,
    pub tangent_v: Vec<Vec<f64>>,
    pub tol: Tolerances,
    /// Max corner discrepancy between u-then-v and v-then-u integration.
    pub defect: f64,
    /// The same discrepancy in units of `atol + rtol·|y|`, componentwise.
    pub defect_ratio: f64,
    /// Max `|π(node) − (γ₁(u), γ₂(v))|`.
    pub projection_error: f64,
    /// Projection error in units of `atol + rtol·|γ|`.
    pub projection_ratio: f64,
}

impl IntegralSurface {
    /// Path independence and projection consistency within `factor` times
    /// the ODE tolerance.
    pub fn consistent(&self, factor: f64) -> bool {
        self.defect_ratio < factor && self.projection_ratio < factor
    }
}

fn scaled_gap(a: &[f64], b: &[f64], tol: Tolerances) -> (f64, f64) {
    a.iter().zip(b).fold((0.0_f64, 0.0_f64), |(abs, ratio), (x, y)| {
        let d = (x - y).abs();
        (abs.max(d), ratio.max(d / (tol.atol + tol.rtol * x.abs().max(y.abs()))))
    })
}

fn grid_order(nodes: &[f64], start: f64) -> (Vec<usize>, Vec<usize>) {
    let up = (0..nodes.len()).filter(|&i| nodes[i] >= start).collect();
    let down = (0..nodes.len()).rev().filter(|&i| nodes[i] < start).collect();
    (up, down)
}

/// Integrates along one parameter from `(m, t0)` to each node, returning the
/// point at each node.
fn sweep<F>(field: F, m: &[f64], t0: f64, nodes: &[f64], tol: Tolerances) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64], f64) -> Result<Vec<f64>>,
{
    let mut out = vec![Vec::new(); nodes.len()];
    let (up, down) = grid_order(nodes, t0);
    for chain in [up, down] {
        let mut t = t0;
        let mut y = m.to_vec();
        for i in chain {
            let (ny, _) = integrate(|tt, yy| field(yy, tt), t, &y, nodes[i], tol)?;
            y = ny;
            t = nodes[i];
            out[i] = y.clone();
        }
    }
    Ok(out)
}

/// Integrates `W` from `m0` at `(u0, v0)`: along `u` first, then along `v`
/// from each `u` node.
pub fn integrate_surface(
    dirs: &Directions,
    m0: &[f64],
    (u0, v0): (f64, f64),
    u: &[f64],
    v: &[f64],
    tol: Tolerances,
) -> Result<IntegralSurface> {
    if m0.len() != dirs.n {
        return Err(Error::Invalid("initial point has the wrong dimension".into()));
    }
    let err0 = dirs.projection_error(m0, u0, v0)?;
    if err0 > 1e-8 {
        return Err(Error::Invalid(format!("initial point is off the lifted set by {err0:.3e}")));
    }
    let ufield = |m: &[f64], t: f64| dirs.u_direction(m, t);
    let vfield = |m: &[f64], t: f64| dirs.v_direction(m, t);
    let first = sweep(ufield, m0, u0, u, tol)?;
    let columns: Vec<Vec<Vec<f64>>> = first
        .par_iter()
        .map(|m| sweep(vfield, m, v0, v, tol))
        .collect::<Result<_>>()?;
    let points: Vec<Vec<f64>> = columns.into_iter().flatten().collect();

    // opposite order to the four corners
    let nv = v.len();
    let mut defect = 0.0_f64;
    let mut defect_ratio = 0.0_f64;
    if u.len() > 1 || v.len() > 1 {
        let vfirst = sweep(vfield, m0, v0, v, tol)?;
        for &j in &[0, nv - 1] {
            let row = sweep(ufield, &vfirst[j], u0, u, tol)?;
            for &i in &[0, u.len() - 1] {
                let (abs, ratio) = scaled_gap(&row[i], &points[i * nv + j], tol);
                defect = defect.max(abs);
                defect_ratio = defect_ratio.max(ratio);
            }
        }
    }
    let mut tangent_u = Vec::with_capacity(points.len());
    let mut tangent_v = Vec::with_capacity(points.len());
    let mut projection_error = 0.0_f64;
    let mut projection_ratio = 0.0_f64;
    for (idx, m) in points.iter().enumerate() {
        let (ui, vi) = (u[idx / nv], v[idx % nv]);
        tangent_u.push(dirs.u_direction(m, ui)?);
        tangent_v.push(dirs.v_direction(m, vi)?);
        let (abs, ratio) = dirs.projection_gap(m, ui, vi, tol)?;
        projection_error = projection_error.max(abs);
        projection_ratio = projection_ratio.max(ratio);
    }
    Ok(IntegralSurface {
        coords: dirs.coords.clone(),
        u: u.to_vec(),
        v: v.to_vec(),
        points,
        tangent_u,
        tangent_v,
        tol,
        defect,
        defect_ratio,
        projection_error,
        projection_ratio,
    })
}

/// Point over `(γ₁(u0), γ₂(v0))` with fiber coordinates at the center of the
/// sample box.
pub fn default_initial_point(proj: &DarbouxProjection, dirs: &Directions, u0: f64, v0: f64) -> Result<Vec<f64>> {
    let target: Vec<f64> = dirs.gamma1.point(u0)?.into_iter().chain(dirs.gamma2.point(v0)?).collect();
    let sub = proj.submersion();
    let center = proj.system().chart().center();
    let fiber: Vec<f64> = sub
        .fiber_coords()
        .iter()
        .map(|w| center[proj.system().chart().index(w).unwrap()])
        .collect();
    sub.lift_point(&target, &fiber)
}

impl IntegralSurface {
    /// Surface given by an explicit map, with tangents from differences.
    pub fn from_fn<F>(coords: &[&str], u: &[f64], v: &[f64], f: F) -> IntegralSurface
    where
        F: Fn(f64, f64) -> Vec<f64>,
    {
        let mut points = Vec::new();
        let mut tangent_u = Vec::new();
        let mut tangent_v = Vec::new();
        let h = 1e-5;
        for &a in u {
            for &b in v {
                points.push(f(a, b));
                let d = |p: Vec<f64>, q: Vec<f64>| p.iter().zip(&q).map(|(x, y)| (x - y) / (2.0 * h)).collect();
                tangent_u.push(d(f(a + h, b), f(a - h, b)));
                tangent_v.push(d(f(a, b + h), f(a, b - h)));
            }
        }
        IntegralSurface {
            coords: coords.iter().map(|s| s.to_string()).collect(),
            u: u.to_vec(),
            v: v.to_vec(),
            points,
            tangent_u,
            tangent_v,
            tol: Tolerances::default(),
            defect: 0.0,
            defect_ratio: 0.0,
            projection_error: 0.0,
            projection_ratio: 0.0,
        }
    }

    pub fn node(&self, i: usize, j: usize) -> &[f64] {
        &self.points[i * self.v.len() + j]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    /// Header `u,v,<coords>`, one row per node.
    pub fn to_csv(&self) -> String {
        let mut out = format!("u,v,{}\n", self.coords.join(","));
        for (idx, p) in self.points.iter().enumerate() {
            let (a, b) = (self.u[idx / self.v.len()], self.v[idx % self.v.len()]);
            let row: Vec<String> = [a, b].iter().chain(p).map(|x| format!("{x:.15e}")).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Result of evaluating a PDE residual over the surface.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub max: f64,
    pub nodes: usize,
    pub warning: Option<String>,
}

/// Derivatives of node functions with respect to the independent
/// coordinates `(x, y)`: `(∂_u, ∂_v) = Jᵀ (∂_x, ∂_y)`.
struct Jets<'a> {
    s: &'a IntegralSurface,
    jinv_t: Vec<Matrix2<f64>>,
}

impl<'a> Jets<'a> {
    fn new(s: &'a IntegralSurface, ix: usize, iy: usize) -> Result<Jets<'a>> {
        let mut jinv_t = Vec::with_capacity(s.points.len());
        for (tu, tv) in s.tangent_u.iter().zip(&s.tangent_v) {
            // columns: d/du and d/dv of (x, y)
            let j = Matrix2::new(tu[ix], tv[ix], tu[iy], tv[iy]);
            let inv = j
                .transpose()
                .try_inverse()
                .ok_or_else(|| Error::Degenerate("surface is not a graph over the independent variables".into()))?;
            jinv_t.push(inv);
        }
        Ok(Jets { s, jinv_t })
    }

    /// Gradient `(f_x, f_y)` of a coordinate from the exact tangents.
    fn coordinate_gradient(&self, c: usize) -> Vec<Vector2<f64>> {
        (0..self.s.points.len())
            .map(|i| self.jinv_t[i] * Vector2::new(self.s.tangent_u[i][c], self.s.tangent_v[i][c]))
            .collect()
    }

    /// Gradient of node values by differences along the grid axes. `None`
    /// when the grid is too small in some direction.
    fn gradient(&self, values: &[f64]) -> Option<Vec<Vector2<f64>>> {
        let (nu, nv) = (self.s.u.len(), self.s.v.len());
        if nu < 2 || nv < 2 {
            return None;
        }
        let mut out = Vec::with_capacity(values.len());
        for i in 0..nu {
            for j in 0..nv {
                let du = axis_derivative(|k| vec![values[k * nv + j]], &self.s.u, i)[0];
                let dv = axis_derivative(|k| vec![values[i * nv + k]], &self.s.v, j)[0];
                out.push(self.jinv_t[i * nv + j] * Vector2::new(du, dv));
            }
        }
        Some(out)
    }
}

/// Splits `name` into a base coordinate and a string of independent-variable
/// letters (`z_xy` → (`z`, "xy")).
fn jet_parts<'n>(name: &'n str, coords: &[String], indep: [&str; 2]) -> Option<(usize, Vec<usize>)> {
    let (base, sub) = name.rsplit_once('_')?;
    let c = coords.iter().position(|x| x == base)?;
    let mut order = Vec::new();
    let mut rest = sub;
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix(indep[0]) {
            order.push(0);
            rest = r;
        } else if let Some(r) = rest.strip_prefix(indep[1]) {
            order.push(1);
            rest = r;
        } else {
            return None;
        }
    }
    if order.is_empty() {
        None
    } else {
        Some((c, order))
    }
}

/// Max over interior nodes of `|residual|`, where the residual may use chart
/// coordinates and jet symbols `w_x`, `w_xy`, … with respect to the
/// independent coordinates. First derivatives of coordinates come from the
/// exact tangents, higher ones from differences along the grid.
pub fn residual_check(surface: &IntegralSurface, residual: &str, independent: [&str; 2]) -> Result<ResidualReport> {
    let mut table = SymbolTable::coordinates(&surface.coords);
    let ix = surface
        .index(independent[0])
        .ok_or_else(|| Error::UndeclaredSymbol(independent[0].to_string()))?;
    let iy = surface
        .index(independent[1])
        .ok_or_else(|| Error::UndeclaredSymbol(independent[1].to_string()))?;
    // declare every jet symbol the text mentions
    let mut jets: Vec<(String, usize, Vec<usize>)> = Vec::new();
    for word in residual.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')) {
        if word.is_empty() || table.contains(word) {
            continue;
        }
        if let Some((c, order)) = jet_parts(word, &surface.coords, independent) {
            table.declare(word, SymbolKind::Parameter);
            jets.push((word.to_string(), c, order));
        }
    }
    let form = crate::expr::parse_expr(residual, &table)?.to_normal()?;
    let (nu, nv) = (surface.u.len(), surface.v.len());
    let warning = (nu < 3 || nv < 3).then(|| format!("grid {nu}x{nv} is too coarse for second differences"));
    let j = Jets::new(surface, ix, iy)?;
    let mut jet_values: Vec<Vec<f64>> = Vec::new();
    for (name, c, order) in &jets {
        let mut grad = j.coordinate_gradient(*c);
        let mut values: Vec<f64> = grad.iter().map(|g| g[order[0]]).collect();
        for &k in &order[1..] {
            grad = j
                .gradient(&values)
                .ok_or_else(|| Error::Invalid(format!("grid too small to evaluate {name}")))?;
            values = grad.iter().map(|g| g[k]).collect();
        }
        jet_values.push(values);
    }
    let mut names: Vec<String> = surface.coords.clone();
    names.extend(jets.iter().map(|(n, _, _)| n.clone()));
    let compiled = Compiled::new(std::slice::from_ref(&form), &names)?;
    let mut max = 0.0_f64;
    let mut nodes = 0;
    let interior = |i: usize, n: usize| n < 3 || (i > 0 && i + 1 < n);
    for i in 0..nu {
        for jj in 0..nv {
            if !interior(i, nu) || !interior(jj, nv) {
                continue;
            }
            let idx = i * nv + jj;
            let mut point = surface.points[idx].clone();
            point.extend(jet_values.iter().map(|v| v[idx]));
            let r = compiled.eval(&point)?[0];
            max = max.max(r.abs());
            nodes += 1;
        }
    }
    Ok(ResidualReport { max, nodes, warning })
}

/// Nodes whose difference tangent plane fails to meet `F` or `G` in exactly
/// one dimension.
#[derive(Clone, Debug)]
pub struct TangencyReport {
    pub checked: usize,
    pub failures: Vec<(usize, usize)>,
}

impl TangencyReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn uniform(nodes: &[f64]) -> bool {
    let n = nodes.len();
    n >= 2 && {
        let h = (nodes[n - 1] - nodes[0]) / (n - 1) as f64;
        nodes.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs())
    }
}

/// Derivative along one grid axis. Uniform axes with at least five nodes get
/// fourth-order stencils (shifted inward at the edges); otherwise central
/// differences, one-sided on the boundary.
fn axis_derivative(at: impl Fn(usize) -> Vec<f64>, nodes: &[f64], i: usize) -> Vec<f64> {
    let n = nodes.len();
    if n < 5 || !uniform(nodes) {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let (fa, fb) = (at(a), at(b));
        return (0..fa.len()).map(|k| (fb[k] - fa[k]) / (nodes[b] - nodes[a])).collect();
    }
    let h = (nodes[n - 1] - nodes[0]) / (n - 1) as f64;
    let (start, w): (usize, [f64; 5]) = match i {
        0 => (0, [-25.0, 48.0, -36.0, 16.0, -3.0]),
        1 => (0, [-3.0, -10.0, 18.0, -6.0, 1.0]),
        _ if i + 1 == n => (n - 5, [3.0, -16.0, 36.0, -48.0, 25.0]),
        _ if i + 2 == n => (n - 5, [-1.0, 6.0, -18.0, 10.0, 3.0]),
        _ => (i - 2, [1.0, -8.0, 0.0, 8.0, -1.0]),
    };
    let rows: Vec<Vec<f64>> = (0..5).map(|o| at(start + o)).collect();
    (0..rows[0].len())
        .map(|k| (0..5).map(|o| w[o] * rows[o][k]).sum::<f64>() / (12.0 * h))
        .collect()
}

/// At interior nodes, `dim(T ∩ D) = 1` for `D = F, G`, where `T` is spanned
/// by difference tangents. Ranks use relative tolerance `rank_tol`.
pub fn tangency_check(
    surface: &IntegralSurface,
    f: &Distribution,
    g: &Distribution,
    rank_tol: f64,
) -> Result<TangencyReport> {
    let (nu, nv) = (surface.u.len(), surface.v.len());
    let n = surface.coords.len();
    let mut failures = Vec::new();
    let mut checked = 0;
    for i in 1..nu.saturating_sub(1) {
        for j in 1..nv.saturating_sub(1) {
            let tu = axis_derivative(|a| surface.node(a, j).to_vec(), &surface.u, i);
            let tv = axis_derivative(|b| surface.node(i, b).to_vec(), &surface.v, j);
            let m = surface.node(i, j);
            checked += 1;
            let mut good = true;
            for d in [f, g] {
                let mut cols = vec![tu.clone(), tv.clone()];
                for x in d.generators() {
                    cols.push(x.eval(m).map_err(left)?);
                }
                let t = crate::linalg::numeric_rank(&DMatrix::from_fn(n, 2, |r, c| cols[c][r]), rank_tol);
                let dr = crate::linalg::numeric_rank(&DMatrix::from_fn(n, cols.len() - 2, |r, c| cols[c + 2][r]), rank_tol);
                let all = crate::linalg::numeric_rank(&DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]), rank_tol);
                good &= t == 2 && t + dr - all == 1;
            }
            if !good {
                failures.push((i, j));
            }
        }
    }
    Ok(TangencyReport { checked, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darboux::{build_projection, InvariantSet};
    use crate::decomposable::DecomposableSystem;
    use crate::geometry::Chart;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64).collect()
    }

    #[test]
    fn degenerate_curve() {
        assert!(matches!(Curve::parse("u", "1, 2", (0.0, 1.0)), Err(Error::Degenerate(_))));
        assert!(Curve::parse("u", "u, w", (0.0, 1.0)).is_err());
    }

    fn wave_proj() -> DarbouxProjection {
        let chart = Chart::new(["x", "y", "z", "p", "q"]).unwrap();
        let sys = DecomposableSystem::parse(&chart, &["d/dx + p*d/dz", "d/dp"], &["d/dy + q*d/dz", "d/dq"]).unwrap();
        let inv = InvariantSet::parse(&chart, &["y", "q"], &["x", "p"]).unwrap();
        build_projection(&sys, &inv).unwrap()
    }

    #[test]
    fn wave_constant_data() {
        let proj = wave_proj();
        let dirs = restrict_to_lift(
            &proj,
            Curve::parse("u", "u, 0", (-1.0, 1.0)).unwrap(),
            Curve::parse("v", "v, 0", (-1.0, 1.0)).unwrap(),
        )
        .unwrap();
        let m0 = vec![0.0, 0.0, 0.7, 0.0, 0.0];
        let single = integrate_surface(&dirs, &m0, (0.0, 0.0), &[0.0], &[0.0], Tolerances::default()).unwrap();
        assert_eq!(single.points, vec![m0.clone()]);
        let s = integrate_surface(&dirs, &m0, (0.0, 0.0), &grid(-1.0, 1.0, 5), &grid(-1.0, 1.0, 5), Tolerances::default())
            .unwrap();
        for p in &s.points {
            assert!((p[2] - 0.7).abs() < 1e-12);
        }
        assert!(s.defect < 1e-8);
        let r = residual_check(&s, "z_xy", ["x", "y"]).unwrap();
        assert!(r.max < 1e-9);
    }

    #[test]
    fn wave_directions_and_frobenius() {
        let proj = wave_proj();
        let dirs = restrict_to_lift(
            &proj,
            Curve::parse("u", "u, sin(u)", (-1.0, 1.0)).unwrap(),
            Curve::parse("v", "v, v^2", (-1.0, 1.0)).unwrap(),
        )
        .unwrap();
        let m = [0.3, -0.2, 0.1, 0.3f64.sin(), 0.04];
        let ud = dirs.u_direction(&m, 0.3).unwrap();
        let want = [1.0, 0.0, 0.3f64.sin(), 0.3f64.cos(), 0.0];
        for (a, b) in ud.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(dirs.frobenius_residual(&m, 0.3, -0.2, 1e-4).unwrap() < 1e-6);
        let m0 = default_initial_point(&proj, &dirs, 0.0, 0.0).unwrap();
        let s = integrate_surface(&dirs, &m0, (0.0, 0.0), &grid(-1.0, 1.0, 9), &grid(-1.0, 1.0, 9), Tolerances::default())
            .unwrap();
        assert!(s.defect < 1e-8, "{}", s.defect);
        assert!(s.projection_error < 1e-8);
    }

    #[test]
    fn closed_form_residuals() {
        let u = grid(0.0, 1.0, 11);
        let bilinear = IntegralSurface::from_fn(&["x", "y", "z"], &u, &u, |a, b| vec![a, b, a * b]);
        let r = residual_check(&bilinear, "z_xy", ["x", "y"]).unwrap();
        assert!((r.max - 1.0).abs() < 1e-6);
        let flat = IntegralSurface::from_fn(&["x", "y", "z"], &u, &u, |a, b| vec![a, b, 0.0]);
        assert_eq!(residual_check(&flat, "z_xy", ["x", "y"]).unwrap().max, 0.0);
        let tiny = IntegralSurface::from_fn(&["x", "y", "z"], &[0.0, 1.0], &[0.0, 1.0], |a, b| vec![a, b, 0.0]);
        assert!(residual_check(&tiny, "z", ["x", "y"]).unwrap().warning.is_some());
    }
}
