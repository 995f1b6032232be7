use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;

use super::algebra::Structure;
use super::frames::LieAlgebraPresentation;
use crate::error::{Error, Result};
use crate::expr::{Compiled, NormalForm, ZeroVerdict};
use crate::geometry::VectorField;
use crate::linalg::{numeric_rank, RANK_TOL};
use crate::solver::ode::{integrate, Tolerances};

/// Matrix whose columns are the frame fields at `point` (rows: chart
/// coordinates).
pub fn evaluation_map(frame: &[VectorField], point: &[f64]) -> Result<DMatrix<f64>> {
    let Some(first) = frame.first() else {
        return Ok(DMatrix::zeros(0, 0));
    };
    let n = first.chart().dim();
    let mut m = DMatrix::zeros(n, frame.len());
    for (j, x) in frame.iter().enumerate() {
        let v = x.eval(point)?;
        for i in 0..n {
            m[(i, j)] = v[i];
        }
    }
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct ReciprocalReport {
    pub commute: ZeroVerdict,
    pub transitive_a: bool,
    pub transitive_b: bool,
    /// Max over points and pairs of `|α[X,Y] + [αX, αY]|`.
    pub anti_iso_residual: f64,
    pub points: usize,
}

impl ReciprocalReport {
    pub fn ok(&self, tol: f64) -> bool {
        self.commute.is_zero() && self.transitive_a && self.transitive_b && self.anti_iso_residual < tol
    }
}

/// Checks that two frames on one chart commute, are locally transitive, and
/// are anti-isomorphic through `α_x = ev(B,x)⁻¹ ev(A,x)`.
pub fn check_reciprocal(a: &[VectorField], b: &[VectorField], points: Option<&[Vec<f64>]>) -> Result<ReciprocalReport> {
    let chart = a
        .first()
        .or(b.first())
        .ok_or_else(|| Error::Invalid("empty frames".into()))?
        .chart()
        .clone();
    let mut verdicts = Vec::new();
    for x in a {
        for y in b {
            verdicts.push(x.bracket(y)?.zero_verdict());
        }
    }
    let commute = ZeroVerdict::all(verdicts);
    let owned;
    let points = match points {
        Some(p) => p,
        None => {
            let regular: Vec<NormalForm> = a.iter().chain(b).flat_map(|x| x.coeffs().iter().cloned()).collect();
            owned = chart.sample_points(&regular)?;
            &owned
        }
    };
    let n = chart.dim();
    let transitive = |frame: &[VectorField]| -> Result<bool> {
        if frame.len() != n {
            return Ok(false);
        }
        for p in points {
            if numeric_rank(&evaluation_map(frame, p)?, RANK_TOL) < n {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let transitive_a = transitive(a)?;
    let transitive_b = transitive(b)?;
    let mut residual = 0.0_f64;
    if transitive_a && transitive_b {
        let pa = LieAlgebraPresentation::new(&chart, a.to_vec(), None)?;
        let pb = LieAlgebraPresentation::new(&chart, b.to_vec(), None)?;
        for p in points {
            let ea = evaluation_map(a, p)?;
            let eb = evaluation_map(b, p)?;
            let alpha = eb
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Degenerate("evaluation map not invertible".into()))?
                * ea;
            let ca = pa.coeffs_at(p)?;
            let cb = pb.coeffs_at(p)?;
            residual = residual.max(anti_iso_residual(&alpha, &ca, &cb));
        }
    } else {
        residual = f64::INFINITY;
    }
    Ok(ReciprocalReport {
        commute,
        transitive_a,
        transitive_b,
        anti_iso_residual: residual,
        points: points.len(),
    })
}

fn anti_iso_residual(alpha: &DMatrix<f64>, ca: &[Vec<Vec<f64>>], cb: &[Vec<Vec<f64>>]) -> f64 {
    let s = ca.len();
    let mut worst = 0.0_f64;
    for i in 0..s {
        for j in i + 1..s {
            let lhs = alpha * DVector::from_vec(ca[i][j].clone());
            let mut rhs = DVector::zeros(s);
            for m in 0..s {
                for nn in 0..s {
                    let w = alpha[(m, i)] * alpha[(nn, j)];
                    if w == 0.0 {
                        continue;
                    }
                    rhs += DVector::from_vec(cb[m][nn].clone()) * w;
                }
            }
            worst = worst.max((lhs + rhs).amax());
        }
    }
    worst
}

/// Exact check that `α` maps the structure `a` to the negative of `b`.
pub fn anti_isomorphic(a: &Structure, b: &Structure, alpha: &[Vec<BigRational>]) -> bool {
    let s = a.dim();
    if b.dim() != s {
        return false;
    }
    for i in 0..s {
        for j in 0..s {
            for k in 0..s {
                // α([e_i, e_j])_k
                let mut lhs = BigRational::zero();
                for m in 0..s {
                    lhs += &alpha[k][m] * a.get(i, j, m);
                }
                let mut rhs = BigRational::zero();
                for m in 0..s {
                    for n in 0..s {
                        rhs += &alpha[m][i] * &alpha[n][j] * b.get(m, n, k);
                    }
                }
                if !(lhs + rhs).is_zero() {
                    return false;
                }
            }
        }
    }
    true
}

/// Regular grid: per coordinate `(lo, hi, nodes)`.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub axes: Vec<(f64, f64, usize)>,
    pub tol: Tolerances,
}

impl GridSpec {
    pub fn uniform(dim: usize, lo: f64, hi: f64, nodes: usize) -> GridSpec {
        GridSpec {
            axes: vec![(lo, hi, nodes); dim],
            tol: Tolerances { atol: 1e-11, rtol: 1e-11 },
        }
    }

    fn axis_values(&self) -> Vec<Vec<f64>> {
        self.axes
            .iter()
            .map(|&(lo, hi, n)| {
                if n <= 1 {
                    vec![lo]
                } else {
                    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
                }
            })
            .collect()
    }
}

/// Grid-sampled frame: `values[node][field][coord]`, nodes in row-major
/// order with the last axis fastest.
#[derive(Clone, Debug)]
pub struct GridFrame {
    pub coords: Vec<String>,
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<Vec<Vec<f64>>>,
    /// Max finite-difference commutator residual with the input frame at
    /// interior nodes.
    pub residual: f64,
    pub tol: Tolerances,
}

impl GridFrame {
    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.axes.len()];
        for d in (0..self.axes.len().saturating_sub(1)).rev() {
            s[d] = s[d + 1] * self.axes[d + 1].len();
        }
        s
    }

    pub fn node_point(&self, index: usize) -> Vec<f64> {
        let strides = self.strides();
        self.axes
            .iter()
            .zip(&strides)
            .map(|(ax, st)| ax[(index / st) % ax.len()])
            .collect()
    }

    /// Multilinear interpolation inside the grid box.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<Vec<f64>>> {
        let dim = self.axes.len();
        let strides = self.strides();
        let mut cell = Vec::with_capacity(dim);
        for (d, ax) in self.axes.iter().enumerate() {
            let x = point[d];
            if ax.len() == 1 {
                cell.push((0, 0.0));
                continue;
            }
            let (lo, hi) = (ax[0], ax[ax.len() - 1]);
            if x < lo - 1e-12 || x > hi + 1e-12 {
                return Err(Error::LeftDomain(format!("{} = {x} outside grid", self.coords[d])));
            }
            let h = (hi - lo) / (ax.len() - 1) as f64;
            let i = (((x - lo) / h).floor() as usize).min(ax.len() - 2);
            cell.push((i, (x - ax[i]) / h));
        }
        let nf = self.values[0].len();
        let nc = self.values[0][0].len();
        let mut out = vec![vec![0.0; nc]; nf];
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = 0;
            for (d, &(i, t)) in cell.iter().enumerate() {
                let up = (corner >> d) & 1 == 1;
                if self.axes[d].len() == 1 {
                    if up {
                        w = 0.0;
                    }
                    continue;
                }
                w *= if up { t } else { 1.0 - t };
                idx += (i + up as usize) * strides[d];
            }
            if w == 0.0 {
                continue;
            }
            for (f, row) in out.iter_mut().enumerate() {
                for (c, v) in row.iter_mut().enumerate() {
                    *v += w * self.values[idx][f][c];
                }
            }
        }
        Ok(out)
    }

    /// One row per node: coordinates, then each field's coefficients.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = self.coords.clone();
        let nf = self.values.first().map_or(0, Vec::len);
        for f in 0..nf {
            for c in &self.coords {
                header.push(format!("Y{}_{}", f + 1, c));
            }
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for (i, node) in self.values.iter().enumerate() {
            let mut row: Vec<String> = self.node_point(i).iter().map(|v| format!("{v:.12e}")).collect();
            for f in node {
                row.extend(f.iter().map(|v| format!("{v:.12e}")));
            }
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

struct Centralizer<'a> {
    frame: Compiled,
    c: &'a Structure,
    s: usize,
}

impl Centralizer<'_> {
    fn eval_frame(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let v = self.frame.eval(x)?;
        // columns are fields
        Ok(DMatrix::from_fn(self.s, self.s, |i, j| v[j * self.s + i]))
    }

    /// `∂a/∂x_m` for all reciprocal fields, flattened `[l][i]`.
    fn rhs(&self, x: &[f64], a: &[f64], axis: usize) -> Result<Vec<f64>> {
        let e = self.eval_frame(x)?;
        let einv = e
            .try_inverse()
            .ok_or_else(|| Error::Degenerate(format!("frame not transitive at {x:?}")))?;
        let s = self.s;
        let mut out = vec![0.0; s * s];
        for l in 0..s {
            let al = &a[l * s..(l + 1) * s];
            // X_j(a^k) = −Σ_i a^i c^k_{ji}
            let xj: Vec<Vec<f64>> = (0..s)
                .map(|j| {
                    (0..s)
                        .map(|k| -(0..s).map(|i| al[i] * crate::expr::rational_to_f64(self.c.get(j, i, k))).sum::<f64>())
                        .collect()
                })
                .collect();
            for k in 0..s {
                out[l * s + k] = (0..s).map(|j| einv[(j, axis)] * xj[j][k]).sum();
            }
        }
        Ok(out)
    }

    /// States at `nodes` along `axis`, integrating outward from `start`.
    fn sweep(&self, start: &[f64], state: &[f64], axis: usize, nodes: &[f64], tol: Tolerances) -> Result<Vec<Vec<f64>>> {
        let mut out = vec![Vec::new(); nodes.len()];
        let t0 = start[axis];
        let up: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i] >= t0).collect();
        let down: Vec<usize> = (0..nodes.len()).rev().filter(|&i| nodes[i] < t0).collect();
        for chain in [up, down] {
            let mut t = t0;
            let mut y = state.to_vec();
            for i in chain {
                let f = |tt: f64, yy: &[f64]| {
                    let mut x = start.to_vec();
                    x[axis] = tt;
                    self.rhs(&x, yy, axis)
                };
                let (ny, _) = integrate(f, t, &y, nodes[i], tol)?;
                y = ny;
                t = nodes[i];
                out[i] = y.clone();
            }
        }
        Ok(out)
    }
}

/// Centralizer of a locally transitive frame with constant structure,
/// integrated over a grid from `base` (where it agrees with the frame).
pub fn reciprocal_frame(pres: &LieAlgebraPresentation, base: &[f64], grid: &GridSpec) -> Result<GridFrame> {
    let c = pres
        .constants
        .as_ref()
        .ok_or_else(|| Error::Invalid("reciprocal frame needs constant structure".into()))?;
    let chart = &pres.chart;
    let s = pres.dim();
    if s != chart.dim() || grid.axes.len() != s || base.len() != s {
        return Err(Error::Invalid("frame, chart, grid and base point dimensions must agree".into()));
    }
    let flat: Vec<NormalForm> = pres.frame.iter().flat_map(|x| x.coeffs().iter().cloned()).collect();
    let cz = Centralizer {
        frame: Compiled::new(&flat, chart.coords())?,
        c,
        s,
    };
    let axes = grid.axis_values();
    let mut init = vec![0.0; s * s];
    for l in 0..s {
        init[l * s + l] = 1.0;
    }
    // (point, state) for the partial grid over the axes done so far
    let mut partial: Vec<(Vec<f64>, Vec<f64>)> = vec![(base.to_vec(), init)];
    for (axis, nodes) in axes.iter().enumerate() {
        let lines: Vec<Vec<(Vec<f64>, Vec<f64>)>> = partial
            .par_iter()
            .map(|(p, st)| {
                let states = cz.sweep(p, st, axis, nodes, grid.tol)?;
                Ok(nodes
                    .iter()
                    .zip(states)
                    .map(|(&v, st)| {
                        let mut q = p.clone();
                        q[axis] = v;
                        (q, st)
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        partial = lines.into_iter().flatten().collect();
    }
    let values: Vec<Vec<Vec<f64>>> = partial
        .iter()
        .map(|(p, a)| {
            let e = cz.eval_frame(p)?;
            Ok((0..s)
                .map(|l| {
                    let al = DVector::from_column_slice(&a[l * s..(l + 1) * s]);
                    (&e * al).iter().cloned().collect()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut out = GridFrame {
        coords: chart.coords().to_vec(),
        axes,
        values,
        residual: 0.0,
        tol: grid.tol,
    };
    out.residual = commutator_residual(&out, &pres.frame)?;
    Ok(out)
}

/// Max over interior nodes of `|[X_j, Y_l]|` with `∂Y` from central
/// differences and `∂X` exact.
fn commutator_residual(grid: &GridFrame, frame: &[VectorField]) -> Result<f64> {
    let s = frame.len();
    let chart = frame[0].chart();
    let coords = chart.coords();
    let xs = Compiled::new(
        &frame.iter().flat_map(|x| x.coeffs().iter().cloned()).collect::<Vec<_>>(),
        coords,
    )?;
    let dxs = Compiled::new(
        &frame
            .iter()
            .flat_map(|x| x.coeffs().iter().flat_map(|c| coords.iter().map(move |v| c.derivative(v))))
            .collect::<Vec<_>>(),
        coords,
    )?;
    let strides = grid.strides();
    let mut worst = 0.0_f64;
    'nodes: for idx in 0..grid.values.len() {
        let p = grid.node_point(idx);
        let mut pos = Vec::with_capacity(s);
        for (d, ax) in grid.axes.iter().enumerate() {
            let i = (idx / strides[d]) % ax.len();
            if i == 0 || i + 1 == ax.len() {
                continue 'nodes;
            }
            pos.push(i);
        }
        let xv = xs.eval(&p)?;
        let dxv = dxs.eval(&p)?;
        for l in 0..s {
            let y = &grid.values[idx][l];
            // dY[m][k] = ∂_k Y^m
            let mut dy = vec![vec![0.0; s]; s];
            for k in 0..s {
                let h = grid.axes[k][pos[k] + 1] - grid.axes[k][pos[k]];
                let plus = &grid.values[idx + strides[k]][l];
                let minus = &grid.values[idx - strides[k]][l];
                for m in 0..s {
                    dy[m][k] = (plus[m] - minus[m]) / (2.0 * h);
                }
            }
            for j in 0..s {
                for m in 0..s {
                    let mut v = 0.0;
                    for k in 0..s {
                        v += xv[j * s + k] * dy[m][k];
                        v -= y[k] * dxv[(j * s + m) * s + k];
                    }
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Chart;

    fn fields(chart: &std::sync::Arc<Chart>, src: &[&str]) -> Vec<VectorField> {
        src.iter().map(|s| VectorField::parse(chart, s).unwrap()).collect()
    }

    #[test]
    fn affine_pair_is_reciprocal() {
        let chart = Chart::new(["x1", "x2"]).unwrap();
        let a = fields(&chart, &["d/dx1 - x2*d/dx2", "d/dx2"]);
        let b = fields(&chart, &["d/dx1", "exp(-x1)*d/dx2"]);
        let r = check_reciprocal(&a, &b, None).unwrap();
        assert!(r.ok(1e-9), "{r:?}");
        let e = evaluation_map(&a, &[0.0, 0.0]).unwrap();
        assert_eq!(e, DMatrix::identity(2, 2));
    }

    #[test]
    fn non_commuting_pair() {
        let chart = Chart::new(["x"]).unwrap();
        let r = check_reciprocal(&fields(&chart, &["d/dx"]), &fields(&chart, &["x*d/dx"]), None).unwrap();
        assert_eq!(r.commute, ZeroVerdict::NonZero);
        let same = check_reciprocal(&fields(&chart, &["d/dx"]), &fields(&chart, &["d/dx"]), None).unwrap();
        assert!(same.ok(1e-9));
    }

    #[test]
    fn affine_reconstruction() {
        let chart = Chart::new(["x1", "x2"]).unwrap();
        let a = fields(&chart, &["d/dx1 - x2*d/dx2", "d/dx2"]);
        let pres = LieAlgebraPresentation::new(&chart, a, None).unwrap();
        let g = reciprocal_frame(&pres, &[0.0, 0.0], &GridSpec::uniform(2, -1.0, 1.0, 11)).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..g.values.len() {
            let p = g.node_point(i);
            let want = [[1.0, 0.0], [0.0, (-p[0]).exp()]];
            for f in 0..2 {
                for c in 0..2 {
                    worst = worst.max((g.values[i][f][c] - want[f][c]).abs());
                }
            }
        }
        assert!(worst < 1e-8, "{worst}");
        let mid = g.eval(&[0.05, 0.3]).unwrap();
        assert!((mid[1][1] - (-0.05f64).exp()).abs() < 1e-2);
    }

    #[test]
    fn heisenberg_residual() {
        let chart = Chart::new(["x", "y", "z"]).unwrap();
        let a = fields(&chart, &["d/dx", "d/dy + x*d/dz", "d/dz"]);
        let pres = LieAlgebraPresentation::new(&chart, a, None).unwrap();
        let g = reciprocal_frame(&pres, &[0.0, 0.0, 0.0], &GridSpec::uniform(3, -1.0, 1.0, 5)).unwrap();
        assert!(g.residual < 1e-6, "{}", g.residual);
        assert!(g.to_csv().starts_with("x,y,z,Y1_x"));
    }

    #[test]
    fn exact_sign_flip() {
        let a = Structure::from_brackets(2, &[(0, 1, 1, 1)]).unwrap();
        let b = Structure::from_brackets(2, &[(0, 1, 1, -1)]).unwrap();
        let id = vec![
            vec![BigRational::from_integer(1.into()), BigRational::zero()],
            vec![BigRational::zero(), BigRational::from_integer(1.into())],
        ];
        assert!(anti_isomorphic(&a, &b, &id));
        assert!(!anti_isomorphic(&a, &a, &id));
    }
}
