use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::frames::LieAlgebraPresentation;
use super::{coefficients_depend_only_on_base1, DarbouxProjection};
use crate::error::{Error, Result};
use crate::expr::{rational_to_f64, reconstruct_rational, Compiled, NormalForm, ZeroVerdict};
use crate::geometry::VectorField;

/// Scalars for the small dense linear algebra behind fingerprints.
trait Scalar: Clone {
    fn zero() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn is_zero(&self) -> bool;
    fn sign(&self) -> i8;
    fn magnitude(&self) -> f64;
}

/// `f64` with an absolute zero threshold.
#[derive(Clone, Copy, Debug)]
struct Approx(f64, f64);

impl Scalar for Approx {
    fn zero() -> Self {
        Approx(0.0, NUMERIC_TOL)
    }
    fn add(&self, o: &Self) -> Self {
        Approx(self.0 + o.0, self.1)
    }
    fn sub(&self, o: &Self) -> Self {
        Approx(self.0 - o.0, self.1)
    }
    fn mul(&self, o: &Self) -> Self {
        Approx(self.0 * o.0, self.1)
    }
    fn div(&self, o: &Self) -> Self {
        Approx(self.0 / o.0, self.1)
    }
    fn is_zero(&self) -> bool {
        self.0.abs() <= self.1
    }
    fn sign(&self) -> i8 {
        if self.is_zero() {
            0
        } else if self.0 < 0.0 {
            -1
        } else {
            1
        }
    }
    fn magnitude(&self) -> f64 {
        self.0.abs()
    }
}

const NUMERIC_TOL: f64 = 1e-9;

/// Row reduction with largest-magnitude pivots; returns a basis of the row
/// space.
fn row_basis<T: Scalar>(mut rows: Vec<Vec<T>>) -> Vec<Vec<T>> {
    let cols = rows.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    for c in 0..cols {
        let best = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r[c].is_zero())
            .max_by(|a, b| a.1[c].magnitude().total_cmp(&b.1[c].magnitude()))
            .map(|(i, _)| i);
        let Some(p) = best else { continue };
        let pivot = rows.swap_remove(p);
        for r in rows.iter_mut() {
            if r[c].is_zero() {
                continue;
            }
            let f = r[c].div(&pivot[c]);
            for (k, v) in r.iter_mut().enumerate() {
                *v = v.sub(&f.mul(&pivot[k]));
            }
        }
        out.push(pivot);
    }
    out
}

/// Null space of `M x = 0` for an `r × n` matrix.
fn nullspace<T: Scalar + From<i8>>(m: &[Vec<T>], n: usize) -> Vec<Vec<T>> {
    // reduced row echelon form
    let mut a: Vec<Vec<T>> = m.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n {
        if r == a.len() {
            break;
        }
        let best = (r..a.len())
            .filter(|&i| !a[i][c].is_zero())
            .max_by(|&i, &j| a[i][c].magnitude().total_cmp(&a[j][c].magnitude()));
        let Some(p) = best else { continue };
        a.swap(r, p);
        let inv = a[r][c].clone();
        for v in a[r].iter_mut() {
            *v = v.div(&inv);
        }
        let pivot = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (k, v) in row.iter_mut().enumerate() {
                *v = v.sub(&f.mul(&pivot[k]));
            }
        }
        pivots.push(c);
        r += 1;
    }
    (0..n)
        .filter(|c| !pivots.contains(c))
        .map(|f| {
            let mut v = vec![T::zero(); n];
            v[f] = T::from(1);
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = T::zero().sub(&a[row][f]);
            }
            v
        })
        .collect()
}

impl From<i8> for Approx {
    fn from(v: i8) -> Self {
        Approx(v as f64, NUMERIC_TOL)
    }
}

/// Signature `(positive, negative)` of a symmetric matrix by congruence.
fn signature<T: Scalar>(mut k: Vec<Vec<T>>) -> (usize, usize) {
    let n = k.len();
    let (mut pos, mut neg) = (0, 0);
    for i in 0..n {
        if k[i][i].is_zero() {
            if let Some(j) = (i + 1..n).find(|&j| !k[j][j].is_zero()) {
                k.swap(i, j);
                for row in k.iter_mut() {
                    row.swap(i, j);
                }
            } else if let Some(j) = (i + 1..n).find(|&j| !k[i][j].is_zero()) {
                // e_i ← e_i + e_j makes the diagonal 2 k_ij
                for c in 0..n {
                    let v = k[i][c].add(&k[j][c]);
                    k[i][c] = v;
                }
                for r in 0..n {
                    let v = k[r][i].add(&k[r][j]);
                    k[r][i] = v;
                }
            } else {
                continue;
            }
        }
        let d = k[i][i].clone();
        match d.sign() {
            1 => pos += 1,
            -1 => neg += 1,
            _ => continue,
        }
        for r in i + 1..n {
            if k[r][i].is_zero() {
                continue;
            }
            let f = k[r][i].div(&d);
            for c in 0..n {
                let v = k[r][c].sub(&f.mul(&k[i][c]));
                k[r][c] = v;
            }
            for rr in 0..n {
                let v = k[rr][r].sub(&f.mul(&k[rr][i]));
                k[rr][r] = v;
            }
        }
    }
    (pos, neg)
}

/// Isomorphism invariants of a finite-dimensional Lie algebra.
#[derive(Clone, Debug)]
pub struct Fingerprint {
    pub dim: usize,
    pub derived_series: Vec<usize>,
    pub lower_central_series: Vec<usize>,
    pub center_dim: usize,
    /// Center basis in frame coordinates; not part of equality.
    pub center_basis: Vec<Vec<f64>>,
    pub killing_rank: usize,
    pub killing_signature: (usize, usize),
    pub abelian: bool,
}

impl PartialEq for Fingerprint {
    fn eq(&self, o: &Self) -> bool {
        self.dim == o.dim
            && self.derived_series == o.derived_series
            && self.lower_central_series == o.lower_central_series
            && self.center_dim == o.center_dim
            && self.killing_rank == o.killing_rank
            && self.killing_signature == o.killing_signature
            && self.abelian == o.abelian
    }
}

struct Algebra<T> {
    c: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar + From<i8>> Algebra<T> {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn bracket(&self, u: &[T], v: &[T]) -> Vec<T> {
        let s = self.dim();
        let mut out = vec![T::zero(); s];
        for i in 0..s {
            if u[i].is_zero() {
                continue;
            }
            for j in 0..s {
                if v[j].is_zero() {
                    continue;
                }
                let w = u[i].mul(&v[j]);
                for (k, o) in out.iter_mut().enumerate() {
                    if !self.c[i][j][k].is_zero() {
                        *o = o.add(&w.mul(&self.c[i][j][k]));
                    }
                }
            }
        }
        out
    }

    fn unit(&self, i: usize) -> Vec<T> {
        let mut v = vec![T::zero(); self.dim()];
        v[i] = T::from(1);
        v
    }

    fn jacobi_ok(&self) -> bool {
        let s = self.dim();
        for i in 0..s {
            for j in 0..s {
                for k in 0..s {
                    let (a, b, c) = (self.unit(i), self.unit(j), self.unit(k));
                    let t1 = self.bracket(&a, &self.bracket(&b, &c));
                    let t2 = self.bracket(&b, &self.bracket(&c, &a));
                    let t3 = self.bracket(&c, &self.bracket(&a, &b));
                    if t1.iter().zip(&t2).zip(&t3).any(|((x, y), z)| !x.add(y).add(z).is_zero()) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn span_of_brackets(&self, a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
        let mut rows = Vec::new();
        for u in a {
            for v in b {
                rows.push(self.bracket(u, v));
            }
        }
        row_basis(rows)
    }

    fn derived_series(&self) -> Vec<usize> {
        let mut cur: Vec<Vec<T>> = (0..self.dim()).map(|i| self.unit(i)).collect();
        let mut dims = vec![cur.len()];
        while !cur.is_empty() {
            let next = self.span_of_brackets(&cur, &cur);
            if next.len() == cur.len() {
                break;
            }
            dims.push(next.len());
            cur = next;
        }
        dims
    }

    fn lower_central_series(&self) -> Vec<usize> {
        let all: Vec<Vec<T>> = (0..self.dim()).map(|i| self.unit(i)).collect();
        let mut cur = all.clone();
        let mut dims = vec![cur.len()];
        while !cur.is_empty() {
            let next = self.span_of_brackets(&all, &cur);
            if next.len() == cur.len() {
                break;
            }
            dims.push(next.len());
            cur = next;
        }
        dims
    }

    /// `{a : [a, e_j] = 0 ∀ j}`.
    fn center(&self) -> Vec<Vec<T>> {
        let s = self.dim();
        // row (j, k): Σ_i a_i c[i][j][k]
        let m: Vec<Vec<T>> = (0..s)
            .flat_map(|j| (0..s).map(move |k| (j, k)))
            .map(|(j, k)| (0..s).map(|i| self.c[i][j][k].clone()).collect())
            .collect();
        if m.is_empty() {
            return Vec::new();
        }
        nullspace(&m, s)
    }

    /// `K_ij = tr(ad_i ad_j)` with `(ad_i)_{kj} = c[i][j][k]`.
    fn killing(&self) -> Vec<Vec<T>> {
        let s = self.dim();
        let mut k = vec![vec![T::zero(); s]; s];
        for (i, row) in k.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                let mut acc = T::zero();
                for a in 0..s {
                    for b in 0..s {
                        acc = acc.add(&self.c[i][b][a].mul(&self.c[j][a][b]));
                    }
                }
                *entry = acc;
            }
        }
        k
    }

    fn fingerprint(&self, to_f64: impl Fn(&T) -> f64) -> Result<Fingerprint> {
        if !self.jacobi_ok() {
            return Err(Error::Jacobi("structure constants violate the Jacobi identity".into()));
        }
        let killing = self.killing();
        let killing_rank = row_basis(killing.clone()).len();
        let center = self.center();
        let abelian = self.c.iter().flatten().flatten().all(Scalar::is_zero);
        Ok(Fingerprint {
            dim: self.dim(),
            derived_series: self.derived_series(),
            lower_central_series: self.lower_central_series(),
            center_dim: center.len(),
            center_basis: center.iter().map(|v| v.iter().map(&to_f64).collect()).collect(),
            killing_rank,
            killing_signature: signature(killing),
            abelian,
        })
    }
}

impl From<i8> for BigRationalWrap {
    fn from(v: i8) -> Self {
        BigRationalWrap(BigRational::from_integer(v.into()))
    }
}

/// Local newtype so `From<i8>` can be implemented.
#[derive(Clone, Debug, PartialEq)]
struct BigRationalWrap(BigRational);

impl Scalar for BigRationalWrap {
    fn zero() -> Self {
        BigRationalWrap(Zero::zero())
    }
    fn add(&self, o: &Self) -> Self {
        BigRationalWrap(&self.0 + &o.0)
    }
    fn sub(&self, o: &Self) -> Self {
        BigRationalWrap(&self.0 - &o.0)
    }
    fn mul(&self, o: &Self) -> Self {
        BigRationalWrap(&self.0 * &o.0)
    }
    fn div(&self, o: &Self) -> Self {
        BigRationalWrap(&self.0 / &o.0)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(&self.0)
    }
    fn sign(&self) -> i8 {
        if Zero::is_zero(&self.0) {
            0
        } else if self.0.is_negative() {
            -1
        } else {
            1
        }
    }
    fn magnitude(&self) -> f64 {
        rational_to_f64(&self.0.abs())
    }
}

/// Exact rational structure constants `c[i][j][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Structure {
    c: Vec<Vec<Vec<BigRational>>>,
}

impl Structure {
    /// Checks shape and antisymmetry.
    pub fn new(c: Vec<Vec<Vec<BigRational>>>) -> Result<Structure> {
        let s = c.len();
        for i in 0..s {
            if c[i].len() != s || c[i].iter().any(|r| r.len() != s) {
                return Err(Error::Invalid("structure constants must be s × s × s".into()));
            }
        }
        for i in 0..s {
            for j in 0..s {
                for k in 0..s {
                    if !Zero::is_zero(&(&c[i][j][k] + &c[j][i][k])) {
                        return Err(Error::Invalid("structure constants are not antisymmetric".into()));
                    }
                }
            }
        }
        Ok(Structure { c })
    }

    /// Builds from the nonzero brackets `(i, j, k, value)` with `i < j`.
    pub fn from_brackets(dim: usize, entries: &[(usize, usize, usize, i64)]) -> Result<Structure> {
        let mut c = vec![vec![vec![BigRational::zero(); dim]; dim]; dim];
        for &(i, j, k, v) in entries {
            c[i][j][k] = BigRational::from_integer(v.into());
            c[j][i][k] = -BigRational::from_integer(v.into());
        }
        Structure::new(c)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> &BigRational {
        &self.c[i][j][k]
    }

    pub fn entries(&self) -> &[Vec<Vec<BigRational>>] {
        &self.c
    }

    fn algebra(&self) -> Algebra<BigRationalWrap> {
        Algebra {
            c: self
                .c
                .iter()
                .map(|a| a.iter().map(|b| b.iter().cloned().map(BigRationalWrap).collect()).collect())
                .collect(),
        }
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().flatten().flatten().all(Zero::is_zero)
    }

    pub fn satisfies_jacobi(&self) -> bool {
        self.algebra().jacobi_ok()
    }

    pub fn center(&self) -> Vec<Vec<BigRational>> {
        self.algebra()
            .center()
            .into_iter()
            .map(|v| v.into_iter().map(|x| x.0).collect())
            .collect()
    }

    pub fn negated(&self) -> Structure {
        Structure {
            c: self.c.iter().map(|a| a.iter().map(|b| b.iter().map(|x| -x).collect()).collect()).collect(),
        }
    }

    pub fn fingerprint(&self) -> Result<Fingerprint> {
        self.algebra().fingerprint(|x| rational_to_f64(&x.0))
    }

    pub fn to_f64(&self) -> Vec<Vec<Vec<f64>>> {
        self.c
            .iter()
            .map(|a| a.iter().map(|b| b.iter().map(rational_to_f64).collect()).collect())
            .collect()
    }
}

/// Fingerprint of structure constants sampled at a point.
pub fn fingerprint_numeric(c: &[Vec<Vec<f64>>], tol: f64) -> Result<Fingerprint> {
    let alg = Algebra {
        c: c.iter()
            .map(|a| a.iter().map(|b| b.iter().map(|&x| Approx(x, tol)).collect()).collect())
            .collect(),
    };
    alg.fingerprint(|x| x.0)
}

impl Fingerprint {
    pub fn numeric(c: &[Vec<Vec<f64>>]) -> Result<Fingerprint> {
        fingerprint_numeric(c, NUMERIC_TOL)
    }
}

/// Frame `Y = μ X` with constant structure constants, and `μ`.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub presentation: LieAlgebraPresentation,
    pub mu: Vec<Vec<NormalForm>>,
}

fn identity(s: usize) -> Vec<Vec<NormalForm>> {
    (0..s)
        .map(|i| (0..s).map(|j| if i == j { NormalForm::one() } else { NormalForm::zero() }).collect())
        .collect()
}

/// Aligns structure constants with those of the fiber over the center of the
/// sample box.
pub fn normalize_structure(pres: &LieAlgebraPresentation, proj: &DarbouxProjection) -> Result<Normalized> {
    if pres.constants.is_some() {
        return Ok(Normalized {
            presentation: pres.clone(),
            mu: identity(pres.dim()),
        });
    }
    match coefficients_depend_only_on_base1(pres, proj) {
        ZeroVerdict::Zero(_) => {}
        ZeroVerdict::NonZero => {
            return Err(Error::Invalid("structure coefficients vary along B₂ or the fibers".into()));
        }
        ZeroVerdict::Unknown => return Err(Error::Indeterminate("base dependence of structure coefficients".into())),
    }
    normalize_at(pres, &proj.system().chart().center())
}

/// Normalization with an explicit reference point.
pub fn normalize_at(pres: &LieAlgebraPresentation, reference: &[f64]) -> Result<Normalized> {
    let s = pres.dim();
    if pres.constants.is_some() {
        return Ok(Normalized {
            presentation: pres.clone(),
            mu: identity(s),
        });
    }
    if s != 2 {
        return Err(Error::NotImplementedForType(format!(
            "normalization of a {s}-dimensional algebra with varying structure coefficients"
        )));
    }
    // [X₁, X₂] = α X₁ + β X₂
    let alpha = pres.coeffs[0][1][0].clone();
    let beta = pres.coeffs[0][1][1].clone();
    let vals = Compiled::new(&[alpha.clone(), beta.clone()], pres.chart.coords())?.eval(reference)?;
    let q = |x: f64| {
        reconstruct_rational(x, 10_000, 1e-10)
            .ok_or_else(|| Error::NotImplementedForType("reference structure constants are not rational".into()))
    };
    let (a0, b0) = (NormalForm::constant(q(vals[0])?), NormalForm::constant(q(vals[1])?));
    if a0.is_zero() && b0.is_zero() {
        return Err(Error::NotImplementedForType(
            "reference fiber is abelian but other fibers are not".into(),
        ));
    }
    // v adj(μ) = v₀: with P, Q having first rows v, v₀ and a common second
    // row, adj(μ) = P⁻¹Q
    let mu = if !a0.is_zero() {
        let inv = alpha.inv()?;
        vec![
            vec![NormalForm::one(), beta.sub(&b0).mul(&inv)],
            vec![NormalForm::zero(), a0.mul(&inv)],
        ]
    } else {
        let inv = beta.inv()?;
        vec![
            vec![b0.mul(&inv), NormalForm::zero()],
            vec![alpha.sub(&a0).mul(&inv), NormalForm::one()],
        ]
    };
    let frame: Vec<VectorField> = mu
        .iter()
        .map(|row| VectorField::combination(&pres.chart, row, &pres.frame))
        .collect::<Result<_>>()?;
    let presentation = LieAlgebraPresentation::new(&pres.chart, frame, pres.side)?;
    let (a0, b0) = (a0.as_constant().unwrap(), b0.as_constant().unwrap());
    let z = BigRational::zero;
    let expected = Structure::new(vec![
        vec![vec![z(), z()], vec![a0.clone(), b0.clone()]],
        vec![vec![-a0, -b0], vec![z(), z()]],
    ])?;
    match &presentation.constants {
        Some(c) if *c == expected => Ok(Normalized { presentation, mu }),
        _ => Err(Error::NotImplementedForType(
            "scaling alignment did not produce constant structure".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Chart;
    use num_traits::One;

    #[test]
    fn affine_fingerprint() {
        let s = Structure::from_brackets(2, &[(0, 1, 1, 1)]).unwrap();
        let f = s.fingerprint().unwrap();
        assert_eq!(f.dim, 2);
        assert_eq!(f.derived_series, vec![2, 1, 0]);
        assert_eq!(f.center_dim, 0);
        assert!(!f.abelian);
        assert_eq!(f.killing_rank, 1);
        assert_eq!(f.killing_signature, (1, 0));
    }

    #[test]
    fn heisenberg_and_sl2() {
        let h = Structure::from_brackets(3, &[(0, 1, 2, 1)]).unwrap();
        let f = h.fingerprint().unwrap();
        assert_eq!(f.derived_series, vec![3, 1, 0]);
        assert_eq!(f.lower_central_series, vec![3, 1, 0]);
        assert_eq!(f.center_dim, 1);
        assert_eq!(f.killing_rank, 0);
        // [h,e] = 2e, [h,f] = -2f, [e,f] = h
        let sl2 = Structure::from_brackets(3, &[(0, 1, 1, 2), (0, 2, 2, -2), (1, 2, 0, 1)]).unwrap();
        let g = sl2.fingerprint().unwrap();
        assert_eq!(g.derived_series, vec![3]);
        assert_eq!(g.center_dim, 0);
        assert_eq!(g.killing_signature, (2, 1));
        let num = Fingerprint::numeric(&sl2.to_f64()).unwrap();
        assert_eq!(num, g);
    }

    #[test]
    fn jacobi_violation_is_rejected() {
        let bad = Structure::from_brackets(3, &[(0, 1, 2, 1), (1, 2, 0, 1), (0, 2, 0, 1)]).unwrap();
        assert!(!bad.satisfies_jacobi());
        assert!(matches!(bad.fingerprint(), Err(Error::Jacobi(_))));
    }

    #[test]
    fn scaling_alignment() {
        let chart = Chart::new(["b", "u", "v"]).unwrap();
        let frame = vec![
            VectorField::parse(&chart, "d/du").unwrap(),
            VectorField::parse(&chart, "b*u*d/du + d/dv").unwrap(),
        ];
        let pres = LieAlgebraPresentation::new(&chart, frame, None).unwrap();
        assert!(pres.constants.is_none());
        let n = normalize_at(&pres, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(n.mu[0][0], NormalForm::one());
        assert!(n.mu[0][1].is_zero() && n.mu[1][0].is_zero());
        assert_eq!(n.mu[1][1], chart.parse("1/b").unwrap());
        let c = n.presentation.constants.unwrap();
        assert_eq!(*c.get(0, 1, 0), BigRational::one());
    }

    #[test]
    fn unsupported_dimension() {
        let chart = Chart::new(["b", "u", "v", "w"]).unwrap();
        let frame = vec![
            VectorField::parse(&chart, "d/du").unwrap(),
            VectorField::parse(&chart, "b*u*d/du + d/dv").unwrap(),
            VectorField::parse(&chart, "d/dw").unwrap(),
        ];
        let pres = LieAlgebraPresentation::new(&chart, frame, None).unwrap();
        assert!(matches!(normalize_at(&pres, &[1.0, 0.0, 0.0, 0.0]), Err(Error::NotImplementedForType(_))));
    }
}
