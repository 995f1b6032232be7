//! Numeric rank, symbolic Gauss-Jordan elimination over normal forms, and
//! exact rational row reduction.

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::expr::{Compiled, NormalForm};

/// Relative singular-value threshold for numeric rank.
pub const RANK_TOL: f64 = 1e-9;

/// Rank with threshold `rel_tol × σ_max`.
pub fn numeric_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max <= f64::MIN_POSITIVE {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Matrix whose columns are the given vectors.
pub fn columns(vectors: &[Vec<f64>], rows: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, vectors.len(), |i, j| vectors[j][i])
}

/// Dense numeric solve `A x = b` for square `A`; `None` if singular.
pub fn solve_numeric(a: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let rhs = nalgebra::DVector::from_column_slice(b);
    let lu = a.clone().lu();
    lu.solve(&rhs).map(|x| x.iter().cloned().collect())
}

/// Result of symbolic elimination `A X = B` with `A` of size rows × cols.
#[derive(Clone, Debug)]
pub struct SymbolicSolution {
    /// cols × rhs solution.
    pub solution: Vec<Vec<NormalForm>>,
    /// Rows that were not used as pivots, after elimination; all entries
    /// must vanish for the system to be consistent.
    pub residuals: Vec<NormalForm>,
}

/// Gauss-Jordan elimination over normal forms.
///
/// Pivots are chosen per column among rows that are numerically nonzero at
/// every `reference` point, preferring rational constants, then single
/// monomials, then the fewest terms. Fails when some column has no such pivot
/// (the coefficient matrix is rank deficient at the reference points).
pub fn solve_symbolic<S: AsRef<str>>(
    a: &[Vec<NormalForm>],
    b: &[Vec<NormalForm>],
    symbols: &[S],
    reference: &[Vec<f64>],
) -> Result<SymbolicSolution> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let nrhs = b.first().map_or(0, Vec::len);
    if b.len() != rows {
        return Err(Error::Solve("row count mismatch".into()));
    }
    let mut aug: Vec<Vec<NormalForm>> = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().chain(rb.iter()).cloned().collect())
        .collect();
    let mut pivot_rows = Vec::with_capacity(cols);
    let mut used = vec![false; rows];
    for col in 0..cols {
        let mut best: Option<(usize, (u8, usize))> = None;
        for (r, row) in aug.iter().enumerate() {
            if used[r] || row[col].is_zero() {
                continue;
            }
            if !nonzero_at_all(&row[col], symbols, reference)? {
                continue;
            }
            let entry = &row[col];
            let score = if entry.as_constant().is_some() {
                (0, 0)
            } else if entry.term_count() == 1 {
                (1, 0)
            } else {
                (2, entry.term_count())
            };
            if best.as_ref().map_or(true, |(_, s)| score < *s) {
                best = Some((r, score));
            }
        }
        let Some((pr, _)) = best else {
            return Err(Error::Solve(format!(
                "no admissible pivot in column {col}"
            )));
        };
        used[pr] = true;
        pivot_rows.push(pr);
        let inv = aug[pr][col].inv()?;
        let scaled: Vec<NormalForm> = aug[pr].iter().map(|e| e.mul(&inv)).collect();
        aug[pr] = scaled;
        let pivot_row = aug[pr].clone();
        for (r, row) in aug.iter_mut().enumerate() {
            if r == pr || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (k, entry) in row.iter_mut().enumerate() {
                if pivot_row[k].is_zero() {
                    continue;
                }
                *entry = entry.sub(&factor.mul(&pivot_row[k]));
            }
        }
    }
    let solution = pivot_rows
        .iter()
        .map(|&pr| aug[pr][cols..cols + nrhs].to_vec())
        .collect();
    let residuals = (0..rows)
        .filter(|r| !used[*r])
        .flat_map(|r| aug[r][cols..cols + nrhs].to_vec())
        .collect();
    Ok(SymbolicSolution {
        solution,
        residuals,
    })
}

fn nonzero_at_all<S: AsRef<str>>(e: &NormalForm, symbols: &[S], points: &[Vec<f64>]) -> Result<bool> {
    if let Some(c) = e.as_constant() {
        return Ok(!c.is_zero());
    }
    let compiled = Compiled::new(std::slice::from_ref(e), symbols)?;
    for p in points {
        match compiled.eval(p) {
            Ok(v) if v[0].abs() > 1e-9 => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

/// Exact row reduction; returns the reduced row echelon form and the pivot
/// columns.
pub fn rref(mut m: Vec<Vec<BigRational>>) -> (Vec<Vec<BigRational>>, Vec<usize>) {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = BigRational::one() / &m[r][c];
        for v in m[r].iter_mut() {
            *v = &*v * &inv;
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (k, v) in row.iter_mut().enumerate() {
                *v = &*v - &f * &pivot_row[k];
            }
        }
        pivots.push(c);
        r += 1;
    }
    (m, pivots)
}

pub fn rational_rank(m: &[Vec<BigRational>]) -> usize {
    rref(m.to_vec()).1.len()
}

/// Basis of the right null space `{x : M x = 0}`.
pub fn rational_nullspace(m: &[Vec<BigRational>], cols: usize) -> Vec<Vec<BigRational>> {
    if m.is_empty() {
        return (0..cols)
            .map(|i| {
                (0..cols)
                    .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                    .collect()
            })
            .collect();
    }
    let (r, pivots) = rref(m.to_vec());
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); cols];
            v[f] = BigRational::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -r[row][f].clone();
            }
            v
        })
        .collect()
}
