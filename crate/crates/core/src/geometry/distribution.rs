use std::sync::Arc;

use super::{ensure_same, Chart, VectorField};
use crate::error::{Error, Result};
use crate::expr::{zero_verdicts, Compiled, NormalForm, ZeroVerdict};
use crate::linalg::{columns, numeric_rank, RANK_TOL};

/// Numeric rank of the generator matrix at each sample point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankProfile {
    pub generic: usize,
    pub per_point: Vec<usize>,
}

impl RankProfile {
    /// False when the rank drops somewhere (a reportable degeneracy).
    pub fn is_constant(&self) -> bool {
        self.per_point.iter().all(|&r| r == self.generic)
    }
}

/// Pointwise membership of a field in a distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Containment {
    Contained,
    NotContained,
    /// The field could not be evaluated at some sample point.
    Indeterminate,
}

impl Containment {
    pub fn holds(self) -> bool {
        self == Containment::Contained
    }
}

/// Outcome of `X(I) = 0` for every generator `X`.
#[derive(Clone, Debug)]
pub struct InvariantCheck {
    pub verdict: ZeroVerdict,
    pub per_generator: Vec<ZeroVerdict>,
}

/// Finite generator list of vector fields with its sampled rank.
#[derive(Clone, Debug)]
pub struct Distribution {
    chart: Arc<Chart>,
    generators: Vec<VectorField>,
    points: Vec<Vec<f64>>,
    profile: RankProfile,
}

/// Evaluates every field at every point: `[point][field][coord]`. Points where
/// some field is singular yield `None`.
fn evaluate(fields: &[VectorField], points: &[Vec<f64>]) -> Result<Vec<Option<Vec<Vec<f64>>>>> {
    let compiled: Vec<Compiled> = fields.iter().map(VectorField::compile).collect::<Result<_>>()?;
    Ok(points
        .iter()
        .map(|p| compiled.iter().map(|c| c.eval(p).ok()).collect::<Option<Vec<_>>>())
        .collect())
}

fn rank_of(vectors: &[Vec<f64>], n: usize) -> usize {
    numeric_rank(&columns(vectors, n), RANK_TOL)
}

impl Distribution {
    pub fn new(chart: &Arc<Chart>, generators: Vec<VectorField>) -> Result<Distribution> {
        for g in &generators {
            ensure_same(chart, g.chart())?;
        }
        let regular: Vec<NormalForm> = generators.iter().flat_map(|g| g.coeffs().iter().cloned()).collect();
        let points = chart.sample_points(&regular)?;
        let values = evaluate(&generators, &points)?;
        let per_point: Vec<usize> = values
            .iter()
            .map(|v| v.as_ref().map_or(0, |vs| rank_of(vs, chart.dim())))
            .collect();
        let generic = per_point.iter().copied().max().unwrap_or(0);
        Ok(Distribution {
            chart: chart.clone(),
            generators,
            points,
            profile: RankProfile { generic, per_point },
        })
    }

    pub fn parse(chart: &Arc<Chart>, generators: &[&str]) -> Result<Distribution> {
        let fields = generators
            .iter()
            .map(|g| VectorField::parse(chart, g))
            .collect::<Result<Vec<_>>>()?;
        Distribution::new(chart, fields)
    }

    /// The full tangent distribution.
    pub fn tangent(chart: &Arc<Chart>) -> Result<Distribution> {
        let fields = chart
            .coords()
            .iter()
            .map(|c| VectorField::coordinate(chart, c))
            .collect::<Result<Vec<_>>>()?;
        Distribution::new(chart, fields)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn generators(&self) -> &[VectorField] {
        &self.generators
    }

    pub fn rank(&self) -> usize {
        self.profile.generic
    }

    pub fn profile(&self) -> &RankProfile {
        &self.profile
    }

    pub fn sample_points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Direct sum of generator lists.
    pub fn sum(&self, other: &Distribution) -> Result<Distribution> {
        ensure_same(&self.chart, &other.chart)?;
        let mut gens = self.generators.clone();
        gens.extend(other.generators.iter().cloned());
        Distribution::new(&self.chart, gens)
    }

    /// Generic rank of a field family at this distribution's sample points.
    pub fn rank_of_fields(&self, fields: &[VectorField]) -> Result<usize> {
        let values = evaluate(fields, &self.points)?;
        Ok(values
            .iter()
            .flatten()
            .map(|vs| rank_of(vs, self.chart.dim()))
            .max()
            .unwrap_or(0))
    }

    /// `rank([generators | X]) = rank(generators)` at every sample point.
    pub fn contains(&self, x: &VectorField) -> Result<Containment> {
        ensure_same(&self.chart, x.chart())?;
        let xc = x.compile()?;
        let gens = evaluate(&self.generators, &self.points)?;
        let n = self.chart.dim();
        for (p, g) in self.points.iter().zip(&gens) {
            let (Some(g), Ok(xv)) = (g, xc.eval(p)) else {
                return Ok(Containment::Indeterminate);
            };
            let base = rank_of(g, n);
            let mut stacked = g.clone();
            stacked.push(xv);
            if rank_of(&stacked, n) > base {
                return Ok(Containment::NotContained);
            }
        }
        Ok(Containment::Contained)
    }

    /// Bracket closure: adjoins brackets while they raise the generic rank.
    pub fn completion(&self) -> Result<Distribution> {
        let n = self.chart.dim();
        let values = evaluate(&self.generators, &self.points)?;
        let mut cache: Vec<Vec<Option<Vec<f64>>>> = values
            .iter()
            .map(|v| match v {
                Some(vs) => vs.iter().cloned().map(Some).collect(),
                None => vec![None; self.generators.len()],
            })
            .collect();
        let generic_rank = |cache: &Vec<Vec<Option<Vec<f64>>>>, idx: &[usize], extra: Option<&[Option<Vec<f64>>]>| {
            let mut best = 0;
            for (pi, row) in cache.iter().enumerate() {
                let mut vs: Vec<Vec<f64>> = Vec::with_capacity(idx.len() + 1);
                let mut ok = true;
                for &i in idx {
                    match &row[i] {
                        Some(v) => vs.push(v.clone()),
                        None => ok = false,
                    }
                }
                if let Some(extra) = extra {
                    match &extra[pi] {
                        Some(v) => vs.push(v.clone()),
                        None => ok = false,
                    }
                }
                if ok {
                    best = best.max(rank_of(&vs, n));
                }
            }
            best
        };

        let mut fields: Vec<VectorField> = Vec::new();
        let mut basis: Vec<usize> = Vec::new();
        // greedy independent subset of the generators
        let mut current = 0;
        for i in 0..self.generators.len() {
            let mut trial = basis.clone();
            trial.push(i);
            let r = generic_rank(&cache, &trial, None);
            if r > current {
                basis.push(i);
                current = r;
            }
        }
        fields.extend(self.generators.iter().cloned());
        let mut frontier = basis.clone();
        let mut rounds = 0;
        while current < n && !frontier.is_empty() {
            if rounds >= n {
                return Err(Error::IterationCap(rounds));
            }
            rounds += 1;
            let mut added = Vec::new();
            let snapshot = basis.clone();
            for &j in &frontier {
                for &i in &snapshot {
                    if i == j || (frontier.contains(&i) && i > j) {
                        continue;
                    }
                    let b = fields[i].bracket(&fields[j])?;
                    if b.is_literal_zero() {
                        continue;
                    }
                    let compiled = b.compile()?;
                    let evals: Vec<Option<Vec<f64>>> =
                        self.points.iter().map(|p| compiled.eval(p).ok()).collect();
                    let r = generic_rank(&cache, &basis, Some(&evals));
                    if r > current {
                        fields.push(b);
                        let idx = fields.len() - 1;
                        for (row, e) in cache.iter_mut().zip(evals) {
                            row.push(e);
                        }
                        basis.push(idx);
                        added.push(idx);
                        current = r;
                        if current == n {
                            break;
                        }
                    }
                }
                if current == n {
                    break;
                }
            }
            frontier = added;
        }
        let gens: Vec<VectorField> = basis.iter().map(|&i| fields[i].clone()).collect();
        let mut out = Distribution::new(&self.chart, gens)?;
        // keep the original sample points so ranks compare like for like
        if out.points != self.points {
            let values = evaluate(&out.generators, &self.points)?;
            let per_point: Vec<usize> = values
                .iter()
                .map(|v| v.as_ref().map_or(0, |vs| rank_of(vs, n)))
                .collect();
            let generic = per_point.iter().copied().max().unwrap_or(0).max(current);
            out.points = self.points.clone();
            out.profile = RankProfile { generic, per_point };
        }
        Ok(out)
    }

    /// `n − rank(completion)`.
    pub fn count_invariants(&self) -> Result<usize> {
        Ok(self.chart.dim() - self.completion()?.rank())
    }

    /// Integrable when the completion adds nothing.
    pub fn is_integrable(&self) -> Result<bool> {
        Ok(self.completion()?.rank() == self.rank())
    }

    pub fn verify_invariant(&self, invariant: &NormalForm) -> InvariantCheck {
        let derivatives: Vec<NormalForm> = self.generators.iter().map(|g| g.apply(invariant)).collect();
        let per_generator = zero_verdicts(&derivatives, self.chart.policy());
        InvariantCheck {
            verdict: ZeroVerdict::all(per_generator.iter().copied()),
            per_generator,
        }
    }
}

/// Full row rank of the Jacobian of `functions` at `point`.
pub fn functionally_independent(chart: &Chart, functions: &[NormalForm], point: &[f64]) -> Result<bool> {
    if functions.is_empty() {
        return Ok(true);
    }
    let grads: Vec<NormalForm> = functions
        .iter()
        .flat_map(|f| chart.coords().iter().map(move |c| f.derivative(c)))
        .collect();
    let vals = Compiled::new(&grads, chart.coords())?.eval(point)?;
    let n = chart.dim();
    let m = nalgebra::DMatrix::from_fn(functions.len(), n, |i, j| vals[i * n + j]);
    Ok(numeric_rank(&m, RANK_TOL) == functions.len())
}
