//! Decomposable systems `(M, F, G)`: definition checks, class, integral
//! elements and prolongation.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Compiled, NormalForm, SymbolKind};
use crate::geometry::{Chart, Containment, Distribution, VectorField};
use crate::linalg::{columns, numeric_rank, solve_symbolic, RANK_TOL};

/// Outcome of a check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Fail,
    Indeterminate,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Fail => "fail",
            Status::Indeterminate => "indeterminate",
        }
    }

    /// Fail dominates Indeterminate, which dominates Ok.
    pub fn and(self, other: Status) -> Status {
        match (self, other) {
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            (Status::Indeterminate, _) | (_, Status::Indeterminate) => Status::Indeterminate,
            _ => Status::Ok,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(s, k, l)` with `k = rank F`, `l = rank G`, `s = n − k − l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Class {
    pub s: usize,
    pub k: usize,
    pub l: usize,
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.s, self.k, self.l)
    }
}

#[derive(Clone, Debug)]
pub struct DecomposableSystem {
    chart: Arc<Chart>,
    f: Distribution,
    g: Distribution,
    v: Distribution,
    class: Class,
}

#[derive(Clone, Debug)]
pub struct DecomposabilityReport {
    pub status: Status,
    pub class: Class,
    pub constant_rank: bool,
    pub complementary: bool,
    pub brackets: Status,
    pub invariants_of_v: usize,
    pub failures: Vec<String>,
}

impl DecomposabilityReport {
    pub fn ok(&self) -> bool {
        self.status == Status::Ok
    }
}

impl DecomposableSystem {
    pub fn new(f: Distribution, g: Distribution) -> Result<DecomposableSystem> {
        if !f.chart().same_as(g.chart()) {
            return Err(Error::ChartMismatch("F and G live on different charts".into()));
        }
        let chart = f.chart().clone();
        let v = f.sum(&g)?;
        let (k, l) = (f.rank(), g.rank());
        let s = chart.dim().saturating_sub(k + l);
        Ok(DecomposableSystem {
            chart,
            f,
            g,
            v,
            class: Class { s, k, l },
        })
    }

    pub fn parse(chart: &Arc<Chart>, f: &[&str], g: &[&str]) -> Result<DecomposableSystem> {
        DecomposableSystem::new(Distribution::parse(chart, f)?, Distribution::parse(chart, g)?)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn f(&self) -> &Distribution {
        &self.f
    }

    pub fn g(&self) -> &Distribution {
        &self.g
    }

    pub fn v(&self) -> &Distribution {
        &self.v
    }

    pub fn class(&self) -> Class {
        self.class
    }

    /// The same system with the roles of `F` and `G` exchanged.
    pub fn swapped(&self) -> Result<DecomposableSystem> {
        DecomposableSystem::new(self.g.clone(), self.f.clone())
    }

    pub fn check(&self) -> Result<DecomposabilityReport> {
        let mut failures = Vec::new();
        let constant_rank = self.f.profile().is_constant() && self.g.profile().is_constant();
        if !constant_rank {
            failures.push(format!(
                "rank not constant at sample points: F {:?}, G {:?}",
                self.f.profile().per_point,
                self.g.profile().per_point
            ));
        }
        let complementary = self.v.rank() == self.class.k + self.class.l
            && self.v.profile().per_point.iter().all(|&r| r == self.v.rank());
        if !complementary {
            failures.push(format!(
                "F and G intersect: rank(F+G) = {} < {} + {}",
                self.v.rank(),
                self.class.k,
                self.class.l
            ));
        }
        let mut brackets = Status::Ok;
        for (i, x) in self.f.generators().iter().enumerate() {
            for (j, y) in self.g.generators().iter().enumerate() {
                let b = x.bracket(y)?;
                if b.is_literal_zero() {
                    continue;
                }
                match self.v.contains(&b)? {
                    Containment::Contained => {}
                    Containment::NotContained => {
                        brackets = Status::Fail;
                        failures.push(format!("[F{},G{}] not contained in F+G", i + 1, j + 1));
                    }
                    Containment::Indeterminate => {
                        brackets = brackets.and(Status::Indeterminate);
                        failures.push(format!("[F{},G{}] could not be evaluated", i + 1, j + 1));
                    }
                }
            }
        }
        let invariants_of_v = self.v.count_invariants()?;
        if invariants_of_v > 0 {
            failures.push(format!("F+G has {invariants_of_v} invariants"));
        }
        let mut status = brackets;
        if !constant_rank || !complementary || invariants_of_v > 0 {
            status = Status::Fail;
        }
        Ok(DecomposabilityReport {
            status,
            class: self.class,
            constant_rank,
            complementary,
            brackets,
            invariants_of_v,
            failures,
        })
    }

    /// Evaluates generators of `d` at `point`, failing on singularities.
    fn frame_at(&self, d: &Distribution, point: &[f64]) -> Result<Vec<Vec<f64>>> {
        d.generators().iter().map(|x| x.eval(point)).collect()
    }

    pub fn is_integral_element(&self, e: &IntegralElement) -> Result<bool> {
        let n = self.chart.dim();
        if e.point.len() != n || e.vectors.iter().any(|v| v.len() != n) {
            return Err(Error::Invalid("integral element dimension mismatch".into()));
        }
        let rank = |vs: &[Vec<f64>]| numeric_rank(&columns(vs, n), RANK_TOL);
        let ev: Vec<Vec<f64>> = e.vectors.to_vec();
        if rank(&ev) != 2 {
            return Ok(false);
        }
        let fv = self.frame_at(&self.f, &e.point)?;
        let gv = self.frame_at(&self.g, &e.point)?;
        let vv: Vec<Vec<f64>> = fv.iter().chain(&gv).cloned().collect();
        let rv = rank(&vv);
        let with = |base: &[Vec<f64>]| {
            let mut all = base.to_vec();
            all.extend(ev.iter().cloned());
            rank(&all)
        };
        if with(&vv) != rv {
            return Ok(false);
        }
        // dim(E ∩ D) = dim E + dim D − dim(E + D)
        let meet = |base: &[Vec<f64>]| 2 + rank(base) - with(base);
        Ok(meet(&fv) == 1 && meet(&gv) == 1)
    }

    /// Induced system on the affine chart of integral elements centered on
    /// the `F₁`, `G₁` directions.
    pub fn prolong(&self) -> Result<DecomposableSystem> {
        let fg = self.f.generators();
        let gg = self.g.generators();
        let (k, l) = (fg.len(), gg.len());
        if k != self.class.k || l != self.class.l {
            return Err(Error::Invalid("prolongation needs generator lists that are frames".into()));
        }
        for (name, x, d) in [("F1", &fg[0], &self.f), ("G1", &gg[0], &self.g)] {
            let vals = x.compile()?;
            for p in d.sample_points() {
                let v = vals.eval(p)?;
                if v.iter().all(|c| c.abs() < RANK_TOL) {
                    return Err(Error::Degenerate(format!("{name} vanishes at a sample point")));
                }
            }
        }
        let c_names: Vec<String> = (2..=k).map(|i| fresh(&self.chart, "c", i)).collect();
        let d_names: Vec<String> = (2..=l).map(|i| fresh(&self.chart, "d", i)).collect();
        let mut coords = self.chart.coords().to_vec();
        coords.extend(c_names.iter().cloned());
        coords.extend(d_names.iter().cloned());
        let mut table = self.chart.table().clone();
        for c in c_names.iter().chain(&d_names) {
            table.declare(c, SymbolKind::Coordinate);
        }
        let chart = Chart::with_table(coords, table, self.chart.policy().clone())?;

        let ext = |x: &VectorField| x.extend_to(&chart);
        let fx: Vec<VectorField> = fg.iter().map(ext).collect::<Result<_>>()?;
        let gx: Vec<VectorField> = gg.iter().map(ext).collect::<Result<_>>()?;
        let c_syms: Vec<NormalForm> = c_names.iter().map(|c| NormalForm::symbol(c)).collect();
        let d_syms: Vec<NormalForm> = d_names.iter().map(|d| NormalForm::symbol(d)).collect();
        let mut f_hat = fx[0].clone();
        for (c, x) in c_syms.iter().zip(&fx[1..]) {
            f_hat = f_hat.add(&x.scale(c))?;
        }
        let mut g_hat = gx[0].clone();
        for (d, x) in d_syms.iter().zip(&gx[1..]) {
            g_hat = g_hat.add(&x.scale(d))?;
        }

        // [f, g] = λ f + Σ λᵢ Fᵢ + μ g + Σ μ_α G_α; the vertical corrections
        // f̂ = f − Σ μ_α ∂d_α and ĝ = g + Σ λᵢ ∂cᵢ put [f̂, ĝ] inside F̂ + Ĝ
        let bracket = f_hat.bracket(&g_hat)?;
        let mut frame: Vec<VectorField> = vec![f_hat.clone()];
        frame.extend(fx[1..].iter().cloned());
        frame.push(g_hat.clone());
        frame.extend(gx[1..].iter().cloned());
        let n = chart.dim();
        let a: Vec<Vec<NormalForm>> = (0..n)
            .map(|r| frame.iter().map(|x| x.coeffs()[r].clone()).collect())
            .collect();
        let b: Vec<Vec<NormalForm>> = bracket.coeffs().iter().map(|c| vec![c.clone()]).collect();
        let regular: Vec<NormalForm> = frame.iter().flat_map(|x| x.coeffs().iter().cloned()).collect();
        let reference = chart.sample_points(&regular)?;
        let sol = solve_symbolic(&a, &b, chart.coords(), &reference)?;
        let resid = Compiled::new(&sol.residuals, chart.coords())?;
        for p in &reference {
            if let Ok(vals) = resid.eval(p) {
                if vals.iter().any(|v| v.abs() > 1e-8) {
                    return Err(Error::Invalid("[F, G] is not contained in F + G".into()));
                }
            }
        }
        let coef = |i: usize| sol.solution[i][0].clone();
        for (i, c) in c_names.iter().enumerate() {
            let lambda = coef(1 + i);
            if !lambda.is_zero() {
                g_hat = g_hat.add(&VectorField::coordinate(&chart, c)?.scale(&lambda))?;
            }
        }
        for (j, d) in d_names.iter().enumerate() {
            let mu = coef(k + 1 + j);
            if !mu.is_zero() {
                f_hat = f_hat.sub(&VectorField::coordinate(&chart, d)?.scale(&mu))?;
            }
        }

        let mut f_gens = vec![f_hat];
        for c in &c_names {
            f_gens.push(VectorField::coordinate(&chart, c)?);
        }
        let mut g_gens = vec![g_hat];
        for d in &d_names {
            g_gens.push(VectorField::coordinate(&chart, d)?);
        }
        DecomposableSystem::new(Distribution::new(&chart, f_gens)?, Distribution::new(&chart, g_gens)?)
    }
}

fn fresh(chart: &Chart, prefix: &str, i: usize) -> String {
    let mut name = format!("{prefix}{i}");
    while chart.table().contains(&name) {
        name.push('_');
    }
    name
}

/// Convenience wrapper around [`DecomposableSystem::check`].
pub fn check_decomposable(f: &Distribution, g: &Distribution) -> Result<DecomposabilityReport> {
    DecomposableSystem::new(f.clone(), g.clone())?.check()
}

/// A 2-plane at a point, spanned by two tangent vectors.
#[derive(Clone, Debug)]
pub struct IntegralElement {
    pub point: Vec<f64>,
    pub vectors: [Vec<f64>; 2],
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave() -> DecomposableSystem {
        let chart = Chart::new(["x", "y", "z", "p", "q"]).unwrap();
        DecomposableSystem::parse(&chart, &["d/dx + p*d/dz", "d/dp"], &["d/dy + q*d/dz", "d/dq"]).unwrap()
    }

    fn liouville() -> DecomposableSystem {
        let chart = Chart::new(["x", "y", "z", "p", "q", "r", "t"]).unwrap();
        DecomposableSystem::parse(
            &chart,
            &["d/dx + p*d/dz + r*d/dp + exp(z)*d/dq + q*exp(z)*d/dt", "d/dr"],
            &["d/dy + q*d/dz + exp(z)*d/dp + t*d/dq + p*exp(z)*d/dr", "d/dt"],
        )
        .unwrap()
    }

    #[test]
    fn wave_class() {
        let r = wave().check().unwrap();
        assert!(r.ok(), "{:?}", r.failures);
        assert_eq!(r.class, Class { s: 1, k: 2, l: 2 });
    }

    #[test]
    fn liouville_class() {
        let r = liouville().check().unwrap();
        assert!(r.ok(), "{:?}", r.failures);
        assert_eq!(r.class, Class { s: 3, k: 2, l: 2 });
    }

    #[test]
    fn overlapping_distributions_fail() {
        let chart = Chart::new(["x", "y"]).unwrap();
        let sys = DecomposableSystem::parse(&chart, &["d/dx"], &["d/dx"]).unwrap();
        let r = sys.check().unwrap();
        assert_eq!(r.status, Status::Fail);
        assert!(!r.complementary);
    }

    #[test]
    fn integral_elements_of_wave() {
        let sys = wave();
        let p = vec![0.3, -0.2, 0.1, 0.7, -1.1];
        let e = IntegralElement {
            point: p.clone(),
            vectors: [vec![1.0, 0.0, 0.7, 0.0, 0.0], vec![0.0, 1.0, -1.1, 0.0, 0.0]],
        };
        assert!(sys.is_integral_element(&e).unwrap());
        let both_f = IntegralElement {
            point: p.clone(),
            vectors: [vec![1.0, 0.0, 0.7, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0, 0.0]],
        };
        assert!(!sys.is_integral_element(&both_f).unwrap());
        let outside = IntegralElement {
            point: p,
            vectors: [vec![1.0, 0.0, 0.7, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0, 0.0]],
        };
        assert!(!sys.is_integral_element(&outside).unwrap());
    }

    #[test]
    fn prolongation_raises_class() {
        let p = wave().prolong().unwrap();
        let r = p.check().unwrap();
        assert!(r.ok(), "{:?}", r.failures);
        assert_eq!(r.class, Class { s: 3, k: 2, l: 2 });
        let p2 = liouville().prolong().unwrap();
        let r2 = p2.check().unwrap();
        assert!(r2.ok(), "{:?}", r2.failures);
        assert_eq!(r2.class, Class { s: 5, k: 2, l: 2 });
    }

    #[test]
    fn swap_exchanges_class() {
        let sys = liouville();
        let a = sys.check().unwrap();
        let b = sys.swapped().unwrap().check().unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!((b.class.s, b.class.k, b.class.l), (a.class.s, a.class.l, a.class.k));
    }
}
