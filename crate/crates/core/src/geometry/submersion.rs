use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;

use super::{ensure_same, Chart, VectorField};
use crate::error::{Error, Result};
use crate::expr::{zero_verdicts, Compiled, NormalForm, Symbol, ZeroVerdict};
use crate::linalg::{numeric_rank, RANK_TOL};

/// Smooth map between charts given by its component functions.
#[derive(Clone, Debug)]
pub struct Submersion {
    source: Arc<Chart>,
    target: Arc<Chart>,
    components: Vec<NormalForm>,
    inverse: LocalInverse,
}

/// Source coordinates solved in terms of target placeholders and the
/// remaining (fiber) source coordinates.
#[derive(Clone, Debug)]
struct LocalInverse {
    solved: BTreeMap<String, NormalForm>,
    fiber: Vec<String>,
}

#[derive(Clone, Debug)]
pub enum Projection {
    Projected(VectorField),
    NotProjectable,
    /// Some fiber derivative returned `Unknown`.
    Indeterminate,
}

fn placeholder(i: usize) -> String {
    format!("__b{i}")
}

impl Submersion {
    pub fn new(source: &Arc<Chart>, target: &Arc<Chart>, components: Vec<NormalForm>) -> Result<Submersion> {
        if components.len() != target.dim() {
            return Err(Error::Invalid(format!(
                "{} components for a {}-dimensional target",
                components.len(),
                target.dim()
            )));
        }
        for c in &components {
            for s in c.symbols() {
                if source.index(&s).is_none() {
                    return Err(Error::UndeclaredSymbol(s.to_string()));
                }
            }
        }
        let inverse = local_inverse(source, &components)?;
        let sub = Submersion {
            source: source.clone(),
            target: target.clone(),
            components,
            inverse,
        };
        sub.check_full_rank()?;
        Ok(sub)
    }

    pub fn source(&self) -> &Arc<Chart> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Chart> {
        &self.target
    }

    pub fn components(&self) -> &[NormalForm] {
        &self.components
    }

    /// Source coordinates that parametrize the fibers.
    pub fn fiber_coords(&self) -> &[String] {
        &self.inverse.fiber
    }

    pub fn fiber_dim(&self) -> usize {
        self.source.dim() - self.target.dim()
    }

    fn check_full_rank(&self) -> Result<()> {
        let pts = self.source.sample_points(&self.components)?;
        for p in &pts {
            let j = self.jacobian_at(p)?;
            if numeric_rank(&j, RANK_TOL) < self.target.dim() {
                return Err(Error::Degenerate("submersion Jacobian loses rank".into()));
            }
        }
        Ok(())
    }

    pub fn jacobian_at(&self, point: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
        let n = self.source.dim();
        let grads: Vec<NormalForm> = self
            .components
            .iter()
            .flat_map(|f| self.source.coords().iter().map(move |c| f.derivative(c)))
            .collect();
        let vals = Compiled::new(&grads, self.source.coords())?.eval(point)?;
        Ok(nalgebra::DMatrix::from_fn(self.components.len(), n, |i, k| vals[i * n + k]))
    }

    /// Values of the components at a source point.
    pub fn map_point(&self, point: &[f64]) -> Result<Vec<f64>> {
        Compiled::new(&self.components, self.source.coords())?.eval(point)
    }

    /// `dπ(X)` as functions on the source: `X(πᵃ)`.
    pub fn pushforward_components(&self, x: &VectorField) -> Result<Vec<NormalForm>> {
        ensure_same(&self.source, x.chart())?;
        Ok(self.components.iter().map(|c| x.apply(c)).collect())
    }

    /// `dπ(X) = 0` as a zero verdict.
    pub fn vertical_verdict(&self, x: &VectorField) -> Result<ZeroVerdict> {
        let comps = self.pushforward_components(x)?;
        Ok(ZeroVerdict::all(zero_verdicts(&comps, self.source.policy())))
    }

    /// Rewrites a source function in (target placeholder, fiber) variables.
    fn to_adapted(&self, f: &NormalForm) -> Result<NormalForm> {
        let map: BTreeMap<Symbol, NormalForm> = self
            .inverse
            .solved
            .iter()
            .map(|(k, v)| (Symbol::from(k.as_str()), v.clone()))
            .collect();
        f.substitute(&map)
    }

    /// Pulls a target function back to the source: `f ∘ π`.
    pub fn pull_back(&self, f: &NormalForm) -> Result<NormalForm> {
        let map: BTreeMap<Symbol, NormalForm> = self
            .target
            .coords()
            .iter()
            .zip(&self.components)
            .map(|(name, c)| (Symbol::from(name.as_str()), c.clone()))
            .collect();
        f.substitute(&map)
    }

    fn placeholders_to_source(&self) -> BTreeMap<Symbol, NormalForm> {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| (Symbol::from(placeholder(i).as_str()), c.clone()))
            .collect()
    }

    /// Frame of `ker dπ`: the fields `∂/∂w` of the adapted coordinates
    /// (π, w), written in source coordinates.
    pub fn vertical_frame(&self) -> Result<Vec<VectorField>> {
        let back = self.placeholders_to_source();
        let mut frame = Vec::new();
        for w in &self.inverse.fiber {
            let mut coeffs = Vec::with_capacity(self.source.dim());
            for c in self.source.coords() {
                let comp = if c == w {
                    NormalForm::one()
                } else if let Some(expr) = self.inverse.solved.get(c) {
                    expr.derivative(w).substitute(&back)?
                } else {
                    NormalForm::zero()
                };
                coeffs.push(comp);
            }
            frame.push(VectorField::new(&self.source, coeffs)?);
        }
        Ok(frame)
    }

    /// The source point over `target` whose fiber coordinates take the
    /// given values (in `fiber_coords` order).
    pub fn lift_point(&self, target: &[f64], fiber: &[f64]) -> Result<Vec<f64>> {
        if target.len() != self.target.dim() || fiber.len() != self.inverse.fiber.len() {
            return Err(Error::Invalid("lift_point dimension mismatch".into()));
        }
        let mut names: Vec<String> = (0..target.len()).map(placeholder).collect();
        names.extend(self.inverse.fiber.iter().cloned());
        let values: Vec<f64> = target.iter().chain(fiber).copied().collect();
        let mut out = vec![0.0; self.source.dim()];
        for (i, c) in self.source.coords().iter().enumerate() {
            out[i] = match self.inverse.solved.get(c) {
                Some(expr) => Compiled::new(std::slice::from_ref(expr), &names)?.eval(&values)?[0],
                None => {
                    let j = self.inverse.fiber.iter().position(|w| w == c).unwrap();
                    fiber[j]
                }
            };
        }
        Ok(out)
    }

    /// `π_*X` when `dπ(X)` is constant along the fibers.
    pub fn project_field(&self, x: &VectorField) -> Result<Projection> {
        let pushed = self.pushforward_components(x)?;
        let adapted: Vec<NormalForm> = pushed.iter().map(|c| self.to_adapted(c)).collect::<Result<_>>()?;
        let fiber_derivs: Vec<NormalForm> = adapted
            .iter()
            .flat_map(|c| self.inverse.fiber.iter().map(move |w| c.derivative(w)))
            .collect();
        let policy = self.adapted_policy();
        let verdict = ZeroVerdict::all(zero_verdicts(&fiber_derivs, &policy));
        match verdict {
            ZeroVerdict::NonZero => return Ok(Projection::NotProjectable),
            ZeroVerdict::Unknown => return Ok(Projection::Indeterminate),
            ZeroVerdict::Zero(_) => {}
        }
        // fiber coordinates drop out; any admissible value will do
        let center = self.source.center();
        let mut fix: BTreeMap<Symbol, NormalForm> = BTreeMap::new();
        for w in &self.inverse.fiber {
            let i = self.source.index(w).unwrap();
            let v = crate::expr::reconstruct_rational(center[i], 1000, 1e-12)
                .unwrap_or_else(BigRational::zero);
            fix.insert(Symbol::from(w.as_str()), NormalForm::constant(v));
        }
        let rename: BTreeMap<Symbol, NormalForm> = self
            .target
            .coords()
            .iter()
            .enumerate()
            .map(|(i, name)| (Symbol::from(placeholder(i).as_str()), NormalForm::symbol(name)))
            .collect();
        let mut coeffs = Vec::with_capacity(adapted.len());
        for c in &adapted {
            let no_fiber = if c.symbols().iter().any(|s| fix.contains_key(s)) {
                c.substitute(&fix)?
            } else {
                c.clone()
            };
            coeffs.push(no_fiber.substitute(&rename)?);
        }
        Ok(Projection::Projected(VectorField::new(&self.target, coeffs)?))
    }

    /// Sampling policy over adapted variables: placeholders take the target
    /// box, fiber coordinates keep the source box.
    fn adapted_policy(&self) -> crate::expr::SamplingPolicy {
        let mut policy = self.source.policy().clone();
        for (i, name) in self.target.coords().iter().enumerate() {
            policy.boxes.insert(placeholder(i), self.target.policy().interval(name));
        }
        // source-side exclusions are not expressible in adapted variables
        policy.exclusions = policy
            .exclusions
            .iter()
            .filter_map(|e| self.to_adapted(e).ok())
            .collect();
        policy
    }
}

/// Triangular solve of `bᵃ = πᵃ(x)` for one source coordinate per component,
/// using components that are linear with constant coefficient in some
/// coordinate.
fn local_inverse(source: &Chart, components: &[NormalForm]) -> Result<LocalInverse> {
    let mut remaining: Vec<(usize, NormalForm)> = components.iter().cloned().enumerate().collect();
    let mut order: Vec<(String, NormalForm)> = Vec::new();
    while !remaining.is_empty() {
        let mut progress = None;
        'search: for (slot, (a, comp)) in remaining.iter().enumerate() {
            let mut candidates: Vec<&String> = source.coords().iter().collect();
            // prefer a coordinate that already is the component
            if let Some(s) = comp.as_symbol() {
                candidates.retain(|c| c.as_str() == &*s);
            }
            for c in candidates {
                if order.iter().any(|(s, _)| s == c) {
                    continue;
                }
                let d = comp.derivative(c);
                let Some(k) = d.as_constant() else { continue };
                if k.is_zero() {
                    continue;
                }
                // comp = k·c + rest with rest free of c
                let rest = comp.sub(&NormalForm::symbol(c).scale(&k));
                if rest.symbols().iter().any(|s| &**s == c.as_str()) {
                    continue;
                }
                let solved = NormalForm::symbol(&placeholder(*a))
                    .sub(&rest)
                    .scale(&(BigRational::from_integer(1.into()) / k));
                progress = Some((slot, c.clone(), solved));
                break 'search;
            }
        }
        let Some((slot, coord, solved)) = progress else {
            return Err(Error::Invalid(
                "submersion components cannot be inverted by linear substitution".into(),
            ));
        };
        remaining.remove(slot);
        let map: BTreeMap<Symbol, NormalForm> =
            std::iter::once((Symbol::from(coord.as_str()), solved.clone())).collect();
        for (_, comp) in remaining.iter_mut() {
            *comp = comp.substitute(&map)?;
        }
        order.push((coord, solved));
    }
    // back-substitute later solutions into earlier ones
    let mut solved: BTreeMap<String, NormalForm> = BTreeMap::new();
    for (coord, expr) in order.into_iter().rev() {
        let map: BTreeMap<Symbol, NormalForm> = solved
            .iter()
            .map(|(k, v)| (Symbol::from(k.as_str()), v.clone()))
            .collect();
        solved.insert(coord, expr.substitute(&map)?);
    }
    let fiber = source
        .coords()
        .iter()
        .filter(|c| !solved.contains_key(*c))
        .cloned()
        .collect();
    Ok(LocalInverse { solved, fiber })
}
