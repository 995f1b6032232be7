//! Flattened `f64` evaluator for normal forms.
//!
//! Atoms are deduplicated across all compiled outputs and evaluated once per
//! point, in dependency order.

use std::collections::HashMap;

use super::{powi, rational_to_f64, Atom, Func, NormalForm};
use crate::error::{Error, Result};

/// Denominator magnitudes below this are treated as singular.
pub const SINGULAR_EPS: f64 = 1e-8;

#[derive(Clone, Debug)]
enum Slot {
    Sym(usize),
    Apply(Func, usize),
    Inv(usize),
}

#[derive(Clone, Debug)]
struct Poly {
    terms: Vec<(f64, Vec<(usize, i64)>)>,
}

/// Compiled family of normal forms over a fixed symbol order.
#[derive(Clone, Debug)]
pub struct Compiled {
    symbols: Vec<String>,
    slots: Vec<Slot>,
    polys: Vec<Poly>,
    outputs: Vec<usize>,
    /// Printable form of each slot's argument, for error messages.
    labels: Vec<String>,
}

struct Builder<'a> {
    symbol_index: HashMap<&'a str, usize>,
    slots: Vec<Slot>,
    labels: Vec<String>,
    polys: Vec<Poly>,
    atom_ids: HashMap<Atom, usize>,
    poly_ids: HashMap<NormalForm, usize>,
}

impl<'a> Builder<'a> {
    fn poly(&mut self, nf: &NormalForm) -> Result<usize> {
        if let Some(&id) = self.poly_ids.get(nf) {
            return Ok(id);
        }
        let mut terms = Vec::with_capacity(nf.term_count());
        for (m, c) in nf.terms() {
            let mut factors = Vec::with_capacity(m.factors().len());
            for (atom, e) in m.factors() {
                factors.push((self.atom(atom)?, *e));
            }
            terms.push((rational_to_f64(c), factors));
        }
        self.polys.push(Poly { terms });
        let id = self.polys.len() - 1;
        self.poly_ids.insert(nf.clone(), id);
        Ok(id)
    }

    fn atom(&mut self, atom: &Atom) -> Result<usize> {
        if let Some(&id) = self.atom_ids.get(atom) {
            return Ok(id);
        }
        let (slot, label) = match atom {
            Atom::Sym(s) => {
                let idx = *self
                    .symbol_index
                    .get(&**s)
                    .ok_or_else(|| Error::UndeclaredSymbol(s.to_string()))?;
                (Slot::Sym(idx), s.to_string())
            }
            Atom::Apply(f, arg) => {
                let p = self.poly(arg)?;
                (Slot::Apply(*f, p), format!("{}({})", f.name(), arg))
            }
            Atom::Inv(d) => {
                let p = self.poly(d)?;
                (Slot::Inv(p), format!("{d}"))
            }
        };
        self.slots.push(slot);
        self.labels.push(label);
        let id = self.slots.len() - 1;
        self.atom_ids.insert(atom.clone(), id);
        Ok(id)
    }
}

impl Compiled {
    pub fn new<S: AsRef<str>>(forms: &[NormalForm], symbols: &[S]) -> Result<Compiled> {
        let symbol_index = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_ref(), i))
            .collect();
        let mut b = Builder {
            symbol_index,
            slots: Vec::new(),
            labels: Vec::new(),
            polys: Vec::new(),
            atom_ids: HashMap::new(),
            poly_ids: HashMap::new(),
        };
        let mut outputs = Vec::with_capacity(forms.len());
        for f in forms {
            outputs.push(b.poly(f)?);
        }
        Ok(Compiled {
            symbols: symbols.iter().map(|s| s.as_ref().to_string()).collect(),
            slots: b.slots,
            polys: b.polys,
            outputs,
            labels: b.labels,
        })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Evaluates every output. Fails on a near-singular denominator or an
    /// out-of-domain function argument.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval_with_magnitude(point)?.0)
    }

    /// Values plus, per output, the sum of absolute term values (used to
    /// scale zero-test tolerances).
    pub fn eval_with_magnitude(&self, point: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        // memoized on demand; slot and poly creation orders interleave
        let mut slot_vals: Vec<Option<f64>> = vec![None; self.slots.len()];
        let mut poly_vals: Vec<Option<(f64, f64)>> = vec![None; self.polys.len()];
        let mut vals = Vec::with_capacity(self.outputs.len());
        let mut mags = Vec::with_capacity(self.outputs.len());
        for &o in &self.outputs {
            let (v, m) = self.poly_value(o, point, &mut slot_vals, &mut poly_vals)?;
            vals.push(v);
            mags.push(m);
        }
        Ok((vals, mags))
    }

    fn poly_value(
        &self,
        id: usize,
        point: &[f64],
        slot_vals: &mut Vec<Option<f64>>,
        poly_vals: &mut Vec<Option<(f64, f64)>>,
    ) -> Result<(f64, f64)> {
        if let Some(v) = poly_vals[id] {
            return Ok(v);
        }
        let mut sum = 0.0;
        let mut mag = 0.0;
        for (c, factors) in &self.polys[id].terms {
            let mut t = *c;
            for &(slot, e) in factors {
                let base = self.slot_value(slot, point, slot_vals, poly_vals)?;
                if e < 0 && base.abs() < SINGULAR_EPS {
                    return Err(Error::Singular(self.labels[slot].clone()));
                }
                t *= powi(base, e);
            }
            sum += t;
            mag += t.abs();
        }
        if !sum.is_finite() {
            return Err(Error::Singular("non-finite value".into()));
        }
        poly_vals[id] = Some((sum, mag));
        Ok((sum, mag))
    }

    fn slot_value(
        &self,
        slot: usize,
        point: &[f64],
        slot_vals: &mut Vec<Option<f64>>,
        poly_vals: &mut Vec<Option<(f64, f64)>>,
    ) -> Result<f64> {
        if let Some(v) = slot_vals[slot] {
            return Ok(v);
        }
        let v = match &self.slots[slot] {
            Slot::Sym(i) => point[*i],
            Slot::Apply(f, p) => {
                let (x, _) = self.poly_value(*p, point, slot_vals, poly_vals)?;
                match f {
                    Func::Ln if x <= SINGULAR_EPS => {
                        return Err(Error::Singular(self.labels[slot].clone()))
                    }
                    Func::Sqrt if x < 0.0 => return Err(Error::Singular(self.labels[slot].clone())),
                    _ => f.apply(x),
                }
            }
            Slot::Inv(p) => {
                let (d, _) = self.poly_value(*p, point, slot_vals, poly_vals)?;
                if d.abs() < SINGULAR_EPS {
                    return Err(Error::Singular(self.labels[slot].clone()));
                }
                1.0 / d
            }
        };
        slot_vals[slot] = Some(v);
        Ok(v)
    }
}
