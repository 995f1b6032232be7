//! Canonical Laurent-polynomial form.
//!
//! A [`NormalForm`] is a finite sum `Σ c·m` of rational coefficients times
//! monomials. A monomial is a product of atom powers. Atoms are symbols,
//! function applications of normalized arguments, and `Inv(D)`: the
//! reciprocal of a primitive multi-term polynomial `D` (leading coefficient
//! one, no common monomial factor). Denominators therefore stay factored and
//! never get expanded against numerators.
//!
//! Rewrites applied during construction:
//! `exp(a)·exp(b) → exp(a+b)`, `exp(0) → 1`, `ln(exp(a)) → a`, `ln(1) → 0`,
//! `sqrt(a)² → a`, `sin(0) → 0`, `cos(0) → 1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{Expr, Func, Symbol};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Sym(Symbol),
    Apply(Func, Box<NormalForm>),
    /// `1 / D` with `D` primitive and multi-term.
    Inv(Box<NormalForm>),
}

/// Product of atom powers, sorted by atom, no zero exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<(Atom, i64)>);

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NormalForm {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(Vec::new())
    }

    pub fn factors(&self) -> &[(Atom, i64)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    fn single(atom: Atom, e: i64) -> Monomial {
        if e == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(atom, e)])
        }
    }

    /// Raw product: exponents add, no atom-specific rewriting.
    fn raw_mul(&self, other: &Monomial) -> Monomial {
        let mut map: BTreeMap<Atom, i64> = BTreeMap::new();
        for (a, e) in self.0.iter().chain(other.0.iter()) {
            *map.entry(a.clone()).or_insert(0) += e;
        }
        Monomial(map.into_iter().filter(|(_, e)| *e != 0).collect())
    }

    fn without(&self, idx: usize) -> Monomial {
        let mut v = self.0.clone();
        v.remove(idx);
        Monomial(v)
    }
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl NormalForm {
    pub fn zero() -> NormalForm {
        NormalForm::default()
    }

    pub fn constant(c: BigRational) -> NormalForm {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        NormalForm { terms }
    }

    pub fn int(n: i64) -> NormalForm {
        NormalForm::constant(rat(n))
    }

    pub fn one() -> NormalForm {
        NormalForm::int(1)
    }

    pub fn symbol(name: &str) -> NormalForm {
        NormalForm::from_monomial(Monomial::single(Atom::Sym(Symbol::from(name)), 1), rat(1))
    }

    fn from_monomial(m: Monomial, c: BigRational) -> NormalForm {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        NormalForm { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value when the form is a rational constant.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    /// The symbol name when the form is exactly one bare symbol.
    pub fn as_symbol(&self) -> Option<Symbol> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next().unwrap();
        if !c.is_one() || m.0.len() != 1 {
            return None;
        }
        match &m.0[0] {
            (Atom::Sym(s), 1) => Some(s.clone()),
            _ => None,
        }
    }

    pub fn neg(&self) -> NormalForm {
        NormalForm {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, k: &BigRational) -> NormalForm {
        if k.is_zero() {
            return NormalForm::zero();
        }
        NormalForm {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c * k))
                .collect(),
        }
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &NormalForm) -> NormalForm {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &NormalForm) -> NormalForm {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a NormalForm>) -> NormalForm {
        let mut out = NormalForm::zero();
        for it in items {
            for (m, c) in &it.terms {
                out.add_term(m.clone(), c.clone());
            }
        }
        out
    }

    pub fn mul(&self, other: &NormalForm) -> NormalForm {
        if self.is_zero() || other.is_zero() {
            return NormalForm::zero();
        }
        if let Some(k) = self.as_constant() {
            return other.scale(&k);
        }
        if let Some(k) = other.as_constant() {
            return self.scale(&k);
        }
        let mut out = NormalForm::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let prod = monomial_product(ma, mb);
                let c = ca * cb;
                if prod.terms.len() == 1 {
                    let (m, k) = prod.terms.into_iter().next().unwrap();
                    out.add_term(m, k * c);
                } else {
                    for (m, k) in prod.terms {
                        out.add_term(m, k * &c);
                    }
                }
            }
        }
        out
    }

    pub fn pow(&self, n: i64) -> Result<NormalForm> {
        if n < 0 {
            return self.inv()?.pow(-n);
        }
        let mut result = NormalForm::one();
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        Ok(result)
    }

    /// Multiplicative inverse. Multi-term forms become an `Inv` atom after
    /// pulling out the common monomial factor and the leading coefficient.
    pub fn inv(&self) -> Result<NormalForm> {
        if self.is_zero() {
            return Err(Error::Singular("division by zero".into()));
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            return Ok(monomial_inverse(m).scale(&(BigRational::one() / c)));
        }
        let (content, primitive, lead) = self.split_content();
        let inv_content = monomial_inverse(&content);
        let atom = NormalForm::from_monomial(Monomial::single(Atom::Inv(Box::new(primitive)), 1), BigRational::one() / lead);
        Ok(inv_content.mul(&atom))
    }

    /// Splits `self = content · lead · primitive`, where `content` is the
    /// common monomial factor and `primitive` has leading coefficient 1.
    fn split_content(&self) -> (Monomial, NormalForm, BigRational) {
        let mut common: Option<BTreeMap<Atom, i64>> = None;
        for m in self.terms.keys() {
            let here: BTreeMap<Atom, i64> = m.0.iter().cloned().collect();
            common = Some(match common {
                None => here,
                Some(prev) => prev
                    .into_iter()
                    .filter_map(|(a, e)| here.get(&a).map(|&f| (a, e.min(f))))
                    .collect(),
            });
        }
        let content = Monomial(
            common
                .unwrap_or_default()
                .into_iter()
                .filter(|(_, e)| *e != 0)
                .collect(),
        );
        let inv_content = Monomial(content.0.iter().map(|(a, e)| (a.clone(), -e)).collect());
        let lead = self.terms.iter().next_back().map(|(_, c)| c.clone()).unwrap();
        let mut primitive = NormalForm::zero();
        for (m, c) in &self.terms {
            primitive.add_term(m.raw_mul(&inv_content), c / &lead);
        }
        // Leading coefficient is recomputed after the content shift since
        // the term order may change.
        let relead = primitive.terms.iter().next_back().map(|(_, c)| c.clone()).unwrap();
        if !relead.is_one() {
            primitive = primitive.scale(&(BigRational::one() / &relead));
            return (content, primitive, lead * relead);
        }
        (content, primitive, lead)
    }

    pub fn apply(f: Func, arg: NormalForm) -> Result<NormalForm> {
        match f {
            Func::Exp => {
                if arg.is_zero() {
                    return Ok(NormalForm::one());
                }
                Ok(NormalForm::from_monomial(
                    Monomial::single(Atom::Apply(Func::Exp, Box::new(arg)), 1),
                    rat(1),
                ))
            }
            Func::Ln => {
                if let Some(c) = arg.as_constant() {
                    if c.is_one() {
                        return Ok(NormalForm::zero());
                    }
                    if !c.is_positive() {
                        return Err(Error::Singular(format!("ln({})", arg.to_expr())));
                    }
                }
                if arg.terms.len() == 1 {
                    let (m, c) = arg.terms.iter().next().unwrap();
                    if c.is_one() && m.0.len() == 1 {
                        if let (Atom::Apply(Func::Exp, inner), 1) = &m.0[0] {
                            return Ok((**inner).clone());
                        }
                    }
                }
                Ok(NormalForm::from_monomial(
                    Monomial::single(Atom::Apply(Func::Ln, Box::new(arg)), 1),
                    rat(1),
                ))
            }
            Func::Sin | Func::Cos => {
                if arg.is_zero() {
                    return Ok(if f == Func::Sin {
                        NormalForm::zero()
                    } else {
                        NormalForm::one()
                    });
                }
                Ok(NormalForm::from_monomial(
                    Monomial::single(Atom::Apply(f, Box::new(arg)), 1),
                    rat(1),
                ))
            }
            Func::Sqrt => {
                if let Some(c) = arg.as_constant() {
                    if c.is_negative() {
                        return Err(Error::Singular(format!("sqrt({})", arg.to_expr())));
                    }
                    if let Some(r) = rational_sqrt(&c) {
                        return Ok(NormalForm::constant(r));
                    }
                }
                Ok(NormalForm::from_monomial(
                    Monomial::single(Atom::Apply(Func::Sqrt, Box::new(arg)), 1),
                    rat(1),
                ))
            }
        }
    }

    pub fn from_expr(e: &Expr) -> Result<NormalForm> {
        Ok(match e {
            Expr::Const(c) => NormalForm::constant(c.clone()),
            Expr::Sym(s) => NormalForm::from_monomial(Monomial::single(Atom::Sym(s.clone()), 1), rat(1)),
            Expr::Neg(a) => NormalForm::from_expr(a)?.neg(),
            Expr::Add(a, b) => NormalForm::from_expr(a)?.add(&NormalForm::from_expr(b)?),
            Expr::Sub(a, b) => NormalForm::from_expr(a)?.sub(&NormalForm::from_expr(b)?),
            Expr::Mul(a, b) => NormalForm::from_expr(a)?.mul(&NormalForm::from_expr(b)?),
            Expr::Div(a, b) => NormalForm::from_expr(a)?.mul(&inverse_of_tree(b)?),
            Expr::Pow(a, n) => {
                if *n < 0 {
                    inverse_of_tree(a)?.pow(-n)?
                } else {
                    NormalForm::from_expr(a)?.pow(*n)?
                }
            }
            Expr::Apply(f, a) => NormalForm::apply(*f, NormalForm::from_expr(a)?)?,
        })
    }

    /// Partial derivative treating every other symbol as independent.
    pub fn derivative(&self, var: &str) -> NormalForm {
        let mut out = NormalForm::zero();
        for (m, c) in &self.terms {
            for (idx, (atom, e)) in m.0.iter().enumerate() {
                let da = atom_derivative(atom, var);
                if da.is_zero() {
                    continue;
                }
                let rest = NormalForm::from_monomial(m.without(idx), c * rat(*e));
                let lowered = atom_power(atom, e - 1);
                let piece = rest.mul(&lowered).mul(&da);
                for (pm, pc) in piece.terms {
                    out.add_term(pm, pc);
                }
            }
        }
        out
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        for m in self.terms.keys() {
            for (a, _) in &m.0 {
                match a {
                    Atom::Sym(s) => {
                        out.insert(s.clone());
                    }
                    Atom::Apply(_, inner) | Atom::Inv(inner) => inner.collect_symbols(out),
                }
            }
        }
    }

    /// True when any function application occurs (at any depth).
    pub fn has_transcendental(&self) -> bool {
        self.terms.keys().any(|m| {
            m.0.iter().any(|(a, _)| match a {
                Atom::Sym(_) => false,
                Atom::Apply(..) => true,
                Atom::Inv(inner) => inner.has_transcendental(),
            })
        })
    }

    /// Substitutes symbols by normal forms.
    pub fn substitute(&self, map: &BTreeMap<Symbol, NormalForm>) -> Result<NormalForm> {
        if map.is_empty() {
            return Ok(self.clone());
        }
        let mut out = NormalForm::zero();
        for (m, c) in &self.terms {
            let mut term = NormalForm::constant(c.clone());
            for (atom, e) in &m.0 {
                let base = match atom {
                    Atom::Sym(s) => match map.get(s) {
                        Some(v) => v.clone(),
                        None => NormalForm::from_monomial(Monomial::single(atom.clone(), 1), rat(1)),
                    },
                    Atom::Apply(f, inner) => NormalForm::apply(*f, inner.substitute(map)?)?,
                    Atom::Inv(inner) => inner.substitute(map)?.inv()?,
                };
                term = term.mul(&base.pow(*e)?);
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    /// Rebuilds a tree. Denominators are emitted as products of powers so
    /// that `from_expr(to_expr(n)) == n`.
    pub fn to_expr(&self) -> Expr {
        let mut acc: Option<Expr> = None;
        for (m, c) in self.terms.iter().rev() {
            let negative = c.is_negative();
            let mag = if negative { -c.clone() } else { c.clone() };
            let term = monomial_expr(m, &mag);
            acc = Some(match acc {
                None => {
                    if negative {
                        Expr::Neg(Box::new(term))
                    } else {
                        term
                    }
                }
                Some(prev) => {
                    if negative {
                        Expr::sub(prev, term)
                    } else {
                        Expr::add(prev, term)
                    }
                }
            });
        }
        acc.unwrap_or_else(Expr::zero)
    }
}

fn monomial_expr(m: &Monomial, coeff: &BigRational) -> Expr {
    let mut num: Vec<Expr> = Vec::new();
    let mut den: Vec<Expr> = Vec::new();
    let num_c = BigRational::from_integer(coeff.numer().clone());
    let den_c = BigRational::from_integer(coeff.denom().clone());
    if !num_c.is_one() || m.is_one() {
        num.push(Expr::Const(num_c));
    }
    if !den_c.is_one() {
        den.push(Expr::Const(den_c));
    }
    for (atom, e) in &m.0 {
        let (base, exp, into_den) = match atom {
            Atom::Sym(s) => (Expr::Sym(s.clone()), e.abs(), *e < 0),
            Atom::Apply(f, inner) => (Expr::apply(*f, inner.to_expr()), e.abs(), *e < 0),
            Atom::Inv(inner) => (inner.to_expr(), e.abs(), *e > 0),
        };
        let factor = if exp == 1 { base } else { Expr::pow(base, exp) };
        if into_den {
            den.push(factor);
        } else {
            num.push(factor);
        }
    }
    let fold = |v: Vec<Expr>| v.into_iter().reduce(Expr::mul);
    let n = fold(num).unwrap_or_else(|| Expr::int(1));
    match fold(den) {
        None => n,
        Some(d) => Expr::div(n, d),
    }
}

/// Inverse that respects products and powers in the tree, so factored
/// denominators stay factored.
fn inverse_of_tree(e: &Expr) -> Result<NormalForm> {
    match e {
        Expr::Mul(a, b) => Ok(inverse_of_tree(a)?.mul(&inverse_of_tree(b)?)),
        Expr::Div(a, b) => Ok(inverse_of_tree(a)?.mul(&NormalForm::from_expr(b)?)),
        Expr::Pow(a, n) => {
            if *n >= 0 {
                inverse_of_tree(a)?.pow(*n)
            } else {
                NormalForm::from_expr(a)?.pow(-n)
            }
        }
        Expr::Neg(a) => Ok(inverse_of_tree(a)?.neg()),
        _ => NormalForm::from_expr(e)?.inv(),
    }
}

fn monomial_inverse(m: &Monomial) -> NormalForm {
    let mut out = NormalForm::one();
    for (atom, e) in &m.0 {
        out = out.mul(&atom_power(atom, -e));
    }
    out
}

/// `atom^e` as a normal form, applying atom-specific rewrites.
fn atom_power(atom: &Atom, e: i64) -> NormalForm {
    if e == 0 {
        return NormalForm::one();
    }
    match atom {
        Atom::Sym(_) => NormalForm::from_monomial(Monomial::single(atom.clone(), e), rat(1)),
        Atom::Apply(Func::Exp, arg) => {
            let scaled = arg.scale(&rat(e));
            NormalForm::apply(Func::Exp, scaled).expect("exp is total")
        }
        Atom::Apply(Func::Sqrt, arg) => {
            let half = e.div_euclid(2);
            let odd = e.rem_euclid(2);
            let mut out = if odd == 1 {
                NormalForm::from_monomial(Monomial::single(atom.clone(), 1), rat(1))
            } else {
                NormalForm::one()
            };
            if half != 0 {
                // sqrt atoms only exist for nonzero, non-constant arguments
                out = out.mul(&arg.pow(half).expect("nonzero sqrt argument"));
            }
            out
        }
        Atom::Apply(..) => NormalForm::from_monomial(Monomial::single(atom.clone(), e), rat(1)),
        Atom::Inv(d) => {
            if e > 0 {
                NormalForm::from_monomial(Monomial::single(atom.clone(), e), rat(1))
            } else {
                d.pow(-e).expect("positive power")
            }
        }
    }
}

fn monomial_product(a: &Monomial, b: &Monomial) -> NormalForm {
    let raw = a.raw_mul(b);
    let exp_count = raw
        .0
        .iter()
        .filter(|(a, _)| matches!(a, Atom::Apply(Func::Exp, _)))
        .count();
    let dirty = exp_count > 1
        || raw.0.iter().any(|(atom, e)| match atom {
            Atom::Apply(Func::Exp, _) => *e != 1,
            Atom::Apply(Func::Sqrt, _) => e.abs() >= 2,
            Atom::Inv(_) => *e < 0,
            _ => false,
        });
    if !dirty {
        return NormalForm::from_monomial(raw, rat(1));
    }
    let mut plain = Vec::new();
    let mut exp_arg = NormalForm::zero();
    let mut extra = NormalForm::one();
    for (atom, e) in raw.0 {
        match &atom {
            Atom::Apply(Func::Exp, arg) => {
                exp_arg = exp_arg.add(&arg.scale(&rat(e)));
            }
            Atom::Apply(Func::Sqrt, _) if e >= 2 || e <= -2 => {
                extra = extra.mul(&atom_power(&atom, e));
            }
            Atom::Inv(_) if e < 0 => {
                extra = extra.mul(&atom_power(&atom, e));
            }
            _ => plain.push((atom, e)),
        }
    }
    let mut out = NormalForm::from_monomial(Monomial(plain), rat(1));
    if !exp_arg.is_zero() {
        out = out.mul(&NormalForm::apply(Func::Exp, exp_arg).expect("exp is total"));
    }
    out.mul(&extra)
}

fn atom_derivative(atom: &Atom, var: &str) -> NormalForm {
    match atom {
        Atom::Sym(s) => {
            if &**s == var {
                NormalForm::one()
            } else {
                NormalForm::zero()
            }
        }
        Atom::Apply(f, arg) => {
            let da = arg.derivative(var);
            if da.is_zero() {
                return NormalForm::zero();
            }
            let outer = match f {
                Func::Exp => NormalForm::apply(Func::Exp, (**arg).clone()).expect("exp is total"),
                Func::Ln => arg.inv().expect("ln argument is nonzero"),
                Func::Sin => NormalForm::apply(Func::Cos, (**arg).clone()).expect("cos is total"),
                Func::Cos => NormalForm::apply(Func::Sin, (**arg).clone())
                    .expect("sin is total")
                    .neg(),
                Func::Sqrt => atom_power(atom, -1).scale(&BigRational::new(1.into(), 2.into())),
            };
            outer.mul(&da)
        }
        Atom::Inv(d) => {
            // d(1/D) = -D'/D²
            let dd = d.derivative(var);
            if dd.is_zero() {
                return NormalForm::zero();
            }
            atom_power(atom, 2).mul(&dd).neg()
        }
    }
}

fn rational_sqrt(c: &BigRational) -> Option<BigRational> {
    let n = c.numer();
    let d = c.denom();
    if n.is_negative() {
        return None;
    }
    let rn = n.sqrt();
    let rd = d.sqrt();
    (&rn * &rn == *n && &rd * &rd == *d).then(|| BigRational::new(rn, rd))
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, SymbolTable};

    fn nf(text: &str) -> NormalForm {
        let table = SymbolTable::coordinates(["x", "y", "z", "q", "t"]);
        parse_expr(text, &table).unwrap().to_normal().unwrap()
    }

    #[test]
    fn polynomial_identity_cancels_exactly() {
        assert!(nf("(x+y)^2 - x^2 - 2*x*y - y^2").is_zero());
    }

    #[test]
    fn exp_products_merge() {
        assert!(nf("exp(x)*exp(-x) - 1").is_zero());
        assert_eq!(nf("exp(x)*exp(y)"), nf("exp(x+y)"));
        assert_eq!(nf("exp(x)^3"), nf("exp(3*x)"));
    }

    #[test]
    fn denominators_stay_factored() {
        let a = nf("6*z/(x+y)^2");
        let b = nf("6*z*(x+y)^-2");
        assert_eq!(a, b);
        // 1/(2x+2y) pulls out the leading coefficient
        assert_eq!(nf("1/(2*x+2*y)"), nf("(1/2)/(x+y)"));
        // the common monomial factor is split off
        assert_eq!(nf("1/(x^2+x*y)"), nf("1/(x*(x+y))"));
    }

    #[test]
    fn sqrt_squares_reduce() {
        assert_eq!(nf("sqrt(x+y)^2"), nf("x+y"));
        assert_eq!(nf("sqrt(4)"), nf("2"));
        assert!(nf("ln(exp(x)) - x").is_zero());
    }

    #[test]
    fn derivative_of_quotient() {
        let d = nf("6*z/(x+y)^2").derivative("x");
        assert_eq!(d, nf("-12*z/(x+y)^3"));
    }

    #[test]
    fn to_expr_round_trips() {
        for s in [
            "6*z/(x+y)^2",
            "t - q^2/2",
            "exp(z)*q - 3/(x*y*(x+y)^2) + sin(x)^-1",
            "sqrt(x^2+1)^3 + ln(x+2)",
            "-x",
        ] {
            let n = nf(s);
            let again = NormalForm::from_expr(&n.to_expr()).unwrap();
            assert_eq!(n, again, "{s}");
        }
    }
}
