//! Symbolic scalar expressions over chart coordinates.
//!
//! [`Expr`] is the surface tree produced by the parser and used for printing.
//! All algebra (differentiation, zero tests, brackets) runs on the canonical
//! [`NormalForm`], a Laurent polynomial in atoms with exact rational
//! coefficients.

mod compile;
mod normal;
mod parse;
mod zero;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

pub use compile::Compiled;
pub use normal::{Atom, Monomial, NormalForm};
pub use parse::{parse_expr, parse_linear_in_derivations, SymbolKind, SymbolTable};
pub use compile::SINGULAR_EPS;
pub use zero::{is_zero, zero_verdict, zero_verdicts, Certification, SamplingPolicy, ZeroVerdict};

use crate::error::{Error, Result};

/// Interned symbol name.
pub type Symbol = Arc<str>;

/// Unary functions recognised by the grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

/// Expression tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Const(BigRational),
    Sym(Symbol),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i64),
    Apply(Func, Box<Expr>),
}

/// Total assignment of real values to symbols.
pub type EvalPoint = std::collections::BTreeMap<Symbol, f64>;

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Const(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn rational(num: i64, den: i64) -> Expr {
        Expr::Const(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn sym(name: &str) -> Expr {
        Expr::Sym(Arc::from(name))
    }

    pub fn zero() -> Expr {
        Expr::Const(BigRational::zero())
    }

    pub fn is_literal_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(a: Expr, n: i64) -> Expr {
        Expr::Pow(Box::new(a), n)
    }

    pub fn apply(f: Func, a: Expr) -> Expr {
        Expr::Apply(f, Box::new(a))
    }

    /// Symbols occurring in the tree.
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            Expr::Const(_) => {}
            Expr::Sym(s) => {
                out.insert(s.clone());
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Apply(_, a) => a.collect_symbols(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    /// Canonical form.
    pub fn to_normal(&self) -> Result<NormalForm> {
        NormalForm::from_expr(self)
    }

    /// Canonical tree; `normalize(normalize(e)) == normalize(e)` structurally.
    pub fn normalize(&self) -> Result<Expr> {
        Ok(self.to_normal()?.to_expr())
    }

    /// Substitute symbols by expressions.
    pub fn substitute(&self, map: &std::collections::BTreeMap<Symbol, Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Sym(s) => map.get(s).cloned().unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(map))),
            Expr::Add(a, b) => Expr::add(a.substitute(map), b.substitute(map)),
            Expr::Sub(a, b) => Expr::sub(a.substitute(map), b.substitute(map)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(map), b.substitute(map)),
            Expr::Div(a, b) => Expr::div(a.substitute(map), b.substitute(map)),
            Expr::Pow(a, n) => Expr::pow(a.substitute(map), *n),
            Expr::Apply(f, a) => Expr::apply(*f, a.substitute(map)),
        }
    }
}

/// Normalized partial derivative with respect to `var`.
pub fn differentiate(e: &Expr, var: &str) -> Result<Expr> {
    Ok(e.to_normal()?.derivative(var).to_expr())
}

/// IEEE evaluation of the tree in its standard reading.
pub fn eval_at(e: &Expr, p: &EvalPoint) -> Result<f64> {
    let v = match e {
        Expr::Const(c) => rational_to_f64(c),
        Expr::Sym(s) => *p
            .get(s)
            .ok_or_else(|| Error::UndeclaredSymbol(s.to_string()))?,
        Expr::Neg(a) => -eval_at(a, p)?,
        Expr::Add(a, b) => eval_at(a, p)? + eval_at(b, p)?,
        Expr::Sub(a, b) => eval_at(a, p)? - eval_at(b, p)?,
        Expr::Mul(a, b) => eval_at(a, p)? * eval_at(b, p)?,
        Expr::Div(a, b) => {
            let d = eval_at(b, p)?;
            if d == 0.0 {
                return Err(Error::Singular(b.to_string()));
            }
            eval_at(a, p)? / d
        }
        Expr::Pow(a, n) => {
            let base = eval_at(a, p)?;
            if *n < 0 && base == 0.0 {
                return Err(Error::Singular(e.to_string()));
            }
            powi(base, *n)
        }
        Expr::Apply(f, a) => {
            let x = eval_at(a, p)?;
            match f {
                Func::Ln if x <= 0.0 => return Err(Error::Singular(e.to_string())),
                Func::Sqrt if x < 0.0 => return Err(Error::Singular(e.to_string())),
                _ => f.apply(x),
            }
        }
    };
    if !v.is_finite() {
        return Err(Error::Singular(e.to_string()));
    }
    Ok(v)
}

pub(crate) fn powi(base: f64, n: i64) -> f64 {
    match i32::try_from(n) {
        Ok(k) => base.powi(k),
        Err(_) => base.powf(n as f64),
    }
}

pub(crate) fn rational_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Closest rational with denominator at most `max_den`, if it reproduces `x`
/// to within `tol`.
pub fn reconstruct_rational(x: f64, max_den: i64, tol: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x.abs();
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let approx = h1 as f64 / k1 as f64;
        if (approx - x.abs()).abs() <= tol * x.abs().max(1.0) {
            let sign = if x < 0.0 { -1 } else { 1 };
            return Some(BigRational::new(
                BigInt::from(sign * h1),
                BigInt::from(k1),
            ));
        }
        let frac = r - a;
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

// Printing: precedence-aware, output re-parses to the same value.

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) => {
            if c.is_negative() {
                PREC_NEG
            } else if c.is_integer() {
                PREC_ATOM
            } else {
                PREC_MUL
            }
        }
        Expr::Sym(_) | Expr::Apply(..) => PREC_ATOM,
        Expr::Neg(_) => PREC_NEG,
        Expr::Add(..) | Expr::Sub(..) => PREC_ADD,
        Expr::Mul(..) | Expr::Div(..) => PREC_MUL,
        Expr::Pow(..) => PREC_POW,
    }
}

fn write_prec(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "(")?;
        write!(f, "{e}")?;
        write!(f, ")")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_integer() {
                    write!(f, "{}", c.numer())
                } else {
                    write!(f, "{}/{}", c.numer(), c.denom())
                }
            }
            Expr::Sym(s) => write!(f, "{s}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_prec(f, a, PREC_POW)
            }
            Expr::Add(a, b) => {
                write_prec(f, a, PREC_ADD)?;
                write!(f, " + ")?;
                write_prec(f, b, PREC_MUL)
            }
            Expr::Sub(a, b) => {
                write_prec(f, a, PREC_ADD)?;
                write!(f, " - ")?;
                write_prec(f, b, PREC_MUL)
            }
            Expr::Mul(a, b) => {
                write_prec(f, a, PREC_MUL)?;
                write!(f, "*")?;
                write_prec(f, b, PREC_NEG.max(PREC_MUL + 1))
            }
            Expr::Div(a, b) => {
                write_prec(f, a, PREC_MUL)?;
                write!(f, "/")?;
                write_prec(f, b, PREC_POW)
            }
            Expr::Pow(a, n) => {
                write_prec(f, a, PREC_ATOM)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Expr::Apply(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
