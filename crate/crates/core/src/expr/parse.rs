//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | base ('^' integer)?
//! base   := number | ident | func '(' expr ')' | '(' expr ')' | 'd/d' ident
//! ```
//!
//! Unary minus binds looser than `^`, so `-q^2` reads as `-(q^2)`. The
//! `d/d<coord>` token is only accepted by [`parse_linear_in_derivations`].

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{Expr, Func, NormalForm, Symbol};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    Coordinate,
    Parameter,
}

/// Declared identifiers, with optional named abbreviations (`H = 1/(x+y)`)
/// that are expanded during parsing.
#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    entries: BTreeMap<String, SymbolKind>,
    order: Vec<String>,
    macros: BTreeMap<String, Expr>,
}

impl SymbolTable {
    pub fn new() -> SymbolTable {
        SymbolTable::default()
    }

    pub fn coordinates<I, S>(names: I) -> SymbolTable
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut t = SymbolTable::new();
        for n in names {
            t.declare(n.as_ref(), SymbolKind::Coordinate);
        }
        t
    }

    pub fn declare(&mut self, name: &str, kind: SymbolKind) {
        if self.entries.insert(name.to_string(), kind).is_none() {
            self.order.push(name.to_string());
        }
    }

    /// Registers an abbreviation. The body must only use declared names.
    pub fn define(&mut self, name: &str, body: Expr) {
        self.macros.insert(name.to_string(), body);
    }

    pub fn kind(&self, name: &str) -> Option<SymbolKind> {
        self.entries.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    pub fn coordinate_names(&self) -> Vec<String> {
        self.order
            .iter()
            .filter(|n| self.entries[*n] == SymbolKind::Coordinate)
            .cloned()
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Deriv(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic()
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                let lit = &text[i..j];
                let value = parse_decimal(lit).ok_or_else(|| Error::Parse {
                    offset: i,
                    message: format!("malformed number '{lit}'"),
                })?;
                i = j;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if is_ident_start(c) => {
                // `d/d<ident>` derivation token
                if c == b'd'
                    && bytes.get(i + 1) == Some(&b'/')
                    && bytes.get(i + 2) == Some(&b'd')
                    && bytes.get(i + 3).is_some_and(|b| is_ident_start(*b))
                {
                    let mut j = i + 3;
                    while j < bytes.len() && is_ident_char(bytes[j]) {
                        j += 1;
                    }
                    out.push((Tok::Deriv(text[i + 3..j].to_string()), start));
                    i = j;
                    continue;
                }
                let mut j = i;
                while j < bytes.len() && is_ident_char(bytes[j]) {
                    j += 1;
                }
                out.push((Tok::Ident(text[i..j].to_string()), start));
                i = j;
                continue;
            }
            _ => {
                return Err(Error::Parse {
                    offset: i,
                    message: format!("unexpected character '{}'", text[i..].chars().next().unwrap()),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

fn parse_decimal(lit: &str) -> Option<BigRational> {
    let (int_part, frac_part) = match lit.split_once('.') {
        Some((a, b)) => (a, b),
        None => (lit, ""),
    };
    if frac_part.contains('.') || (int_part.is_empty() && frac_part.is_empty()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().ok()?;
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    Some(BigRational::new(num, den))
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    table: &'a SymbolTable,
    allow_deriv: bool,
}

/// Prefix used for derivation placeholders; never a valid identifier.
const DERIV_PREFIX: &str = "d/d";

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, o)| *o).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::add(lhs, self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Expr::mul(lhs, self.factor()?);
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Expr::div(lhs, self.factor()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        let base = self.base()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let n = self.integer_exponent()?;
            return Ok(Expr::pow(base, n));
        }
        Ok(base)
    }

    fn integer_exponent(&mut self) -> Result<i64> {
        let parenthesized = self.peek() == Some(&Tok::LParen);
        if parenthesized {
            self.pos += 1;
        }
        let negative = self.peek() == Some(&Tok::Minus);
        if negative {
            self.pos += 1;
        }
        let value = match self.peek() {
            Some(Tok::Num(v)) if v.is_integer() => {
                let v = v.to_integer();
                self.pos += 1;
                i64::try_from(v).or_else(|_| self.err("exponent too large"))?
            }
            _ => return self.err("expected integer exponent"),
        };
        if parenthesized {
            if self.peek() != Some(&Tok::RParen) {
                return self.err("expected ')'");
            }
            self.pos += 1;
        }
        Ok(if negative { -value } else { value })
    }

    fn base(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of input");
        };
        let here = self.offset();
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Tok::Deriv(name) => {
                if !self.allow_deriv {
                    return self.err("derivation token not allowed in a scalar expression");
                }
                if self.table.kind(&name) != Some(super::SymbolKind::Coordinate) {
                    return Err(Error::UndeclaredSymbol(name));
                }
                self.pos += 1;
                Ok(Expr::Sym(Symbol::from(format!("{DERIV_PREFIX}{name}"))))
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if let Some(f) = Func::from_name(&name) {
                    if self.peek() != Some(&Tok::LParen) {
                        return Err(Error::Parse {
                            offset: here,
                            message: format!("function '{name}' requires '('"),
                        });
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    if self.peek() != Some(&Tok::RParen) {
                        return self.err("expected ')'");
                    }
                    self.pos += 1;
                    return Ok(Expr::apply(f, arg));
                }
                if let Some(body) = self.table.macros.get(&name) {
                    return Ok(body.clone());
                }
                if !self.table.contains(&name) {
                    return Err(Error::UndeclaredSymbol(name));
                }
                Ok(Expr::Sym(Symbol::from(name)))
            }
            _ => self.err("expected a number, identifier or '('"),
        }
    }
}

fn run_parser(text: &str, table: &SymbolTable, allow_deriv: bool) -> Result<Expr> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        table,
        allow_deriv,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

/// Parses a scalar expression; every identifier must be declared.
pub fn parse_expr(text: &str, table: &SymbolTable) -> Result<Expr> {
    run_parser(text, table, false)
}

/// Parses `Σ coef * d/d<coord>` and returns the coefficient of each
/// coordinate (in the table's coordinate order). The text must be linear in
/// the derivation tokens.
pub fn parse_linear_in_derivations(text: &str, table: &SymbolTable) -> Result<Vec<NormalForm>> {
    let e = run_parser(text, table, true)?;
    let nf = e.to_normal()?;
    let coords = table.coordinate_names();
    let mut out = vec![NormalForm::zero(); coords.len()];
    let index: BTreeMap<String, usize> = coords
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("{DERIV_PREFIX}{c}"), i))
        .collect();
    for (m, c) in nf.terms() {
        let derivs: Vec<_> = m
            .factors()
            .iter()
            .filter(|(a, _)| matches!(a, super::Atom::Sym(s) if s.starts_with(DERIV_PREFIX)))
            .collect();
        let (slot, rest) = match derivs.as_slice() {
            [(super::Atom::Sym(s), 1)] => {
                let rest: Vec<_> = m
                    .factors()
                    .iter()
                    .filter(|(a, _)| !matches!(a, super::Atom::Sym(t) if t == s))
                    .cloned()
                    .collect();
                (index[&**s], rest)
            }
            _ => {
                return Err(Error::Parse {
                    offset: 0,
                    message: format!("'{text}' is not linear in d/d<coord> terms"),
                })
            }
        };
        if rest.iter().any(|(a, _)| atom_mentions_deriv(a)) {
            return Err(Error::Parse {
                offset: 0,
                message: format!("'{text}' has a derivation inside a coefficient"),
            });
        }
        let mut term = NormalForm::constant(c.clone());
        for (atom, e) in rest {
            term = term.mul(&atom_nf(atom)?.pow(e)?);
        }
        out[slot] = out[slot].add(&term);
    }
    Ok(out)
}

fn atom_mentions_deriv(a: &super::Atom) -> bool {
    match a {
        super::Atom::Sym(s) => s.starts_with(DERIV_PREFIX),
        super::Atom::Apply(_, inner) | super::Atom::Inv(inner) => {
            inner.symbols().iter().any(|s| s.starts_with(DERIV_PREFIX))
        }
    }
}

fn atom_nf(a: super::Atom) -> Result<NormalForm> {
    Ok(match a {
        super::Atom::Sym(s) => NormalForm::symbol(&s),
        super::Atom::Apply(f, inner) => NormalForm::apply(f, *inner)?,
        super::Atom::Inv(inner) => inner.inv()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> SymbolTable {
        SymbolTable::coordinates(["x", "y", "z", "p", "q", "r", "t"])
    }

    #[test]
    fn parses_liouville_invariant_structure() {
        let e = parse_expr("t - q^2/2", &table()).unwrap();
        let expected = Expr::sub(
            Expr::sym("t"),
            Expr::div(Expr::pow(Expr::sym("q"), 2), Expr::int(2)),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn parses_goursat_coefficient_structure() {
        let e = parse_expr("6*z/(x+y)^2", &table()).unwrap();
        let expected = Expr::div(
            Expr::mul(Expr::int(6), Expr::sym("z")),
            Expr::pow(Expr::add(Expr::sym("x"), Expr::sym("y")), 2),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn atom_and_numbers() {
        assert_eq!(parse_expr("x", &table()).unwrap(), Expr::sym("x"));
        assert_eq!(parse_expr("0.25", &table()).unwrap(), Expr::rational(1, 4));
        assert_eq!(
            parse_expr("x^-2", &table()).unwrap(),
            Expr::pow(Expr::sym("x"), -2)
        );
        assert_eq!(
            parse_expr("x^(-2)", &table()).unwrap(),
            Expr::pow(Expr::sym("x"), -2)
        );
    }

    #[test]
    fn unary_minus_reads_as_negated_power() {
        let e = parse_expr("-q^2", &table()).unwrap();
        assert_eq!(e, Expr::Neg(Box::new(Expr::pow(Expr::sym("q"), 2))));
    }

    #[test]
    fn undeclared_symbol_is_named() {
        match parse_expr("x + w", &table()) {
            Err(Error::UndeclaredSymbol(s)) => assert_eq!(s, "w"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_offset() {
        match parse_expr("x + * y", &table()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        match parse_expr("exp x", &table()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_expr("(x+y", &table()), Err(Error::Parse { offset: 4, .. })));
    }

    #[test]
    fn macros_expand() {
        let mut t = table();
        t.define("H", parse_expr("1/(x+y)", &t).unwrap());
        let e = parse_expr("H^2", &t).unwrap().to_normal().unwrap();
        let f = parse_expr("(x+y)^-2", &t).unwrap().to_normal().unwrap();
        assert_eq!(e, f);
    }

    #[test]
    fn vector_field_syntax() {
        let t = table();
        let c = parse_linear_in_derivations(
            "d/dx + p*d/dz + r*d/dp + exp(z)*d/dq + q*exp(z)*d/dt",
            &t,
        )
        .unwrap();
        let expect = |s: &str| parse_expr(s, &t).unwrap().to_normal().unwrap();
        assert_eq!(c[0], expect("1"));
        assert_eq!(c[1], expect("0"));
        assert_eq!(c[2], expect("p"));
        assert_eq!(c[3], expect("r"));
        assert_eq!(c[4], expect("exp(z)"));
        assert_eq!(c[6], expect("q*exp(z)"));
        let d = parse_linear_in_derivations("-(x+y)*d/dx - d/dx", &t).unwrap();
        assert_eq!(d[0], expect("-x-y-1"));
        assert!(parse_linear_in_derivations("d/dx*d/dy", &t).is_err());
        assert!(parse_linear_in_derivations("x", &t).is_err());
        let zero = parse_linear_in_derivations("0", &t).unwrap();
        assert!(zero.iter().all(NormalForm::is_zero));
    }
}
