//! System definition files.
//!
//! ```text
//! eds-spec 1
//! # comment
//! name = liouville
//! coordinates = x y z p q r t
//! let H = 1/(x+y)
//! domain = -2 2
//! domain x = 0.5 1.5
//! exclude = x + y
//! F = d/dx + p*d/dz
//! G = d/dy + q*d/dz
//! invariant_F = y
//! invariant_G J = r - p^2/2
//! ```
//!
//! Every line is `key [argument] = value`. Keys that build lists (`F`, `G`,
//! `invariant_*`, `base_frame_*`, `symmetry_*`, `frame_*`, `exclude`, `let`,
//! `domain`) may repeat; all other keys appear at most once.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use eds_core::darboux::{Invariant, InvariantSet};
use eds_core::decomposable::DecomposableSystem;
use eds_core::expr::{parse_expr, SamplingPolicy, SymbolKind, SymbolTable};
use eds_core::geometry::{Chart, Distribution, VectorField};
use eds_core::Error as CoreError;
use sha2::{Digest, Sha256};

pub const HEADER: &str = "eds-spec 1";

#[derive(Clone, Debug, PartialEq)]
pub struct SpecError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl SpecError {
    fn at(line: usize, column: usize, message: impl Into<String>) -> SpecError {
        SpecError {
            line: Some(line),
            column: Some(column),
            field: None,
            message: message.into(),
        }
    }

    fn field(field: &str, message: impl Into<String>) -> SpecError {
        SpecError {
            line: None,
            column: None,
            field: Some(field.to_string()),
            message: message.into(),
        }
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column, &self.field) {
            (Some(l), Some(c), _) => write!(f, "line {l}, column {c}: {}", self.message),
            (_, _, Some(name)) => write!(f, "field '{name}': {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for SpecError {}

/// Source text of a value with its position (1-based line and column).
#[derive(Clone, Debug)]
pub struct Located {
    pub text: String,
    pub arg: Option<String>,
    pub line: usize,
    pub column: usize,
}

impl Located {
    /// Maps a core parse error back into the file.
    pub fn error(&self, e: CoreError) -> SpecError {
        match e {
            CoreError::Parse { offset, message } => {
                let chars = self.text[..offset.min(self.text.len())].chars().count();
                SpecError::at(self.line, self.column + chars, message)
            }
            CoreError::UndeclaredSymbol(name) => {
                let col = find_word(&self.text, &name).map_or(self.column, |i| self.column + i);
                SpecError::at(self.line, col, format!("undeclared symbol '{name}'"))
            }
            other => SpecError::at(self.line, self.column, other.to_string()),
        }
    }
}

fn find_word(text: &str, word: &str) -> Option<usize> {
    let ident = |c: char| c.is_alphanumeric() || c == '_';
    let mut start = 0;
    while let Some(i) = text[start..].find(word) {
        let at = start + i;
        let before = text[..at].chars().next_back().map_or(false, ident);
        let after = text[at + word.len()..].chars().next().map_or(false, ident);
        if !before && !after {
            return Some(text[..at].chars().count());
        }
        start = at + word.len();
    }
    None
}

/// Settings from the command line that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub name: String,
    pub digest: String,
    pub chart: Arc<Chart>,
    pub f: Vec<VectorField>,
    pub g: Vec<VectorField>,
    pub invariants: InvariantSet,
    /// Fields on the base factors; their coordinates exist only once the
    /// Darboux projection has been built.
    pub base_frame_f: Vec<Located>,
    pub base_frame_g: Vec<Located>,
    pub symmetries_f: Vec<VectorField>,
    pub symmetries_g: Vec<VectorField>,
    pub frame_a: Vec<VectorField>,
    pub frame_b: Vec<VectorField>,
    pub pde_residual: Option<Located>,
    pub independent: Option<[String; 2]>,
    pub gamma1: Option<String>,
    pub gamma2: Option<String>,
    pub urange: Option<(f64, f64)>,
    pub vrange: Option<(f64, f64)>,
    pub grid: Option<(usize, usize)>,
    pub m0: Option<Vec<f64>>,
}

impl SystemSpec {
    pub fn has_system(&self) -> bool {
        !self.f.is_empty() && !self.g.is_empty()
    }

    pub fn system(&self) -> Result<DecomposableSystem, SpecError> {
        if !self.has_system() {
            return Err(SpecError::field("F", "both F and G generators are required"));
        }
        let f = Distribution::new(&self.chart, self.f.clone()).map_err(|e| SpecError::field("F", e.to_string()))?;
        let g = Distribution::new(&self.chart, self.g.clone()).map_err(|e| SpecError::field("G", e.to_string()))?;
        DecomposableSystem::new(f, g).map_err(|e| SpecError::field("F", e.to_string()))
    }

    pub fn policy(&self) -> &SamplingPolicy {
        self.chart.policy()
    }
}

pub fn load_system_spec(path: &Path, overrides: &Overrides) -> Result<SystemSpec, SpecError> {
    let bytes = std::fs::read(path).map_err(|e| SpecError {
        line: None,
        column: None,
        field: None,
        message: format!("{}: {e}", path.display()),
    })?;
    let text = String::from_utf8(bytes).map_err(|_| SpecError {
        line: None,
        column: None,
        field: None,
        message: format!("{}: not valid UTF-8", path.display()),
    })?;
    parse_spec(&text, overrides)
}

struct Entry {
    key: String,
    value: Located,
}

fn split_lines(text: &str) -> Result<Vec<Entry>, SpecError> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() || l.trim_start().starts_with('#') => continue,
            Some((i, l)) => break (i + 1, l.trim()),
            None => return Err(SpecError::at(1, 1, format!("missing header '{HEADER}'"))),
        }
    };
    if header.1 != HEADER {
        return Err(SpecError::at(header.0, 1, format!("expected header '{HEADER}', found '{}'", header.1)));
    }
    let mut out = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some(eq) = raw.find('=') else {
            let col = raw.len() - trimmed.len() + 1;
            return Err(SpecError::at(line, col, "expected 'key = value'"));
        };
        let lhs: Vec<&str> = raw[..eq].split_whitespace().collect();
        let (key, arg) = match lhs.as_slice() {
            [k] => (k.to_string(), None),
            [k, a] => (k.to_string(), Some(a.to_string())),
            _ => return Err(SpecError::at(line, 1, "expected 'key [argument] = value'")),
        };
        let rest = &raw[eq + 1..];
        let lead = rest.len() - rest.trim_start().len();
        let value = rest.trim();
        out.push(Entry {
            key,
            value: Located {
                text: value.to_string(),
                arg,
                line,
                column: raw[..eq + 1 + lead].chars().count() + 1,
            },
        });
    }
    Ok(out)
}

fn number<T: std::str::FromStr>(v: &Located, what: &str) -> Result<T, SpecError> {
    v.text
        .parse()
        .map_err(|_| SpecError::at(v.line, v.column, format!("expected {what}, found '{}'", v.text)))
}

fn numbers(v: &Located) -> Result<Vec<f64>, SpecError> {
    v.text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| SpecError::at(v.line, v.column, format!("expected a number, found '{s}'")))
        })
        .collect()
}

fn range(v: &Located) -> Result<(f64, f64), SpecError> {
    match numbers(v)?.as_slice() {
        [lo, hi] if lo < hi => Ok((*lo, *hi)),
        _ => Err(SpecError::at(v.line, v.column, "expected 'lo hi' with lo < hi")),
    }
}

pub fn parse_grid(text: &str) -> Option<(usize, usize)> {
    let (a, b) = text.trim().split_once('x')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

const REPEATABLE: [&str; 13] = [
    "F",
    "G",
    "invariant_F",
    "invariant_G",
    "base_frame_F",
    "base_frame_G",
    "symmetry_F",
    "symmetry_G",
    "frame_A",
    "frame_B",
    "exclude",
    "let",
    "domain",
];

const SINGLE: [&str; 13] = [
    "name",
    "seed",
    "samples",
    "tol",
    "pde_residual",
    "independent",
    "gamma1",
    "gamma2",
    "urange",
    "vrange",
    "grid",
    "m0",
    "coordinates",
];

pub fn parse_spec(text: &str, overrides: &Overrides) -> Result<SystemSpec, SpecError> {
    let entries = split_lines(text)?;
    let mut seen: Vec<&str> = Vec::new();
    for e in &entries {
        let k = e.key.as_str();
        if !REPEATABLE.contains(&k) && !SINGLE.contains(&k) {
            return Err(SpecError::at(e.value.line, 1, format!("unknown key '{k}'")));
        }
        if SINGLE.contains(&k) {
            if seen.contains(&k) {
                return Err(SpecError::at(e.value.line, 1, format!("key '{k}' given twice")));
            }
            seen.push(k);
        }
        let wants_arg = matches!(k, "let" | "domain" | "invariant_F" | "invariant_G");
        if e.value.arg.is_some() && !wants_arg {
            return Err(SpecError::at(e.value.line, 1, format!("key '{k}' takes no argument")));
        }
        if k == "let" && e.value.arg.is_none() {
            return Err(SpecError::at(e.value.line, 1, "expected 'let NAME = expression'"));
        }
    }
    fn all<'a>(entries: &'a [Entry], key: &'a str) -> impl Iterator<Item = &'a Located> + 'a {
        entries.iter().filter(move |e| e.key == key).map(|e| &e.value)
    }
    let all = |key: &'static str| all(&entries, key);
    let one = |key: &'static str| all(key).next();

    let coords_line = one("coordinates").ok_or_else(|| SpecError::field("coordinates", "missing"))?;
    let coords: Vec<String> = coords_line.text.split_whitespace().map(str::to_string).collect();
    if coords.is_empty() {
        return Err(SpecError::at(coords_line.line, coords_line.column, "no coordinates"));
    }
    let mut table = SymbolTable::new();
    for c in &coords {
        let valid = c.chars().next().map_or(false, |ch| ch.is_alphabetic())
            && c.chars().all(|ch| ch.is_alphanumeric() || ch == '_');
        if !valid || table.contains(c) {
            let col = find_word(&coords_line.text, c).unwrap_or(0) + coords_line.column;
            return Err(SpecError::at(coords_line.line, col, format!("invalid or repeated coordinate '{c}'")));
        }
        table.declare(c, SymbolKind::Coordinate);
    }
    for l in all("let") {
        let name = l.arg.clone().unwrap_or_default();
        if table.contains(&name) {
            return Err(SpecError::at(l.line, 1, format!("'{name}' is already declared")));
        }
        let body = parse_expr(&l.text, &table).map_err(|e| l.error(e))?;
        table.define(&name, body);
    }

    let mut policy = SamplingPolicy::default();
    for d in all("domain") {
        let r = range(d)?;
        match &d.arg {
            None => policy.default_box = r,
            Some(c) if coords.contains(c) => {
                policy.boxes.insert(c.clone(), r);
            }
            Some(c) => return Err(SpecError::at(d.line, 1, format!("domain for unknown coordinate '{c}'"))),
        }
    }
    for x in all("exclude") {
        let e = parse_expr(&x.text, &table).and_then(|e| e.to_normal()).map_err(|e| x.error(e))?;
        policy.exclusions.push(e);
    }
    if let Some(v) = one("seed") {
        policy.seed = number(v, "an unsigned integer")?;
    }
    if let Some(v) = one("samples") {
        policy.samples = number(v, "a positive integer")?;
    }
    if let Some(v) = one("tol") {
        policy.tolerance = number(v, "a number")?;
    }
    if let Some(s) = overrides.seed {
        policy.seed = s;
    }
    if let Some(s) = overrides.samples {
        policy.samples = s;
    }
    if let Some(t) = overrides.tol {
        policy.tolerance = t;
    }
    if policy.samples == 0 {
        return Err(SpecError::field("samples", "must be positive"));
    }
    if !(policy.tolerance > 0.0) {
        return Err(SpecError::field("tol", "must be positive"));
    }
    let chart = Chart::with_table(coords.clone(), table, policy).map_err(|e| coords_line.error(e))?;

    let fields = |key: &'static str| -> Result<Vec<VectorField>, SpecError> {
        all(key)
            .map(|v| VectorField::parse(&chart, &v.text).map_err(|e| v.error(e)))
            .collect()
    };
    let invariants = |key: &'static str| -> Result<Vec<Invariant>, SpecError> {
        all(key)
            .map(|v| {
                let e = chart.parse(&v.text).map_err(|e| v.error(e))?;
                Ok(match &v.arg {
                    Some(n) => Invariant::named(n, e),
                    None => Invariant::new(e),
                })
            })
            .collect()
    };

    let independent = match one("independent") {
        None => None,
        Some(v) => {
            let names: Vec<&str> = v.text.split_whitespace().collect();
            match names.as_slice() {
                [a, b] => {
                    for n in [a, b] {
                        if !coords.iter().any(|c| c == n) {
                            let col = v.column + find_word(&v.text, n).unwrap_or(0);
                            return Err(SpecError::at(v.line, col, format!("undeclared symbol '{n}'")));
                        }
                    }
                    Some([a.to_string(), b.to_string()])
                }
                _ => return Err(SpecError::at(v.line, v.column, "expected two coordinate names")),
            }
        }
    };
    let grid = match one("grid") {
        None => None,
        Some(v) => Some(parse_grid(&v.text).ok_or_else(|| SpecError::at(v.line, v.column, "expected 'NxM'"))?),
    };
    let m0 = one("m0").map(numbers).transpose()?;
    if let Some(m) = &m0 {
        if m.len() != coords.len() {
            let v = one("m0").expect("present");
            return Err(SpecError::at(v.line, v.column, format!("m0 needs {} values", coords.len())));
        }
    }

    Ok(SystemSpec {
        name: one("name").map_or_else(|| "unnamed".to_string(), |v| v.text.clone()),
        digest: format!("{:x}", Sha256::digest(text.as_bytes())),
        f: fields("F")?,
        g: fields("G")?,
        invariants: InvariantSet {
            of_f: invariants("invariant_F")?,
            of_g: invariants("invariant_G")?,
        },
        base_frame_f: all("base_frame_F").cloned().collect(),
        base_frame_g: all("base_frame_G").cloned().collect(),
        symmetries_f: fields("symmetry_F")?,
        symmetries_g: fields("symmetry_G")?,
        frame_a: fields("frame_A")?,
        frame_b: fields("frame_B")?,
        pde_residual: one("pde_residual").cloned(),
        independent,
        gamma1: one("gamma1").map(|v| v.text.clone()),
        gamma2: one("gamma2").map(|v| v.text.clone()),
        urange: one("urange").map(range).transpose()?,
        vrange: one("vrange").map(range).transpose()?,
        grid,
        m0,
        chart,
    })
}
