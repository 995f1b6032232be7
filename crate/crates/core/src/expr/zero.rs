//! Hybrid symbolic/numeric zero test.
//!
//! A form that normalizes to the literal `0` is certified symbolically.
//! Otherwise it is evaluated at random admissible points of the sampling
//! box; any value above the scaled tolerance is a witness for `NonZero`.
//! Passing every point yields a numerically certified `Zero`.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Compiled, Expr, NormalForm};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Certification {
    Symbolic,
    Numeric,
}

impl Certification {
    pub fn as_str(self) -> &'static str {
        match self {
            Certification::Symbolic => "symbolic",
            Certification::Numeric => "numeric",
        }
    }

    pub fn weaker(self, other: Certification) -> Certification {
        if self == Certification::Numeric || other == Certification::Numeric {
            Certification::Numeric
        } else {
            Certification::Symbolic
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ZeroVerdict {
    Zero(Certification),
    NonZero,
    Unknown,
}

impl ZeroVerdict {
    pub fn is_zero(self) -> bool {
        matches!(self, ZeroVerdict::Zero(_))
    }

    /// Verdict for "all of these are zero".
    pub fn all(verdicts: impl IntoIterator<Item = ZeroVerdict>) -> ZeroVerdict {
        let mut acc = ZeroVerdict::Zero(Certification::Symbolic);
        for v in verdicts {
            acc = match (acc, v) {
                (ZeroVerdict::NonZero, _) | (_, ZeroVerdict::NonZero) => ZeroVerdict::NonZero,
                (ZeroVerdict::Unknown, _) | (_, ZeroVerdict::Unknown) => ZeroVerdict::Unknown,
                (ZeroVerdict::Zero(a), ZeroVerdict::Zero(b)) => ZeroVerdict::Zero(a.weaker(b)),
            };
        }
        acc
    }
}

impl fmt::Display for ZeroVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZeroVerdict::Zero(c) => write!(f, "zero ({})", c.as_str()),
            ZeroVerdict::NonZero => write!(f, "nonzero"),
            ZeroVerdict::Unknown => write!(f, "unknown"),
        }
    }
}

/// Sample count, domain box, tolerance, seed and singular-locus exclusions.
#[derive(Clone, Debug)]
pub struct SamplingPolicy {
    pub samples: usize,
    pub default_box: (f64, f64),
    pub boxes: BTreeMap<String, (f64, f64)>,
    pub tolerance: f64,
    pub seed: u64,
    /// Points with `|excl| <= exclusion_margin` are rejected.
    pub exclusions: Vec<NormalForm>,
    pub exclusion_margin: f64,
    pub max_attempts: usize,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy {
            samples: 8,
            default_box: (-2.0, 2.0),
            boxes: BTreeMap::new(),
            tolerance: 1e-9,
            seed: 0x5eed,
            exclusions: Vec::new(),
            exclusion_margin: 1e-3,
            max_attempts: 2000,
        }
    }
}

impl SamplingPolicy {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn interval(&self, symbol: &str) -> (f64, f64) {
        self.boxes.get(symbol).copied().unwrap_or(self.default_box)
    }

    /// Center of the sampling box.
    pub fn center<S: AsRef<str>>(&self, symbols: &[S]) -> Vec<f64> {
        symbols
            .iter()
            .map(|s| {
                let (lo, hi) = self.interval(s.as_ref());
                0.5 * (lo + hi)
            })
            .collect()
    }

    /// Up to `count` admissible points over `symbols` (in that order) at which
    /// all of `regular` evaluate without singularity. Deterministic for a
    /// fixed seed; fewer points are returned when the attempt cap is hit.
    pub fn admissible_points<S: AsRef<str>>(
        &self,
        symbols: &[S],
        regular: &[NormalForm],
        count: usize,
    ) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let excl = Compiled::new(&self.exclusions, symbols).ok();
        let reg = Compiled::new(regular, symbols).ok();
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count && attempts < self.max_attempts {
            attempts += 1;
            let p: Vec<f64> = symbols
                .iter()
                .map(|s| {
                    let (lo, hi) = self.interval(s.as_ref());
                    rng.gen_range(lo..=hi)
                })
                .collect();
            if let Some(ex) = &excl {
                match ex.eval(&p) {
                    Ok(vals) if vals.iter().all(|v| v.abs() > self.exclusion_margin) => {}
                    _ => continue,
                }
            }
            if let Some(r) = &reg {
                if r.eval(&p).is_err() {
                    continue;
                }
            }
            out.push(p);
        }
        out
    }
}

/// Zero test on an expression tree.
pub fn is_zero(e: &Expr, policy: &SamplingPolicy) -> Result<ZeroVerdict> {
    Ok(zero_verdict(&e.to_normal()?, policy))
}

/// Zero test on a normal form.
pub fn zero_verdict(nf: &NormalForm, policy: &SamplingPolicy) -> ZeroVerdict {
    zero_verdicts(std::slice::from_ref(nf), policy)[0]
}

/// Zero tests sharing one set of sample points.
pub fn zero_verdicts(forms: &[NormalForm], policy: &SamplingPolicy) -> Vec<ZeroVerdict> {
    let mut out = vec![ZeroVerdict::Zero(Certification::Symbolic); forms.len()];
    let pending: Vec<usize> = (0..forms.len()).filter(|&i| !forms[i].is_zero()).collect();
    if pending.is_empty() {
        return out;
    }
    let mut symbols = std::collections::BTreeSet::new();
    for &i in &pending {
        symbols.extend(forms[i].symbols());
    }
    for ex in &policy.exclusions {
        symbols.extend(ex.symbols());
    }
    let symbols: Vec<String> = symbols.iter().map(|s| s.to_string()).collect();
    let targets: Vec<NormalForm> = pending.iter().map(|&i| forms[i].clone()).collect();
    let compiled = match Compiled::new(&targets, &symbols) {
        Ok(c) => c,
        Err(_) => {
            for &i in &pending {
                out[i] = ZeroVerdict::Unknown;
            }
            return out;
        }
    };
    // Per-form rejection would change the point set per form; instead a point
    // is rejected when any form is singular there.
    let points = policy.admissible_points(&symbols, &targets, policy.samples);
    if points.len() < policy.samples {
        for &i in &pending {
            out[i] = ZeroVerdict::Unknown;
        }
        return out;
    }
    let mut nonzero = vec![false; pending.len()];
    for p in &points {
        let (vals, mags) = match compiled.eval_with_magnitude(p) {
            Ok(v) => v,
            Err(_) => continue,
        };
        for (k, (v, m)) in vals.iter().zip(&mags).enumerate() {
            if !v.is_finite() || v.abs() > policy.tolerance * m.max(1.0) {
                nonzero[k] = true;
            }
        }
    }
    for (k, &i) in pending.iter().enumerate() {
        out[i] = if nonzero[k] {
            ZeroVerdict::NonZero
        } else {
            ZeroVerdict::Zero(Certification::Numeric)
        };
    }
    out
}
