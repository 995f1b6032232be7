//! Vector fields, distributions and submersions on a single coordinate chart.

mod distribution;
mod field;
mod submersion;

use std::sync::Arc;

pub use distribution::{functionally_independent, Containment, Distribution, InvariantCheck, RankProfile};
pub use field::VectorField;
pub use submersion::{Projection, Submersion};

use crate::error::{Error, Result};
use crate::expr::{NormalForm, SamplingPolicy, SymbolKind, SymbolTable};

/// Ordered coordinates plus the sampling policy used for every numeric
/// decision on this chart.
#[derive(Clone, Debug)]
pub struct Chart {
    coords: Vec<String>,
    table: SymbolTable,
    policy: SamplingPolicy,
}

impl Chart {
    pub fn new<I, S>(coords: I) -> Result<Arc<Chart>>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Chart::with_policy(coords, SamplingPolicy::default())
    }

    pub fn with_policy<I, S>(coords: I, policy: SamplingPolicy) -> Result<Arc<Chart>>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let coords: Vec<String> = coords.into_iter().map(|s| s.as_ref().to_string()).collect();
        if coords.is_empty() {
            return Err(Error::Invalid("a chart needs at least one coordinate".into()));
        }
        let mut table = SymbolTable::new();
        for c in &coords {
            if table.contains(c) {
                return Err(Error::Invalid(format!("duplicate coordinate '{c}'")));
            }
            table.declare(c, SymbolKind::Coordinate);
        }
        Ok(Arc::new(Chart {
            coords,
            table,
            policy,
        }))
    }

    /// Same chart with abbreviations (`H = 1/(x+y)`) available to parsing.
    pub fn with_table(coords: Vec<String>, table: SymbolTable, policy: SamplingPolicy) -> Result<Arc<Chart>> {
        let chart = Chart::with_policy(&coords, policy)?;
        let mut chart = Arc::try_unwrap(chart).expect("fresh");
        for c in &coords {
            if table.kind(c) != Some(SymbolKind::Coordinate) {
                return Err(Error::Invalid(format!("coordinate '{c}' missing from table")));
            }
        }
        chart.table = table;
        Ok(Arc::new(chart))
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    pub fn policy(&self) -> &SamplingPolicy {
        &self.policy
    }

    pub fn exclusions(&self) -> &[NormalForm] {
        &self.policy.exclusions
    }

    pub fn parse(&self, text: &str) -> Result<NormalForm> {
        crate::expr::parse_expr(text, &self.table)?.to_normal()
    }

    /// The policy's admissible sample points (in coordinate order) at which
    /// every form in `regular` evaluates without singularity.
    pub fn sample_points(&self, regular: &[NormalForm]) -> Result<Vec<Vec<f64>>> {
        self.sample_points_n(regular, self.policy.samples)
    }

    pub fn sample_points_n(&self, regular: &[NormalForm], n: usize) -> Result<Vec<Vec<f64>>> {
        let pts = self.policy.admissible_points(&self.coords, regular, n);
        if pts.len() < n {
            return Err(Error::Degenerate(format!(
                "only {} of {n} admissible sample points found",
                pts.len()
            )));
        }
        Ok(pts)
    }

    /// Center of the sample box.
    pub fn center(&self) -> Vec<f64> {
        self.policy.center(&self.coords)
    }

    pub fn same_as(&self, other: &Chart) -> bool {
        self.coords == other.coords
    }
}

pub(crate) fn ensure_same(a: &Chart, b: &Chart) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::ChartMismatch(format!(
            "[{}] vs [{}]",
            a.coords.join(","),
            b.coords.join(",")
        )))
    }
}
