use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;

use super::{ensure_same, Chart};
use crate::error::{Error, Result};
use crate::expr::{parse_linear_in_derivations, zero_verdicts, Compiled, NormalForm, ZeroVerdict};

/// `X = Σ aⁱ ∂/∂xⁱ` in the coordinate frame of a chart.
#[derive(Clone, Debug)]
pub struct VectorField {
    chart: Arc<Chart>,
    coeffs: Vec<NormalForm>,
}

impl PartialEq for VectorField {
    fn eq(&self, other: &Self) -> bool {
        self.chart.same_as(&other.chart) && self.coeffs == other.coeffs
    }
}

impl VectorField {
    pub fn new(chart: &Arc<Chart>, coeffs: Vec<NormalForm>) -> Result<VectorField> {
        if coeffs.len() != chart.dim() {
            return Err(Error::Invalid(format!(
                "{} coefficients for a {}-dimensional chart",
                coeffs.len(),
                chart.dim()
            )));
        }
        for c in &coeffs {
            for s in c.symbols() {
                if chart.index(&s).is_none() {
                    return Err(Error::UndeclaredSymbol(s.to_string()));
                }
            }
        }
        Ok(VectorField {
            chart: chart.clone(),
            coeffs,
        })
    }

    /// Parses `coef * d/dx + ...`.
    pub fn parse(chart: &Arc<Chart>, text: &str) -> Result<VectorField> {
        let coeffs = parse_linear_in_derivations(text, chart.table())?;
        VectorField::new(chart, coeffs)
    }

    pub fn zero(chart: &Arc<Chart>) -> VectorField {
        VectorField {
            chart: chart.clone(),
            coeffs: vec![NormalForm::zero(); chart.dim()],
        }
    }

    /// `∂/∂name`.
    pub fn coordinate(chart: &Arc<Chart>, name: &str) -> Result<VectorField> {
        let i = chart
            .index(name)
            .ok_or_else(|| Error::UndeclaredSymbol(name.to_string()))?;
        let mut f = VectorField::zero(chart);
        f.coeffs[i] = NormalForm::one();
        Ok(f)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn coeffs(&self) -> &[NormalForm] {
        &self.coeffs
    }

    pub fn coeff(&self, name: &str) -> Option<&NormalForm> {
        self.chart.index(name).map(|i| &self.coeffs[i])
    }

    /// Directional derivative `X(f)`.
    pub fn apply(&self, f: &NormalForm) -> NormalForm {
        let mut out = NormalForm::zero();
        for (c, name) in self.coeffs.iter().zip(self.chart.coords()) {
            if c.is_zero() {
                continue;
            }
            let d = f.derivative(name);
            if d.is_zero() {
                continue;
            }
            out = out.add(&c.mul(&d));
        }
        out
    }

    /// `[X, Y]ⁱ = X(Yⁱ) − Y(Xⁱ)`.
    pub fn bracket(&self, other: &VectorField) -> Result<VectorField> {
        ensure_same(&self.chart, &other.chart)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| self.apply(b).sub(&other.apply(a)))
            .collect();
        Ok(VectorField {
            chart: self.chart.clone(),
            coeffs,
        })
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        ensure_same(&self.chart, &other.chart)?;
        Ok(VectorField {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.add(b)).collect(),
        })
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        ensure_same(&self.chart, &other.chart)?;
        Ok(VectorField {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.sub(b)).collect(),
        })
    }

    /// Multiplication by a function.
    pub fn scale(&self, f: &NormalForm) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().map(|a| a.mul(f)).collect(),
        }
    }

    pub fn scale_rational(&self, k: &BigRational) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().map(|a| a.scale(k)).collect(),
        }
    }

    pub fn neg(&self) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().map(NormalForm::neg).collect(),
        }
    }

    /// `Σ fᵢ Xᵢ`.
    pub fn combination(chart: &Arc<Chart>, weights: &[NormalForm], fields: &[VectorField]) -> Result<VectorField> {
        let mut acc = VectorField::zero(chart);
        for (w, f) in weights.iter().zip(fields) {
            if w.is_zero() {
                continue;
            }
            acc = acc.add(&f.scale(w))?;
        }
        Ok(acc)
    }

    pub fn is_literal_zero(&self) -> bool {
        self.coeffs.iter().all(NormalForm::is_zero)
    }

    /// Combined zero verdict over all coefficients.
    pub fn zero_verdict(&self) -> ZeroVerdict {
        if self.is_literal_zero() {
            return ZeroVerdict::Zero(crate::expr::Certification::Symbolic);
        }
        ZeroVerdict::all(zero_verdicts(&self.coeffs, self.chart.policy()))
    }

    pub fn compile(&self) -> Result<Compiled> {
        Compiled::new(&self.coeffs, self.chart.coords())
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.compile()?.eval(point)
    }

    /// Same coefficients on another chart that contains every symbol used,
    /// with zero components on coordinates this chart lacks.
    pub fn extend_to(&self, chart: &Arc<Chart>) -> Result<VectorField> {
        let mut coeffs = vec![NormalForm::zero(); chart.dim()];
        for (c, name) in self.coeffs.iter().zip(self.chart.coords()) {
            let i = chart
                .index(name)
                .ok_or_else(|| Error::ChartMismatch(format!("coordinate '{name}' missing")))?;
            coeffs[i] = c.clone();
        }
        VectorField::new(chart, coeffs)
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (c, name) in self.coeffs.iter().zip(self.chart.coords()) {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match c.as_constant() {
                Some(k) if k == BigRational::from_integer(1.into()) => write!(f, "d/d{name}")?,
                _ => write!(f, "({c})*d/d{name}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wave_bracket() {
        let chart = Chart::new(["x", "y", "z", "p", "q"]).unwrap();
        let f1 = VectorField::parse(&chart, "d/dx + p*d/dz").unwrap();
        let f2 = VectorField::parse(&chart, "d/dp").unwrap();
        let b = f1.bracket(&f2).unwrap();
        assert_eq!(b, VectorField::parse(&chart, "-d/dz").unwrap());
        assert!(f1.bracket(&f1).unwrap().is_literal_zero());
    }

    #[test]
    fn liouville_bracket() {
        let chart = Chart::new(["x", "y", "z", "p", "q", "r", "t"]).unwrap();
        let f1 = VectorField::parse(
            &chart,
            "d/dx + p*d/dz + r*d/dp + exp(z)*d/dq + q*exp(z)*d/dt",
        )
        .unwrap();
        let f2 = VectorField::parse(&chart, "d/dr").unwrap();
        assert_eq!(
            f1.bracket(&f2).unwrap(),
            VectorField::parse(&chart, "-d/dp").unwrap()
        );
    }

    #[test]
    fn display_reparses() {
        let chart = Chart::new(["x", "y", "z"]).unwrap();
        let f = VectorField::parse(&chart, "d/dx - (x+y)*d/dz + exp(-z)*d/dy").unwrap();
        let again = VectorField::parse(&chart, &f.to_string()).unwrap();
        assert_eq!(f, again);
        assert_eq!(VectorField::zero(&chart).to_string(), "0");
    }

    #[test]
    fn undeclared_symbol_in_field() {
        let chart = Chart::new(["x", "y"]).unwrap();
        assert!(matches!(
            VectorField::parse(&chart, "w*d/dx"),
            Err(Error::UndeclaredSymbol(s)) if s == "w"
        ));
        assert!(VectorField::parse(&chart, "d/dw").is_err());
    }
}
