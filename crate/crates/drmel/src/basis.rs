//! The basis vector q(x) of the density ratio model.
//!
//! Every log density ratio in the model is a linear combination of these
//! components. The first component is always the constant 1, which absorbs
//! the normalization of each population.

use crate::error::{Error, Result};
use nalgebra::DVector;
use std::fmt;
use std::str::FromStr;

/// A single scalar component of q(x).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisComponent {
    /// The constant function 1.
    Const,
    /// x
    X,
    /// x^2
    XSquared,
    /// log(x), defined for x > 0
    LogX,
    /// log(1 + |x|)
    Log1pAbs,
    /// sqrt(|x|)
    SqrtAbs,
    /// x^1.5, defined for x >= 0
    XPow3_2,
}

impl BasisComponent {
    /// Evaluate the component, failing if x is outside its domain.
    pub fn eval(self, x: f64) -> Result<f64> {
        let v = match self {
            BasisComponent::Const => 1.0,
            BasisComponent::X => x,
            BasisComponent::XSquared => x * x,
            BasisComponent::LogX => {
                if x <= 0.0 {
                    return Err(self.domain_error(x));
                }
                x.ln()
            }
            BasisComponent::Log1pAbs => x.abs().ln_1p(),
            BasisComponent::SqrtAbs => x.abs().sqrt(),
            BasisComponent::XPow3_2 => {
                if x < 0.0 {
                    return Err(self.domain_error(x));
                }
                x * x.sqrt()
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.domain_error(x))
        }
    }

    fn domain_error(self, x: f64) -> Error {
        Error::Domain {
            component: self.name().to_string(),
            x,
        }
    }

    /// Canonical name used in basis selection strings.
    pub fn name(self) -> &'static str {
        match self {
            BasisComponent::Const => "1",
            BasisComponent::X => "x",
            BasisComponent::XSquared => "x2",
            BasisComponent::LogX => "logx",
            BasisComponent::Log1pAbs => "log1p_abs",
            BasisComponent::SqrtAbs => "sqrt_abs",
            BasisComponent::XPow3_2 => "x1.5",
        }
    }

    fn parse(token: &str) -> Result<Self> {
        match token.trim() {
            "1" | "const" => Ok(BasisComponent::Const),
            "x" => Ok(BasisComponent::X),
            "x2" | "x^2" | "xsq" => Ok(BasisComponent::XSquared),
            "logx" | "log" | "log(x)" => Ok(BasisComponent::LogX),
            "log1p_abs" | "log1p" => Ok(BasisComponent::Log1pAbs),
            "sqrt_abs" | "sqrt" => Ok(BasisComponent::SqrtAbs),
            "x1.5" | "x^1.5" | "x15" => Ok(BasisComponent::XPow3_2),
            other => Err(Error::Param(format!(
                "unknown basis component `{other}` \
                 (known: 1, x, x2, logx, log1p_abs, sqrt_abs, x1.5)"
            ))),
        }
    }
}

/// The ordered list of components making up q(x).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BasisSpec {
    components: Vec<BasisComponent>,
}

impl BasisSpec {
    /// Build a basis, enforcing that the first component is the constant.
    pub fn new(components: Vec<BasisComponent>) -> Result<Self> {
        if components.first() != Some(&BasisComponent::Const) {
            return Err(Error::Param(
                "the first basis component must be the constant 1".into(),
            ));
        }
        Ok(BasisSpec { components })
    }

    /// (1,)
    pub fn constant_only() -> Self {
        BasisSpec {
            components: vec![BasisComponent::Const],
        }
    }

    /// (1, x)
    pub fn linear() -> Self {
        BasisSpec {
            components: vec![BasisComponent::Const, BasisComponent::X],
        }
    }

    /// (1, x, x^2) — exact for normal families.
    pub fn quadratic() -> Self {
        BasisSpec {
            components: vec![
                BasisComponent::Const,
                BasisComponent::X,
                BasisComponent::XSquared,
            ],
        }
    }

    /// (1, x, log x) — exact for gamma families.
    pub fn log_linear() -> Self {
        BasisSpec {
            components: vec![
                BasisComponent::Const,
                BasisComponent::X,
                BasisComponent::LogX,
            ],
        }
    }

    /// (1, x, log(1+|x|), sqrt|x|) — a robust sign-safe working basis.
    pub fn robust_default() -> Self {
        BasisSpec {
            components: vec![
                BasisComponent::Const,
                BasisComponent::X,
                BasisComponent::Log1pAbs,
                BasisComponent::SqrtAbs,
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[BasisComponent] {
        &self.components
    }

    /// Evaluate q(x) as a d-vector.
    pub fn eval(&self, x: f64) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        self.eval_into(x, out.as_mut_slice())?;
        Ok(out)
    }

    /// Evaluate q(x) into a caller-provided slice of length d.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        assert_eq!(out.len(), self.dim());
        for (slot, comp) in out.iter_mut().zip(&self.components) {
            *slot = comp.eval(x)?;
        }
        Ok(())
    }
}

impl FromStr for BasisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let components = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(BasisComponent::parse)
            .collect::<Result<Vec<_>>>()?;
        if components.is_empty() {
            return Err(Error::Param("empty basis specification".into()));
        }
        BasisSpec::new(components)
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.components.iter().map(|c| c.name()).collect();
        write!(f, "{}", names.join(","))
    }
}

impl TryFrom<String> for BasisSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BasisSpec> for String {
    fn from(spec: BasisSpec) -> String {
        spec.to_string()
    }
}

/// Evaluate a basis at a point; thin wrapper over [`BasisSpec::eval`].
pub fn eval_basis(spec: &BasisSpec, x: f64) -> Result<DVector<f64>> {
    spec.eval(x)
}
