//! Position-dependent atom–field coupling `g(ẑ)` and its operator form.
//!
//! `z` is measured in scaled units `√(ħ/(m g))`, coupling values in units of `g`.

mod expr;

pub use expr::{parse_coupling, BinOp, CouplingExpr, Func};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, check_hermitian, dagger, hermitian_spectral, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    Quadratic,
    Mesa,
    Sech2,
    Sinusoidal,
    Expression,
}

/// Selects `g₊ = g0 + λz²/2` or `g₋ = g0 − λz²/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Sign {
    #[default]
    #[serde(rename = "+", alias = "plus")]
    Plus,
    #[serde(rename = "-", alias = "minus")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }
}

fn default_width() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    /// Full width of the mesa plateau; length scale of the sech² profile.
    #[serde(default = "default_width")]
    pub width: f64,
    /// Wavenumber of the sinusoidal profile `g0·cos(k z)`.
    #[serde(default = "default_width")]
    pub wavenumber: f64,
}

impl Default for ShapeParams {
    fn default() -> Self {
        ShapeParams {
            width: 1.0,
            wavenumber: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    #[serde(default)]
    pub g0: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub sign: Sign,
    #[serde(default)]
    pub params: ShapeParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl CouplingSpec {
    pub fn quadratic(g0: f64, lambda: f64, sign: Sign) -> Self {
        CouplingSpec {
            kind: CouplingKind::Quadratic,
            g0,
            lambda,
            sign,
            params: ShapeParams::default(),
            expr: None,
            label: None,
        }
    }

    pub fn shape(kind: CouplingKind, g0: f64, params: ShapeParams) -> Self {
        CouplingSpec {
            kind,
            g0,
            lambda: 0.0,
            sign: Sign::Plus,
            params,
            expr: None,
            label: None,
        }
    }

    pub fn expression(text: &str) -> Result<Self> {
        parse_coupling(text)?;
        Ok(CouplingSpec {
            kind: CouplingKind::Expression,
            g0: 0.0,
            lambda: 0.0,
            sign: Sign::Plus,
            params: ShapeParams::default(),
            expr: Some(text.to_string()),
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match self.kind {
            CouplingKind::Quadratic => format!("g{}", self.sign.label()),
            CouplingKind::Mesa => "mesa".into(),
            CouplingKind::Sech2 => "sech2".into(),
            CouplingKind::Sinusoidal => "sinusoidal".into(),
            CouplingKind::Expression => "expr".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.g0.is_finite() {
            return Err(Error::invalid("coupling.g0", "must be finite"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(
                "coupling.lambda",
                format!("must be finite and >= 0, got {}", self.lambda),
            ));
        }
        match self.kind {
            CouplingKind::Mesa | CouplingKind::Sech2 if !(self.params.width > 0.0) => {
                Err(Error::invalid("coupling.params.width", "must be > 0"))
            }
            CouplingKind::Sinusoidal if !self.params.wavenumber.is_finite() => Err(Error::invalid(
                "coupling.params.wavenumber",
                "must be finite",
            )),
            CouplingKind::Expression => match &self.expr {
                None => Err(Error::invalid(
                    "coupling.expr",
                    "required for kind = expression",
                )),
                Some(text) => parse_coupling(text).map(|_| ()),
            },
            _ => Ok(()),
        }
    }

    pub fn is_quadratic(&self) -> bool {
        self.kind == CouplingKind::Quadratic
    }

    /// Polynomial coefficients when the coupling is polynomial in `z`.
    pub fn polynomial(&self) -> Result<Option<Vec<f64>>> {
        Ok(match self.kind {
            CouplingKind::Quadratic => {
                Some(vec![self.g0, 0.0, self.sign.value() * self.lambda / 2.0])
            }
            CouplingKind::Expression => self.parsed()?.polynomial(),
            _ => None,
        })
    }

    fn parsed(&self) -> Result<CouplingExpr> {
        parse_coupling(
            self.expr
                .as_deref()
                .ok_or_else(|| Error::invalid("coupling.expr", "missing"))?,
        )
    }

    /// Scalar function `z ↦ g(z)`.
    pub fn scalar(&self) -> Result<impl Fn(f64) -> Result<f64>> {
        self.validate()?;
        let spec = self.clone();
        let parsed = if spec.kind == CouplingKind::Expression {
            Some(spec.parsed()?)
        } else {
            None
        };
        Ok(move |z: f64| -> Result<f64> {
            let v = match spec.kind {
                CouplingKind::Quadratic => spec.g0 + spec.sign.value() * spec.lambda * z * z / 2.0,
                CouplingKind::Mesa => {
                    if z.abs() <= spec.params.width / 2.0 {
                        spec.g0
                    } else {
                        0.0
                    }
                }
                CouplingKind::Sech2 => {
                    let s = 1.0 / (z / spec.params.width).cosh();
                    spec.g0 * s * s
                }
                CouplingKind::Sinusoidal => spec.g0 * (spec.params.wavenumber * z).cos(),
                CouplingKind::Expression => return parsed.as_ref().expect("parsed").eval(z),
            };
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Domain { z })
            }
        })
    }
}

fn hermitize(a: CMatrix) -> CMatrix {
    (&a + &dagger(&a)).mapv(|x| x * 0.5)
}

/// `Σ c[k] Z^k` by Horner's rule.
pub fn matrix_polynomial(coeffs: &[f64], z: &CMatrix) -> CMatrix {
    let n = z.nrows();
    let mut acc = linalg::zeros(n, n);
    for &c in coeffs.iter().rev() {
        acc = acc.dot(z);
        for i in 0..n {
            acc[[i, i]] += c;
        }
    }
    acc
}

/// `g(Z)` by diagonalizing `Z` and applying `g` to its eigenvalues.
pub fn spectral_apply(g: impl Fn(f64) -> Result<f64>, z: &CMatrix) -> Result<CMatrix> {
    let d = hermitian_spectral(z)?;
    let values = d
        .eigenvalues
        .iter()
        .map(|&e| g(e))
        .collect::<Result<Vec<_>>>()?;
    let out = d.with_values(
        values
            .into_iter()
            .map(|v| num_complex::Complex64::new(v, 0.0)),
    );
    Ok(hermitize(out))
}

/// The coupling `g(ẑ)` as a CM-space matrix.
pub fn coupling_operator(spec: &CouplingSpec, z_op: &CMatrix) -> Result<CMatrix> {
    spec.validate()?;
    check_hermitian(z_op)?;
    match spec.polynomial()? {
        Some(coeffs) => Ok(hermitize(matrix_polynomial(&coeffs, z_op))),
        None => spectral_apply(spec.scalar()?, z_op),
    }
}
