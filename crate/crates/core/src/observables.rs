//! Initial states, expectation values, reduced states, Husimi Q and physical units.
//!
//! Expectations are evaluated on the state reshaped to `(spin, cm, field)`
//! rather than through embedded full-space operators.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{self, Slot, SpaceDims};
use crate::linalg::{dagger, CMatrix, StateVector, ONE, ZERO};

const NORMALIZATION_TOL: f64 = 1e-12;
const IMAGINARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldState {
    Fock(usize),
    Coherent(C64),
}

/// `(c_e|e⟩ + c_g|g⟩) ⊗ |β⟩ ⊗ |φ⟩` with `β = (z₀ + i p₀)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub c_e: C64,
    pub c_g: C64,
    pub beta: C64,
    pub field: FieldState,
}

impl InitialStateSpec {
    pub fn excited(beta: C64, field: FieldState) -> Self {
        InitialStateSpec {
            c_e: ONE,
            c_g: ZERO,
            beta,
            field,
        }
    }

    /// `β` from CM position and momentum means.
    pub fn beta_from(z0: f64, p0: f64) -> C64 {
        C64::new(z0, p0) / 2f64.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.c_e.norm_sqr() + self.c_g.norm_sqr();
        if !((w - 1.0).abs() <= NORMALIZATION_TOL) {
            return Err(Error::invalid(
                "initial.c_e/c_g",
                format!("|c_e|² + |c_g|² = {w}, expected 1"),
            ));
        }
        let finite = |c: C64| c.re.is_finite() && c.im.is_finite();
        if !finite(self.beta) {
            return Err(Error::invalid("initial.beta", "must be finite"));
        }
        if let FieldState::Coherent(a) = self.field {
            if !finite(a) {
                return Err(Error::invalid(
                    "initial.field",
                    "coherent amplitude must be finite",
                ));
            }
        }
        Ok(())
    }
}

/// Probability weight lost when truncating the initial coherent states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationReport {
    pub cm: f64,
    pub field: f64,
}

pub fn truncation_report(spec: &InitialStateSpec, dims: &SpaceDims) -> TruncationReport {
    let cm = hilbert::coherent_state(spec.beta, dims.n_cm).truncation_weight;
    let field = match spec.field {
        FieldState::Fock(_) => 0.0,
        FieldState::Coherent(a) => hilbert::coherent_state(a, dims.n_field).truncation_weight,
    };
    TruncationReport { cm, field }
}

pub fn initial_state(spec: &InitialStateSpec, dims: &SpaceDims) -> Result<StateVector> {
    spec.validate()?;
    dims.validate()?;
    let spin = StateVector::from(vec![spec.c_e, spec.c_g]);
    let cm = hilbert::coherent_state(spec.beta, dims.n_cm).vector;
    let field = match spec.field {
        FieldState::Fock(n) => hilbert::fock_state(n, dims.n_field)?,
        FieldState::Coherent(a) => hilbert::coherent_state(a, dims.n_field).vector,
    };
    Ok(hilbert::product_state(&spin, &cm, &field))
}

fn check_len(psi: &StateVector, dims: &SpaceDims) -> Result<()> {
    if psi.len() != dims.total() {
        return Err(Error::DimMismatch {
            expected: dims.total().to_string(),
            found: psi.len().to_string(),
        });
    }
    Ok(())
}

fn tensor(psi: &StateVector, dims: &SpaceDims) -> Array3<C64> {
    psi.view()
        .into_shape_with_order((2, dims.n_cm, dims.n_field))
        .expect("length checked")
        .to_owned()
}

fn real_part(value: C64, what: &str) -> f64 {
    if value.im.abs() > IMAGINARY_TOL * value.re.abs().max(1.0) {
        log::warn!("{what} has imaginary part {:.3e}", value.im);
    }
    value.re
}

pub fn norm(psi: &StateVector) -> f64 {
    crate::linalg::norm(psi)
}

/// `⟨ψ|op_cm|ψ⟩` for an operator on the CM factor.
pub fn cm_expectation(psi: &StateVector, op: &CMatrix, dims: &SpaceDims) -> Result<C64> {
    check_len(psi, dims)?;
    let t = tensor(psi, dims);
    let mut acc = ZERO;
    for s in 0..2 {
        let m = t.index_axis(Axis(0), s);
        let om = op.dot(&m);
        acc += m
            .iter()
            .zip(om.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>();
    }
    Ok(acc)
}

/// `⟨ψ|op_field|ψ⟩` for an operator on the field factor.
pub fn field_expectation(psi: &StateVector, op: &CMatrix, dims: &SpaceDims) -> Result<C64> {
    let rho = reduce_density(psi, Slot::Field, dims)?;
    Ok(crate::linalg::trace(&rho.dot(op)))
}

pub fn atomic_inversion(psi: &StateVector, dims: &SpaceDims) -> Result<f64> {
    check_len(psi, dims)?;
    let half = dims.n_cm * dims.n_field;
    let e: f64 = psi.iter().take(half).map(|c| c.norm_sqr()).sum();
    let g: f64 = psi.iter().skip(half).map(|c| c.norm_sqr()).sum();
    Ok(e - g)
}

pub fn mean_position(psi: &StateVector, dims: &SpaceDims) -> Result<f64> {
    let q = hilbert::quadrature_ops(dims.n_cm)?;
    Ok(real_part(cm_expectation(psi, &q.z, dims)?, "⟨z⟩"))
}

pub fn mean_momentum(psi: &StateVector, dims: &SpaceDims) -> Result<f64> {
    let q = hilbert::quadrature_ops(dims.n_cm)?;
    Ok(real_part(cm_expectation(psi, &q.p, dims)?, "⟨p⟩"))
}

pub fn field_n_mean(psi: &StateVector, dims: &SpaceDims) -> Result<f64> {
    check_len(psi, dims)?;
    Ok(psi
        .iter()
        .enumerate()
        .map(|(i, c)| (i % dims.n_field) as f64 * c.norm_sqr())
        .sum())
}

/// `⟨n̂ + σz/2⟩`.
pub fn excitation_number(psi: &StateVector, dims: &SpaceDims) -> Result<f64> {
    Ok(field_n_mean(psi, dims)? + 0.5 * atomic_inversion(psi, dims)?)
}

/// Resonant JC inversion for initial `|e, n⟩`: `cos(2 g0 √(n+1) t)`.
pub fn jc_baseline_inversion(n: usize, g0: f64, t: f64) -> f64 {
    (2.0 * g0 * ((n + 1) as f64).sqrt() * t).cos()
}

/// Partial trace onto one factor.
pub fn reduce_density(psi: &StateVector, keep: Slot, dims: &SpaceDims) -> Result<CMatrix> {
    check_len(psi, dims)?;
    let t = tensor(psi, dims);
    let axis = match keep {
        Slot::Spin => 0,
        Slot::Cm => 1,
        Slot::Field => 2,
    };
    let d = dims.slot_dim(keep);
    let order = match axis {
        0 => [0, 1, 2],
        1 => [1, 0, 2],
        _ => [2, 0, 1],
    };
    let permuted = t.permuted_axes(order);
    let rest = dims.total() / d;
    let flat: Array2<C64> = permuted
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((d, rest))
        .expect("contiguous");
    Ok(flat.dot(&dagger(&flat)))
}

/// Square lattice `|Re α|, |Im α| ≤ half_width` with `points` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    pub half_width: f64,
    pub points: usize,
}

impl QGrid {
    pub fn for_amplitude(alpha0: f64) -> Self {
        QGrid {
            half_width: (2.0 * alpha0.abs() + 3.0).max(4.0),
            points: 101,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::invalid(
                "q_grid.half_width",
                "must be positive and finite",
            ));
        }
        if self.points < 2 {
            return Err(Error::invalid(
                "q_grid.points",
                "need at least 2 points per axis",
            ));
        }
        Ok(())
    }

    pub fn axis(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points)
            .map(|i| -self.half_width + step * i as f64)
            .collect()
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QField {
    pub grid: QGrid,
    /// Row-major over `(Re α, Im α)`.
    pub values: Vec<f64>,
}

impl QField {
    pub fn riemann_sum(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.step().powi(2)
    }

    /// `(Re α, Im α, Q)` triples in emission order.
    pub fn triples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let axis = self.grid.axis();
        let n = self.grid.points;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &q)| (axis[i / n], axis[i % n], q))
    }
}

/// `Q(α) = ⟨α|ρ|α⟩/π` over the grid.
pub fn husimi_q(rho: &CMatrix, grid: &QGrid) -> Result<QField> {
    grid.validate()?;
    let d = rho.nrows();
    if rho.ncols() != d {
        return Err(Error::DimMismatch {
            expected: "square".into(),
            found: format!("{:?}", rho.dim()),
        });
    }
    let axis = grid.axis();
    let mut values = Vec::with_capacity(grid.points * grid.points);
    for &re in &axis {
        for &im in &axis {
            let a = hilbert::coherent_amplitudes(C64::new(re, im), d);
            let ra = rho.dot(&a);
            let q: C64 = a.iter().zip(ra.iter()).map(|(x, y)| x.conj() * y).sum();
            values.push((q.re / PI).max(0.0));
        }
    }
    Ok(QField {
        grid: *grid,
        values,
    })
}

/// Physical constants and the coupling scale that fixes the scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnitSystem {
    /// `g/(2π)` in Hz.
    pub g_hz: f64,
    pub mass_kg: f64,
    pub hbar: f64,
    pub k_b: f64,
}

pub const ATOMIC_MASS_UNIT_KG: f64 = 1.660_539_066_60e-27;

impl Default for UnitSystem {
    fn default() -> Self {
        UnitSystem {
            g_hz: 16.0e6,
            mass_kg: 85.0 * ATOMIC_MASS_UNIT_KG,
            hbar: 1.054_571_817e-34,
            k_b: 1.380_649e-23,
        }
    }
}

impl UnitSystem {
    /// Four-significant-figure constants `ħ = 1.0545e-34`, `k_B = 1.3807e-23`.
    pub fn rounded_constants() -> Self {
        UnitSystem {
            hbar: 1.0545e-34,
            k_b: 1.3807e-23,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("units.g_hz", self.g_hz),
            ("units.mass_kg", self.mass_kg),
            ("units.hbar", self.hbar),
            ("units.k_b", self.k_b),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// Angular coupling `g` in rad/s.
    pub fn g(&self) -> f64 {
        2.0 * PI * self.g_hz
    }

    /// `√(ħ/(m g))` in metres.
    pub fn length_unit(&self) -> f64 {
        (self.hbar / (self.mass_kg * self.g())).sqrt()
    }

    /// `√(ħ m g)` in kg·m/s.
    pub fn momentum_unit(&self) -> f64 {
        (self.hbar * self.mass_kg * self.g()).sqrt()
    }

    /// `1/g` in seconds.
    pub fn time_unit(&self) -> f64 {
        1.0 / self.g()
    }

    /// `ħg/(2k_B)` in kelvin; multiplies `p²`.
    pub fn temperature_scale(&self) -> f64 {
        self.hbar * self.g() / (2.0 * self.k_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Length,
    Momentum,
    Time,
    Temperature,
}

impl FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "length" => Ok(Quantity::Length),
            "momentum" => Ok(Quantity::Momentum),
            "time" => Ok(Quantity::Time),
            "temperature" => Ok(Quantity::Temperature),
            other => Err(Error::invalid(
                "quantity",
                format!("unknown quantity `{other}`"),
            )),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Quantity::Length => "length",
            Quantity::Momentum => "momentum",
            Quantity::Time => "time",
            Quantity::Temperature => "temperature",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToPhysical,
    ToScaled,
}

/// Scaled ↔ SI conversion. Temperature is the kinetic temperature `p²ħg/(2k_B)`
/// of a scaled momentum `p`; converting back returns `|p|`.
pub fn convert_units(
    value: f64,
    quantity: Quantity,
    direction: Direction,
    units: &UnitSystem,
) -> Result<f64> {
    units.validate()?;
    let out = match (quantity, direction) {
        (Quantity::Length, Direction::ToPhysical) => value * units.length_unit(),
        (Quantity::Length, Direction::ToScaled) => value / units.length_unit(),
        (Quantity::Momentum, Direction::ToPhysical) => value * units.momentum_unit(),
        (Quantity::Momentum, Direction::ToScaled) => value / units.momentum_unit(),
        (Quantity::Time, Direction::ToPhysical) => value * units.time_unit(),
        (Quantity::Time, Direction::ToScaled) => value / units.time_unit(),
        (Quantity::Temperature, Direction::ToPhysical) => value * value * units.temperature_scale(),
        (Quantity::Temperature, Direction::ToScaled) => {
            if value < 0.0 {
                return Err(Error::invalid("temperature", "must be non-negative"));
            }
            (value / units.temperature_scale()).sqrt()
        }
    };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeSeriesRecord {
    pub t: f64,
    pub sigma_z: f64,
    pub z_mean: f64,
    pub p_mean: f64,
    pub field_n_mean: f64,
    pub norm: f64,
}

/// Precomputed CM quadratures for repeated record evaluation.
#[derive(Debug, Clone)]
pub struct RecordBuilder {
    dims: SpaceDims,
    z: CMatrix,
    p: CMatrix,
}

impl RecordBuilder {
    pub fn new(dims: SpaceDims) -> Result<Self> {
        let q = hilbert::quadrature_ops(dims.n_cm)?;
        Ok(RecordBuilder {
            dims,
            z: q.z,
            p: q.p,
        })
    }

    pub fn record(&self, t: f64, psi: &StateVector) -> Result<TimeSeriesRecord> {
        let d = &self.dims;
        Ok(TimeSeriesRecord {
            t,
            sigma_z: atomic_inversion(psi, d)?,
            z_mean: real_part(cm_expectation(psi, &self.z, d)?, "⟨z⟩"),
            p_mean: real_part(cm_expectation(psi, &self.p, d)?, "⟨p⟩"),
            field_n_mean: field_n_mean(psi, d)?,
            norm: norm(psi),
        })
    }
}
