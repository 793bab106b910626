//! Truncated spin ⊗ CM ⊗ field space and its canonical operators.
//!
//! Factor order is fixed: spin (slowest index) ⊗ centre-of-mass oscillator ⊗
//! field Fock (fastest index), so a full-space index is
//! `spin * n_cm * n_field + cm * n_field + field`. Spin index 0 is the excited
//! state `|e⟩` (σz = +1), index 1 the ground state `|g⟩`.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dagger, kron, CMatrix, StateVector, I, ONE, ZERO};

pub const MIN_CM: usize = 8;
pub const MIN_FIELD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceDims {
    pub n_cm: usize,
    pub n_field: usize,
    pub guard_cm: usize,
    pub guard_field: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Spin,
    Cm,
    Field,
}

impl SpaceDims {
    /// Dimensions with the default guard bands (`n_cm / 4` and 2).
    pub fn new(n_cm: usize, n_field: usize) -> Result<Self> {
        Self::with_guards(n_cm, n_field, n_cm / 4, 2)
    }

    pub fn with_guards(
        n_cm: usize,
        n_field: usize,
        guard_cm: usize,
        guard_field: usize,
    ) -> Result<Self> {
        let dims = SpaceDims {
            n_cm,
            n_field,
            guard_cm,
            guard_field,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cm < MIN_CM {
            return Err(Error::InvalidDim {
                what: "n_cm",
                value: self.n_cm,
                reason: format!("must be at least {MIN_CM}"),
            });
        }
        if self.n_field < MIN_FIELD {
            return Err(Error::InvalidDim {
                what: "n_field",
                value: self.n_field,
                reason: format!("must be at least {MIN_FIELD}"),
            });
        }
        if self.guard_cm >= self.n_cm {
            return Err(Error::InvalidDim {
                what: "guard_cm",
                value: self.guard_cm,
                reason: format!("guard band must be smaller than n_cm = {}", self.n_cm),
            });
        }
        if self.guard_field >= self.n_field {
            return Err(Error::InvalidDim {
                what: "guard_field",
                value: self.guard_field,
                reason: format!("guard band must be smaller than n_field = {}", self.n_field),
            });
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        2 * self.n_cm * self.n_field
    }

    pub fn slot_dim(&self, slot: Slot) -> usize {
        match slot {
            Slot::Spin => 2,
            Slot::Cm => self.n_cm,
            Slot::Field => self.n_field,
        }
    }

    #[inline]
    pub fn index(&self, spin: usize, cm: usize, field: usize) -> usize {
        (spin * self.n_cm + cm) * self.n_field + field
    }

    /// Inverse of [`Self::index`].
    #[inline]
    pub fn split(&self, index: usize) -> (usize, usize, usize) {
        let field = index % self.n_field;
        let rest = index / self.n_field;
        (rest / self.n_cm, rest % self.n_cm, field)
    }

    pub fn guarded_cm(&self) -> usize {
        self.n_cm - self.guard_cm
    }

    pub fn guarded_field(&self) -> usize {
        self.n_field - self.guard_field
    }

    /// Full-space indices outside both guard bands.
    pub fn guarded_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.guarded_cm() * self.guarded_field());
        for s in 0..2 {
            for c in 0..self.guarded_cm() {
                for f in 0..self.guarded_field() {
                    out.push(self.index(s, c, f));
                }
            }
        }
        out
    }

    /// Frobenius norm of `A - B` restricted to the guarded sub-block.
    pub fn guarded_distance(&self, a: &CMatrix, b: &CMatrix) -> f64 {
        let idx = self.guarded_indices();
        let mut sum = 0.0;
        for &i in &idx {
            for &j in &idx {
                sum += (a[[i, j]] - b[[i, j]]).norm_sqr();
            }
        }
        sum.sqrt()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDim {
            what: "dim",
            value: dim,
            reason: "must be at least 2".into(),
        });
    }
    Ok(())
}

/// Truncated `(a, a^dag)` with `a|n⟩ = √n |n-1⟩`.
pub fn ladder_ops(dim: usize) -> Result<(CMatrix, CMatrix)> {
    check_dim(dim)?;
    let mut a = linalg::zeros(dim, dim);
    for n in 1..dim {
        a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    let a_dag = dagger(&a);
    Ok((a, a_dag))
}

pub fn number_op(dim: usize) -> CMatrix {
    linalg::from_real_diag(&(0..dim).map(|n| n as f64).collect::<Vec<_>>())
}

pub fn sqrt_number_op(dim: usize) -> CMatrix {
    linalg::from_real_diag(&(0..dim).map(|n| (n as f64).sqrt()).collect::<Vec<_>>())
}

/// Susskind–Glogower pair: `V|n⟩ = |n-1⟩`, `V|0⟩ = 0`.
pub fn susskind_glogower(dim: usize) -> Result<(CMatrix, CMatrix)> {
    check_dim(dim)?;
    let mut v = linalg::zeros(dim, dim);
    for n in 1..dim {
        v[[n - 1, n]] = ONE;
    }
    let v_dag = dagger(&v);
    Ok((v, v_dag))
}

#[derive(Debug, Clone)]
pub struct Quadratures {
    pub b: CMatrix,
    pub b_dag: CMatrix,
    pub z: CMatrix,
    pub p: CMatrix,
}

/// CM boson and its quadratures, `ẑ = (b + b†)/√2`, `p̂ = (b − b†)/(i√2)`.
pub fn quadrature_ops(dim: usize) -> Result<Quadratures> {
    let (b, b_dag) = ladder_ops(dim)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = (&b + &b_dag).mapv(|x| x * s);
    let p = (&b - &b_dag).mapv(|x| x * s / I);
    Ok(Quadratures { b, b_dag, z, p })
}

pub fn sigma_x() -> CMatrix {
    let mut m = linalg::zeros(2, 2);
    m[[0, 1]] = ONE;
    m[[1, 0]] = ONE;
    m
}

pub fn sigma_y() -> CMatrix {
    let mut m = linalg::zeros(2, 2);
    m[[0, 1]] = -I;
    m[[1, 0]] = I;
    m
}

pub fn sigma_z() -> CMatrix {
    linalg::from_real_diag(&[1.0, -1.0])
}

/// `|e⟩⟨g|`.
pub fn sigma_plus() -> CMatrix {
    let mut m = linalg::zeros(2, 2);
    m[[0, 1]] = ONE;
    m
}

/// `|g⟩⟨e|`.
pub fn sigma_minus() -> CMatrix {
    let mut m = linalg::zeros(2, 2);
    m[[1, 0]] = ONE;
    m
}

/// All single-factor operators for a given truncation.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub dims: SpaceDims,
    pub a: CMatrix,
    pub a_dag: CMatrix,
    pub n_hat: CMatrix,
    pub sqrt_n: CMatrix,
    pub v: CMatrix,
    pub v_dag: CMatrix,
    pub b: CMatrix,
    pub b_dag: CMatrix,
    pub z_op: CMatrix,
    pub p_op: CMatrix,
    pub sigma_x: CMatrix,
    pub sigma_y: CMatrix,
    pub sigma_z: CMatrix,
    pub sigma_plus: CMatrix,
    pub sigma_minus: CMatrix,
}

impl OperatorSet {
    pub fn new(dims: SpaceDims) -> Result<Self> {
        dims.validate()?;
        let (a, a_dag) = ladder_ops(dims.n_field)?;
        let (v, v_dag) = susskind_glogower(dims.n_field)?;
        let q = quadrature_ops(dims.n_cm)?;
        Ok(OperatorSet {
            dims,
            a,
            a_dag,
            n_hat: number_op(dims.n_field),
            sqrt_n: sqrt_number_op(dims.n_field),
            v,
            v_dag,
            b: q.b,
            b_dag: q.b_dag,
            z_op: q.z,
            p_op: q.p,
            sigma_x: sigma_x(),
            sigma_y: sigma_y(),
            sigma_z: sigma_z(),
            sigma_plus: sigma_plus(),
            sigma_minus: sigma_minus(),
        })
    }

    pub fn embed(&self, op: &CMatrix, slot: Slot) -> Result<CMatrix> {
        embed(op, slot, &self.dims)
    }

    /// `n̂ + σz/2` on the full space.
    pub fn excitation(&self) -> CMatrix {
        let n = embed(&self.n_hat, Slot::Field, &self.dims).expect("field op");
        let s = embed(&self.sigma_z, Slot::Spin, &self.dims).expect("spin op");
        n + s.mapv(|x| x * 0.5)
    }
}

/// Kronecker embedding of a single-factor operator into the full space.
pub fn embed(op: &CMatrix, slot: Slot, dims: &SpaceDims) -> Result<CMatrix> {
    let d = dims.slot_dim(slot);
    if op.dim() != (d, d) {
        return Err(Error::DimMismatch {
            expected: format!("({d}, {d}) for {slot:?}"),
            found: format!("{:?}", op.dim()),
        });
    }
    let id = |n| linalg::identity(n);
    Ok(match slot {
        Slot::Spin => kron(op, &id(dims.n_cm * dims.n_field)),
        Slot::Cm => kron(&kron(&id(2), op), &id(dims.n_field)),
        Slot::Field => kron(&id(2 * dims.n_cm), op),
    })
}

/// Full-space product state in the fixed factor order.
pub fn product_state(spin: &StateVector, cm: &StateVector, field: &StateVector) -> StateVector {
    let mut out = Array1::zeros(spin.len() * cm.len() * field.len());
    let mut idx = 0;
    for s in spin.iter() {
        for c in cm.iter() {
            let sc = s * c;
            for f in field.iter() {
                out[idx] = sc * f;
                idx += 1;
            }
        }
    }
    out
}

pub fn fock_state(n: usize, dim: usize) -> Result<StateVector> {
    if n >= dim {
        return Err(Error::OutOfRange { index: n, dim });
    }
    let mut v = Array1::from_elem(dim, ZERO);
    v[n] = ONE;
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct CoherentState {
    /// Renormalized truncated state.
    pub vector: StateVector,
    /// Weight `Σ_{n ≥ dim} |c_n|²` lost to truncation.
    pub truncation_weight: f64,
}

/// Amplitudes `e^{-|ζ|²/2} ζⁿ/√n!` for `n < dim`, unnormalized.
pub fn coherent_amplitudes(zeta: C64, dim: usize) -> StateVector {
    let mut out = Array1::from_elem(dim, ZERO);
    let mut c = C64::new((-zeta.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        out[n] = c;
        c = c * zeta / ((n + 1) as f64).sqrt();
    }
    out
}

fn poisson_tail(mean: f64, from: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    // log-space term to survive large `from`
    let ln_fact: f64 = (1..=from).map(|k| (k as f64).ln()).sum();
    let mut term = (-mean + from as f64 * mean.ln() - ln_fact).exp();
    let mut sum = 0.0;
    let mut n = from;
    while term > 1e-300 && (term > sum * 1e-17 || (n as f64) < mean) {
        sum += term;
        n += 1;
        term *= mean / n as f64;
        if n > from + 100_000 {
            break;
        }
    }
    sum
}

pub fn coherent_state(zeta: C64, dim: usize) -> CoherentState {
    let raw = coherent_amplitudes(zeta, dim);
    let truncation_weight = poisson_tail(zeta.norm_sqr(), dim);
    let nrm = linalg::norm(&raw);
    if truncation_weight > 1e-8 {
        log::warn!("coherent state ζ = {zeta} truncated at {dim} levels loses weight {truncation_weight:.3e}");
    }
    CoherentState {
        vector: raw.mapv(|x| x / nrm),
        truncation_weight,
    }
}
