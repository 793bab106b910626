//! Interaction-picture Hamiltonian, its right-unitary factorization, and the
//! two numerical propagators (full-matrix oracle and sector-wise decomposed).
//!
//! With `T = diag(V, 1)` on the spin factor and `R_y` a π/4 spin rotation,
//!
//! ```text
//! H_I = p²/2 + (δ/2) σz + g(z) (a† σ− + a σ+)
//!     = T R_y H_z R_y† T†,      H_z = p²/2 + g(z) √n̂ σz − (δ/2) σx
//! ```
//!
//! `H_z` conserves the field photon number, so `exp(−i H_z t)` splits into
//! independent per-sector blocks. On a truncated field basis `V V† ≠ 1` on the
//! top level; the excited ⊗ top-field subspace is then an isolated block of
//! `H_I` evolving under `p²/2 + δ/2` and is propagated separately.

use std::time::Instant;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coupling::{coupling_operator, CouplingSpec};
use crate::error::{Error, Result};
use crate::hilbert::{self, embed, OperatorSet, Slot, SpaceDims};
use crate::linalg::{
    self, hermitian_spectral, kron, CMatrix, SpectralDecomposition, StateVector, ONE, ZERO,
};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Initial-state norm tolerance accepted by the propagators.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    /// Number of intervals; the grid has `steps + 1` points.
    pub steps: usize,
}

impl TimeGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 0 {
            return vec![self.start];
        }
        let dt = (self.stop - self.start) / self.steps as f64;
        (0..=self.steps)
            .map(|i| self.start + dt * i as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    /// Field frequency; only used to define the detuning.
    pub omega: f64,
    pub omega_q: f64,
    pub delta: f64,
    pub coupling: CouplingSpec,
    pub dims: SpaceDims,
    pub times: Vec<f64>,
}

impl ScenarioParams {
    pub fn new(coupling: CouplingSpec, dims: SpaceDims, delta: f64, times: Vec<f64>) -> Self {
        ScenarioParams {
            omega: 0.0,
            omega_q: delta,
            delta,
            coupling,
            dims,
            times,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() {
            return Err(Error::invalid("scenario.delta", "must be finite"));
        }
        if (self.omega_q - self.omega - self.delta).abs()
            > 1e-12 * (1.0 + self.omega.abs() + self.omega_q.abs())
        {
            return Err(Error::invalid(
                "scenario.delta",
                format!(
                    "delta = {} inconsistent with omega_q - omega = {}",
                    self.delta,
                    self.omega_q - self.omega
                ),
            ));
        }
        self.dims.validate()?;
        self.coupling.validate()?;
        if self.times.is_empty() {
            return Err(Error::invalid("scenario.times", "empty time grid"));
        }
        if !(self.times[0] >= 0.0) {
            return Err(Error::invalid("scenario.times", "must start at t >= 0"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "scenario.times",
                "must be strictly increasing",
            ));
        }
        Ok(())
    }
}

/// Sign choices that make `T R_y H_z R_y† T†` reproduce `H_I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convention {
    /// `R_y = exp(i · rotation_sign · π/4 · σy)`.
    pub rotation_sign: f64,
    /// Multiplies the `g(z) √n̂ σz` term of `H_z`.
    pub coupling_sign: f64,
}

/// Frozen result of [`calibrate_convention`]: `R_y = exp(−iπ/4 σy)`, coupling term as written.
pub const CONVENTION: Convention = Convention {
    rotation_sign: -1.0,
    coupling_sign: 1.0,
};

impl Convention {
    pub const CANDIDATES: [Convention; 4] = [
        Convention {
            rotation_sign: 1.0,
            coupling_sign: 1.0,
        },
        Convention {
            rotation_sign: 1.0,
            coupling_sign: -1.0,
        },
        Convention {
            rotation_sign: -1.0,
            coupling_sign: 1.0,
        },
        Convention {
            rotation_sign: -1.0,
            coupling_sign: -1.0,
        },
    ];

    /// 2×2 spin rotation `[[c, s·c], [−s·c, c]]`, `c = 1/√2`.
    pub fn rotation(&self) -> [[f64; 2]; 2] {
        let c = FRAC_1_SQRT_2;
        let s = self.rotation_sign * c;
        [[c, s], [-s, c]]
    }

    pub fn rotation_matrix(&self) -> CMatrix {
        let r = self.rotation();
        let mut m = linalg::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                m[[i, j]] = C64::new(r[i][j], 0.0);
            }
        }
        m
    }
}

/// The right-unitary pair `T = diag(V, 1)`, `T† = diag(V†, 1)` and `R_y`, all on the full space.
#[derive(Debug, Clone)]
pub struct DecompositionOps {
    pub t_op: CMatrix,
    pub t_dag: CMatrix,
    pub r_y: CMatrix,
    pub r_y_dag: CMatrix,
}

pub fn decomposition_operators(dims: &SpaceDims) -> Result<DecompositionOps> {
    dims.validate()?;
    let (v, v_dag) = hilbert::susskind_glogower(dims.n_field)?;
    let mut up = linalg::zeros(2, 2);
    up[[0, 0]] = ONE;
    let mut down = linalg::zeros(2, 2);
    down[[1, 1]] = ONE;
    let id_cm = linalg::identity(dims.n_cm);
    let id_field = linalg::identity(dims.n_field);
    let lower = kron(&kron(&down, &id_cm), &id_field);
    let t_op = kron(&kron(&up, &id_cm), &v) + &lower;
    let t_dag = kron(&kron(&up, &id_cm), &v_dag) + &lower;
    let r = CONVENTION.rotation_matrix();
    let r_y = embed(&r, Slot::Spin, dims)?;
    let r_y_dag = embed(&linalg::dagger(&r), Slot::Spin, dims)?;
    Ok(DecompositionOps {
        t_op,
        t_dag,
        r_y,
        r_y_dag,
    })
}

/// `p²/2` and `g(ẑ)` on the CM factor.
#[derive(Debug, Clone)]
pub struct CmOperators {
    pub kinetic: CMatrix,
    pub coupling: CMatrix,
}

pub fn cm_operators(s: &ScenarioParams) -> Result<CmOperators> {
    let q = hilbert::quadrature_ops(s.dims.n_cm)?;
    let kinetic = q.p.dot(&q.p).mapv(|x| x * 0.5);
    let coupling = coupling_operator(&s.coupling, &q.z)?;
    Ok(CmOperators { kinetic, coupling })
}

/// `H_I = p²/2 + (δ/2)σz + g(ẑ)(a†σ− + aσ+)` on the full space.
pub fn build_interaction_hamiltonian(s: &ScenarioParams) -> Result<CMatrix> {
    s.validate()?;
    let ops = OperatorSet::new(s.dims)?;
    let cm = cm_operators(s)?;
    let mut h = embed(&cm.kinetic, Slot::Cm, &s.dims)?;
    h = h + embed(&ops.sigma_z, Slot::Spin, &s.dims)?.mapv(|x| x * (s.delta / 2.0));
    h = h + kron(&kron(&ops.sigma_minus, &cm.coupling), &ops.a_dag);
    h = h + kron(&kron(&ops.sigma_plus, &cm.coupling), &ops.a);
    Ok(h)
}

fn auxiliary_with(s: &ScenarioParams, conv: Convention) -> Result<CMatrix> {
    s.validate()?;
    let ops = OperatorSet::new(s.dims)?;
    let cm = cm_operators(s)?;
    let mut h = embed(&cm.kinetic, Slot::Cm, &s.dims)?;
    h = h + kron(&kron(&ops.sigma_z, &cm.coupling), &ops.sqrt_n).mapv(|x| x * conv.coupling_sign);
    h = h - embed(&ops.sigma_x, Slot::Spin, &s.dims)?.mapv(|x| x * (s.delta / 2.0));
    Ok(h)
}

/// `H_z = p²/2 + g(ẑ)√n̂ σz − (δ/2)σx` on the full space.
pub fn build_auxiliary_hamiltonian(s: &ScenarioParams) -> Result<CMatrix> {
    auxiliary_with(s, CONVENTION)
}

/// `R M R†` for a spin rotation acting on the slowest index.
fn rotate(m: &CMatrix, r: [[f64; 2]; 2]) -> CMatrix {
    let n = m.nrows() / 2;
    let mut rows = linalg::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..2 * n {
            let (a, b) = (m[[i, j]], m[[n + i, j]]);
            rows[[i, j]] = a * r[0][0] + b * r[0][1];
            rows[[n + i, j]] = a * r[1][0] + b * r[1][1];
        }
    }
    let mut out = linalg::zeros(2 * n, 2 * n);
    for i in 0..2 * n {
        for j in 0..n {
            let (a, b) = (rows[[i, j]], rows[[i, n + j]]);
            // (M R†)[:, j] = Σ_k M[:, k] r[j][k] for real r
            out[[i, j]] = a * r[0][0] + b * r[0][1];
            out[[i, n + j]] = a * r[1][0] + b * r[1][1];
        }
    }
    out
}

/// `T M T†` without forming `T`: shifts the excited-spin rows/columns down one field level.
fn shift_conjugate(m: &CMatrix, dims: &SpaceDims) -> CMatrix {
    let total = dims.total();
    let map = |i: usize| -> Option<usize> {
        let (s, c, f) = dims.split(i);
        if s == 0 {
            (f + 1 < dims.n_field).then(|| dims.index(0, c, f + 1))
        } else {
            Some(i)
        }
    };
    let sources: Vec<Option<usize>> = (0..total).map(map).collect();
    let mut out = linalg::zeros(total, total);
    for (i, si) in sources.iter().enumerate() {
        let Some(si) = *si else { continue };
        for (j, sj) in sources.iter().enumerate() {
            if let Some(sj) = *sj {
                out[[i, j]] = m[[si, sj]];
            }
        }
    }
    out
}

/// `T R_y M R_y† T†` with the frozen convention.
pub fn right_unitary_conjugate(m: &CMatrix, dims: &SpaceDims) -> CMatrix {
    shift_conjugate(&rotate(m, CONVENTION.rotation()), dims)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    /// `‖H_I^j − T R_y H_z^j R_y† T†‖_F` on the guarded sub-block, `j = 1, 2, 3`.
    pub residuals: [f64; 3],
    /// Same residuals over the full truncated space (corrupted near the top field level).
    pub unguarded: [f64; 3],
}

fn decomposition_residuals(s: &ScenarioParams, conv: Convention) -> Result<DecompositionReport> {
    let h_i = build_interaction_hamiltonian(s)?;
    let h_z = auxiliary_with(s, conv)?;
    let mut residuals = [0.0; 3];
    let mut unguarded = [0.0; 3];
    let (mut hp, mut zp) = (h_i.clone(), h_z.clone());
    for j in 0..3 {
        if j > 0 {
            hp = hp.dot(&h_i);
            zp = zp.dot(&h_z);
        }
        let rebuilt = shift_conjugate(&rotate(&zp, conv.rotation()), &s.dims);
        residuals[j] = s.dims.guarded_distance(&hp, &rebuilt);
        unguarded[j] = linalg::frobenius_distance(&hp, &rebuilt)?;
    }
    Ok(DecompositionReport {
        residuals,
        unguarded,
    })
}

/// Residuals of `H_I = T R_y H_z R_y† T†` and of its powers `j = 2, 3`.
pub fn verify_decomposition(s: &ScenarioParams) -> Result<DecompositionReport> {
    decomposition_residuals(s, CONVENTION)
}

/// j = 1 residual for every sign candidate; the minimum identifies the consistent convention.
pub fn calibrate_convention(s: &ScenarioParams) -> Result<(Convention, Vec<(Convention, f64)>)> {
    let h_i = build_interaction_hamiltonian(s)?;
    let mut scored = Vec::new();
    for conv in Convention::CANDIDATES {
        let h_z = auxiliary_with(s, conv)?;
        let rebuilt = shift_conjugate(&rotate(&h_z, conv.rotation()), &s.dims);
        scored.push((conv, s.dims.guarded_distance(&h_i, &rebuilt)));
    }
    let best = scored
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("candidates")
        .0;
    Ok((best, scored))
}

fn check_norm(psi: &StateVector, dim: usize) -> Result<()> {
    if psi.len() != dim {
        return Err(Error::DimMismatch {
            expected: dim.to_string(),
            found: psi.len().to_string(),
        });
    }
    let n = linalg::norm(psi);
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::invalid(
            "psi0",
            format!("state must be normalized, |psi| = {n}"),
        ));
    }
    Ok(())
}

/// `ψ(t) = exp(−i H_I t) ψ0` from one spectral decomposition of the full matrix.
pub fn propagate_oracle(
    h_i: &CMatrix,
    psi0: &StateVector,
    times: &[f64],
) -> Result<Vec<StateVector>> {
    check_norm(psi0, h_i.nrows())?;
    let d = hermitian_spectral(h_i)?;
    let coeffs = d.coefficients(psi0);
    Ok(times.iter().map(|&t| d.evolve_from(&coeffs, t)).collect())
}

/// One independent block of `H_z`: a field sector (and, on resonance, a spin component).
#[derive(Debug, Clone)]
pub struct SectorBlock {
    pub k: usize,
    /// Spin components carried by the block: `[0]`, `[1]` or `[0, 1]`.
    pub spins: Vec<usize>,
    /// Auxiliary-space indices, ordered spin-major then CM.
    pub indices: Vec<usize>,
    pub spectral: SpectralDecomposition,
}

/// The sector-wise `T R_y exp(−i H_z t) R_y† T†` propagator.
#[derive(Debug, Clone)]
pub struct DecomposedPropagator {
    pub dims: SpaceDims,
    pub blocks: Vec<SectorBlock>,
    /// `p²/2 + δ/2` on the excited ⊗ top-field subspace.
    pub boundary: SpectralDecomposition,
}

/// Block of `H_z` for field sector `k` and the given spin components.
pub fn sector_hamiltonian(cm: &CmOperators, k: usize, spins: &[usize], delta: f64) -> CMatrix {
    let n = cm.kinetic.nrows();
    let m = spins.len();
    let mut h = linalg::zeros(m * n, m * n);
    let root = (k as f64).sqrt() * CONVENTION.coupling_sign;
    for (bi, &s) in spins.iter().enumerate() {
        let sz = if s == 0 { 1.0 } else { -1.0 };
        let mut blk = h.slice_mut(ndarray::s![bi * n..(bi + 1) * n, bi * n..(bi + 1) * n]);
        blk.assign(&(&cm.kinetic + &cm.coupling.mapv(|x| x * (sz * root))));
    }
    if m == 2 {
        for i in 0..n {
            h[[i, n + i]] = C64::new(-delta / 2.0, 0.0);
            h[[n + i, i]] = C64::new(-delta / 2.0, 0.0);
        }
    }
    h
}

/// `R_y† T† ψ`.
pub fn to_auxiliary(d: &SpaceDims, psi: &StateVector) -> StateVector {
    let half = d.n_cm * d.n_field;
    let mut shifted = psi.clone();
    // T†: excited component moves up one field level; the top level is dropped
    for c in 0..d.n_cm {
        for f in (0..d.n_field).rev() {
            shifted[d.index(0, c, f)] = if f == 0 {
                ZERO
            } else {
                psi[d.index(0, c, f - 1)]
            };
        }
    }
    let r = CONVENTION.rotation();
    let mut out = shifted.clone();
    for i in 0..half {
        let (u, l) = (shifted[i], shifted[half + i]);
        // R† = Rᵀ for the real rotation
        out[i] = u * r[0][0] + l * r[1][0];
        out[half + i] = u * r[0][1] + l * r[1][1];
    }
    out
}

/// `T R_y χ`.
pub fn from_auxiliary(d: &SpaceDims, chi: &StateVector) -> StateVector {
    let half = d.n_cm * d.n_field;
    let r = CONVENTION.rotation();
    let mut rotated = chi.clone();
    for i in 0..half {
        let (u, l) = (chi[i], chi[half + i]);
        rotated[i] = u * r[0][0] + l * r[0][1];
        rotated[half + i] = u * r[1][0] + l * r[1][1];
    }
    let mut out = rotated.clone();
    for c in 0..d.n_cm {
        for f in 0..d.n_field {
            out[d.index(0, c, f)] = if f + 1 < d.n_field {
                rotated[d.index(0, c, f + 1)]
            } else {
                ZERO
            };
        }
    }
    out
}

impl DecomposedPropagator {
    pub fn new(s: &ScenarioParams) -> Result<Self> {
        s.validate()?;
        let cm = cm_operators(s)?;
        let dims = s.dims;
        let spin_groups: Vec<Vec<usize>> = if s.delta == 0.0 {
            vec![vec![0], vec![1]]
        } else {
            vec![vec![0, 1]]
        };
        let mut blocks = Vec::new();
        for k in 0..dims.n_field {
            for spins in &spin_groups {
                let h = sector_hamiltonian(&cm, k, spins, s.delta);
                let indices = spins
                    .iter()
                    .flat_map(|&sp| (0..dims.n_cm).map(move |c| (sp, c)))
                    .map(|(sp, c)| dims.index(sp, c, k))
                    .collect();
                blocks.push(SectorBlock {
                    k,
                    spins: spins.clone(),
                    indices,
                    spectral: hermitian_spectral(&h)?,
                });
            }
        }
        let mut boundary_h = cm.kinetic.clone();
        for i in 0..dims.n_cm {
            boundary_h[[i, i]] += s.delta / 2.0;
        }
        Ok(DecomposedPropagator {
            dims,
            blocks,
            boundary: hermitian_spectral(&boundary_h)?,
        })
    }

    /// `R_y† T† ψ`.
    pub fn to_auxiliary(&self, psi: &StateVector) -> StateVector {
        to_auxiliary(&self.dims, psi)
    }

    /// `T R_y χ`.
    pub fn from_auxiliary(&self, chi: &StateVector) -> StateVector {
        from_auxiliary(&self.dims, chi)
    }

    fn boundary_component(&self, psi: &StateVector) -> StateVector {
        let d = &self.dims;
        (0..d.n_cm)
            .map(|c| psi[d.index(0, c, d.n_field - 1)])
            .collect()
    }

    /// Precomputed eigenbasis coefficients for repeated evaluation at many times.
    pub fn prepare(&self, psi0: &StateVector) -> Result<PreparedState> {
        check_norm(psi0, self.dims.total())?;
        let chi = self.to_auxiliary(psi0);
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let x: StateVector = b.indices.iter().map(|&i| chi[i]).collect();
                b.spectral.coefficients(&x)
            })
            .collect();
        let boundary = self.boundary.coefficients(&self.boundary_component(psi0));
        Ok(PreparedState { blocks, boundary })
    }

    pub fn evolve(&self, prepared: &PreparedState, t: f64) -> StateVector {
        let d = &self.dims;
        let mut chi = Array1::from_elem(d.total(), ZERO);
        for (b, coeffs) in self.blocks.iter().zip(&prepared.blocks) {
            let y = b.spectral.evolve_from(coeffs, t);
            for (&i, v) in b.indices.iter().zip(y.iter()) {
                chi[i] = *v;
            }
        }
        let mut psi = self.from_auxiliary(&chi);
        let edge = self.boundary.evolve_from(&prepared.boundary, t);
        for c in 0..d.n_cm {
            psi[d.index(0, c, d.n_field - 1)] += edge[c];
        }
        psi
    }

    pub fn propagate(&self, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
        let prepared = self.prepare(psi0)?;
        Ok(times.iter().map(|&t| self.evolve(&prepared, t)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct PreparedState {
    blocks: Vec<StateVector>,
    boundary: StateVector,
}

pub fn propagate_decomposed(
    s: &ScenarioParams,
    psi0: &StateVector,
    times: &[f64],
) -> Result<Vec<StateVector>> {
    DecomposedPropagator::new(s)?.propagate(psi0, times)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub dims: (usize, usize),
    pub time_points: usize,
    pub oracle_seconds: f64,
    pub decomposed_seconds: f64,
    pub speedup: f64,
    /// Smallest `|⟨ψ_oracle|ψ_decomposed⟩|²` over the grid.
    pub min_fidelity: f64,
}

/// Times both propagators end to end (Hamiltonian construction, diagonalization, evaluation).
pub fn benchmark_propagators(s: &ScenarioParams, psi0: &StateVector) -> Result<BenchmarkReport> {
    let start = Instant::now();
    let h_i = build_interaction_hamiltonian(s)?;
    let oracle = propagate_oracle(&h_i, psi0, &s.times)?;
    let oracle_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let decomposed = propagate_decomposed(s, psi0, &s.times)?;
    let decomposed_seconds = start.elapsed().as_secs_f64();

    let min_fidelity = oracle
        .iter()
        .zip(&decomposed)
        .map(|(a, b)| linalg::inner(a.view(), b.view()).norm_sqr())
        .fold(1.0f64, f64::min);
    Ok(BenchmarkReport {
        dims: (s.dims.n_cm, s.dims.n_field),
        time_points: s.times.len(),
        oracle_seconds,
        decomposed_seconds,
        speedup: oracle_seconds / decomposed_seconds,
        min_fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{CouplingKind, ShapeParams, Sign};
    use crate::hilbert::{coherent_state, fock_state, product_state};
    use crate::linalg::{commutator, expectation, frobenius_norm, identity, max_asymmetry};
    use approx::assert_abs_diff_eq;

    fn scenario(coupling: CouplingSpec, n_cm: usize, n_field: usize, delta: f64) -> ScenarioParams {
        ScenarioParams::new(
            coupling,
            SpaceDims::new(n_cm, n_field).unwrap(),
            delta,
            vec![0.0],
        )
    }

    fn excited(beta: C64, n: usize, dims: &SpaceDims) -> StateVector {
        let spin = ndarray::arr1(&[ONE, ZERO]);
        product_state(
            &spin,
            &coherent_state(beta, dims.n_cm).vector,
            &fock_state(n, dims.n_field).unwrap(),
        )
    }

    #[test]
    fn free_particle_hamiltonian() {
        let s = scenario(CouplingSpec::quadratic(0.0, 0.0, Sign::Plus), 16, 3, 0.0);
        let h = build_interaction_hamiltonian(&s).unwrap();
        let q = hilbert::quadrature_ops(16).unwrap();
        let want = embed(&q.p.dot(&q.p).mapv(|x| x * 0.5), Slot::Cm, &s.dims).unwrap();
        assert!(linalg::frobenius_distance(&h, &want).unwrap() <= 1e-14);
    }

    #[test]
    fn diagonal_expectation_is_kinetic_plus_detuning() {
        let delta = 0.4;
        let s = scenario(CouplingSpec::quadratic(1.0, 1.0, Sign::Plus), 16, 4, delta);
        let h = build_interaction_hamiltonian(&s).unwrap();
        let psi = excited(C64::new(0.0, 0.0), 2, &s.dims);
        // ⟨0|p²|0⟩ = 1/2
        assert_abs_diff_eq!(
            expectation(&h, &psi).re,
            0.25 + delta / 2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn hamiltonian_conserves_excitation() {
        let s = scenario(CouplingSpec::quadratic(1.0, 1.0, Sign::Plus), 32, 8, 0.0);
        let h = build_interaction_hamiltonian(&s).unwrap();
        assert!(max_asymmetry(&h) <= 1e-12);
        let x = OperatorSet::new(s.dims).unwrap().excitation();
        assert!(frobenius_norm(&commutator(&h, &x)) <= 1e-12);
    }

    #[test]
    fn auxiliary_blocks_on_resonance() {
        let s = scenario(CouplingSpec::quadratic(1.0, 1.0, Sign::Plus), 16, 4, 0.0);
        let h = build_auxiliary_hamiltonian(&s).unwrap();
        let cm = cm_operators(&s).unwrap();
        let d = s.dims;
        for k in 0..d.n_field {
            for spin in 0..2 {
                let sz = if spin == 0 { 1.0 } else { -1.0 };
                let want = &cm.kinetic + &cm.coupling.mapv(|x| x * sz * (k as f64).sqrt());
                for i in 0..d.n_cm {
                    for j in 0..d.n_cm {
                        assert!(
                            (h[[d.index(spin, i, k), d.index(spin, j, k)]] - want[[i, j]]).norm()
                                <= 1e-14
                        );
                    }
                }
            }
        }
        // block diagonal: no coupling between spins or sectors
        for a in 0..d.total() {
            for b in 0..d.total() {
                let (sa, _, fa) = d.split(a);
                let (sb, _, fb) = d.split(b);
                if sa != sb || fa != fb {
                    assert_eq!(h[[a, b]], ZERO);
                }
            }
        }
        // k = 0: both spin blocks are the bare kinetic term
        let q = hilbert::quadrature_ops(16).unwrap();
        let g = q.z.dot(&q.z).mapv(|x| x * 0.5) + identity(16);
        let k = 3;
        let up = &cm.kinetic + &g.mapv(|x| x * (k as f64).sqrt());
        assert!(
            linalg::frobenius_distance(&up, &sector_hamiltonian(&cm, k, &[0], 0.0)).unwrap()
                <= 1e-13
        );
    }

    #[test]
    fn auxiliary_matches_direct_assembly() {
        let delta = 0.5;
        let s = scenario(
            CouplingSpec::shape(CouplingKind::Sech2, 1.0, ShapeParams::default()),
            12,
            4,
            delta,
        );
        let h = build_auxiliary_hamiltonian(&s).unwrap();
        let ops = OperatorSet::new(s.dims).unwrap();
        let cm = cm_operators(&s).unwrap();
        let d = s.dims;
        let g_full = embed(&cm.coupling, Slot::Cm, &d).unwrap();
        let sqrt_n = embed(&ops.sqrt_n, Slot::Field, &d).unwrap();
        let sz = embed(&ops.sigma_z, Slot::Spin, &d).unwrap();
        let sx = embed(&ops.sigma_x, Slot::Spin, &d).unwrap();
        let direct = embed(&cm.kinetic, Slot::Cm, &d).unwrap() + g_full.dot(&sqrt_n).dot(&sz)
            - sx.mapv(|x| x * delta / 2.0);
        assert!(linalg::frobenius_distance(&h, &direct).unwrap() <= 1e-13);
        for spins in [vec![0, 1]] {
            let blk = sector_hamiltonian(&cm, 2, &spins, delta);
            let idx: Vec<usize> = spins
                .iter()
                .flat_map(|&sp| (0..d.n_cm).map(move |c| d.index(sp, c, 2)))
                .collect();
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    assert!((blk[[a, b]] - h[[i, j]]).norm() <= 1e-13);
                }
            }
        }
    }

    #[test]
    fn decomposition_operator_identities() {
        let d = SpaceDims::new(8, 5).unwrap();
        let ops = decomposition_operators(&d).unwrap();
        let tt = ops.t_op.dot(&ops.t_dag);
        // exact except the excited ⊗ top-field rows
        let mut want = identity(d.total());
        for c in 0..d.n_cm {
            want[[d.index(0, c, d.n_field - 1), d.index(0, c, d.n_field - 1)]] = ZERO;
        }
        assert_eq!(tt, want);
        assert_eq!(d.guarded_distance(&tt, &identity(d.total())), 0.0);

        let deficiency = identity(d.total()) - ops.t_dag.dot(&ops.t_op);
        let mut projector = linalg::zeros(d.total(), d.total());
        for c in 0..d.n_cm {
            projector[[d.index(0, c, 0), d.index(0, c, 0)]] = ONE;
        }
        assert_eq!(deficiency, projector);
        let rank = hermitian_spectral(&deficiency)
            .unwrap()
            .eigenvalues
            .iter()
            .filter(|e| **e > 0.5)
            .count();
        assert_eq!(rank, d.n_cm);

        let rr = ops.r_y.dot(&ops.r_y_dag);
        assert!(linalg::leading_block_deviation(&rr, &identity(d.total()), d.total()) <= 1e-15);
    }

    #[test]
    fn structured_conjugation_matches_dense() {
        let s = scenario(CouplingSpec::quadratic(1.0, 0.7, Sign::Minus), 8, 4, 0.3);
        let h_z = build_auxiliary_hamiltonian(&s).unwrap();
        let ops = decomposition_operators(&s.dims).unwrap();
        let dense = ops
            .t_op
            .dot(&ops.r_y)
            .dot(&h_z)
            .dot(&ops.r_y_dag)
            .dot(&ops.t_dag);
        let fast = right_unitary_conjugate(&h_z, &s.dims);
        assert!(linalg::frobenius_distance(&dense, &fast).unwrap() <= 1e-13);

        let prop = DecomposedPropagator::new(&s).unwrap();
        let psi: StateVector = (0..s.dims.total())
            .map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let aux_dense = ops.r_y_dag.dot(&ops.t_dag.dot(&psi));
        let aux_fast = prop.to_auxiliary(&psi);
        assert!(linalg::norm(&(aux_dense - &aux_fast)) <= 1e-13);
        let back_dense = ops.t_op.dot(&ops.r_y.dot(&aux_fast));
        assert!(linalg::norm(&(back_dense - prop.from_auxiliary(&aux_fast))) <= 1e-13);
    }

    #[test]
    fn calibration_selects_frozen_convention() {
        let s = scenario(CouplingSpec::quadratic(1.0, 1.0, Sign::Plus), 12, 4, 0.5);
        let (best, scored) = calibrate_convention(&s).unwrap();
        assert_eq!(best, CONVENTION);
        let zero = scored.iter().filter(|(_, r)| *r <= 1e-12).count();
        assert_eq!(zero, 1, "{scored:?}");
        // the rotation written as exp(+iπ/4 σy) leaves a nonzero residual for every coupling sign
        assert!(scored
            .iter()
            .filter(|(c, _)| c.rotation_sign > 0.0)
            .all(|(_, r)| *r > 1e-3));
    }

    #[test]
    fn decomposition_residuals_quadratic() {
        let s = scenario(CouplingSpec::quadratic(1.0, 1.0, Sign::Plus), 24, 6, 0.0);
        let r = verify_decomposition(&s).unwrap();
        assert!(r.residuals[0] <= 1e-10, "{r:?}");
        assert!(r.residuals[1] <= 1e-9, "{r:?}");
        assert!(r.residuals[2] <= 1e-9, "{r:?}");
        // the top field level is where truncation breaks V V† = 1
        assert!(r.unguarded[0] > 1e-3);

        let jc = scenario(CouplingSpec::quadratic(1.0, 0.0, Sign::Plus), 16, 5, 0.7);
        let r = verify_decomposition(&jc).unwrap();
        assert!(r.residuals.iter().all(|x| *x <= 1e-10), "{r:?}");
    }

    #[test]
    fn oracle_basics() {
        let mut s = scenario(CouplingSpec::quadratic(1.0, 1.0, Sign::Minus), 16, 4, 0.0);
        s.times = vec![0.0, 0.5, 1.0];
        let h = build_interaction_hamiltonian(&s).unwrap();
        let psi0 = excited(C64::new(-0.2, 0.1), 1, &s.dims);
        let out = propagate_oracle(&h, &psi0, &s.times).unwrap();
        assert!(linalg::norm(&(&out[0] - &psi0)) <= 1e-12);
        let x = OperatorSet::new(s.dims).unwrap().excitation();
        for psi in &out {
            assert_abs_diff_eq!(linalg::norm(psi), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(expectation(&x, psi).re, 1.5, epsilon = 1e-10);
        }
        assert!(propagate_oracle(&h, &psi0.mapv(|x| x * 2.0), &s.times).is_err());
    }

    #[test]
    fn decomposed_matches_oracle_off_resonance() {
        let mut s = scenario(
            CouplingSpec::shape(
                CouplingKind::Sinusoidal,
                1.0,
                ShapeParams {
                    width: 1.0,
                    wavenumber: 0.6,
                },
            ),
            16,
            5,
            0.5,
        );
        s.times = vec![0.0, 0.3, 1.1, 2.0];
        let psi0 = excited(C64::new(0.2, -0.1), 2, &s.dims);
        let h = build_interaction_hamiltonian(&s).unwrap();
        let a = propagate_oracle(&h, &psi0, &s.times).unwrap();
        let b = propagate_decomposed(&s, &psi0, &s.times).unwrap();
        assert!(linalg::norm(&(&b[0] - &psi0)) <= 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert!(1.0 - linalg::inner(x.view(), y.view()).norm_sqr() <= 1e-10);
        }
    }

    #[test]
    fn decomposed_semigroup() {
        let s = scenario(CouplingSpec::quadratic(1.0, 1.0, Sign::Plus), 16, 4, 0.0);
        let prop = DecomposedPropagator::new(&s).unwrap();
        let psi0 = excited(C64::new(0.1, 0.2), 1, &s.dims);
        let t = 1.3;
        let half = prop.propagate(&psi0, &[t / 2.0]).unwrap().remove(0);
        let twice = prop.propagate(&half, &[t / 2.0]).unwrap().remove(0);
        let full = prop.propagate(&psi0, &[t]).unwrap().remove(0);
        assert!(linalg::norm(&(twice - full)) <= 1e-9);
    }
}
