//! Closed-form on-resonance propagator for quadratic couplings `g± = g0 ± λz²/2`.
//!
//! In field sector `k` the auxiliary blocks are `±g0√k` plus a standard
//! (`H₊ = (p² + ω²z²)/2`) or inverted (`H₋ = (p² − ω²z²)/2`) oscillator with
//! `ω(k) = √(λ√k)`. Their propagators `S±(k, t) = exp(−i H± t)` are available
//! in two forms:
//!
//! * direct: squeeze-conjugated exponentials, `S(ξ) exp(−iω(b†b + ½)t) S†(ξ)`
//!   and `S(ξ) exp(+i(ω/2)(b†² + b²)t) S†(ξ)` with `ξ = ½ ln ω`;
//! * disentangled: `exp(f b†²) · h^(2b†b+1) · exp(f b²)` with scalar
//!   coefficients `f±(k, t)`, `h±(k, t)`.
//!
//! The disentangled form has exact matrix elements on any truncated basis
//! (`b²` only lowers), so it is the one used to assemble `U_I(t)`. The direct
//! form is evaluated on an enlarged working basis until its leading block
//! converges.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::coupling::Sign;
use crate::dynamics::{
    from_auxiliary, right_unitary_conjugate, to_auxiliary, ScenarioParams, CONVENTION,
};
use crate::error::{Error, Result};
use crate::hilbert::{self, SpaceDims};
use crate::linalg::{
    self, dagger, exp_nilpotent, exp_nilpotent_apply, hermitian_spectral, CMatrix,
    SpectralDecomposition, StateVector, I, ONE, ZERO,
};

/// Convergence threshold for the enlarged-basis direct form.
pub const DIRECT_TOL: f64 = 1e-12;
const MAX_WORK_DIM: usize = 2048;

/// `ω(k) = √(λ √k)`.
pub fn sector_frequency(k: usize, lambda: f64) -> f64 {
    (lambda * (k as f64).sqrt()).sqrt()
}

/// Per-sector value of the squeeze parameter ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeParameter {
    pub xi: C64,
}

impl SqueezeParameter {
    pub fn new(xi: C64) -> Result<Self> {
        if !xi.re.is_finite() || !xi.im.is_finite() {
            return Err(Error::invalid("xi", "squeeze parameter must be finite"));
        }
        Ok(SqueezeParameter { xi })
    }

    /// `ξ = ½ ln ω(k)`.
    pub fn for_frequency(omega: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::invalid(
                "omega",
                format!("squeeze parameter needs ω > 0, got {omega}"),
            ));
        }
        Self::new(C64::new(0.5 * omega.ln(), 0.0))
    }
}

fn b_squared(dim: usize) -> Result<(CMatrix, CMatrix)> {
    let q = hilbert::quadrature_ops(dim)?;
    Ok((q.b.dot(&q.b), q.b_dag.dot(&q.b_dag)))
}

fn squeeze_on(xi: SqueezeParameter, work: usize) -> Result<CMatrix> {
    let (b2, bd2) = b_squared(work)?;
    let generator = (bd2.mapv(|x| x * xi.xi) - b2.mapv(|x| x * xi.xi.conj())).mapv(|x| x * -0.5);
    // exp(G) = exp(−i (iG) · 1) with iG Hermitian
    linalg::unitary_from_hermitian(&generator.mapv(|x| x * I), 1.0)
}

/// `S(ξ) = exp(−½(ξ b†² − ξ* b²))`, leading `dim × dim` block of the untruncated operator.
pub fn squeeze_operator(xi: SqueezeParameter, dim: usize) -> Result<CMatrix> {
    converged_block(dim, |w| squeeze_on(xi, w))
}

fn leading(m: &CMatrix, dim: usize) -> CMatrix {
    m.slice(ndarray::s![..dim, ..dim]).to_owned()
}

/// Evaluates `build(work_dim)` on growing bases until its leading `dim × dim` block settles.
fn converged_block(dim: usize, build: impl Fn(usize) -> Result<CMatrix>) -> Result<CMatrix> {
    let mut work = (2 * dim).max(dim + 32);
    let mut prev = leading(&build(work)?, dim);
    loop {
        let next_work = 2 * work;
        if next_work > MAX_WORK_DIM.max(4 * dim) {
            log::warn!("direct form not converged below working dimension {work}");
            return Ok(prev);
        }
        let next = leading(&build(next_work)?, dim);
        let change = linalg::leading_block_deviation(&prev, &next, dim);
        prev = next;
        work = next_work;
        if change <= DIRECT_TOL {
            return Ok(prev);
        }
    }
}

fn require_positive_frequency(k: usize, lambda: f64) -> Result<f64> {
    let omega = sector_frequency(k, lambda);
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Unsupported(format!(
            "sector k = {k} with λ = {lambda} has ω = 0; the squeezed form is singular (use the free-particle propagator)"
        )));
    }
    Ok(omega)
}

fn direct_on(work: usize, omega: f64, t: f64, sign: Sign) -> Result<CMatrix> {
    let s = squeeze_on(SqueezeParameter::for_frequency(omega)?, work)?;
    let middle = match sign {
        Sign::Plus => {
            let phases: Vec<C64> = (0..work)
                .map(|j| C64::from_polar(1.0, -omega * (j as f64 + 0.5) * t))
                .collect();
            let mut m = linalg::zeros(work, work);
            for (j, p) in phases.into_iter().enumerate() {
                m[[j, j]] = p;
            }
            m
        }
        Sign::Minus => {
            // exp(−i H₋ t) with H₋ = −(ω/2) S (b†² + b²) S†
            let (b2, bd2) = b_squared(work)?;
            let gen = (&b2 + &bd2).mapv(|x| x * (-omega / 2.0));
            linalg::unitary_from_hermitian(&gen, t)?
        }
    };
    Ok(s.dot(&middle).dot(&dagger(&s)))
}

/// `S₊(k, t) = S(ξ) exp(−iω(b†b + ½)t) S†(ξ)`, leading `dim × dim` block.
pub fn s_plus_direct(k: usize, t: f64, lambda: f64, dim: usize) -> Result<CMatrix> {
    let omega = require_positive_frequency(k, lambda)?;
    converged_block(dim, |w| direct_on(w, omega, t, Sign::Plus))
}

/// `S₋(k, t) = exp(−i H₋ t) = S(ξ) exp(+i(ω/2)(b†² + b²)t) S†(ξ)`, leading `dim × dim` block.
pub fn s_minus_direct(k: usize, t: f64, lambda: f64, dim: usize) -> Result<CMatrix> {
    let omega = require_positive_frequency(k, lambda)?;
    converged_block(dim, |w| direct_on(w, omega, t, Sign::Minus))
}

pub fn s_direct(k: usize, t: f64, lambda: f64, dim: usize, sign: Sign) -> Result<CMatrix> {
    match sign {
        Sign::Plus => s_plus_direct(k, t, lambda, dim),
        Sign::Minus => s_minus_direct(k, t, lambda, dim),
    }
}

/// Disentangling coefficients `(f±, h±)` at `ω = ω(k)`.
///
/// `cot`/`coth` are cleared by multiplying through with `sin`/`sinh`, so
/// `f₊ = i(1 − ω²) sin θ / (2D₊)` with `D₊ = 2ω cos θ + i(1 + ω²) sin θ`,
/// `θ = ωt`, and `h₊ = √(2ω/D₊)` on the branch continuous from `h(0) = 1`.
/// The minus pair follows with `cos, sin, 1 + ω²` replaced by `cosh, sinh, 1 − ω²`.
pub fn f_h_coefficients(k: usize, t: f64, lambda: f64, sign: Sign) -> Result<(C64, C64)> {
    let omega = require_positive_frequency(k, lambda)?;
    Ok(f_h_for_frequency(omega, t, sign))
}

pub fn f_h_for_frequency(omega: f64, t: f64, sign: Sign) -> (C64, C64) {
    let theta = omega * t;
    let w2 = omega * omega;
    match sign {
        Sign::Plus => {
            let d = C64::new(2.0 * omega * theta.cos(), (1.0 + w2) * theta.sin());
            let f = I * (1.0 - w2) * theta.sin() / (d * 2.0);
            let principal = d.im.atan2(d.re);
            let turns = ((theta - principal) / std::f64::consts::TAU).round();
            let arg = principal + turns * std::f64::consts::TAU;
            let h = C64::from_polar((2.0 * omega / d.norm()).sqrt(), -arg / 2.0);
            (f, h)
        }
        Sign::Minus => {
            let d = C64::new(2.0 * omega * theta.cosh(), (1.0 - w2) * theta.sinh());
            let f = I * (1.0 + w2) * theta.sinh() / (d * 2.0);
            // Re d > 0 for all t: principal branch is continuous
            let h = (C64::new(2.0 * omega, 0.0) / d).sqrt();
            (f, h)
        }
    }
}

fn middle_diagonal(h: C64, dim: usize) -> Array1<C64> {
    let h2 = h * h;
    let mut out = Array1::from_elem(dim, ZERO);
    let mut p = h;
    for j in 0..dim {
        out[j] = p;
        p *= h2;
    }
    out
}

/// `exp(f b†²) · h^(2b†b+1) · exp(f b²)` on a `dim`-level CM basis.
pub fn s_pm_factored(k: usize, t: f64, lambda: f64, dim: usize, sign: Sign) -> Result<CMatrix> {
    let (f, h) = f_h_coefficients(k, t, lambda, sign)?;
    factored_matrix(f, h, dim)
}

fn factored_matrix(f: C64, h: C64, dim: usize) -> Result<CMatrix> {
    let (b2, bd2) = b_squared(dim)?;
    let right = exp_nilpotent(&b2, f)?;
    let left = exp_nilpotent(&bd2, f)?;
    let mid = middle_diagonal(h, dim);
    let mut scaled = right;
    for (mut row, m) in scaled.rows_mut().into_iter().zip(mid.iter()) {
        row.mapv_inplace(|x| x * m);
    }
    Ok(left.dot(&scaled))
}

/// Evolution data of one auxiliary block: field sector `k`, potential branch `sign`.
#[derive(Debug, Clone)]
pub struct SectorPropagator {
    pub k: usize,
    pub omega_k: f64,
    pub sign: Sign,
    pub f: C64,
    pub h: C64,
    pub u_block: CMatrix,
    pub phase: C64,
}

/// Free-particle fallback for sectors with `ω(k) = 0`.
fn free_propagator(dim: usize) -> Result<SpectralDecomposition> {
    let q = hilbert::quadrature_ops(dim)?;
    hermitian_spectral(&q.p.dot(&q.p).mapv(|x| x * 0.5))
}

impl SectorPropagator {
    /// `phase_sign = −1` for the excited-like auxiliary block (`e^{−i g0 √k t}`), `+1` otherwise.
    fn build(
        k: usize,
        t: f64,
        g0: f64,
        lambda: f64,
        sign: Sign,
        phase_sign: f64,
        dim: usize,
    ) -> Result<Self> {
        let omega_k = sector_frequency(k, lambda);
        let phase = C64::from_polar(1.0, phase_sign * g0 * (k as f64).sqrt() * t);
        if omega_k > 0.0 {
            let (f, h) = f_h_for_frequency(omega_k, t, sign);
            Ok(SectorPropagator {
                k,
                omega_k,
                sign,
                f,
                h,
                u_block: factored_matrix(f, h, dim)?,
                phase,
            })
        } else {
            Ok(SectorPropagator {
                k,
                omega_k,
                sign,
                f: ZERO,
                h: ONE,
                u_block: free_propagator(dim)?.propagator(t),
                phase,
            })
        }
    }
}

fn check_scenario(s: &ScenarioParams) -> Result<()> {
    s.validate()?;
    if !s.coupling.is_quadratic() {
        return Err(Error::Unsupported(
            "closed-form propagator requires a quadratic coupling".into(),
        ));
    }
    if s.delta != 0.0 {
        return Err(Error::Unsupported(
            "closed-form propagator requires delta = 0; use the numerical propagators".into(),
        ));
    }
    Ok(())
}

/// Auxiliary blocks at time `t`: for every sector, the excited-like block (`e^{−ig0√k t} S±`)
/// and the ground-like block (`e^{+ig0√k t} S∓`).
pub fn sector_propagators(s: &ScenarioParams, t: f64) -> Result<Vec<[SectorPropagator; 2]>> {
    check_scenario(s)?;
    let c = &s.coupling;
    let sign = if CONVENTION.coupling_sign > 0.0 {
        c.sign
    } else {
        c.sign.flip()
    };
    (0..s.dims.n_field)
        .map(|k| {
            Ok([
                SectorPropagator::build(
                    k,
                    t,
                    c.g0,
                    c.lambda,
                    sign,
                    -CONVENTION.coupling_sign,
                    s.dims.n_cm,
                )?,
                SectorPropagator::build(
                    k,
                    t,
                    c.g0,
                    c.lambda,
                    sign.flip(),
                    CONVENTION.coupling_sign,
                    s.dims.n_cm,
                )?,
            ])
        })
        .collect()
}

/// Closed-form `U_I(t) = T R_y diag(e^{−ig0√n̂ t} S±, e^{ig0√n̂ t} S∓) R_y† T†` on the full space.
///
/// Sectors with `ω(k) = 0` use `exp(−i p² t/2)`. The excited ⊗ top-field block,
/// which `T` cannot reach on a truncated basis, evolves freely.
pub fn evolution_operator_quadratic(s: &ScenarioParams, t: f64) -> Result<CMatrix> {
    let sectors = sector_propagators(s, t)?;
    let d = s.dims;
    let mut aux = linalg::zeros(d.total(), d.total());
    for (k, pair) in sectors.iter().enumerate() {
        for (spin, sp) in pair.iter().enumerate() {
            for i in 0..d.n_cm {
                for j in 0..d.n_cm {
                    aux[[d.index(spin, i, k), d.index(spin, j, k)]] = sp.phase * sp.u_block[[i, j]];
                }
            }
        }
    }
    let mut u = right_unitary_conjugate(&aux, &d);
    let edge = free_propagator(d.n_cm)?.propagator(t);
    let top = d.n_field - 1;
    for i in 0..d.n_cm {
        for j in 0..d.n_cm {
            u[[d.index(0, i, top), d.index(0, j, top)]] = edge[[i, j]];
        }
    }
    Ok(u)
}

/// State-level application of the closed-form propagator, for time series.
#[derive(Debug, Clone)]
pub struct AnalyticPropagator {
    scenario: ScenarioParams,
    b2: CMatrix,
    bd2: CMatrix,
    free: SpectralDecomposition,
}

impl AnalyticPropagator {
    pub fn new(s: &ScenarioParams) -> Result<Self> {
        check_scenario(s)?;
        let (b2, bd2) = b_squared(s.dims.n_cm)?;
        Ok(AnalyticPropagator {
            scenario: s.clone(),
            b2,
            bd2,
            free: free_propagator(s.dims.n_cm)?,
        })
    }

    fn apply_block(&self, omega: f64, sign: Sign, t: f64, x: &StateVector) -> Result<StateVector> {
        if omega > 0.0 {
            let (f, h) = f_h_for_frequency(omega, t, sign);
            let y = exp_nilpotent_apply(&self.b2, f, x)?;
            let y = &y * &middle_diagonal(h, x.len());
            exp_nilpotent_apply(&self.bd2, f, &y)
        } else {
            Ok(self.free.evolve(x, t))
        }
    }

    pub fn evolve(&self, psi0: &StateVector, t: f64) -> Result<StateVector> {
        let s = &self.scenario;
        let d = s.dims;
        let c = &s.coupling;
        let chi = to_auxiliary(&d, psi0);
        let mut out = Array1::from_elem(d.total(), ZERO);
        let sign = if CONVENTION.coupling_sign > 0.0 {
            c.sign
        } else {
            c.sign.flip()
        };
        for k in 0..d.n_field {
            let omega = sector_frequency(k, c.lambda);
            let rk = (k as f64).sqrt();
            for (spin, branch, phase_sign) in [(0usize, sign, -1.0), (1usize, sign.flip(), 1.0)] {
                let idx: Vec<usize> = (0..d.n_cm).map(|cm| d.index(spin, cm, k)).collect();
                let x: StateVector = idx.iter().map(|&i| chi[i]).collect();
                if x.iter().all(|v| *v == ZERO) {
                    continue;
                }
                let phase =
                    C64::from_polar(1.0, phase_sign * CONVENTION.coupling_sign * c.g0 * rk * t);
                let y = self.apply_block(omega, branch, t, &x)?;
                for (&i, v) in idx.iter().zip(y.iter()) {
                    out[i] = phase * v;
                }
            }
        }
        let mut psi = from_auxiliary(&d, &out);
        let top = d.n_field - 1;
        let edge: StateVector = (0..d.n_cm).map(|cm| psi0[d.index(0, cm, top)]).collect();
        if edge.iter().any(|v| *v != ZERO) {
            let e = self.free.evolve(&edge, t);
            for cm in 0..d.n_cm {
                psi[d.index(0, cm, top)] += e[cm];
            }
        }
        Ok(psi)
    }

    pub fn propagate(&self, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
        times.iter().map(|&t| self.evolve(psi0, t)).collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClosedFormInversion {
    pub value: f64,
    /// `|value(2·n_cm) − value(n_cm)|`.
    pub truncation_estimate: f64,
}

fn inversion_sum(
    n: usize,
    beta: C64,
    t: f64,
    g0: f64,
    lambda: f64,
    sign: Sign,
    dim: usize,
    keep: usize,
) -> Result<f64> {
    let k = n + 1;
    let omega = sector_frequency(k, lambda);
    let (upper, lower) = if omega > 0.0 {
        (
            factored_matrix_for(omega, t, sign, dim)?,
            factored_matrix_for(omega, t, sign.flip(), dim)?,
        )
    } else {
        let u = free_propagator(dim)?.propagator(t);
        (u.clone(), u)
    };
    // ⟨j|S_upper† S_lower|k⟩
    let m = dagger(&upper).dot(&lower);
    let c = hilbert::coherent_amplitudes(beta, keep);
    let mut sum = ZERO;
    for j in 0..keep {
        for l in 0..keep {
            sum += c[j].conj() * c[l] * m[[j, l]];
        }
    }
    let phase = C64::from_polar(
        1.0,
        2.0 * CONVENTION.coupling_sign * g0 * (k as f64).sqrt() * t,
    );
    Ok((phase * sum).re)
}

fn factored_matrix_for(omega: f64, t: f64, sign: Sign, dim: usize) -> Result<CMatrix> {
    let (f, h) = f_h_for_frequency(omega, t, sign);
    factored_matrix(f, h, dim)
}

/// `⟨σz(t)⟩` for the initial state `|e⟩|β⟩|n⟩` as the double sum
/// `Re[e^{2ig0√(n+1)t} Σ_{j,k} c_j* c_k ⟨j|S±†(n+1,t) S∓(n+1,t)|k⟩]` over coherent amplitudes `c`.
pub fn sigma_z_fock_closed_form(
    n: usize,
    beta: C64,
    t: f64,
    s: &ScenarioParams,
) -> Result<ClosedFormInversion> {
    check_scenario(s)?;
    let c = &s.coupling;
    let sign = if CONVENTION.coupling_sign > 0.0 {
        c.sign
    } else {
        c.sign.flip()
    };
    let dims: SpaceDims = s.dims;
    let base = inversion_sum(
        n,
        beta,
        t,
        c.g0,
        c.lambda,
        sign,
        dims.n_cm,
        dims.guarded_cm(),
    )?;
    let doubled = inversion_sum(
        n,
        beta,
        t,
        c.g0,
        c.lambda,
        sign,
        2 * dims.n_cm,
        2 * dims.guarded_cm(),
    )?;
    Ok(ClosedFormInversion {
        value: base,
        truncation_estimate: (doubled - base).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingSpec;
    use crate::linalg::{identity, leading_block_deviation, unitarity_residual};
    use approx::assert_abs_diff_eq;

    #[test]
    fn frequencies() {
        assert_eq!(sector_frequency(0, 1.0), 0.0);
        assert_eq!(sector_frequency(1, 1.0), 1.0);
        assert_abs_diff_eq!(sector_frequency(4, 1.0), 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(sector_frequency(5, 0.0), 0.0);
    }

    #[test]
    fn squeeze_basics() {
        let id = squeeze_operator(SqueezeParameter::new(ZERO).unwrap(), 16).unwrap();
        assert!(leading_block_deviation(&id, &identity(16), 16) <= 1e-15);
        let dim = 48;
        let s = squeeze_operator(SqueezeParameter::new(C64::new(0.2, 0.0)).unwrap(), dim).unwrap();
        let si =
            squeeze_operator(SqueezeParameter::new(C64::new(-0.2, 0.0)).unwrap(), dim).unwrap();
        let keep = 12;
        assert!(leading_block_deviation(&s.dot(&si), &identity(dim), keep) <= 1e-10);
        assert!(unitarity_residual(&s, keep) <= 1e-10);
        // S(ξ)† = S(−ξ)
        assert!(leading_block_deviation(&dagger(&s), &si, dim) <= 1e-12);
        assert!(SqueezeParameter::for_frequency(0.0).is_err());
    }

    #[test]
    fn squeeze_rescales_quadratures() {
        let dim = 96;
        let keep = 48;
        let q = hilbert::quadrature_ops(dim).unwrap();
        let xi = 0.1;
        let s = squeeze_operator(SqueezeParameter::new(C64::new(xi, 0.0)).unwrap(), dim).unwrap();
        let z = s.dot(&q.z).dot(&dagger(&s));
        assert!(leading_block_deviation(&z, &q.z.mapv(|x| x * xi.exp()), keep) <= 1e-8);
        let p = s.dot(&q.p).dot(&dagger(&s));
        assert!(leading_block_deviation(&p, &q.p.mapv(|x| x * (-xi).exp()), keep) <= 1e-8);
    }

    #[test]
    fn direct_forms_at_special_points() {
        let dim = 24;
        for sign in [Sign::Plus, Sign::Minus] {
            let u = s_direct(2, 0.0, 1.0, dim, sign).unwrap();
            assert!(leading_block_deviation(&u, &identity(dim), dim) <= 1e-12);
        }
        // ω = 1: no squeezing, S₊ is the bare oscillator propagator
        let t = 0.8;
        let u = s_plus_direct(1, t, 1.0, dim).unwrap();
        for j in 0..dim {
            let want = C64::from_polar(1.0, -t * (j as f64 + 0.5));
            assert!((u[[j, j]] - want).norm() <= 1e-12);
        }
        assert!(s_plus_direct(0, t, 1.0, dim).is_err());
    }

    #[test]
    fn coefficient_limits() {
        for sign in [Sign::Plus, Sign::Minus] {
            let (f, h) = f_h_coefficients(3, 0.0, 1.0, sign).unwrap();
            assert_eq!(f, ZERO);
            assert!((h - ONE).norm() <= 1e-15);
            let (f, h) = f_h_coefficients(3, 1e-9, 1.0, sign).unwrap();
            assert!(f.norm() < 1e-8 && (h - ONE).norm() < 1e-8);
        }
        for t in [0.3, 2.0, std::f64::consts::PI, 7.5, 13.0] {
            let (f, h) = f_h_coefficients(1, t, 1.0, Sign::Plus).unwrap();
            assert_eq!(f.norm(), 0.0);
            assert!(
                (h - C64::from_polar(1.0, -t / 2.0)).norm() <= 1e-14,
                "t = {t}"
            );
        }
        assert!(f_h_coefficients(0, 1.0, 1.0, Sign::Plus).is_err());
    }

    #[test]
    fn coefficients_finite_at_cotangent_poles() {
        let omega = sector_frequency(2, 1.0);
        let t = std::f64::consts::PI / omega;
        let (f, h) = f_h_coefficients(2, t, 1.0, Sign::Plus).unwrap();
        assert!(f.norm() < 1e-14 && h.norm().is_finite());
        let (f, _) = f_h_coefficients(2, t / 2.0, 1.0, Sign::Plus).unwrap();
        // cos θ = 0: f₊ = (1 − ω²)/(2(1 + ω²))
        let w2 = omega * omega;
        assert!((f - C64::new((1.0 - w2) / (2.0 * (1.0 + w2)), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn factored_matches_direct() {
        let dim = 48;
        let keep = 36;
        let (k, t) = (2, 0.7);
        let factored = s_pm_factored(k, t, 1.0, dim, Sign::Minus).unwrap();
        let direct = s_minus_direct(k, t, 1.0, dim).unwrap();
        assert!(leading_block_deviation(&factored, &direct, keep) <= 1e-9);
        // exp(−(i/2)ω(b†² + b²)t) inside the conjugation is a different operator
        let w = sector_frequency(k, 1.0);
        let wrong = direct_on(256, w, -t, Sign::Minus).unwrap();
        assert!(leading_block_deviation(&factored, &leading(&wrong, dim), keep) > 1e-2);
    }

    #[test]
    fn factored_identity_and_diagonal_cases() {
        let dim = 20;
        assert!(
            leading_block_deviation(
                &s_pm_factored(3, 0.0, 1.0, dim, Sign::Minus).unwrap(),
                &identity(dim),
                dim
            ) <= 1e-15
        );
        let t = 1.7;
        let u = s_pm_factored(1, t, 1.0, dim, Sign::Plus).unwrap();
        let mut want = linalg::zeros(dim, dim);
        for j in 0..dim {
            want[[j, j]] = C64::from_polar(1.0, -t * (2.0 * j as f64 + 1.0) / 2.0);
        }
        assert!(leading_block_deviation(&u, &want, dim) <= 1e-13);
    }

    #[test]
    fn analytic_operator_rejects_unsupported() {
        let dims = SpaceDims::new(16, 3).unwrap();
        let s = ScenarioParams::new(
            CouplingSpec::quadratic(1.0, 1.0, Sign::Plus),
            dims,
            0.5,
            vec![0.0],
        );
        assert!(matches!(
            evolution_operator_quadratic(&s, 1.0),
            Err(Error::Unsupported(_))
        ));
        let s = ScenarioParams::new(
            CouplingSpec::expression("1 + z^2").unwrap(),
            dims,
            0.0,
            vec![0.0],
        );
        assert!(matches!(
            evolution_operator_quadratic(&s, 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn analytic_operator_identity_and_unitarity() {
        // squeezing spreads low Fock levels upward, so only a small leading block is certified
        let dims = SpaceDims::with_guards(48, 4, 40, 2).unwrap();
        let s = ScenarioParams::new(
            CouplingSpec::quadratic(1.0, 1.0, Sign::Plus),
            dims,
            0.0,
            vec![0.0],
        );
        let u0 = evolution_operator_quadratic(&s, 0.0).unwrap();
        assert!(leading_block_deviation(&u0, &identity(dims.total()), dims.total()) <= 1e-12);
        let u = evolution_operator_quadratic(&s, 0.3).unwrap();
        let uu = u.dot(&dagger(&u));
        assert!(dims.guarded_distance(&uu, &identity(dims.total())) <= 1e-9);
    }

    #[test]
    fn state_application_matches_operator() {
        let dims = SpaceDims::new(24, 4).unwrap();
        let s = ScenarioParams::new(
            CouplingSpec::quadratic(0.8, 1.0, Sign::Minus),
            dims,
            0.0,
            vec![0.0],
        );
        let prop = AnalyticPropagator::new(&s).unwrap();
        let psi: StateVector = (0..dims.total())
            .map(|i| C64::new((0.1 * i as f64).cos(), (0.37 * i as f64).sin()))
            .collect();
        let psi = psi.mapv(|x| x / linalg::norm(&psi));
        let t = 0.9;
        let a = evolution_operator_quadratic(&s, t).unwrap().dot(&psi);
        let b = prop.evolve(&psi, t).unwrap();
        assert!(linalg::norm(&(a - b)) <= 1e-11);
    }

    #[test]
    fn closed_form_at_zero_time() {
        let dims = SpaceDims::new(32, 4).unwrap();
        let s = ScenarioParams::new(
            CouplingSpec::quadratic(1.0, 1.0, Sign::Plus),
            dims,
            0.0,
            vec![0.0],
        );
        let r = sigma_z_fock_closed_form(0, C64::new(-0.25, 0.25) / 2f64.sqrt(), 0.0, &s).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }
}
