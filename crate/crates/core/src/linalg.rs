//! Dense complex linear algebra on row-major `ndarray` storage.
//!
//! Every operator in the crate is a [`CMatrix`]; states are [`StateVector`]s.
//! Hermitian generators are exponentiated through a single spectral backend
//! (LAPACK `heev` via `ndarray-linalg`), and nilpotent generators through a
//! terminating power series.

use ndarray::{Array1, Array2, ArrayView1, Axis, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = Array2<C64>;
pub type StateVector = Array1<C64>;

/// Relative Hermiticity tolerance; scaled by `max(1, max|A|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub fn identity(n: usize) -> CMatrix {
    Array2::eye(n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    Array2::zeros((rows, cols))
}

pub fn from_real_diag(diag: &[f64]) -> CMatrix {
    let mut m = zeros(diag.len(), diag.len());
    for (i, &d) in diag.iter().enumerate() {
        m[[i, i]] = C64::new(d, 0.0);
    }
    m
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.t().mapv(|x| x.conj())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.dot(b) - b.dot(a)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.norm()))
}

/// Largest entry of `|A - A^dag|`.
pub fn max_asymmetry(a: &CMatrix) -> f64 {
    let n = a.nrows();
    if n != a.ncols() {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn check_hermitian(a: &CMatrix) -> Result<()> {
    let asym = max_asymmetry(a);
    if asym > HERMITIAN_TOL * max_abs(a).max(1.0) {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    Ok(())
}

/// Kronecker product, `(A ⊗ B)[i*rB + k, j*cB + l] = A[i,j] * B[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = zeros(ra * rb, ca * cb);
    for ((i, j), &x) in a.indexed_iter() {
        if x == ZERO {
            continue;
        }
        let mut block = out.slice_mut(ndarray::s![i * rb..(i + 1) * rb, j * cb..(j + 1) * cb]);
        block.zip_mut_with(b, |o, &y| *o = x * y);
    }
    out
}

/// `sqrt(sum |A - B|^2)`.
pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: format!("{:?}", a.dim()),
            found: format!("{:?}", b.dim()),
        });
    }
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diag().sum()
}

pub fn norm(v: &StateVector) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: ArrayView1<C64>, b: ArrayView1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `<psi|op|psi>`.
pub fn expectation(op: &CMatrix, psi: &StateVector) -> C64 {
    inner(psi.view(), op.dot(psi).view())
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending, eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U f(e) U^dag` for an arbitrary complex function of the eigenvalues.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        self.with_values(self.eigenvalues.iter().map(|&e| f(e)))
    }

    /// `V diag(values) V†`, values in eigenvalue order.
    pub fn with_values(&self, values: impl IntoIterator<Item = C64>) -> CMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, v) in scaled.axis_iter_mut(Axis(1)).zip(values) {
            col.mapv_inplace(|x| x * v);
        }
        scaled.dot(&dagger(&self.eigenvectors))
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|e| C64::new(e, 0.0))
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        self.map(|e| C64::from_polar(1.0, -e * t))
    }

    /// Eigenbasis coefficients `U^dag psi`; reuse with [`Self::evolve_from`].
    pub fn coefficients(&self, psi: &StateVector) -> StateVector {
        dagger(&self.eigenvectors).dot(psi)
    }

    pub fn evolve_from(&self, coefficients: &StateVector, t: f64) -> StateVector {
        let phased: StateVector = coefficients
            .iter()
            .zip(self.eigenvalues.iter())
            .map(|(&c, &e)| c * C64::from_polar(1.0, -e * t))
            .collect();
        self.eigenvectors.dot(&phased)
    }

    pub fn evolve(&self, psi: &StateVector, t: f64) -> StateVector {
        self.evolve_from(&self.coefficients(psi), t)
    }
}

pub fn hermitian_spectral(a: &CMatrix) -> Result<SpectralDecomposition> {
    check_hermitian(a)?;
    // column-major input: the LAPACK wrapper conjugates eigenvectors of row-major complex input
    let mut sym = Array2::zeros(a.raw_dim().f());
    sym.assign(&(a + &dagger(a)).mapv(|x| x * 0.5));
    let (eigenvalues, eigenvectors) = sym
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Eigen(e.to_string()))?;
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn unitary_from_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    Ok(hermitian_spectral(h)?.propagator(t))
}

/// `exp(c N)` for nilpotent `N` by the terminating series `sum (cN)^j / j!`.
pub fn exp_nilpotent(n: &CMatrix, c: C64) -> Result<CMatrix> {
    let dim = n.nrows();
    let step = n.mapv(|x| x * c);
    let mut out = identity(dim);
    let mut term = identity(dim);
    for j in 1..=dim {
        term = term.dot(&step).mapv(|x| x / j as f64);
        if term.iter().all(|x| *x == ZERO) {
            return Ok(out);
        }
        out += &term;
    }
    Err(Error::NotNilpotent { steps: dim })
}

/// `exp(c N) v` without forming the matrix exponential.
pub fn exp_nilpotent_apply(n: &CMatrix, c: C64, v: &StateVector) -> Result<StateVector> {
    let dim = n.nrows();
    let mut out = v.clone();
    let mut term = v.clone();
    for j in 1..=dim + 1 {
        term = n.dot(&term).mapv(|x| x * c / j as f64);
        if term.iter().all(|x| *x == ZERO) {
            return Ok(out);
        }
        out += &term;
    }
    Err(Error::NotNilpotent { steps: dim })
}

/// `max |A^dag A - I|` over the leading `keep x keep` block.
pub fn unitarity_residual(u: &CMatrix, keep: usize) -> f64 {
    let prod = dagger(u).dot(u);
    leading_block_deviation(&prod, &identity(u.nrows()), keep)
}

/// Largest entry of `|A - B|` restricted to indices `< keep`.
pub fn leading_block_deviation(a: &CMatrix, b: &CMatrix, keep: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..keep.min(a.nrows()) {
        for j in 0..keep.min(a.ncols()) {
            worst = worst.max((a[[i, j]] - b[[i, j]]).norm());
        }
    }
    worst
}
