//! Dense complex linear algebra helpers.
//!
//! Matrices are `nalgebra` dense matrices of `Complex64`. Storage is
//! column-major, and `vec` stacks columns top to bottom; every identity used
//! by the Fisher forms relies on that convention.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const J: Complex64 = Complex64::new(0.0, 1.0);

/// Relative tolerance on `‖A − Aᴴ‖` accepted before a matrix is symmetrized.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Tolerance on `|z| − 1` for unit-modulus entries.
pub const UNIT_MODULUS_TOLERANCE: f64 = 1e-12;

/// A complex vector whose entries all lie on the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(CVector);

impl UnitVector {
    pub fn new(values: CVector) -> Result<Self> {
        for (index, z) in values.iter().enumerate() {
            let modulus = z.norm();
            if !modulus.is_finite() || (modulus - 1.0).abs() > UNIT_MODULUS_TOLERANCE {
                return Err(Error::NotUnimodular { index, modulus });
            }
        }
        Ok(Self(values))
    }

    pub fn ones(n: usize) -> Self {
        Self(CVector::from_element(n, ONE))
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        Self(CVector::from_iterator(
            phases.len(),
            phases.iter().map(|&p| Complex64::from_polar(1.0, p)),
        ))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_inner(self) -> CVector {
        self.0
    }

    pub fn phases(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.arg()).collect()
    }
}

impl AsRef<CVector> for UnitVector {
    fn as_ref(&self) -> &CVector {
        &self.0
    }
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Kronecker product; block `(i, j)` of the result is `a[(i, j)] · b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`]: reshapes a column into a `rows × cols` matrix.
pub fn unvec(c: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if c.len() != rows * cols {
        return Err(Error::dims("unvec", rows * cols, c.len()));
    }
    Ok(CMatrix::from_column_slice(rows, cols, c.as_slice()))
}

/// The `pq × pq` permutation `K` with `K · vec(A) = vec(Aᵀ)` for every
/// `p × q` matrix `A`.
pub fn commutation_matrix(p: usize, q: usize) -> CMatrix {
    let mut k = CMatrix::zeros(p * q, p * q);
    for i in 0..p {
        for j in 0..q {
            k[(j + i * q, i + j * p)] = ONE;
        }
    }
    k
}

pub fn hadamard(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::dims(
            "hadamard",
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    Ok(a.component_mul(b))
}

/// Assembles `Diag(blocks)`; off-diagonal blocks are zero.
pub fn block_diag(blocks: &[CMatrix]) -> Result<CMatrix> {
    if blocks.is_empty() {
        return Err(Error::Empty("block_diag"));
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for block in blocks {
        out.view_mut((r, c), block.shape()).copy_from(block);
        r += block.nrows();
        c += block.ncols();
    }
    Ok(out)
}

pub fn diag(values: &CVector) -> CMatrix {
    CMatrix::from_diagonal(values)
}

/// Largest entry modulus of `A − Aᴴ` relative to the largest entry of `A`.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    let scale = a.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if scale == 0.0 {
        return 0.0;
    }
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// `(A + Aᴴ) / 2`.
pub fn symmetrize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

fn check_hermitian(op: &'static str, a: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            op,
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(op));
    }
    let deviation = hermitian_deviation(a);
    if deviation > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian { op, deviation });
    }
    Ok(())
}

/// Smallest and largest eigenvalue of a Hermitian matrix.
///
/// The input is symmetrized before a dense Hermitian eigensolve, so roundoff
/// asymmetry below [`HERMITIAN_TOLERANCE`] is tolerated.
pub fn hermitian_extreme_eigs(a: &CMatrix) -> Result<(f64, f64)> {
    check_hermitian("hermitian_extreme_eigs", a)?;
    if a.nrows() == 0 {
        return Err(Error::Empty("hermitian_extreme_eigs"));
    }
    let eigs = symmetrize(a).symmetric_eigenvalues();
    let min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}

/// Maps every entry onto the unit circle, keeping its phase.
///
/// Zero entries map to `1`. Entries already unit-modulus to within a few ulps
/// are returned untouched, which makes the projection exactly idempotent.
pub fn unit_modulus_project(z: &CVector) -> UnitVector {
    UnitVector(z.map(project_entry))
}

#[inline]
pub(crate) fn project_entry(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        ONE
    } else if (r - 1.0).abs() <= 4.0 * f64::EPSILON {
        z
    } else {
        z / r
    }
}

/// Real part of `sᴴ G s`.
pub fn quadratic_form(g: &CMatrix, s: &CVector) -> f64 {
    s.dotc(&(g * s)).re
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
