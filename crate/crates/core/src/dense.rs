//! Dense complex operators on the full Hilbert space.
//!
//! Everything at N <= 3 fits comfortably in memory (dim <= 512), so
//! operators are plain row-major complex matrices and products go through
//! BLAS. A hermitian flag is carried alongside; setting it is verified
//! against the entries at construction time.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entrywise tolerance for exact operator algebra (hermiticity,
/// involutions, commutators of symmetry operators).
pub const TOL_ALGEBRA: f64 = 1e-12;

/// Tolerance for classifying a pair of operators as (anti)commuting.
pub const TOL_RELATION: f64 = 1e-10;

/// Outcome of [`algebra_relation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlgebraRelation {
    Commute,
    Anticommute,
    Neither,
}

/// Dense operator with a verified hermiticity flag.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    entries: Array2<Complex64>,
    hermitian: bool,
}

impl DenseOperator {
    /// Wrap a matrix, verifying the hermitian claim entrywise.
    pub fn new(entries: Array2<Complex64>, hermitian: bool) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                left: entries.nrows(),
                right: entries.ncols(),
            });
        }
        if hermitian {
            let dev = hermiticity_deviation(&entries.view());
            if dev >= TOL_ALGEBRA {
                return Err(Error::NotHermitian { deviation: dev });
            }
        }
        Ok(Self { entries, hermitian })
    }

    /// Identity operator.
    pub fn identity(dim: usize) -> Self {
        Self {
            entries: Array2::eye(dim),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn entries(&self) -> ArrayView2<'_, Complex64> {
        self.entries.view()
    }

    pub fn into_entries(self) -> Array2<Complex64> {
        self.entries
    }

    /// A * B via BLAS.
    pub fn matmul(&self, other: &DenseOperator) -> Result<DenseOperator> {
        self.check_dim(other)?;
        let dim = self.dim();
        let mut out = Array2::zeros((dim, dim));
        zgemm(
            Complex64::new(1.0, 0.0),
            &self.entries.view(),
            &other.entries.view(),
            Complex64::new(0.0, 0.0),
            &mut out,
        );
        DenseOperator::new(out, false)
    }

    /// self <- self + c * other.
    pub fn add_scaled(&mut self, c: Complex64, other: &DenseOperator) -> Result<()> {
        self.check_dim(other)?;
        self.entries.zip_mut_with(&other.entries, |a, &b| *a += c * b);
        self.hermitian = false;
        Ok(())
    }

    /// Re-verify hermiticity and set the flag.
    pub fn assert_hermitian(mut self) -> Result<Self> {
        let dev = hermiticity_deviation(&self.entries.view());
        if dev >= TOL_ALGEBRA {
            return Err(Error::NotHermitian { deviation: dev });
        }
        self.hermitian = true;
        Ok(self)
    }

    /// y = A x.
    pub fn apply(&self, x: &ArrayView1<Complex64>) -> Result<Array1<Complex64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: x.len(),
            });
        }
        Ok(self.entries.dot(x))
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// max_ij |(self - other)_ij|.
    pub fn max_abs_diff(&self, other: &DenseOperator) -> Result<f64> {
        self.check_dim(other)?;
        let mut max = 0.0f64;
        for (a, b) in self.entries.iter().zip(other.entries.iter()) {
            max = max.max((a - b).norm());
        }
        Ok(max)
    }

    /// max_ij |(AB - BA)_ij|.
    pub fn commutator_max(&self, other: &DenseOperator) -> Result<f64> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        ab.max_abs_diff(&ba)
    }

    /// max_ij |(AB + BA)_ij|.
    pub fn anticommutator_max(&self, other: &DenseOperator) -> Result<f64> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        let mut max = 0.0f64;
        for (a, b) in ab.entries.iter().zip(ba.entries.iter()) {
            max = max.max((a + b).norm());
        }
        Ok(max)
    }

    /// max_ij |(A^2 - 1)_ij|; zero for involutions.
    pub fn involution_deviation(&self) -> Result<f64> {
        let sq = self.matmul(self)?;
        sq.max_abs_diff(&DenseOperator::identity(self.dim()))
    }

    /// Trace.
    pub fn trace(&self) -> Complex64 {
        self.entries.diag().sum()
    }

    fn check_dim(&self, other: &DenseOperator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }
}

/// Classify a pair of same-dimension operators as commuting,
/// anticommuting, or neither (entrywise, tolerance [`TOL_RELATION`]).
///
/// A numerically zero operand satisfies both tests at once and is
/// reported as an error rather than an arbitrary pick.
pub fn algebra_relation(a: &DenseOperator, b: &DenseOperator) -> Result<AlgebraRelation> {
    let comm = a.commutator_max(b)?;
    let anti = a.anticommutator_max(b)?;
    let commutes = comm < TOL_RELATION;
    let anticommutes = anti < TOL_RELATION;
    match (commutes, anticommutes) {
        (true, true) => Err(Error::AmbiguousRelation),
        (true, false) => Ok(AlgebraRelation::Commute),
        (false, true) => Ok(AlgebraRelation::Anticommute),
        (false, false) => Ok(AlgebraRelation::Neither),
    }
}

pub(crate) fn hermiticity_deviation(a: &ArrayView2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut max = 0.0f64;
    for i in 0..n {
        for j in i..n {
            max = max.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    max
}

/// C = alpha * A * B + beta * C through BLAS, row-major.
pub(crate) fn zgemm(
    alpha: Complex64,
    a: &ArrayView2<Complex64>,
    b: &ArrayView2<Complex64>,
    beta: Complex64,
    c: &mut Array2<Complex64>,
) {
    let (m, k) = (a.nrows(), a.ncols());
    let n = b.ncols();
    assert_eq!(k, b.nrows());
    assert_eq!((m, n), (c.nrows(), c.ncols()));
    let a_slice = a.as_slice().expect("contiguous row-major lhs");
    let b_slice = b.as_slice().expect("contiguous row-major rhs");
    let c_slice = c.as_slice_mut().expect("contiguous row-major out");
    unsafe {
        cblas_sys::cblas_zgemm(
            cblas_sys::CBLAS_LAYOUT::CblasRowMajor,
            cblas_sys::CBLAS_TRANSPOSE::CblasNoTrans,
            cblas_sys::CBLAS_TRANSPOSE::CblasNoTrans,
            m as i32,
            n as i32,
            k as i32,
            &alpha as *const Complex64 as *const _,
            a_slice.as_ptr() as *const _,
            k as i32,
            b_slice.as_ptr() as *const _,
            n as i32,
            &beta as *const Complex64 as *const _,
            c_slice.as_mut_ptr() as *mut _,
            n as i32,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn pauli_x() -> DenseOperator {
        let x = array![
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
        ];
        DenseOperator::new(x, true).unwrap()
    }

    fn pauli_y() -> DenseOperator {
        let y = array![
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0)],
            [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)]
        ];
        DenseOperator::new(y, true).unwrap()
    }

    #[test]
    fn hermitian_flag_is_verified() {
        let bad = array![
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            [Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0)]
        ];
        assert!(matches!(
            DenseOperator::new(bad, true),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn single_site_algebra() {
        let x = pauli_x();
        let y = pauli_y();
        assert_eq!(
            algebra_relation(&x, &y).unwrap(),
            AlgebraRelation::Anticommute
        );
        assert!(x.involution_deviation().unwrap() < TOL_ALGEBRA);
        let id = DenseOperator::identity(2);
        assert_eq!(
            algebra_relation(&x, &id).unwrap(),
            AlgebraRelation::Commute
        );
    }

    #[test]
    fn zero_operand_is_ambiguous() {
        let zero = DenseOperator::new(Array2::zeros((2, 2)), true).unwrap();
        assert!(matches!(
            algebra_relation(&zero, &pauli_x()),
            Err(Error::AmbiguousRelation)
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let x = pauli_x();
        let id4 = DenseOperator::identity(4);
        assert!(matches!(
            algebra_relation(&x, &id4),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn matmul_matches_hand_product() {
        let x = pauli_x();
        let y = pauli_y();
        // X * Y = i Z
        let xy = x.matmul(&y).unwrap();
        assert!((xy.entries()[(0, 0)] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((xy.entries()[(1, 1)] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }
}
