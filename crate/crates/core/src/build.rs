//! Constructors for every operator of the model.
//!
//! The protection Hamiltonian couples all spin pairs within each row
//! through sigma^x sigma^x and within each column through sigma^y sigma^y:
//!
//!   H0 = -(J_x / 2) sum_i (sum_j sigma^x_ij)^2  -  (J_y / 2) sum_j (sum_i sigma^y_ij)^2
//!
//! The 1/2 makes each bond enter with strength J exactly, so the measured
//! 2x2 gap is 2(sqrt(2) - 1) in units of J. Each squared line sum expands
//! to N plus pair terms; the constant shift is kept.
//!
//! Row products P_i = prod_j sigma^y_ij and column products
//! Q_j = prod_i sigma^x_ij commute with H0 and pairwise obey
//! [P_i, P_i'] = [Q_j, Q_j'] = 0 = {P_i, Q_j}, P_i^2 = Q_j^2 = 1.

use ndarray::Array2;
use num_complex::Complex64;

use crate::dense::DenseOperator;
use crate::error::Result;
use crate::lattice::{Axis, LatticeSpec, PauliString};

/// The 2n symmetry operators of an n x n lattice.
#[derive(Debug, Clone)]
pub struct SymmetryOperators {
    /// Row products of sigma^y: P_1 .. P_n.
    pub p: Vec<DenseOperator>,
    /// Column products of sigma^x: Q_1 .. Q_n.
    pub q: Vec<DenseOperator>,
}

/// Dense matrix of a Pauli string, built as a signed permutation in the
/// sigma^z product basis (site (1,1) = most significant bit).
pub fn build_pauli_string(lattice: &LatticeSpec, s: &PauliString) -> Result<DenseOperator> {
    s.validate(lattice)?;
    let dim = lattice.dim();
    let mut entries = Array2::<Complex64>::zeros((dim, dim));

    // Per-column action: the string maps |c> to phase * |c ^ flip_mask>.
    let mut flip_mask = 0usize;
    struct YBit {
        bit: usize,
    }
    let mut y_bits: Vec<YBit> = Vec::new();
    let mut z_bits: Vec<usize> = Vec::new();
    for ((row, col), axis) in s.factors() {
        let bit = lattice.site_bit(row, col)?;
        match axis {
            Axis::X => flip_mask |= 1 << bit,
            Axis::Y => {
                flip_mask |= 1 << bit;
                y_bits.push(YBit { bit });
            }
            Axis::Z => z_bits.push(bit),
        }
    }

    for c in 0..dim {
        let r = c ^ flip_mask;
        // sigma^y |0> = i |1>, sigma^y |1> = -i |0>; sigma^z |b> = (-1)^b |b>.
        let mut phase = Complex64::new(1.0, 0.0);
        for y in &y_bits {
            phase *= if (c >> y.bit) & 1 == 0 {
                Complex64::new(0.0, 1.0)
            } else {
                Complex64::new(0.0, -1.0)
            };
        }
        for &bit in &z_bits {
            if (c >> bit) & 1 == 1 {
                phase = -phase;
            }
        }
        entries[(r, c)] = phase;
    }

    DenseOperator::new(entries, true)
}

/// P_1..P_n and Q_1..Q_n as dense operators.
pub fn build_symmetry_operators(lattice: &LatticeSpec) -> Result<SymmetryOperators> {
    let n = lattice.n();
    let p = (1..=n as u8)
        .map(|i| build_pauli_string(lattice, &PauliString::full_row(n, i, Axis::Y)))
        .collect::<Result<Vec<_>>>()?;
    let q = (1..=n as u8)
        .map(|j| build_pauli_string(lattice, &PauliString::full_col(n, j, Axis::X)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SymmetryOperators { p, q })
}

/// Collective field S^u = sum over all sites of sigma^u, built as the
/// exact sum of the single-site strings.
pub fn build_collective_field(lattice: &LatticeSpec, axis: Axis) -> Result<DenseOperator> {
    let dim = lattice.dim();
    let mut acc = DenseOperator::new(Array2::zeros((dim, dim)), false)?;
    for (row, col) in lattice.sites() {
        let single = build_pauli_string(lattice, &PauliString::single(row, col, axis))?;
        acc.add_scaled(Complex64::new(1.0, 0.0), &single)?;
    }
    acc.assert_hermitian()
}

/// Sum of sigma^axis over one row (`line_row = true`) or one column.
fn line_field(lattice: &LatticeSpec, index: u8, axis: Axis, line_row: bool) -> Result<DenseOperator> {
    let dim = lattice.dim();
    let mut acc = DenseOperator::new(Array2::zeros((dim, dim)), false)?;
    for k in 1..=lattice.n() as u8 {
        let (row, col) = if line_row { (index, k) } else { (k, index) };
        let single = build_pauli_string(lattice, &PauliString::single(row, col, axis))?;
        acc.add_scaled(Complex64::new(1.0, 0.0), &single)?;
    }
    Ok(acc)
}

/// The protection Hamiltonian with uniform couplings.
pub fn build_protection_hamiltonian(lattice: &LatticeSpec) -> Result<DenseOperator> {
    build_protection_hamiltonian_scaled(
        lattice,
        &vec![1.0; lattice.n()],
        &vec![1.0; lattice.n()],
    )
}

/// Protection Hamiltonian with per-row / per-column coupling factors:
/// row i enters with J_x * row_scale[i-1], column j with J_y * col_scale[j-1].
/// Used to model residual coupling fluctuations.
pub fn build_protection_hamiltonian_scaled(
    lattice: &LatticeSpec,
    row_scale: &[f64],
    col_scale: &[f64],
) -> Result<DenseOperator> {
    assert_eq!(row_scale.len(), lattice.n());
    assert_eq!(col_scale.len(), lattice.n());
    let dim = lattice.dim();
    let mut acc = DenseOperator::new(Array2::zeros((dim, dim)), false)?;
    for i in 1..=lattice.n() as u8 {
        let x = line_field(lattice, i, Axis::X, true)?;
        let sq = x.matmul(&x)?;
        let c = -0.5 * lattice.j_x() * row_scale[i as usize - 1];
        acc.add_scaled(Complex64::new(c, 0.0), &sq)?;
    }
    for j in 1..=lattice.n() as u8 {
        let y = line_field(lattice, j, Axis::Y, false)?;
        let sq = y.matmul(&y)?;
        let c = -0.5 * lattice.j_y() * col_scale[j as usize - 1];
        acc.add_scaled(Complex64::new(c, 0.0), &sq)?;
    }
    acc.assert_hermitian()
}
