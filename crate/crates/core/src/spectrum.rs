//! Dense spectral analysis and the protected logical subspace.
//!
//! The ground space of the protection Hamiltonian is an exactly degenerate
//! doublet. [`extract_logical_basis`] rotates whatever pair the eigensolver
//! returns into simultaneous eigenstates of the row symmetries P_i, picks
//! the branch whose eigenvalues match the ferromagnetic -y product state
//! ((-1)^N for every row), and defines |1_L> := Q_1 |0_L>. With that
//! convention Q_1 acts on the doublet exactly as the logical tau^x and the
//! P_i act as (+/-) tau^z.

use ndarray::{array, Array1, Array2, ArrayView1};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::build::{build_collective_field, build_protection_hamiltonian, SymmetryOperators};
use crate::dense::DenseOperator;
use crate::dynamics::Schedule;
use crate::error::{Error, Result};
use crate::fit::{loglog_slope, Trim};
use crate::lattice::{Axis, LatticeSpec};

/// Residual tolerance for eigenpairs and symmetry actions on them.
pub const TOL_RESIDUAL: f64 = 1e-10;

/// Two levels closer than this (relative to J) count as degenerate.
pub const TOL_DEGENERACY: f64 = 1e-8;

/// Full spectrum of a hermitian operator, ascending.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Eigenvalues in ascending order (units of J).
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, matching `eigenvalues`.
    pub eigenvectors: Array2<Complex64>,
}

impl SpectralData {
    /// Eigenvector for level `k`.
    pub fn state(&self, k: usize) -> ArrayView1<'_, Complex64> {
        self.eigenvectors.column(k)
    }

    /// Gap between the ground doublet and the first excited level.
    pub fn doublet_gap(&self) -> f64 {
        self.eigenvalues[2] - self.eigenvalues[0]
    }
}

/// Dense eigendecomposition; the input must carry a verified hermitian flag.
pub fn diagonalize(h: &DenseOperator) -> Result<SpectralData> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian {
            deviation: f64::NAN,
        });
    }
    use ndarray_linalg::Eigh;
    let (vals, vecs) = h
        .entries()
        .eigh(ndarray_linalg::UPLO::Lower)
        .map_err(|e| Error::Linalg(e.to_string()))?;
    Ok(SpectralData {
        eigenvalues: vals.to_vec(),
        eigenvectors: vecs,
    })
}

/// The protected doublet with the phase convention pinned down.
#[derive(Debug, Clone)]
pub struct LogicalBasis {
    /// |0_L>: the ground state in the ferromagnet-connected P sector.
    pub zero_l: Array1<Complex64>,
    /// |1_L> = Q_1 |0_L>.
    pub one_l: Array1<Complex64>,
    /// Gap between the doublet and the first excited level.
    pub gap: f64,
    /// Doublet energy.
    pub ground_energy: f64,
    /// Largest eigenvalue of the diagonalized Hamiltonian.
    pub max_energy: f64,
    /// P_i eigenvalues of |0_L>.
    pub p_sector: Vec<i8>,
}

impl LogicalBasis {
    /// 2x2 block <a_L| op |b_L> in the (|0_L>, |1_L>) basis.
    pub fn logical_block(&self, op: &DenseOperator) -> Result<Array2<Complex64>> {
        let states = [&self.zero_l, &self.one_l];
        let mut block = Array2::zeros((2, 2));
        for (b, ket) in states.iter().enumerate() {
            let applied = op.apply(&ket.view())?;
            for (a, bra) in states.iter().enumerate() {
                block[(a, b)] = inner(&bra.view(), &applied.view());
            }
        }
        Ok(block)
    }
}

/// <a|b> with the bra conjugated.
pub fn inner(a: &ArrayView1<Complex64>, b: &ArrayView1<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Logical Pauli matrices.
pub fn tau_x() -> Array2<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    array![[z, one], [one, z]]
}

pub fn tau_y() -> Array2<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    array![[z, -i], [i, z]]
}

pub fn tau_z() -> Array2<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    array![[one, z], [z, -one]]
}

/// Diagonalize the protection Hamiltonian and fix the logical basis.
pub fn extract_logical_basis(
    h0: &DenseOperator,
    syms: &SymmetryOperators,
) -> Result<LogicalBasis> {
    let spec = diagonalize(h0)?;
    fix_ground_doublet(h0, syms, &spec)
}

/// Rotate a degenerate ground doublet into the convention basis.
///
/// Public so the phase convention can be exercised against arbitrary
/// unitary rotations of the incoming doublet.
pub fn fix_ground_doublet(
    h0: &DenseOperator,
    syms: &SymmetryOperators,
    spec: &SpectralData,
) -> Result<LogicalBasis> {
    let e = &spec.eigenvalues;
    if e.len() < 3 {
        return Err(Error::DegeneracyMismatch(
            "spectrum has fewer than three levels".into(),
        ));
    }
    if e[1] - e[0] >= TOL_DEGENERACY {
        return Err(Error::DegeneracyMismatch(format!(
            "ground splitting {:.3e} exceeds the degeneracy threshold",
            e[1] - e[0]
        )));
    }
    if e[2] - e[0] <= TOL_DEGENERACY {
        return Err(Error::DegeneracyMismatch(format!(
            "third level within {:.3e} of the ground pair",
            e[2] - e[0]
        )));
    }

    let n = syms.p.len();
    let v0 = spec.state(0);
    let v1 = spec.state(1);

    // Project P_1 into the doublet and diagonalize the 2x2 block in closed form.
    let p1 = &syms.p[0];
    let p1v0 = p1.apply(&v0)?;
    let p1v1 = p1.apply(&v1)?;
    let a = inner(&v0, &p1v0.view());
    let b = inner(&v0, &p1v1.view());
    let d = inner(&v1, &p1v1.view());
    if a.im.abs() > 1e-9 || d.im.abs() > 1e-9 {
        return Err(Error::SymmetryViolation(format!(
            "P_1 block is not hermitian in the doublet (imag {:.2e})",
            a.im.abs().max(d.im.abs())
        )));
    }
    let (a, d) = (a.re, d.re);
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let target = if n % 2 == 0 { 1.0 } else { -1.0 };
    let lambda = if (mid + rad - target).abs() <= (mid - rad - target).abs() {
        mid + rad
    } else {
        mid - rad
    };
    if (lambda - target).abs() > 1e-6 {
        return Err(Error::SymmetryViolation(format!(
            "no P_1 eigenvalue near {target} in the ground doublet (got {lambda:.6})"
        )));
    }
    // Eigenvector of the 2x2 block for `lambda`.
    let (c0, c1) = if b.norm() > 1e-14 {
        (b, Complex64::new(lambda - a, 0.0))
    } else if (a - lambda).abs() < (d - lambda).abs() {
        (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    } else {
        (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    };
    let norm = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
    let (c0, c1) = (c0 / norm, c1 / norm);

    let mut zero_l: Array1<Complex64> = &v0.to_owned() * c0 + &v1.to_owned() * c1;

    // Global phase: the largest-magnitude amplitude is made real positive.
    let mut max_idx = 0;
    let mut max_val = 0.0;
    for (idx, z) in zero_l.iter().enumerate() {
        let m = z.norm();
        if m > max_val {
            max_val = m;
            max_idx = idx;
        }
    }
    let anchor = zero_l[max_idx];
    let phase = anchor.conj() / anchor.norm();
    zero_l.mapv_inplace(|z| z * phase);

    // Partner state: |1_L> = Q_1 |0_L>, exactly the tau^x convention.
    let one_l = syms.q[0].apply(&zero_l.view())?;

    // Verify both states, the sector labels, and the symmetry actions.
    let ground_energy = e[0];
    for (label, state) in [("0_L", &zero_l), ("1_L", &one_l)] {
        let resid = eigen_residual(h0, state, ground_energy)?;
        if resid > TOL_RESIDUAL {
            return Err(Error::SymmetryViolation(format!(
                "|{label}> is not a ground eigenstate (residual {resid:.3e})"
            )));
        }
    }
    let ortho = inner(&zero_l.view(), &one_l.view()).norm();
    if ortho > TOL_RESIDUAL {
        return Err(Error::SymmetryViolation(format!(
            "logical states are not orthogonal (|<0|1>| = {ortho:.3e})"
        )));
    }

    let mut p_sector = Vec::with_capacity(n);
    for (i, p) in syms.p.iter().enumerate() {
        let pv = p.apply(&zero_l.view())?;
        let val = inner(&zero_l.view(), &pv.view());
        let sign = if val.re >= 0.0 { 1.0 } else { -1.0 };
        let resid = pv
            .iter()
            .zip(zero_l.iter())
            .map(|(x, y)| (x - sign * y).norm())
            .fold(0.0, f64::max);
        if resid > TOL_RESIDUAL {
            return Err(Error::SymmetryViolation(format!(
                "P_{} does not act diagonally on |0_L> (residual {resid:.3e})",
                i + 1
            )));
        }
        p_sector.push(sign as i8);
    }

    Ok(LogicalBasis {
        zero_l,
        one_l,
        gap: e[2] - e[0],
        ground_energy,
        max_energy: *e.last().unwrap(),
        p_sector,
    })
}

fn eigen_residual(
    h: &DenseOperator,
    state: &Array1<Complex64>,
    energy: f64,
) -> Result<f64> {
    let hv = h.apply(&state.view())?;
    Ok(hv
        .iter()
        .zip(state.iter())
        .map(|(x, y)| (x - energy * y).norm())
        .fold(0.0, f64::max))
}

/// One row of a degeneracy-splitting scan.
#[derive(Debug, Clone, Copy)]
pub struct SplittingPoint {
    pub h: f64,
    pub splitting: f64,
}

/// Result of [`ground_splitting_scan`].
#[derive(Debug, Clone)]
pub struct SplittingScan {
    pub points: Vec<SplittingPoint>,
    /// Log-log slope of splitting against h (inner-80% fit, h = 0 excluded).
    pub slope: f64,
}

/// Ground-doublet splitting under a static collective field h * S^axis.
pub fn ground_splitting_scan(
    lattice: &LatticeSpec,
    perturb_axis: Axis,
    amplitudes: &[f64],
) -> Result<SplittingScan> {
    let h0 = build_protection_hamiltonian(lattice)?;
    let field = build_collective_field(lattice, perturb_axis)?;
    let spec0 = diagonalize(&h0)?;
    let gap0 = spec0.doublet_gap();
    for &h in amplitudes {
        if !(h >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "perturbation amplitude must be nonnegative, got {h}"
            )));
        }
        if h >= 0.5 * gap0 {
            return Err(Error::InvalidParameter(format!(
                "amplitude h = {h} is not small against the gap {gap0:.4}"
            )));
        }
    }

    let points: Vec<SplittingPoint> = amplitudes
        .par_iter()
        .map(|&h| -> Result<SplittingPoint> {
            let mut ht = h0.clone();
            ht.add_scaled(Complex64::new(h, 0.0), &field)?;
            let ht = ht.assert_hermitian()?;
            let spec = diagonalize(&ht)?;
            let e = &spec.eigenvalues;
            // The perturbed doublet must stay separated from the excited levels.
            if e[2] - e[1] < 0.5 * gap0 {
                return Err(Error::LevelCrossing { h });
            }
            Ok(SplittingPoint {
                h,
                splitting: e[1] - e[0],
            })
        })
        .collect::<Result<_>>()?;

    let xs: Vec<f64> = points.iter().filter(|p| p.h > 0.0).map(|p| p.h).collect();
    let ys: Vec<f64> = points
        .iter()
        .filter(|p| p.h > 0.0)
        .map(|p| p.splitting)
        .collect();
    let slope = loglog_slope(&xs, &ys, Trim::Inner80)?;
    Ok(SplittingScan { points, slope })
}

/// Instantaneous spectrum of H_t = f(t) H0 + (1 - f(t)) S^y along a ramp,
/// eigenvalues in units of J (= j_x).
pub fn instantaneous_spectrum(
    lattice: &LatticeSpec,
    schedule: &Schedule,
    sample_times: &[f64],
) -> Result<Vec<(f64, Vec<f64>)>> {
    for &t in sample_times {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if t > schedule.t_final() {
            return Err(Error::InvalidParameter(format!(
                "sample time {t} beyond t_final = {}",
                schedule.t_final()
            )));
        }
    }
    let h0 = build_protection_hamiltonian(lattice)?;
    let sy = build_collective_field(lattice, Axis::Y)?;
    let j = lattice.j_x();
    sample_times
        .par_iter()
        .map(|&t| -> Result<(f64, Vec<f64>)> {
            let f = schedule.ramp_value(t)?;
            let mut ht = DenseOperator::new(
                ndarray::Array2::zeros((lattice.dim(), lattice.dim())),
                false,
            )?;
            ht.add_scaled(Complex64::new(f, 0.0), &h0)?;
            ht.add_scaled(Complex64::new(1.0 - f, 0.0), &sy)?;
            let ht = ht.assert_hermitian()?;
            let spec = diagonalize(&ht)?;
            Ok((t, spec.eigenvalues.iter().map(|e| e / j).collect()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build::{build_collective_field, build_symmetry_operators};

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn lat2() -> LatticeSpec {
        LatticeSpec::new(2, 1.0, 1.0).unwrap()
    }

    #[test]
    fn collective_y_spectrum_multiset() {
        // Sum of 4 commuting two-level observables: binomial degeneracies.
        let sy = build_collective_field(&lat2(), Axis::Y).unwrap();
        let spec = diagonalize(&sy).unwrap();
        let expected = [
            (-4.0, 1),
            (-2.0, 4),
            (0.0, 6),
            (2.0, 4),
            (4.0, 1),
        ];
        let mut idx = 0;
        for (val, count) in expected {
            for _ in 0..count {
                assert!(
                    (spec.eigenvalues[idx] - val).abs() < 1e-10,
                    "eigenvalue {idx}: {} != {val}",
                    spec.eigenvalues[idx]
                );
                idx += 1;
            }
        }
        assert_eq!(idx, 16);
    }

    #[test]
    fn ground_doublet_degenerate() {
        let h0 = build_protection_hamiltonian(&lat2()).unwrap();
        let spec = diagonalize(&h0).unwrap();
        assert!(spec.eigenvalues[1] - spec.eigenvalues[0] < 1e-10);
    }

    #[test]
    fn scaled_identity_spectrum() {
        let op = DenseOperator::new(
            Array2::eye(8).mapv(|x: f64| Complex64::new(2.5 * x, 0.0)),
            true,
        )
        .unwrap();
        let spec = diagonalize(&op).unwrap();
        for e in &spec.eigenvalues {
            assert!((e - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = Array2::<Complex64>::zeros((2, 2));
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        let op = DenseOperator::new(m, false).unwrap();
        assert!(diagonalize(&op).is_err());
    }

    fn basis2() -> (DenseOperator, SymmetryOperators, LogicalBasis) {
        let lat = lat2();
        let h0 = build_protection_hamiltonian(&lat).unwrap();
        let syms = build_symmetry_operators(&lat).unwrap();
        let basis = extract_logical_basis(&h0, &syms).unwrap();
        (h0, syms, basis)
    }

    #[test]
    fn gap_and_energy_n2() {
        let (_, _, basis) = basis2();
        // Doublet energy -(4 + 2 sqrt(2)), gap 2(sqrt(2) - 1), both in units of J.
        assert!((basis.gap - 2.0 * (SQRT2 - 1.0)).abs() < 1e-9, "gap = {}", basis.gap);
        assert!((basis.ground_energy + 4.0 + 2.0 * SQRT2).abs() < 1e-9);
    }

    #[test]
    fn p_sector_matches_ferromagnet() {
        let (_, _, basis) = basis2();
        assert_eq!(basis.p_sector, vec![1, 1]);

        let lat3 = LatticeSpec::new(3, 1.0, 1.0).unwrap();
        let h0 = build_protection_hamiltonian(&lat3).unwrap();
        let syms = build_symmetry_operators(&lat3).unwrap();
        let basis3 = extract_logical_basis(&h0, &syms).unwrap();
        assert_eq!(basis3.p_sector, vec![-1, -1, -1]);
    }

    #[test]
    fn q1_maps_zero_to_one() {
        let (_, syms, basis) = basis2();
        let block = basis.logical_block(&syms.q[0]).unwrap();
        assert!(block[(0, 0)].norm() < 1e-10);
        assert!((block[(1, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn logical_operators_realized() {
        // <a|P_i|b> = tau^z and <a|Q_j|b> = tau^x for the 2x2 lattice.
        let (_, syms, basis) = basis2();
        for p in &syms.p {
            let block = basis.logical_block(p).unwrap();
            let dev = (&block - &tau_z())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-9, "P block deviates by {dev:.2e}");
        }
        for q in &syms.q {
            let block = basis.logical_block(q).unwrap();
            let dev = (&block - &tau_x())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-9, "Q block deviates by {dev:.2e}");
        }
    }

    #[test]
    fn doublet_rotation_invariance() {
        // Re-mixing the degenerate pair must not change the physical states.
        let (h0, syms, basis) = basis2();
        let mut spec = diagonalize(&h0).unwrap();
        let c = Complex64::new(0.6, 0.3);
        let s = Complex64::new((1.0 - c.norm_sqr()).sqrt(), 0.0);
        let v0 = spec.eigenvectors.column(0).to_owned();
        let v1 = spec.eigenvectors.column(1).to_owned();
        let w0 = &v0 * c + &v1 * s;
        let w1 = &v0 * (-s) + &v1 * c.conj();
        spec.eigenvectors.column_mut(0).assign(&w0);
        spec.eigenvectors.column_mut(1).assign(&w1);
        let rotated = fix_ground_doublet(&h0, &syms, &spec).unwrap();
        let overlap = inner(&basis.zero_l.view(), &rotated.zero_l.view()).norm();
        assert!((overlap - 1.0).abs() < 1e-12, "overlap = {overlap}");
        let overlap1 = inner(&basis.one_l.view(), &rotated.one_l.view()).norm();
        assert!((overlap1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn determinism_bit_for_bit() {
        let (h0, syms, _) = basis2();
        let a = extract_logical_basis(&h0, &syms).unwrap();
        let b = extract_logical_basis(&h0, &syms).unwrap();
        assert_eq!(a.zero_l, b.zero_l);
        assert_eq!(a.one_l, b.one_l);
    }

    #[test]
    fn splitting_scan_slope_n2() {
        let lat = lat2();
        let hs = crate::fit::log_spaced(1e-3, 1e-1, 9);
        let scan = ground_splitting_scan(&lat, Axis::X, &hs).unwrap();
        assert!(
            (scan.slope - 2.0).abs() < 0.1,
            "slope = {} (want 2.0 +- 0.1)",
            scan.slope
        );
    }

    #[test]
    fn splitting_zero_field() {
        let lat = lat2();
        let scan = ground_splitting_scan(&lat, Axis::X, &[0.0, 1e-3, 1e-2, 1e-1]).unwrap();
        assert!(scan.points[0].splitting < 1e-12);
    }

    #[test]
    fn splitting_rejects_large_amplitude() {
        let lat = lat2();
        assert!(ground_splitting_scan(&lat, Axis::X, &[0.5]).is_err());
    }

    #[test]
    fn coupling_fluctuations_preserve_degeneracy() {
        // Randomized couplings keep the symmetries, hence the exact doublet.
        use crate::build::build_protection_hamiltonian_scaled;
        let lat = lat2();
        let row = [1.07, 0.93];
        let col = [0.98, 1.09];
        let h = build_protection_hamiltonian_scaled(&lat, &row, &col).unwrap();
        let spec = diagonalize(&h).unwrap();
        assert!(spec.eigenvalues[1] - spec.eigenvalues[0] < 1e-12);
    }

    #[test]
    fn instantaneous_spectrum_endpoints() {
        let lat = lat2();
        let schedule = Schedule::new(20.0).unwrap();
        let flow = instantaneous_spectrum(&lat, &schedule, &[0.0, schedule.t_final()]).unwrap();
        // t = 0: pure S^y spectrum.
        let sy = diagonalize(&build_collective_field(&lat, Axis::Y).unwrap()).unwrap();
        for (a, b) in flow[0].1.iter().zip(sy.eigenvalues.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        // t = 5 tau: within 1e-8 of the H0 spectrum (ramp residual ~ e^-25).
        let h0 = diagonalize(&build_protection_hamiltonian(&lat).unwrap()).unwrap();
        for (a, b) in flow[1].1.iter().zip(h0.eigenvalues.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
