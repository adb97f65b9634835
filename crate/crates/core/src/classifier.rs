//! Matrix-free classification of Pauli strings against the symmetry sectors.
//!
//! A string acts inside the logical space only if it preserves or flips
//! *simultaneously all* row quantum numbers p_i, and likewise all column
//! quantum numbers q_j. A factor anticommutes with the sigma^y row product
//! exactly when its axis is X or Z, and with the sigma^x column product
//! when its axis is Y or Z, so the whole classification is parity counting:
//!
//!   rows preserved / flipped   columns preserved -> identity / tau^x
//!                              columns flipped   -> tau^z    / tau^y
//!
//! Strings with a mixed action map between sectors and vanish on the
//! logical block; the dense projection oracle checks all of this against
//! actual matrices.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::build::build_pauli_string;
use crate::error::{Error, Result};
use crate::lattice::{Axis, LatticeSpec, PauliString};
use crate::spectrum::{tau_x, tau_y, tau_z, LogicalBasis};

/// Oracle residual above which classifier and projection disagree.
pub const TOL_ORACLE: f64 = 1e-10;

/// Aggregate action of a string on one family of quantum numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineAction {
    PreserveAll,
    FlipAll,
    Mixed,
}

/// Effective operator induced on the logical qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogicalClass {
    Identity,
    TauX,
    TauY,
    TauZ,
    /// Mixed action on either family: zero logical block.
    Null,
}

impl LogicalClass {
    /// Class-level Pauli product (phases dropped). `Null` absorbs.
    pub fn compose(self, other: LogicalClass) -> LogicalClass {
        use LogicalClass::*;
        match (self, other) {
            (Null, _) | (_, Null) => Null,
            (Identity, x) | (x, Identity) => x,
            (a, b) if a == b => Identity,
            (TauX, TauY) | (TauY, TauX) => TauZ,
            (TauY, TauZ) | (TauZ, TauY) => TauX,
            (TauZ, TauX) | (TauX, TauZ) => TauY,
            _ => unreachable!(),
        }
    }

    fn matrix(self) -> Option<Array2<Complex64>> {
        match self {
            LogicalClass::Identity => Some(Array2::eye(2)),
            LogicalClass::TauX => Some(tau_x()),
            LogicalClass::TauY => Some(tau_y()),
            LogicalClass::TauZ => Some(tau_z()),
            LogicalClass::Null => None,
        }
    }
}

/// Verdict of the combinatorial classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierVerdict {
    pub row_action: LineAction,
    pub col_action: LineAction,
    pub logical_class: LogicalClass,
}

/// Classify a Pauli string on the n x n lattice by parity counting.
pub fn classify_string(s: &PauliString, n: usize) -> Result<ClassifierVerdict> {
    let lattice_check = |row: u8, col: u8| -> Result<()> {
        if row == 0 || col == 0 || row as usize > n || col as usize > n {
            return Err(Error::SiteOutOfRange { row, col, n });
        }
        Ok(())
    };
    let mut row_flip = vec![false; n];
    let mut col_flip = vec![false; n];
    for ((row, col), axis) in s.factors() {
        lattice_check(row, col)?;
        if matches!(axis, Axis::X | Axis::Z) {
            row_flip[row as usize - 1] ^= true;
        }
        if matches!(axis, Axis::Y | Axis::Z) {
            col_flip[col as usize - 1] ^= true;
        }
    }
    let aggregate = |flips: &[bool]| -> LineAction {
        if flips.iter().all(|&f| !f) {
            LineAction::PreserveAll
        } else if flips.iter().all(|&f| f) {
            LineAction::FlipAll
        } else {
            LineAction::Mixed
        }
    };
    let row_action = aggregate(&row_flip);
    let col_action = aggregate(&col_flip);
    let logical_class = match (row_action, col_action) {
        (LineAction::Mixed, _) | (_, LineAction::Mixed) => LogicalClass::Null,
        (LineAction::PreserveAll, LineAction::PreserveAll) => LogicalClass::Identity,
        (LineAction::PreserveAll, LineAction::FlipAll) => LogicalClass::TauZ,
        (LineAction::FlipAll, LineAction::PreserveAll) => LogicalClass::TauX,
        (LineAction::FlipAll, LineAction::FlipAll) => LogicalClass::TauY,
    };
    Ok(ClassifierVerdict {
        row_action,
        col_action,
        logical_class,
    })
}

/// Dense 2x2 logical block of a string, checked against the classifier.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub verdict: ClassifierVerdict,
    /// <a_L| S |b_L>.
    pub block: Array2<Complex64>,
    /// Complex multiplier lambda with block ~ lambda * class matrix.
    pub coefficient: Complex64,
    /// max |block - lambda * class| (or max |block| for the null class).
    pub residual: f64,
}

/// Brute-force verification: project the dense string onto the logical
/// basis and require a complex multiple of the predicted class matrix
/// (the zero block for `Null`) within [`TOL_ORACLE`].
pub fn logical_projection_oracle(
    s: &PauliString,
    lattice: &LatticeSpec,
    basis: &LogicalBasis,
) -> Result<OracleReport> {
    let verdict = classify_string(s, lattice.n())?;
    let op = build_pauli_string(lattice, s)?;
    let block = basis.logical_block(&op)?;

    let (coefficient, residual) = match verdict.logical_class.matrix() {
        None => {
            let max = block.iter().map(|z| z.norm()).fold(0.0, f64::max);
            (Complex64::new(0.0, 0.0), max)
        }
        Some(tau) => {
            // lambda = tr(tau^dag block) / 2.
            let mut lambda = Complex64::new(0.0, 0.0);
            for i in 0..2 {
                for j in 0..2 {
                    lambda += tau[(j, i)].conj() * block[(j, i)];
                }
            }
            lambda /= 2.0;
            let mut max = 0.0f64;
            for i in 0..2 {
                for j in 0..2 {
                    max = max.max((block[(i, j)] - lambda * tau[(i, j)]).norm());
                }
            }
            (lambda, max)
        }
    };
    if residual > TOL_ORACLE {
        return Err(Error::OracleMismatch { residual });
    }
    Ok(OracleReport {
        verdict,
        block,
        coefficient,
        residual,
    })
}

/// Smallest order M at which a product of M single-site sigma^u factors
/// acts nontrivially inside the logical space.
///
/// Found by exhaustive search over supports: a product of M equal-axis
/// factors reduces to a string on any support of size <= M with the same
/// parity, so it suffices to scan subsets.
pub fn minimum_effective_order(manip_axis: Axis, n: usize) -> Result<usize> {
    if manip_axis == Axis::Z {
        return Err(Error::UnsupportedAxis(
            "manipulations along Z are out of scope".into(),
        ));
    }
    let spins = n * n;
    for order in 1..=spins {
        for mask in 0u32..(1u32 << spins) {
            let support = mask.count_ones() as usize;
            if support > order || (order - support) % 2 != 0 {
                continue;
            }
            let mut factors = Vec::with_capacity(support);
            for p in 0..spins {
                if mask & (1 << p) != 0 {
                    let row = (p / n + 1) as u8;
                    let col = (p % n + 1) as u8;
                    factors.push(((row, col), manip_axis));
                }
            }
            let s = PauliString::from_factors(factors).expect("distinct sites");
            let class = classify_string(&s, n)?.logical_class;
            if matches!(
                class,
                LogicalClass::TauX | LogicalClass::TauY | LogicalClass::TauZ
            ) {
                return Ok(order);
            }
        }
    }
    Err(Error::InvalidParameter(format!(
        "no nontrivial product of sigma^{manip_axis} factors exists on n = {n}"
    )))
}

/// Normalizing energy scale of a dominant-term prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleBase {
    /// The protecting gap.
    Gap,
    /// The manipulation amplitude g_max.
    GMax,
}

/// One cell of the dominant-term table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CellPrediction {
    /// The identity channel only rescales the global phase.
    NotRelevant,
    /// Deviation scales as (f / base)^power.
    Scaling { power: u32, base: ScaleBase },
}

/// Predicted leading noise response of each logical channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScalingPrediction {
    /// Noise parallel to the manipulation: the rotation axis is untouched
    /// and the angle shifts at first order in f / g_max.
    Parallel { angle_power: u32 },
    /// Perpendicular manipulation/noise pair.
    Perpendicular {
        identity: CellPrediction,
        tau_x: CellPrediction,
        tau_y: CellPrediction,
        tau_z: CellPrediction,
    },
}

/// Dominant-term prediction for manipulation axis `u` and static noise
/// axis `v` on the n x n lattice.
///
/// For u = Y, v = X the noiseless drive rotates about tau^z; noise then
/// feeds tau^z at order f^2/gap^2 (two noise factors paired inside one
/// row), tau^x at order (f/g_max)^N (every row touched), and tau^y at
/// order (f/gap)^N. The u = X, v = Y case follows by exchanging the roles
/// of rows and columns, i.e. tau^x <-> tau^z.
pub fn predict_dominant_scaling(
    manip_axis: Axis,
    noise_axis: Axis,
    n: usize,
) -> Result<ScalingPrediction> {
    if manip_axis == Axis::Z || noise_axis == Axis::Z {
        return Err(Error::UnsupportedAxis(
            "only X and Y manipulation / noise axes are in scope".into(),
        ));
    }
    if manip_axis == noise_axis {
        return Ok(ScalingPrediction::Parallel { angle_power: 1 });
    }
    let order = n as u32;
    let pair_order = CellPrediction::Scaling {
        power: 2,
        base: ScaleBase::Gap,
    };
    let all_lines_gmax = CellPrediction::Scaling {
        power: order,
        base: ScaleBase::GMax,
    };
    let all_lines_gap = CellPrediction::Scaling {
        power: order,
        base: ScaleBase::Gap,
    };
    let prediction = match (manip_axis, noise_axis) {
        (Axis::Y, Axis::X) => ScalingPrediction::Perpendicular {
            identity: CellPrediction::NotRelevant,
            tau_z: pair_order,
            tau_x: all_lines_gmax,
            tau_y: all_lines_gap,
        },
        (Axis::X, Axis::Y) => ScalingPrediction::Perpendicular {
            identity: CellPrediction::NotRelevant,
            tau_x: pair_order,
            tau_z: all_lines_gmax,
            tau_y: all_lines_gap,
        },
        _ => unreachable!(),
    };
    Ok(prediction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build::{build_protection_hamiltonian, build_symmetry_operators};
    use crate::spectrum::extract_logical_basis;

    fn basis2() -> (LatticeSpec, LogicalBasis) {
        let lat = LatticeSpec::new(2, 1.0, 1.0).unwrap();
        let h0 = build_protection_hamiltonian(&lat).unwrap();
        let syms = build_symmetry_operators(&lat).unwrap();
        (lat, extract_logical_basis(&h0, &syms).unwrap())
    }

    #[test]
    fn column_string_is_tau_x() {
        let q1 = PauliString::full_col(2, 1, Axis::X);
        let v = classify_string(&q1, 2).unwrap();
        assert_eq!(v.row_action, LineAction::FlipAll);
        assert_eq!(v.col_action, LineAction::PreserveAll);
        assert_eq!(v.logical_class, LogicalClass::TauX);
    }

    #[test]
    fn single_y_is_null() {
        let s = PauliString::single(1, 1, Axis::Y);
        let v = classify_string(&s, 2).unwrap();
        assert_eq!(v.row_action, LineAction::PreserveAll);
        assert_eq!(v.col_action, LineAction::Mixed);
        assert_eq!(v.logical_class, LogicalClass::Null);
    }

    #[test]
    fn row_of_y_is_tau_z() {
        let s = PauliString::parse("Y11 Y12").unwrap();
        let v = classify_string(&s, 2).unwrap();
        assert_eq!(v.row_action, LineAction::PreserveAll);
        assert_eq!(v.col_action, LineAction::FlipAll);
        assert_eq!(v.logical_class, LogicalClass::TauZ);
    }

    #[test]
    fn out_of_range_rejected() {
        let s = PauliString::single(3, 1, Axis::X);
        assert!(classify_string(&s, 2).is_err());
    }

    #[test]
    fn oracle_p1_is_plus_tau_z() {
        let (lat, basis) = basis2();
        let p1 = PauliString::full_row(2, 1, Axis::Y);
        let rep = logical_projection_oracle(&p1, &lat, &basis).unwrap();
        assert_eq!(rep.verdict.logical_class, LogicalClass::TauZ);
        assert!((rep.coefficient - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn oracle_single_y_vanishes() {
        let (lat, basis) = basis2();
        let s = PauliString::single(1, 1, Axis::Y);
        let rep = logical_projection_oracle(&s, &lat, &basis).unwrap();
        assert_eq!(rep.verdict.logical_class, LogicalClass::Null);
        assert!(rep.residual < TOL_ORACLE);
    }

    #[test]
    fn oracle_identity_block() {
        let (lat, basis) = basis2();
        let rep = logical_projection_oracle(&PauliString::identity(), &lat, &basis).unwrap();
        assert_eq!(rep.verdict.logical_class, LogicalClass::Identity);
        assert!((rep.coefficient - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn minimum_orders_match_lattice_side() {
        assert_eq!(minimum_effective_order(Axis::Y, 2).unwrap(), 2);
        assert_eq!(minimum_effective_order(Axis::Y, 3).unwrap(), 3);
        assert_eq!(minimum_effective_order(Axis::X, 2).unwrap(), 2);
        assert!(minimum_effective_order(Axis::Z, 2).is_err());
    }

    #[test]
    fn scaling_table_perpendicular() {
        let p = predict_dominant_scaling(Axis::Y, Axis::X, 2).unwrap();
        match p {
            ScalingPrediction::Perpendicular {
                identity,
                tau_x,
                tau_y,
                tau_z,
            } => {
                assert_eq!(identity, CellPrediction::NotRelevant);
                assert_eq!(
                    tau_z,
                    CellPrediction::Scaling {
                        power: 2,
                        base: ScaleBase::Gap
                    }
                );
                assert_eq!(
                    tau_x,
                    CellPrediction::Scaling {
                        power: 2,
                        base: ScaleBase::GMax
                    }
                );
                assert_eq!(
                    tau_y,
                    CellPrediction::Scaling {
                        power: 2,
                        base: ScaleBase::Gap
                    }
                );
            }
            _ => panic!("expected perpendicular prediction"),
        }
        // The pair-order tau^z cell does not grow with N.
        let p3 = predict_dominant_scaling(Axis::Y, Axis::X, 3).unwrap();
        match p3 {
            ScalingPrediction::Perpendicular { tau_z, tau_x, tau_y, .. } => {
                assert_eq!(
                    tau_z,
                    CellPrediction::Scaling {
                        power: 2,
                        base: ScaleBase::Gap
                    }
                );
                assert_eq!(
                    tau_x,
                    CellPrediction::Scaling {
                        power: 3,
                        base: ScaleBase::GMax
                    }
                );
                assert_eq!(
                    tau_y,
                    CellPrediction::Scaling {
                        power: 3,
                        base: ScaleBase::Gap
                    }
                );
            }
            _ => panic!(),
        }
    }

    #[test]
    fn scaling_parallel_first_order() {
        for n in [2, 3] {
            let p = predict_dominant_scaling(Axis::Y, Axis::Y, n).unwrap();
            assert_eq!(p, ScalingPrediction::Parallel { angle_power: 1 });
        }
        assert!(predict_dominant_scaling(Axis::Y, Axis::Z, 2).is_err());
    }

    #[test]
    fn involution_composes_to_identity() {
        let s = PauliString::parse("X11 Y22 Z12").unwrap();
        let square = s.compose(&s);
        assert!(square.is_identity());
        assert_eq!(
            classify_string(&square, 2).unwrap().logical_class,
            LogicalClass::Identity
        );
    }

    #[test]
    fn class_composition_exhaustive_weight_two() {
        // Product class = class product, whenever neither factor is Null.
        let axes = [Axis::X, Axis::Y, Axis::Z];
        let mut strings = vec![PauliString::identity()];
        for row in 1..=2u8 {
            for col in 1..=2u8 {
                for &ax in &axes {
                    strings.push(PauliString::single(row, col, ax));
                }
            }
        }
        let singles = strings.clone();
        for a in &singles {
            for b in &singles {
                if a.weight() + b.weight() <= 2 {
                    strings.push(a.compose(b));
                }
            }
        }
        for a in &strings {
            for b in &strings {
                let ca = classify_string(a, 2).unwrap().logical_class;
                let cb = classify_string(b, 2).unwrap().logical_class;
                if ca == LogicalClass::Null || cb == LogicalClass::Null {
                    continue;
                }
                let cab = classify_string(&a.compose(b), 2).unwrap().logical_class;
                assert_eq!(cab, ca.compose(cb), "{a} * {b}");
            }
        }
    }
}
