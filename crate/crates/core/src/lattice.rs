//! Lattice geometry and sparse Pauli strings.
//!
//! Sites are addressed 1-based as (row, column) on an N x N grid. Tensor
//! factors are ordered row-major with site (1,1) as the most significant
//! factor, so every dense operator built from the same string is
//! reproducible bit for bit.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of spins the dense-matrix budget allows.
pub const MAX_SPINS: usize = 12;

/// Single-spin Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Product of two axes, ignoring the phase: X*Y -> Z and cyclic;
    /// equal axes cancel to identity (`None`).
    pub fn compose(self, other: Axis) -> Option<Axis> {
        use Axis::*;
        match (self, other) {
            (a, b) if a == b => None,
            (X, Y) | (Y, X) => Some(Z),
            (Y, Z) | (Z, Y) => Some(X),
            (Z, X) | (X, Z) => Some(Y),
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => write!(f, "X"),
            Axis::Y => write!(f, "Y"),
            Axis::Z => write!(f, "Z"),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" | "x" => Ok(Axis::X),
            "Y" | "y" => Ok(Axis::Y),
            "Z" | "z" => Ok(Axis::Z),
            other => Err(Error::UnsupportedAxis(other.to_string())),
        }
    }
}

/// Geometry and couplings of the N x N model.
///
/// Energies are in units of the bond coupling J (hbar = 1). The dense
/// Hilbert space has dimension 2^(N^2); construction is refused above
/// [`MAX_SPINS`] spins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    n: usize,
    j_x: f64,
    j_y: f64,
}

impl LatticeSpec {
    pub fn new(n: usize, j_x: f64, j_y: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidLattice(format!("side n = {n} must be >= 2")));
        }
        if n * n > MAX_SPINS {
            return Err(Error::InvalidLattice(format!(
                "n^2 = {} spins exceeds the dense budget of {MAX_SPINS}",
                n * n
            )));
        }
        if !(j_x > 0.0) || !(j_y > 0.0) {
            return Err(Error::InvalidLattice(format!(
                "couplings must be positive, got j_x = {j_x}, j_y = {j_y}"
            )));
        }
        Ok(Self { n, j_x, j_y })
    }

    /// Lattice side N.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j_x(&self) -> f64 {
        self.j_x
    }

    pub fn j_y(&self) -> f64 {
        self.j_y
    }

    /// Number of spins N^2.
    pub fn spins(&self) -> usize {
        self.n * self.n
    }

    /// Hilbert-space dimension 2^(N^2).
    pub fn dim(&self) -> usize {
        1usize << self.spins()
    }

    /// Row-major site position, 0-based.
    pub fn site_pos(&self, row: u8, col: u8) -> Result<usize> {
        if row == 0 || col == 0 || row as usize > self.n || col as usize > self.n {
            return Err(Error::SiteOutOfRange { row, col, n: self.n });
        }
        Ok((row as usize - 1) * self.n + (col as usize - 1))
    }

    /// Bit index of a site inside a basis-state label.
    ///
    /// Site (1,1) is the most significant tensor factor, hence the highest bit.
    pub fn site_bit(&self, row: u8, col: u8) -> Result<usize> {
        Ok(self.spins() - 1 - self.site_pos(row, col)?)
    }

    /// All sites in row-major order.
    pub fn sites(&self) -> impl Iterator<Item = (u8, u8)> + '_ {
        (1..=self.n as u8).flat_map(move |i| (1..=self.n as u8).map(move |j| (i, j)))
    }
}

/// Sparse product of single-spin Pauli operators; identity on every
/// unlisted site. The empty string is the identity operator.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PauliString {
    factors: BTreeMap<(u8, u8), Axis>,
}

impl PauliString {
    /// The identity string.
    pub fn identity() -> Self {
        Self::default()
    }

    /// Build from (row, col, axis) triples; duplicate sites are rejected.
    pub fn from_factors<I>(factors: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((u8, u8), Axis)>,
    {
        let mut map = BTreeMap::new();
        for ((row, col), axis) in factors {
            if map.insert((row, col), axis).is_some() {
                return Err(Error::DuplicateSite { row, col });
            }
        }
        Ok(Self { factors: map })
    }

    /// Single-site string.
    pub fn single(row: u8, col: u8, axis: Axis) -> Self {
        let mut map = BTreeMap::new();
        map.insert((row, col), axis);
        Self { factors: map }
    }

    /// Full row of `axis` factors: used for the P_i symmetry strings (axis Y).
    pub fn full_row(n: usize, row: u8, axis: Axis) -> Self {
        let mut map = BTreeMap::new();
        for col in 1..=n as u8 {
            map.insert((row, col), axis);
        }
        Self { factors: map }
    }

    /// Full column of `axis` factors: used for the Q_j symmetry strings (axis X).
    pub fn full_col(n: usize, col: u8, axis: Axis) -> Self {
        let mut map = BTreeMap::new();
        for row in 1..=n as u8 {
            map.insert((row, col), axis);
        }
        Self { factors: map }
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.factors.len()
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    /// Factors in site order.
    pub fn factors(&self) -> impl Iterator<Item = ((u8, u8), Axis)> + '_ {
        self.factors.iter().map(|(&site, &axis)| (site, axis))
    }

    pub fn axis_at(&self, row: u8, col: u8) -> Option<Axis> {
        self.factors.get(&(row, col)).copied()
    }

    /// Check every factor lies on the given lattice.
    pub fn validate(&self, lattice: &LatticeSpec) -> Result<()> {
        for (&(row, col), _) in &self.factors {
            lattice.site_pos(row, col)?;
        }
        Ok(())
    }

    /// Site-wise product of two strings, dropping phases: equal axes cancel,
    /// different axes compose to the third.
    pub fn compose(&self, other: &PauliString) -> PauliString {
        let mut map = self.factors.clone();
        for (&site, &axis) in &other.factors {
            match map.remove(&site) {
                None => {
                    map.insert(site, axis);
                }
                Some(existing) => {
                    if let Some(product) = existing.compose(axis) {
                        map.insert(site, product);
                    }
                }
            }
        }
        PauliString { factors: map }
    }

    /// Parse a whitespace-separated list of tokens like `Y11 X23`
    /// (axis letter, then row and column digits).
    pub fn parse(text: &str) -> Result<Self> {
        let mut factors = Vec::new();
        for token in text.split_whitespace() {
            let mut chars = token.chars();
            let axis: Axis = chars
                .next()
                .ok_or_else(|| Error::BadStringToken(token.to_string()))?
                .to_string()
                .parse()
                .map_err(|_| Error::BadStringToken(token.to_string()))?;
            let digits: Vec<u8> = chars
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as u8)
                        .ok_or_else(|| Error::BadStringToken(token.to_string()))
                })
                .collect::<Result<_>>()?;
            if digits.len() != 2 || digits[0] == 0 || digits[1] == 0 {
                return Err(Error::BadStringToken(token.to_string()));
            }
            factors.push(((digits[0], digits[1]), axis));
        }
        Self::from_factors(factors)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "I");
        }
        let mut first = true;
        for (&(row, col), axis) in &self.factors {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{axis}{row}{col}")?;
            first = false;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_validation() {
        assert!(LatticeSpec::new(2, 1.0, 1.0).is_ok());
        assert!(LatticeSpec::new(3, 1.0, 1.0).is_ok());
        assert!(LatticeSpec::new(1, 1.0, 1.0).is_err());
        // 4x4 = 16 spins exceeds the 12-spin dense budget
        assert!(LatticeSpec::new(4, 1.0, 1.0).is_err());
        assert!(LatticeSpec::new(2, 0.0, 1.0).is_err());
        assert!(LatticeSpec::new(2, 1.0, -1.0).is_err());
    }

    #[test]
    fn site_ordering_row_major_msb_first() {
        let lat = LatticeSpec::new(2, 1.0, 1.0).unwrap();
        assert_eq!(lat.site_pos(1, 1).unwrap(), 0);
        assert_eq!(lat.site_pos(1, 2).unwrap(), 1);
        assert_eq!(lat.site_pos(2, 1).unwrap(), 2);
        assert_eq!(lat.site_pos(2, 2).unwrap(), 3);
        assert_eq!(lat.site_bit(1, 1).unwrap(), 3);
        assert_eq!(lat.site_bit(2, 2).unwrap(), 0);
        assert!(lat.site_pos(3, 1).is_err());
        assert!(lat.site_pos(0, 1).is_err());
    }

    #[test]
    fn string_parse_roundtrip() {
        let s = PauliString::parse("Y11 Y12").unwrap();
        assert_eq!(s.weight(), 2);
        assert_eq!(s.axis_at(1, 1), Some(Axis::Y));
        assert_eq!(s.to_string(), "Y11 Y12");
        assert!(PauliString::parse("").unwrap().is_identity());
        assert!(PauliString::parse("Q11").is_err());
        assert!(PauliString::parse("X1").is_err());
        assert!(PauliString::parse("X11 Y11").is_err()); // duplicate site
    }

    #[test]
    fn compose_cancels_and_cycles() {
        let a = PauliString::single(1, 1, Axis::X);
        let b = PauliString::single(1, 1, Axis::Y);
        let ab = a.compose(&b);
        assert_eq!(ab.axis_at(1, 1), Some(Axis::Z));
        assert!(a.compose(&a).is_identity());
        let disjoint = PauliString::single(2, 2, Axis::Z);
        assert_eq!(a.compose(&disjoint).weight(), 2);
    }
}
