//! Least-squares slope fits on log-log data.

use crate::error::{Error, Result};

/// How much of the scan range to use for the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trim {
    /// All points.
    None,
    /// Only points whose log-abscissa lies in the inner 80% of the log range,
    /// discarding boundary contamination at both ends.
    Inner80,
}

/// Slope of ln(y) against ln(x) by least squares.
///
/// Both coordinates must be strictly positive; at least two usable points
/// are required (three when trimming).
pub fn loglog_slope(xs: &[f64], ys: &[f64], trim: Trim) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 0.0) || !(y > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "log-log fit needs positive data, got ({x:.3e}, {y:.3e})"
            )));
        }
        pts.push((x.ln(), y.ln()));
    }
    if let Trim::Inner80 = trim {
        let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let margin = 0.1 * (hi - lo);
        let trimmed: Vec<(f64, f64)> = pts
            .iter()
            .copied()
            .filter(|p| p.0 >= lo + margin && p.0 <= hi - margin)
            .collect();
        // Scans too short to trim fall back to the full set.
        if trimmed.len() >= 2 {
            pts = trimmed;
        }
    }
    if pts.len() < 2 {
        return Err(Error::FitUnderdetermined {
            needed: 2,
            got: pts.len(),
        });
    }
    let k = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = k * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::FitUnderdetermined {
            needed: 2,
            got: 1,
        });
    }
    Ok((k * sxy - sx * sy) / denom)
}

/// Log-spaced grid of `count` points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (llo + (lhi - llo) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = log_spaced(1e-3, 1e-1, 9);
        let ys: Vec<f64> = xs.iter().map(|x| 3.5 * x.powi(2)).collect();
        let s = loglog_slope(&xs, &ys, Trim::None).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
        let s = loglog_slope(&xs, &ys, Trim::Inner80).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inner_trim_drops_contaminated_ends() {
        let xs = log_spaced(1e-3, 1e-1, 9);
        let mut ys: Vec<f64> = xs.iter().map(|x| x.powi(3)).collect();
        // corrupt the endpoints only
        ys[0] *= 7.0;
        ys[8] *= 0.1;
        let s = loglog_slope(&xs, &ys, Trim::Inner80).unwrap();
        assert!((s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(loglog_slope(&[1.0, 2.0], &[1.0, 0.0], Trim::None).is_err());
        assert!(loglog_slope(&[1.0], &[1.0], Trim::None).is_err());
    }
}
