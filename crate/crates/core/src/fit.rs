//! Small least-squares helpers used by the scan and envelope fits.

use crate::error::{Error, Result};

/// Result of fitting `y = intercept + slope * x` by ordinary least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual over the fitted points.
    pub max_residual: f64,
}

/// Ordinary least-squares line through `(x, y)` pairs.
///
/// Requires at least two points with distinct abscissae.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "line fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(x, y) in points {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::InvalidParameter(
                "line fit requires finite coordinates".into(),
            ));
        }
        sx += x;
        sy += y;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "line fit requires at least two distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = points
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0f64, f64::max);
    Ok(LineFit { slope, intercept, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let fit = fit_line(&pts).unwrap();
        assert_relative_eq!(fit.slope, -0.5, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, 3.0, max_relative = 1e-12);
        assert!(fit.max_residual < 1e-12);
    }

    #[test]
    fn balances_symmetric_noise() {
        let pts = [(0.0, 1.0), (1.0, 3.0), (2.0, 2.0), (3.0, 4.0)];
        let fit = fit_line(&pts).unwrap();
        // Closed form from the normal equations.
        assert_relative_eq!(fit.slope, 0.8, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, 1.3, max_relative = 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(fit_line(&[(1.0, 2.0)]).is_err());
        assert!(fit_line(&[(1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(fit_line(&[(1.0, f64::NAN), (2.0, 3.0)]).is_err());
    }
}
