//! Large-scale mass-ratio curves between two observers, the decay-envelope
//! fit, and the homogeneity verdict.
//!
//! Two observers at mutual distance `d` compare the masses of balls of a
//! common radius `R` around each of them. For doubling densities the ratio
//! approaches 1 as `R` grows, with deviation controlled by an envelope
//! `K * [1 - (1 - d/R)^n]^gamma` derived from the overlap geometry of the
//! two balls.

use serde::Serialize;

use crate::density::{Density, Point};
use crate::error::{Error, Result};
use crate::fit;
use crate::geometry::Ball;
use crate::integrate::ball_mass_pair;

/// Default half-width of the homogeneity acceptance band around ratio 1.
pub const DEFAULT_RATIO_TOLERANCE: f64 = 0.02;

/// Minimum number of above-noise points required to fit the envelope.
pub const REQUIRED_SIGNAL_POINTS: usize = 4;

/// Verdict of a ratio-curve experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HomogeneityVerdict {
    /// Tail deviations within tolerance (or noise) and non-increasing.
    Homogeneous,
    /// Tail deviations significant, above tolerance, and non-decreasing.
    NotHomogeneous,
    /// Neither pattern is established at this budget.
    Inconclusive,
}

impl std::fmt::Display for HomogeneityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HomogeneityVerdict::Homogeneous => write!(f, "Homogeneous"),
            HomogeneityVerdict::NotHomogeneous => write!(f, "NotHomogeneous"),
            HomogeneityVerdict::Inconclusive => write!(f, "Inconclusive"),
        }
    }
}

/// One radius of a ratio curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioPoint {
    pub radius: f64,
    pub first_mass: f64,
    pub second_mass: f64,
    /// `mass(B(first, R)) / mass(B(second, R))`.
    pub ratio: f64,
    /// Standard error of the ratio (0 on the closed-form path).
    pub std_error: f64,
    /// `|ratio - 1|`.
    pub abs_deviation: f64,
    /// Value of the fitted envelope at this radius, once fitted.
    pub envelope: Option<f64>,
}

/// Power-law fit of the deviation envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeFit {
    /// Multiplicative constant `K`.
    pub coefficient: f64,
    /// Decay exponent `gamma`.
    pub gamma: f64,
    /// Largest absolute log-residual of the fit over the signal points.
    pub max_log_residual: f64,
    /// Whether every curve point lies below the fitted envelope within
    /// three standard errors.
    pub all_points_below: bool,
}

/// A mass-ratio curve between two observers with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioCurve {
    pub first: Point,
    pub second: Point,
    pub points: Vec<RatioPoint>,
    pub tolerance: f64,
    /// Least-squares slope of `|ratio - 1|` against `ln R` (present once
    /// the curve has at least three radii).
    pub deviation_trend: Option<f64>,
    pub verdict: HomogeneityVerdict,
    pub fit: Option<EnvelopeFit>,
}

/// Options for [`ratio_curve`].
#[derive(Debug, Clone, Copy)]
pub struct RatioCurveOptions {
    pub n_samples: u64,
    pub seed: u64,
    pub tolerance: f64,
}

impl RatioCurveOptions {
    pub fn new(n_samples: u64, seed: u64) -> RatioCurveOptions {
        RatioCurveOptions {
            n_samples,
            seed,
            tolerance: DEFAULT_RATIO_TOLERANCE,
        }
    }
}

impl Default for RatioCurveOptions {
    fn default() -> Self {
        RatioCurveOptions::new(1_000_000, 0)
    }
}

/// The default radius schedule for observers at distance `d`: eight radii
/// `4 d * 2^j` for `j = 0..=7` (base 1 for coincident observers).
pub fn default_schedule(distance: f64) -> Vec<f64> {
    let base = if distance > 0.0 { 4.0 * distance } else { 1.0 };
    (0..=7).map(|j| base * 2f64.powi(j)).collect()
}

/// The overlap-geometry envelope `K * [1 - (1 - d/R)^n]^gamma` bounding the
/// ratio deviation at radius `R` for observers at distance `d` in dimension
/// `n`. Defined only for `R > d > 0`.
pub fn envelope(
    dim: usize,
    distance: f64,
    radius: f64,
    coefficient: f64,
    gamma: f64,
) -> Result<f64> {
    if dim == 0 || dim > 16 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "envelope needs a positive observer distance, got {distance}"
        )));
    }
    if !(coefficient.is_finite() && coefficient > 0.0) || !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "envelope needs positive coefficient and exponent, got K = {coefficient}, \
             gamma = {gamma}"
        )));
    }
    if !(radius.is_finite() && radius > distance) {
        return Err(Error::OutsideBoundRegime { radius, distance });
    }
    let base = 1.0 - (1.0 - distance / radius).powi(dim as i32);
    Ok(coefficient * base.powf(gamma))
}

/// Computes the mass-ratio curve of two observers over a radius schedule and
/// classifies it.
///
/// Every radius reuses one common random cloud (fixed by `options.seed`), so
/// ratio noise is correlated across scales and the curve is smooth in `R`;
/// densities with closed-form ball masses at both observers skip sampling
/// entirely. The schedule must be strictly increasing and start above twice
/// the observer distance so the balls at every radius overlap on a ball.
pub fn ratio_curve(
    density: &Density,
    first: &Point,
    second: &Point,
    radii: &[f64],
    options: &RatioCurveOptions,
) -> Result<RatioCurve> {
    let n = density.dim();
    for p in [first, second] {
        if p.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: p.dim() });
        }
    }
    if !(options.tolerance.is_finite() && options.tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ratio tolerance must be positive, got {}",
            options.tolerance
        )));
    }
    let distance = first.distance(second)?;
    validate_schedule(radii, distance)?;

    let mut points = Vec::with_capacity(radii.len());
    for &radius in radii {
        let b1 = Ball::new(first.clone(), radius)?;
        let b2 = Ball::new(second.clone(), radius)?;
        let point = match (
            density.closed_form_ball_mass(&b1),
            density.closed_form_ball_mass(&b2),
        ) {
            (Some(m1), Some(m2)) => {
                let ratio = m1 / m2;
                RatioPoint {
                    radius,
                    first_mass: m1,
                    second_mass: m2,
                    ratio,
                    std_error: 0.0,
                    abs_deviation: (ratio - 1.0).abs(),
                    envelope: None,
                }
            }
            _ => {
                let pair = ball_mass_pair(density, &b1, &b2, options.n_samples, options.seed)?;
                let ratio = pair.ratio();
                RatioPoint {
                    radius,
                    first_mass: pair.first,
                    second_mass: pair.second,
                    ratio,
                    std_error: pair.ratio_std_error,
                    abs_deviation: (ratio - 1.0).abs(),
                    envelope: None,
                }
            }
        };
        points.push(point);
    }

    let deviation_trend = if points.len() >= 3 {
        let samples: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (p.radius.ln(), p.abs_deviation))
            .collect();
        Some(fit::fit_line(&samples)?.slope)
    } else {
        None
    };
    let verdict = classify(&points, deviation_trend, options.tolerance);
    Ok(RatioCurve {
        first: first.clone(),
        second: second.clone(),
        points,
        tolerance: options.tolerance,
        deviation_trend,
        verdict,
        fit: None,
    })
}

fn validate_schedule(radii: &[f64], distance: f64) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidSchedule("radius schedule is empty".into()));
    }
    if let Some(&bad) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidSchedule(format!(
            "radii must be positive and finite, got {bad}"
        )));
    }
    if let Some(w) = radii.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSchedule(format!(
            "radii must be strictly increasing, got {} before {}",
            w[0], w[1]
        )));
    }
    if distance > 0.0 && radii[0] <= 2.0 * distance {
        return Err(Error::InvalidSchedule(format!(
            "smallest radius {} must exceed twice the observer distance {distance} so the \
             balls overlap on a ball at every scale",
            radii[0]
        )));
    }
    Ok(())
}

fn classify(
    points: &[RatioPoint],
    deviation_trend: Option<f64>,
    tolerance: f64,
) -> HomogeneityVerdict {
    let (Some(trend), true) = (deviation_trend, points.len() >= 3) else {
        return HomogeneityVerdict::Inconclusive;
    };
    let tail = &points[points.len() - 3..];
    let within_band = tail
        .iter()
        .all(|p| p.abs_deviation <= tolerance.max(3.0 * p.std_error));
    if within_band && trend <= 0.0 {
        return HomogeneityVerdict::Homogeneous;
    }
    let significant = tail
        .iter()
        .all(|p| p.abs_deviation >= 10.0 * p.std_error && p.abs_deviation > tolerance);
    if significant && trend >= 0.0 {
        return HomogeneityVerdict::NotHomogeneous;
    }
    HomogeneityVerdict::Inconclusive
}

/// Fits the decay envelope to a curve's deviations and records it on the
/// curve.
///
/// Only points whose deviation rises above three standard errors carry
/// envelope information; with fewer than [`REQUIRED_SIGNAL_POINTS`] of them
/// the fit would track noise and a structured error is returned instead.
/// On success the per-point envelope values and the curve's `fit` field are
/// filled in.
pub fn fit_envelope(curve: &mut RatioCurve) -> Result<EnvelopeFit> {
    let dim = curve.first.dim();
    let distance = curve.first.distance(&curve.second)?;
    let total_points = curve.points.len();
    let signal: Vec<&RatioPoint> = if distance > 0.0 {
        curve
            .points
            .iter()
            .filter(|p| {
                p.radius > distance
                    && p.abs_deviation > 3.0 * p.std_error
                    && p.abs_deviation > 0.0
            })
            .collect()
    } else {
        Vec::new()
    };
    if signal.len() < REQUIRED_SIGNAL_POINTS {
        return Err(Error::EnvelopeNoiseDominated {
            signal_points: signal.len(),
            total_points,
            required: REQUIRED_SIGNAL_POINTS,
        });
    }
    let overlap_base =
        |radius: f64| 1.0 - (1.0 - distance / radius).powi(dim as i32);
    let samples: Vec<(f64, f64)> = signal
        .iter()
        .map(|p| (overlap_base(p.radius).ln(), p.abs_deviation.ln()))
        .collect();
    let line = fit::fit_line(&samples)?;
    let coefficient = line.intercept.exp();
    let gamma = line.slope;
    let mut all_points_below = true;
    for p in curve.points.iter_mut() {
        let bound = coefficient * overlap_base(p.radius).powf(gamma);
        if p.abs_deviation > bound + 3.0 * p.std_error + 1e-12 {
            all_points_below = false;
        }
        p.envelope = Some(bound);
    }
    let fit = EnvelopeFit {
        coefficient,
        gamma,
        max_log_residual: line.max_residual,
        all_points_below,
    };
    curve.fit = Some(fit.clone());
    Ok(fit)
}
