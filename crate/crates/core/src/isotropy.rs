//! Directional line masses seen by observers, closed-form sandwich bounds
//! for radial-power densities, and the large-scale isotropy verdict.
//!
//! An observer at `x` looking along a unit direction `v` accumulates the
//! line mass `integral of rho(x + t v) dt` over `t in [0, R]`. For a
//! radial-power density `|y - x0|^{-alpha}` with `0 < alpha < 1`, every such
//! line mass is sandwiched between two closed-form expressions depending
//! only on `|x - x0|` and `R`, so the ratio seen by two observers tends to 1
//! whatever the directions: large-scale isotropy.

use serde::Serialize;

use crate::density::{Density, DensityKind, Point};
use crate::error::{Error, Result};
use crate::integrate::{line_mass, LineMassEstimate};
use crate::quad::QuadTolerance;

/// Default half-width of the isotropy acceptance band around ratio 1.
pub const DEFAULT_RATIO_TOLERANCE: f64 = 0.05;

/// An observer: a base point and a unit viewing direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ray {
    base: Point,
    direction: Vec<f64>,
}

impl Ray {
    /// Builds a ray, normalizing `direction`; the direction must be finite
    /// and non-zero and match the base point's dimension.
    pub fn new(base: Point, direction: Vec<f64>) -> Result<Ray> {
        if direction.len() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: direction.len(),
            });
        }
        if direction.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "ray direction must have finite coordinates".into(),
            ));
        }
        let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidParameter("ray direction must be non-zero".into()));
        }
        let direction = direction.into_iter().map(|c| c / norm).collect();
        Ok(Ray { base, direction })
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }
}

/// Closed-form sandwich `(lower, upper)` for the line mass of
/// `|y - x0|^{-alpha}` along any unit ray from a point at distance
/// `distance` from `x0`, out to length `radius > distance`:
///
/// - lower: `[(distance + radius)^{1-alpha} - distance^{1-alpha}] / (1-alpha)`
/// - upper: `[distance^{1-alpha} + (radius - distance)^{1-alpha}] / (1-alpha)`
///
/// Both collapse to `radius^{1-alpha} / (1-alpha)` when the observer stands
/// at the singular point.
pub fn sandwich_bounds(distance: f64, alpha: f64, radius: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::ExponentOutOfRange(alpha));
    }
    if !(distance.is_finite() && distance >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "observer distance must be finite and non-negative, got {distance}"
        )));
    }
    if !(radius.is_finite() && radius > distance) {
        return Err(Error::OutsideBoundRegime { radius, distance });
    }
    let s = 1.0 - alpha;
    let lower = ((distance + radius).powf(s) - distance.powf(s)) / s;
    let upper = (distance.powf(s) + (radius - distance).powf(s)) / s;
    Ok((lower, upper))
}

/// A single observed line mass with its closed-form sandwich, when one
/// exists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineMassResult {
    pub ray: Ray,
    pub radius: f64,
    /// The line mass `integral of rho(base + t direction) dt, t in [0, R]`.
    pub lambda: f64,
    /// Quadrature error bound on `lambda`.
    pub err_bound: f64,
    /// `(lower, upper)` sandwich from [`sandwich_bounds`], present for
    /// radial-power densities with exponent in `(-1, 0)` when
    /// `radius > |base - x0|`.
    pub bounds: Option<(f64, f64)>,
    /// Whether `lambda` lies in the sandwich, with relative slack
    /// `1e-6 * upper` absorbing quadrature error.
    pub within_bounds: Option<bool>,
}

/// Integrates the line mass seen by one observer and attaches the
/// closed-form sandwich when the density admits one.
pub fn observed_line_mass(
    density: &Density,
    ray: &Ray,
    radius: f64,
    quad: &QuadTolerance,
) -> Result<LineMassResult> {
    let estimate: LineMassEstimate =
        line_mass(density, ray.base(), ray.direction(), radius, quad)?;
    let bounds = match density.kind() {
        DensityKind::RadialPower { center, exponent }
            if *exponent > -1.0 && *exponent < 0.0 =>
        {
            let distance = ray.base().distance(center)?;
            if radius > distance {
                Some(sandwich_bounds(distance, -exponent, radius)?)
            } else {
                None
            }
        }
        _ => None,
    };
    let within_bounds = bounds.map(|(lower, upper)| {
        let slack = 1e-6 * upper;
        estimate.value >= lower - slack && estimate.value <= upper + slack
    });
    Ok(LineMassResult {
        ray: ray.clone(),
        radius,
        lambda: estimate.value,
        err_bound: estimate.err_bound,
        bounds,
        within_bounds,
    })
}

/// One radius of an isotropy ratio curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsotropyPoint {
    pub radius: f64,
    pub first_line_mass: f64,
    pub second_line_mass: f64,
    /// `first_line_mass / second_line_mass`.
    pub ratio: f64,
    /// Closed-form `(lower, upper)` bracket for the ratio, combining the two
    /// observers' sandwiches: `(lower1/upper2, upper1/lower2)`.
    pub bracket: Option<(f64, f64)>,
    pub within_bracket: Option<bool>,
}

/// Verdict of an isotropy experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IsotropyVerdict {
    /// Ratio within tolerance of 1 at the largest radius.
    Isotropic,
    /// Ratio stays away from 1 at the largest radius.
    Anisotropic,
}

impl std::fmt::Display for IsotropyVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IsotropyVerdict::Isotropic => write!(f, "Isotropic"),
            IsotropyVerdict::Anisotropic => write!(f, "Anisotropic"),
        }
    }
}

/// An isotropy ratio curve between two observers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsotropyReport {
    pub first: Ray,
    pub second: Ray,
    pub points: Vec<IsotropyPoint>,
    pub tolerance: f64,
    /// Least-squares slope of `|ratio - 1|` against `ln R` (present once
    /// the curve has at least two radii).
    pub deviation_trend: Option<f64>,
    pub verdict: IsotropyVerdict,
}

/// Options for [`isotropy_ratio_curve`].
#[derive(Debug, Clone, Copy)]
pub struct IsotropyOptions {
    pub tolerance: f64,
    pub quad: QuadTolerance,
}

impl Default for IsotropyOptions {
    fn default() -> Self {
        IsotropyOptions {
            tolerance: DEFAULT_RATIO_TOLERANCE,
            quad: QuadTolerance::default(),
        }
    }
}

/// The default radius schedule: `decades` log-spaced radii ending at
/// `r_max`, one per decade.
pub fn default_radii(r_max: f64, decades: usize) -> Vec<f64> {
    (0..decades)
        .rev()
        .map(|k| r_max / 10f64.powi(k as i32))
        .collect()
}

/// Computes the line-mass ratio of two observers over a radius schedule and
/// classifies it.
///
/// Line masses are integrated adaptively (deterministic, no sampling). For
/// radial-power densities with exponent in `(-1, 0)` each point also carries
/// the closed-form sandwich bracket, checked against the computed ratio.
/// The verdict is `Isotropic` when the final ratio lies within `tolerance`
/// of 1 and the deviation trend is non-increasing across the schedule.
pub fn isotropy_ratio_curve(
    density: &Density,
    first: &Ray,
    second: &Ray,
    radii: &[f64],
    options: &IsotropyOptions,
) -> Result<IsotropyReport> {
    let n = density.dim();
    for ray in [first, second] {
        if ray.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: ray.dim() });
        }
    }
    if !(options.tolerance.is_finite() && options.tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "isotropy tolerance must be positive, got {}",
            options.tolerance
        )));
    }
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

    let mut points = Vec::with_capacity(radii.len());
    for &radius in radii {
        let lm1 = observed_line_mass(density, first, radius, &options.quad)?;
        let lm2 = observed_line_mass(density, second, radius, &options.quad)?;
        let ratio = lm1.lambda / lm2.lambda;
        let bracket = match (lm1.bounds, lm2.bounds) {
            (Some((lower1, upper1)), Some((lower2, upper2))) => {
                Some((lower1 / upper2, upper1 / lower2))
            }
            _ => None,
        };
        let within_bracket = bracket.map(|(lo, hi)| {
            let slack = 1e-6 * hi.abs();
            ratio >= lo - slack && ratio <= hi + slack
        });
        points.push(IsotropyPoint {
            radius,
            first_line_mass: lm1.lambda,
            second_line_mass: lm2.lambda,
            ratio,
            bracket,
            within_bracket,
        });
    }
    let deviation_trend = if points.len() >= 2 {
        let samples: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (p.radius.ln(), (p.ratio - 1.0).abs()))
            .collect();
        Some(crate::fit::fit_line(&samples)?.slope)
    } else {
        None
    };
    let final_deviation = (points.last().expect("non-empty").ratio - 1.0).abs();
    // The trend gate tolerates slopes indistinguishable from flat at the
    // quadrature noise floor.
    let non_increasing = deviation_trend.is_none_or(|s| s <= 1e-6 * options.tolerance);
    let verdict = if final_deviation <= options.tolerance && non_increasing {
        IsotropyVerdict::Isotropic
    } else {
        IsotropyVerdict::Anisotropic
    };
    Ok(IsotropyReport {
        first: first.clone(),
        second: second.clone(),
        points,
        tolerance: options.tolerance,
        deviation_trend,
        verdict,
    })
}
