//! Density models: positive measurable functions on R^n with controlled
//! singular behavior.
//!
//! A [`Density`] is one of a small catalog of analytically tractable families:
//! constants, radial powers `|x - c|^e`, finite products of radial powers,
//! powers of the distance to a geometric set (hyperplane, sphere, finite point
//! set), and exponentials `exp(rate * <u, x>)`. Construction enforces the
//! local-integrability invariants of each family, so every valid `Density`
//! assigns finite mass to every ball.
//!
//! Evaluation uses the extended-real convention: on the singular set a
//! negative exponent evaluates to `+inf` exactly and a positive exponent to
//! `0` exactly. Integrators must never fold those sentinel values into sums;
//! they remove singularities by substitution or stratified sampling first.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, Ball};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 16;

/// Tolerance for "this vector must be unit length" checks.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Minimum separation between distinct singular centers of a product density.
pub const MIN_CENTER_SEPARATION: f64 = 1e-9;

/// A point of R^n, `1 <= n <= 16`, with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    /// Builds a point, validating dimension and finiteness.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_dim(coords.len())?;
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "point coordinates must be finite".into(),
            ));
        }
        Ok(Point { coords })
    }

    /// The origin of R^n.
    pub fn origin(dim: usize) -> Result<Self> {
        Point::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Euclidean distance to another point of the same dimension.
    pub fn distance(&self, other: &Point) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(geometry::distance_slices(&self.coords, &other.coords))
    }

    /// The point `x + t * v`. `v` must have the same dimension.
    pub fn translate(&self, v: &[f64], t: f64) -> Result<Point> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        let coords = self
            .coords
            .iter()
            .zip(v)
            .map(|(x, d)| x + t * d)
            .collect();
        Point::new(coords)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::UnsupportedDimension(dim));
    }
    Ok(())
}

fn check_unit(v: &[f64]) -> Result<()> {
    let norm = geometry::norm(v);
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::InvalidParameter(format!(
            "vector must be unit length: |v| = {norm}"
        )));
    }
    Ok(())
}

/// A geometric set supporting distance-to-set densities.
///
/// Codimension 1 for hyperplanes and spheres, codimension `dim` for finite
/// point sets. Build through the constructors, which validate the invariants
/// (unit normal, positive radius, non-empty consistent point list).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometricSet {
    /// `{ x : <normal, x> = offset }` with `normal` unit length.
    Hyperplane { normal: Vec<f64>, offset: f64 },
    /// `{ x : |x - center| = radius }`.
    Sphere { center: Point, radius: f64 },
    /// A finite, non-empty set of points.
    PointSet { points: Vec<Point> },
}

impl GeometricSet {
    pub fn hyperplane(normal: Vec<f64>, offset: f64) -> Result<Self> {
        check_dim(normal.len())?;
        if normal.iter().any(|c| !c.is_finite()) || !offset.is_finite() {
            return Err(Error::InvalidParameter(
                "hyperplane parameters must be finite".into(),
            ));
        }
        check_unit(&normal)?;
        Ok(GeometricSet::Hyperplane { normal, offset })
    }

    pub fn sphere(center: Point, radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sphere radius must be positive and finite: {radius}"
            )));
        }
        Ok(GeometricSet::Sphere { center, radius })
    }

    pub fn point_set(points: Vec<Point>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidParameter("point set must be non-empty".into()))?;
        let dim = first.dim();
        for p in &points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
        }
        Ok(GeometricSet::PointSet { points })
    }

    /// Ambient dimension of the set.
    pub fn dim(&self) -> usize {
        match self {
            GeometricSet::Hyperplane { normal, .. } => normal.len(),
            GeometricSet::Sphere { center, .. } => center.dim(),
            GeometricSet::PointSet { points } => points[0].dim(),
        }
    }

    /// Codimension: 1 for hyperplanes and spheres, `dim` for point sets.
    pub fn codim(&self) -> usize {
        match self {
            GeometricSet::Hyperplane { .. } | GeometricSet::Sphere { .. } => 1,
            GeometricSet::PointSet { .. } => self.dim(),
        }
    }
}

/// A single factor `|x - center|^exponent` of a product density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialFactor {
    pub center: Point,
    pub exponent: f64,
}

/// The analytic form of a density. Read-only from outside the crate; build
/// densities with the [`Density`] constructors.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityKind {
    /// `rho(x) = level`, `level > 0`.
    Constant { level: f64 },
    /// `rho(x) = |x - center|^exponent`, `exponent > -dim`.
    RadialPower { center: Point, exponent: f64 },
    /// `rho(x) = prod_i |x - c_i|^{e_i}` with pairwise-distinct centers.
    ProductOfRadialPowers { factors: Vec<RadialFactor> },
    /// `rho(x) = d(x, set)^exponent`, `exponent > -codim(set)`.
    DistancePower { set: GeometricSet, exponent: f64 },
    /// `rho(x) = exp(rate * <direction, x>)`, `direction` unit, `rate != 0`.
    Exponential { direction: Vec<f64>, rate: f64 },
}

/// Muckenhoupt-class membership answer for a `(density, p)` query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Membership {
    Member,
    NonMember,
    /// No exact criterion implemented; the conservative sufficient condition
    /// did not apply.
    Unknown,
}

/// A validated density on R^n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Density {
    dim: usize,
    kind: DensityKind,
}

impl Density {
    /// Constant density `level > 0`.
    pub fn constant(dim: usize, level: f64) -> Result<Self> {
        check_dim(dim)?;
        if !level.is_finite() || level <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "constant level must be positive and finite: {level}"
            )));
        }
        Ok(Density {
            dim,
            kind: DensityKind::Constant { level },
        })
    }

    /// Radial power `|x - center|^exponent` with `exponent > -dim` so that
    /// balls around the center carry finite mass.
    pub fn radial_power(center: Point, exponent: f64) -> Result<Self> {
        let dim = center.dim();
        check_exponent_integrable(exponent, dim as f64)?;
        Ok(Density {
            dim,
            kind: DensityKind::RadialPower { center, exponent },
        })
    }

    /// Product of radial powers with pairwise-distinct centers.
    ///
    /// Each exponent must exceed `-dim`, and the sum of the negative exponents
    /// must also exceed `-dim` (local integrability can only tighten where
    /// several singular factors interact, and separated centers keep each
    /// blow-up governed by its own exponent).
    pub fn product_of_radial_powers(factors: Vec<RadialFactor>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidParameter("product needs at least one factor".into()))?;
        let dim = first.center.dim();
        let n = dim as f64;
        let mut negative_sum = 0.0;
        for f in &factors {
            if f.center.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: f.center.dim(),
                });
            }
            check_exponent_integrable(f.exponent, n)?;
            if f.exponent < 0.0 {
                negative_sum += f.exponent;
            }
        }
        if factors.len() > 1 && negative_sum <= -n {
            return Err(Error::NonIntegrable {
                exponent: negative_sum,
                limit: -n,
            });
        }
        for (i, a) in factors.iter().enumerate() {
            for b in factors.iter().skip(i + 1) {
                if a.center.distance(&b.center)? < MIN_CENTER_SEPARATION {
                    return Err(Error::InvalidParameter(format!(
                        "product centers must be at least {MIN_CENTER_SEPARATION} apart"
                    )));
                }
            }
        }
        Ok(Density {
            dim,
            kind: DensityKind::ProductOfRadialPowers { factors },
        })
    }

    /// Distance power `d(x, set)^exponent` with `exponent > -codim(set)`.
    pub fn distance_power(set: GeometricSet, exponent: f64) -> Result<Self> {
        let dim = set.dim();
        check_exponent_integrable(exponent, set.codim() as f64)?;
        Ok(Density {
            dim,
            kind: DensityKind::DistancePower { set, exponent },
        })
    }

    /// Exponential density `exp(rate * <direction, x>)`, known inhomogeneous.
    /// `direction` must be unit length and `rate` non-zero (use
    /// [`Density::constant`] for the flat case).
    pub fn exponential(direction: Vec<f64>, rate: f64) -> Result<Self> {
        check_dim(direction.len())?;
        if direction.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "direction coordinates must be finite".into(),
            ));
        }
        check_unit(&direction)?;
        if !rate.is_finite() || rate == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "exponential rate must be finite and non-zero: {rate}"
            )));
        }
        Ok(Density {
            dim: direction.len(),
            kind: DensityKind::Exponential { direction, rate },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    /// True for families that are inhomogeneous at large scales by
    /// construction (currently the exponentials).
    pub fn known_inhomogeneous(&self) -> bool {
        matches!(self.kind, DensityKind::Exponential { .. })
    }

    /// Evaluates the density at `x`.
    ///
    /// Returns `+inf` exactly on the singular set of a negative exponent and
    /// `0` exactly on the zero set of a positive exponent; these sentinels
    /// must not be folded into sums by callers.
    pub fn eval(&self, x: &Point) -> Result<f64> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        Ok(match &self.kind {
            DensityKind::Constant { level } => *level,
            DensityKind::RadialPower { center, exponent } => {
                power(x.distance(center)?, *exponent)
            }
            DensityKind::ProductOfRadialPowers { factors } => {
                let mut value = 1.0;
                for f in factors {
                    value *= power(x.distance(&f.center)?, f.exponent);
                }
                value
            }
            DensityKind::DistancePower { set, exponent } => {
                power(set.distance(x)?, *exponent)
            }
            DensityKind::Exponential { direction, rate } => {
                (rate * geometry::dot(direction, x.coords())).exp()
            }
        })
    }

    /// Evaluates the density at `x`, substituting `distance` for the
    /// distance to the point-singularity factor centered at `center`.
    ///
    /// Importance samplers build `x` by stepping an exact transverse
    /// distance away from a singular anchor. Recomputing that distance from
    /// the absolute coordinates of `x` destroys it once it drops below the
    /// anchor's roundoff scale (the step cancels to zero ulps), so the
    /// samplers pass the constructed distance in.
    pub(crate) fn eval_at_center_distance(
        &self,
        x: &Point,
        center: &Point,
        distance: f64,
    ) -> Result<f64> {
        Ok(match &self.kind {
            DensityKind::RadialPower { center: c, exponent } if c == center => {
                power(distance, *exponent)
            }
            DensityKind::ProductOfRadialPowers { factors } => {
                let mut value = 1.0;
                for f in factors {
                    let d = if f.center == *center {
                        distance
                    } else {
                        x.distance(&f.center)?
                    };
                    value *= power(d, f.exponent);
                }
                value
            }
            _ => self.eval(x)?,
        })
    }

    /// Evaluates the density at `x`, substituting `distance` for the
    /// distance to the codim-1 singular surface. See
    /// [`Self::eval_at_center_distance`] for why callers supply it.
    pub(crate) fn eval_at_surface_distance(&self, x: &Point, distance: f64) -> Result<f64> {
        Ok(match &self.kind {
            DensityKind::DistancePower { exponent, .. } => power(distance, *exponent),
            _ => self.eval(x)?,
        })
    }

    /// Evaluates the dual density `rho^{-1/(p-1)}` at `x`, for `p > 1`.
    ///
    /// Extended-real conventions: `+inf ↦ 0` and `0 ↦ +inf`.
    pub fn dual_eval(&self, x: &Point, p: f64) -> Result<f64> {
        check_p_above_one(p)?;
        let v = self.eval(x)?;
        // f64 powf already honors the extended-real conventions:
        // inf^neg = 0 and 0^neg = inf.
        Ok(power(v, -1.0 / (p - 1.0)))
    }

    /// The dual density `rho^{-1/(p-1)}` as a first-class density, when it is
    /// itself integrable. Fails with a structured error naming the offending
    /// dual exponent otherwise.
    pub fn dual(&self, p: f64) -> Result<Density> {
        check_p_above_one(p)?;
        let s = -1.0 / (p - 1.0);
        match &self.kind {
            DensityKind::Constant { level } => Density::constant(self.dim, level.powf(s)),
            DensityKind::RadialPower { center, exponent } => {
                let dual_e = exponent * s;
                Density::radial_power(center.clone(), dual_e)
                    .map_err(|e| dual_error(e, dual_e))
            }
            DensityKind::ProductOfRadialPowers { factors } => {
                let dual_factors: Vec<RadialFactor> = factors
                    .iter()
                    .map(|f| RadialFactor {
                        center: f.center.clone(),
                        exponent: f.exponent * s,
                    })
                    .collect();
                let dual_sum: f64 = dual_factors
                    .iter()
                    .map(|f| f.exponent.min(0.0))
                    .sum();
                Density::product_of_radial_powers(dual_factors)
                    .map_err(|e| dual_error(e, dual_sum))
            }
            DensityKind::DistancePower { set, exponent } => {
                let dual_e = exponent * s;
                Density::distance_power(set.clone(), dual_e)
                    .map_err(|e| dual_error(e, dual_e))
            }
            DensityKind::Exponential { direction, rate } => {
                Density::exponential(direction.clone(), rate * s)
            }
        }
    }

    /// Muckenhoupt A_p membership for `p >= 1`.
    ///
    /// Exact for constants (always in), radial powers (`-n < e < n(p-1)` for
    /// `p > 1`; `-n < e <= 0` for `p = 1`), and exponentials (never in,
    /// regardless of p). Products and distance powers report `Member` only
    /// under a conservative sufficient condition and `Unknown` otherwise.
    pub fn ap_membership(&self, p: f64) -> Result<Membership> {
        if !p.is_finite() || p < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "membership query requires p >= 1: {p}"
            )));
        }
        let n = self.dim as f64;
        // Upper admissible exponent for a point singularity: n(p-1) when
        // p > 1, and 0 when p = 1 (constants included).
        let in_point_range =
            |e: f64| -> bool { if p > 1.0 { e < n * (p - 1.0) } else { e <= 0.0 } };
        let in_codim1_range =
            |e: f64| -> bool { if p > 1.0 { e < p - 1.0 } else { e <= 0.0 } };
        Ok(match &self.kind {
            DensityKind::Constant { .. } => Membership::Member,
            DensityKind::RadialPower { exponent, .. } => {
                // Lower bound e > -n is a construction invariant.
                if in_point_range(*exponent) {
                    Membership::Member
                } else {
                    Membership::NonMember
                }
            }
            DensityKind::ProductOfRadialPowers { factors } => {
                // Sufficient: every local exponent admissible and the total
                // exponent (the behavior at infinity) admissible too.
                let total: f64 = factors.iter().map(|f| f.exponent).sum();
                let all_local = factors.iter().all(|f| in_point_range(f.exponent));
                if all_local && in_point_range(total) && total > -n {
                    Membership::Member
                } else {
                    Membership::Unknown
                }
            }
            DensityKind::DistancePower { set, exponent } => {
                // Sufficient conditions per set kind; transverse behavior is
                // one-dimensional for codim-1 sets, full-dimensional for
                // point sets, with the far-field exponent equal to the local
                // one in all three cases.
                let ok = match set {
                    GeometricSet::Hyperplane { .. } | GeometricSet::Sphere { .. } => {
                        in_codim1_range(*exponent)
                    }
                    GeometricSet::PointSet { .. } => in_point_range(*exponent),
                };
                if ok {
                    Membership::Member
                } else {
                    Membership::Unknown
                }
            }
            DensityKind::Exponential { .. } => Membership::NonMember,
        })
    }

    /// Closed-form mass over a ball, when this family admits one:
    /// constants over any ball, radial powers over balls centered at the
    /// singular center, and one-dimensional exponentials over intervals.
    pub fn closed_form_ball_mass(&self, ball: &Ball) -> Option<f64> {
        if ball.dim() != self.dim {
            return None;
        }
        let n = self.dim as f64;
        let radius = ball.radius();
        match &self.kind {
            DensityKind::Constant { level } => Some(level * ball.volume()),
            DensityKind::RadialPower { center, exponent } => {
                if ball.center() == center {
                    let s = n + exponent;
                    Some(geometry::unit_sphere_area(self.dim) * radius.powf(s) / s)
                } else {
                    None
                }
            }
            DensityKind::Exponential { direction, rate } if self.dim == 1 => {
                let a = rate * direction[0];
                let c = ball.center().coords()[0];
                // Integral of e^{a x} over (c - R, c + R).
                Some((a * c).exp() * ((a * radius).exp() - (-a * radius).exp()) / a)
            }
            _ => None,
        }
    }

    /// Point singularities (or zeros) of radial-power type: `(center,
    /// exponent)` pairs with non-zero exponent. Used by the integrators to
    /// build flattening strata.
    pub fn point_singularities(&self) -> Vec<(Point, f64)> {
        match &self.kind {
            DensityKind::RadialPower { center, exponent } if *exponent != 0.0 => {
                vec![(center.clone(), *exponent)]
            }
            DensityKind::ProductOfRadialPowers { factors } => factors
                .iter()
                .filter(|f| f.exponent != 0.0)
                .map(|f| (f.center.clone(), f.exponent))
                .collect(),
            DensityKind::DistancePower {
                set: GeometricSet::PointSet { points },
                exponent,
            } if *exponent != 0.0 => points.iter().map(|p| (p.clone(), *exponent)).collect(),
            _ => Vec::new(),
        }
    }

    /// Codimension-1 singular surface (hyperplane or sphere) with its
    /// exponent, if this density has one.
    pub fn surface_singularity(&self) -> Option<(&GeometricSet, f64)> {
        match &self.kind {
            DensityKind::DistancePower { set, exponent }
                if *exponent != 0.0
                    && matches!(
                        set,
                        GeometricSet::Hyperplane { .. } | GeometricSet::Sphere { .. }
                    ) =>
            {
                Some((set, *exponent))
            }
            _ => None,
        }
    }

    /// Representative points on the singular set, used to anchor scan
    /// families. Densities without a singular set anchor at the origin.
    pub fn scan_anchors(&self) -> Vec<Point> {
        match &self.kind {
            DensityKind::Constant { .. } | DensityKind::Exponential { .. } => {
                vec![Point::origin(self.dim).expect("dim validated")]
            }
            DensityKind::RadialPower { center, .. } => vec![center.clone()],
            DensityKind::ProductOfRadialPowers { factors } => {
                factors.iter().map(|f| f.center.clone()).collect()
            }
            DensityKind::DistancePower { set, .. } => match set {
                GeometricSet::Hyperplane { normal, offset } => {
                    let coords = normal.iter().map(|c| c * offset).collect();
                    vec![Point::new(coords).expect("validated normal")]
                }
                GeometricSet::Sphere { center, radius } => {
                    let mut coords = center.coords().to_vec();
                    coords[0] += radius;
                    vec![Point::new(coords).expect("validated center")]
                }
                GeometricSet::PointSet { points } => points.clone(),
            },
        }
    }
}

fn check_exponent_integrable(exponent: f64, codim: f64) -> Result<()> {
    if !exponent.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "exponent must be finite: {exponent}"
        )));
    }
    if exponent <= -codim {
        return Err(Error::NonIntegrable {
            exponent,
            limit: -codim,
        });
    }
    Ok(())
}

fn check_p_above_one(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::ExponentOutOfRange(p));
    }
    Ok(())
}

fn dual_error(e: Error, dual_exponent: f64) -> Error {
    match e {
        Error::NonIntegrable { limit, .. } => Error::DualNonIntegrable {
            dual_exponent,
            limit,
        },
        other => other,
    }
}

/// `base^exponent` with the convention `0^0 = 1`, matching `f64::powf`.
#[inline]
fn power(base: f64, exponent: f64) -> f64 {
    base.powf(exponent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ball;
    use approx::assert_relative_eq;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![0.0; 17]).is_err());
        assert!(Point::new(vec![f64::NAN]).is_err());
        assert!(Density::constant(2, 0.0).is_err());
        assert!(Density::constant(2, -1.0).is_err());
        // Radial power must stay integrable: e > -n.
        assert!(Density::radial_power(pt(&[0.0, 0.0]), -2.0).is_err());
        assert!(Density::radial_power(pt(&[0.0, 0.0]), -2.5).is_err());
        assert!(Density::radial_power(pt(&[0.0, 0.0]), -1.9).is_ok());
        // Exponential needs a unit direction and non-zero rate.
        assert!(Density::exponential(vec![0.5, 0.5], 1.0).is_err());
        assert!(Density::exponential(vec![1.0, 0.0], 0.0).is_err());
        assert!(Density::exponential(vec![1.0, 0.0], 1.0).is_ok());
    }

    #[test]
    fn product_construction_invariants() {
        let f = |x: f64, y: f64, e: f64| RadialFactor {
            center: pt(&[x, y]),
            exponent: e,
        };
        // Sum of negative exponents must exceed -n.
        assert!(Density::product_of_radial_powers(vec![
            f(0.0, 0.0, -1.2),
            f(1.0, 0.0, -1.5)
        ])
        .is_err());
        assert!(Density::product_of_radial_powers(vec![
            f(0.0, 0.0, -0.9),
            f(1.0, 0.0, -0.9)
        ])
        .is_ok());
        // Centers must be separated.
        assert!(Density::product_of_radial_powers(vec![
            f(0.0, 0.0, -0.5),
            f(0.0, 5e-10, -0.5)
        ])
        .is_err());
    }

    #[test]
    fn eval_extended_real_sentinels() {
        let d = Density::radial_power(pt(&[0.0, 0.0]), -0.5).unwrap();
        assert_eq!(d.eval(&pt(&[0.0, 0.0])).unwrap(), f64::INFINITY);
        let z = Density::radial_power(pt(&[0.0, 0.0]), 1.5).unwrap();
        assert_eq!(z.eval(&pt(&[0.0, 0.0])).unwrap(), 0.0);
        let flat = Density::radial_power(pt(&[0.0, 0.0]), 0.0).unwrap();
        assert_eq!(flat.eval(&pt(&[0.0, 0.0])).unwrap(), 1.0);
        // Dimension mismatch is a structured error.
        match d.eval(&pt(&[1.0])) {
            Err(Error::DimensionMismatch { expected: 2, found: 1 }) => {}
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn eval_matches_formulas() {
        let d = Density::radial_power(pt(&[1.0, 0.0]), -0.5).unwrap();
        assert_relative_eq!(
            d.eval(&pt(&[3.0, 0.0])).unwrap(),
            2.0f64.powf(-0.5),
            max_relative = 1e-15
        );
        let e = Density::exponential(vec![1.0, 0.0], 2.0).unwrap();
        assert_relative_eq!(
            e.eval(&pt(&[1.5, 7.0])).unwrap(),
            3.0f64.exp(),
            max_relative = 1e-15
        );
        let s = GeometricSet::sphere(pt(&[0.0, 0.0]), 1.0).unwrap();
        let ds = Density::distance_power(s, -0.5).unwrap();
        assert_relative_eq!(
            ds.eval(&pt(&[3.0, 0.0])).unwrap(),
            2.0f64.powf(-0.5),
            max_relative = 1e-15
        );
    }

    #[test]
    fn dual_eval_conventions() {
        // rho = |x|^{-1} in R^2 at distance 4, p = 2: dual = rho^{-1} = 4.
        let d = Density::radial_power(pt(&[0.0, 0.0]), -1.0).unwrap();
        assert_relative_eq!(
            d.dual_eval(&pt(&[4.0, 0.0]), 2.0).unwrap(),
            4.0,
            max_relative = 1e-15
        );
        // Singular point maps to 0, zero set maps to +inf.
        assert_eq!(d.dual_eval(&pt(&[0.0, 0.0]), 2.0).unwrap(), 0.0);
        let z = Density::radial_power(pt(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(z.dual_eval(&pt(&[0.0, 0.0]), 2.0).unwrap(), f64::INFINITY);
        // p <= 1 is rejected.
        assert!(matches!(
            d.dual_eval(&pt(&[1.0, 0.0]), 1.0),
            Err(Error::ExponentOutOfRange(_))
        ));
    }

    #[test]
    fn dual_density_family_closure() {
        let d = Density::radial_power(pt(&[0.0, 0.0]), -1.0).unwrap();
        let dual = d.dual(2.0).unwrap();
        match dual.kind() {
            DensityKind::RadialPower { exponent, .. } => {
                assert_relative_eq!(*exponent, 1.0, max_relative = 1e-15)
            }
            other => panic!("unexpected dual kind {other:?}"),
        }
        // beta >= n(p-1) makes the dual non-integrable: beta = 2.5, p = 2,
        // n = 2 gives dual exponent -2.5 <= -2.
        let hot = Density::radial_power(pt(&[0.0, 0.0]), 2.5).unwrap();
        match hot.dual(2.0) {
            Err(Error::DualNonIntegrable { dual_exponent, limit }) => {
                assert_relative_eq!(dual_exponent, -2.5, max_relative = 1e-15);
                assert_relative_eq!(limit, -2.0, max_relative = 1e-15);
            }
            other => panic!("expected dual non-integrable, got {other:?}"),
        }
    }

    #[test]
    fn membership_exact_criterion_radial() {
        let n = 2usize;
        let member = |e: f64, p: f64| {
            Density::radial_power(Point::origin(n).unwrap(), e)
                .unwrap()
                .ap_membership(p)
                .unwrap()
        };
        // -n < e < n(p-1) for p > 1.
        assert_eq!(member(-1.0, 2.0), Membership::Member);
        assert_eq!(member(1.9, 2.0), Membership::Member);
        assert_eq!(member(2.0, 2.0), Membership::NonMember);
        assert_eq!(member(2.5, 2.0), Membership::NonMember);
        // p = 1: only -n < e <= 0.
        assert_eq!(member(-0.5, 1.0), Membership::Member);
        assert_eq!(member(0.0, 1.0), Membership::Member);
        assert_eq!(member(0.5, 1.0), Membership::NonMember);
        // beta = 0 recovers the constant weight at any p.
        assert_eq!(member(0.0, 1.5), Membership::Member);
    }

    #[test]
    fn membership_monotone_in_p() {
        // A_p classes grow with p: Member at p implies Member at q > p.
        let d = Density::radial_power(Point::origin(2).unwrap(), 1.5).unwrap();
        let ps = [1.0, 1.5, 1.75 + 1e-9, 2.0, 3.0, 6.0];
        let mut seen_member = false;
        for &p in &ps {
            let m = d.ap_membership(p).unwrap();
            if seen_member {
                assert_eq!(m, Membership::Member, "membership lost at p = {p}");
            }
            if m == Membership::Member {
                seen_member = true;
            }
        }
        assert!(seen_member);
    }

    #[test]
    fn membership_other_families() {
        let c = Density::constant(3, 2.0).unwrap();
        assert_eq!(c.ap_membership(1.0).unwrap(), Membership::Member);
        let e = Density::exponential(vec![1.0], 1.0).unwrap();
        assert_eq!(e.ap_membership(10.0).unwrap(), Membership::NonMember);
        // Product: both exponents and their sum admissible -> Member.
        let prod = Density::product_of_radial_powers(vec![
            RadialFactor { center: pt(&[0.0, 0.0]), exponent: -0.5 },
            RadialFactor { center: pt(&[1.0, 0.0]), exponent: -0.5 },
        ])
        .unwrap();
        assert_eq!(prod.ap_membership(2.0).unwrap(), Membership::Member);
        // Sum -1.0 + 1.8 = 0.8 < n(p-1) = 1 but one factor at 1.8 >= 1?
        // 1.8 >= n(p-1) = 1 -> not covered by the sufficient condition.
        let prod2 = Density::product_of_radial_powers(vec![
            RadialFactor { center: pt(&[0.0, 0.0]), exponent: -1.0 },
            RadialFactor { center: pt(&[1.0, 0.0]), exponent: 1.8 },
        ])
        .unwrap();
        assert_eq!(prod2.ap_membership(1.5).unwrap(), Membership::Unknown);
        // Hyperplane distance power: 1-D transverse criterion.
        let h = GeometricSet::hyperplane(vec![0.0, 1.0], 0.0).unwrap();
        let dh = Density::distance_power(h, -0.5).unwrap();
        assert_eq!(dh.ap_membership(2.0).unwrap(), Membership::Member);
        let h2 = GeometricSet::hyperplane(vec![0.0, 1.0], 0.0).unwrap();
        let dh2 = Density::distance_power(h2, 1.5).unwrap();
        assert_eq!(dh2.ap_membership(2.0).unwrap(), Membership::Unknown);
    }

    #[test]
    fn closed_form_masses() {
        // Frozen radial values: sigma_{n-1} R^{n+e} / (n+e).
        let cases: [(usize, f64, f64, f64); 4] = [
            (1, -0.5, 1.0, 4.0),
            (2, -0.5, 1.0, 4.188_790_204_786_391),
            (2, -1.5, 10.0, 39.738_353_063_184_405),
            (3, -2.5, 10.0, 79.476_706_126_368_81),
        ];
        for (n, e, radius, expect) in cases {
            let d = Density::radial_power(Point::origin(n).unwrap(), e).unwrap();
            let b = Ball::new(Point::origin(n).unwrap(), radius).unwrap();
            assert_relative_eq!(
                d.closed_form_ball_mass(&b).unwrap(),
                expect,
                max_relative = 1e-13
            );
        }
        // Constant: level * volume.
        let c = Density::constant(2, 3.0).unwrap();
        let b = Ball::new(Point::origin(2).unwrap(), 2.0).unwrap();
        assert_relative_eq!(
            c.closed_form_ball_mass(&b).unwrap(),
            3.0 * std::f64::consts::PI * 4.0,
            max_relative = 1e-15
        );
        // 1-D exponential over (-R, R): e^R - e^{-R}.
        let e = Density::exponential(vec![1.0], 1.0).unwrap();
        let b = Ball::new(Point::origin(1).unwrap(), 1.0).unwrap();
        assert_relative_eq!(
            e.closed_form_ball_mass(&b).unwrap(),
            2.350_402_387_287_603,
            max_relative = 1e-14
        );
        // Off-center radial ball: no closed form.
        let d = Density::radial_power(Point::origin(2).unwrap(), -0.5).unwrap();
        let off = Ball::new(pt(&[1.0, 0.0]), 0.5).unwrap();
        assert!(d.closed_form_ball_mass(&off).is_none());
    }

    #[test]
    fn closed_form_scaling_law() {
        // mass(2R) / mass(R) = 2^{n+e} for centered radial powers.
        for (n, e) in [(1usize, -0.5f64), (2, -1.0), (2, 1.0), (3, -2.5)] {
            let d = Density::radial_power(Point::origin(n).unwrap(), e).unwrap();
            for radius in [0.25, 1.0, 7.5] {
                let m1 = d
                    .closed_form_ball_mass(&Ball::new(Point::origin(n).unwrap(), radius).unwrap())
                    .unwrap();
                let m2 = d
                    .closed_form_ball_mass(
                        &Ball::new(Point::origin(n).unwrap(), 2.0 * radius).unwrap(),
                    )
                    .unwrap();
                assert_relative_eq!(
                    m2 / m1,
                    2.0f64.powf(n as f64 + e),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn singular_feature_enumeration() {
        let prod = Density::product_of_radial_powers(vec![
            RadialFactor { center: pt(&[0.0, 0.0]), exponent: -0.5 },
            RadialFactor { center: pt(&[2.0, 0.0]), exponent: 0.0 },
            RadialFactor { center: pt(&[4.0, 0.0]), exponent: 1.0 },
        ])
        .unwrap();
        let sing = prod.point_singularities();
        assert_eq!(sing.len(), 2); // zero-exponent factor contributes nothing
        let s = GeometricSet::sphere(pt(&[0.0, 0.0]), 1.0).unwrap();
        let ds = Density::distance_power(s, -0.5).unwrap();
        assert!(ds.surface_singularity().is_some());
        assert!(ds.point_singularities().is_empty());
    }
}
