//! Euclidean geometry: balls, distances to geometric sets, sphere/ball
//! measure constants, and the sampled inclusion checks used by the two-ball
//! overlap argument.

use serde::Serialize;

use crate::density::{GeometricSet, Point};
use crate::error::{Error, Result};
use crate::rng::{self, SeedStream};

/// A closed ball `{ x : |x - center| <= radius }`, `radius > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    center: Point,
    radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive and finite: {radius}"
            )));
        }
        Ok(Ball { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Lebesgue volume `omega_n R^n`.
    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim()) * self.radius.powi(self.dim() as i32)
    }

    /// Closed-ball membership.
    pub fn contains(&self, x: &Point) -> Result<bool> {
        Ok(self.center.distance(x)? <= self.radius)
    }

    /// The concentric ball with radius scaled by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Ball> {
        Ball::new(self.center.clone(), self.radius * factor)
    }
}

/// Euclidean distance between coordinate slices of equal length.
pub(crate) fn distance_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Gamma(k/2) for integer k >= 1, by the half-integer recursion.
fn gamma_half(k: usize) -> f64 {
    let even = k.is_multiple_of(2);
    let mut value = if even { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut arg = if even { 2 } else { 1 };
    while arg < k {
        value *= arg as f64 / 2.0;
        arg += 2;
    }
    value
}

/// Surface measure `sigma_{n-1}` of the unit sphere in R^n.
pub fn unit_sphere_area(dim: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(dim as f64 / 2.0) / gamma_half(dim)
}

/// Lebesgue volume `omega_n` of the unit ball in R^n.
pub fn unit_ball_volume(dim: usize) -> f64 {
    unit_sphere_area(dim) / dim as f64
}

impl GeometricSet {
    /// Euclidean distance from `x` to the set.
    pub fn distance(&self, x: &Point) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(match self {
            GeometricSet::Hyperplane { normal, offset } => {
                (dot(normal, x.coords()) - offset).abs()
            }
            GeometricSet::Sphere { center, radius } => {
                (x.distance(center)? - radius).abs()
            }
            GeometricSet::PointSet { points } => points
                .iter()
                .map(|p| distance_slices(p.coords(), x.coords()))
                .fold(f64::INFINITY, f64::min),
        })
    }
}

/// An orthonormal basis of the orthogonal complement of `unit` (which must be
/// unit length): `n - 1` vectors, deterministic for a given input.
pub(crate) fn orthonormal_complement(unit: &[f64]) -> Vec<Vec<f64>> {
    let n = unit.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for k in 0..n {
        if basis.len() == n - 1 {
            break;
        }
        // Start from e_k, project out `unit` and the basis built so far.
        let mut v: Vec<f64> = vec![0.0; n];
        v[k] = 1.0;
        let proj = dot(&v, unit);
        for (vi, ui) in v.iter_mut().zip(unit) {
            *vi -= proj * ui;
        }
        for b in &basis {
            let proj = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let len = norm(&v);
        if len > 1e-8 {
            for vi in &mut v {
                *vi /= len;
            }
            basis.push(v);
        }
    }
    debug_assert_eq!(basis.len(), n - 1);
    basis
}

/// Result of the sampled inclusion checks behind the two-observer overlap
/// argument at scale `R` for observers `x1`, `x2` with `d = |x1 - x2|`:
///
/// 1. `B(x1,R) \ B(x2,R)` lies in the shell `R - d <= |x - x1| <= R`;
/// 2. symmetrically for the other observer;
/// 3. `B(x1, R/2)` lies in the intersection of both balls;
/// 4. symmetrically for the other half-ball.
///
/// Checks 1 and 2 hold for every `R`; 3 and 4 hold exactly when
/// `R >= 2d` (`overlap_threshold` reports `2d`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionReport {
    pub difference_in_shell: [bool; 2],
    pub half_ball_in_overlap: [bool; 2],
    /// Analytic scale `2|x1 - x2|` beyond which the half-ball inclusions hold.
    pub overlap_threshold: f64,
    pub samples_per_check: u64,
}

impl InclusionReport {
    pub fn all_hold(&self) -> bool {
        self.difference_in_shell.iter().all(|&b| b)
            && self.half_ball_in_overlap.iter().all(|&b| b)
    }
}

/// Verifies the four overlap inclusions by uniform membership sampling
/// (`samples` draws per check, deterministic in `seed`).
pub fn proof_inclusions(
    x1: &Point,
    x2: &Point,
    radius: f64,
    samples: u64,
    seed: u64,
) -> Result<InclusionReport> {
    if x1.dim() != x2.dim() {
        return Err(Error::DimensionMismatch {
            expected: x1.dim(),
            found: x2.dim(),
        });
    }
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "inclusion check radius must be positive: {radius}"
        )));
    }
    let d = x1.distance(x2)?;
    let dim = x1.dim();
    let stream = SeedStream::new(seed);
    // Roundoff slack for closed-set membership at sampled boundary points.
    let slack = 1e-12 * (radius + d);

    let observers = [x1, x2];
    let mut difference_in_shell = [true; 2];
    let mut half_ball_in_overlap = [true; 2];
    for i in 0..2 {
        let own = observers[i];
        let other = observers[1 - i];
        let mut rng_shell = stream.stream_rng(rng::lane::INCLUSION_BASE + i as u64, 0);
        for _ in 0..samples {
            // Draw from B(own, R); points outside B(other, R) form the
            // difference set and must land in the outer shell of width d.
            let u = rng::sample_unit_ball(dim, &mut rng_shell);
            let x = own.translate(&u, radius)?;
            let r_own = own.distance(&x)?;
            let r_other = other.distance(&x)?;
            if r_other > radius && r_own < radius - d - slack {
                difference_in_shell[i] = false;
            }
        }
        let mut rng_half = stream.stream_rng(rng::lane::INCLUSION_BASE + 2 + i as u64, 0);
        for _ in 0..samples {
            // Draw from B(own, R/2); every point must lie in both balls.
            let u = rng::sample_unit_ball(dim, &mut rng_half);
            let x = own.translate(&u, radius / 2.0)?;
            if own.distance(&x)? > radius + slack || other.distance(&x)? > radius + slack {
                half_ball_in_overlap[i] = false;
            }
        }
    }

    Ok(InclusionReport {
        difference_in_shell,
        half_ball_in_overlap,
        overlap_threshold: 2.0 * d,
        samples_per_check: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    #[test]
    fn sphere_constants() {
        // sigma_{n-1}: 2, 2*pi, 4*pi, 2*pi^2; omega_n: 2, pi, 4*pi/3.
        assert_relative_eq!(unit_sphere_area(1), 2.0, max_relative = 1e-15);
        assert_relative_eq!(
            unit_sphere_area(2),
            2.0 * std::f64::consts::PI,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            unit_sphere_area(3),
            4.0 * std::f64::consts::PI,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            unit_sphere_area(4),
            19.739_208_802_178_716,
            max_relative = 1e-14
        );
        assert_relative_eq!(unit_ball_volume(1), 2.0, max_relative = 1e-15);
        assert_relative_eq!(
            unit_ball_volume(2),
            std::f64::consts::PI,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            unit_ball_volume(3),
            4.0 * std::f64::consts::PI / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn ball_basics() {
        let b = Ball::new(pt(&[1.0, 0.0]), 2.0).unwrap();
        assert_relative_eq!(b.volume(), std::f64::consts::PI * 4.0, max_relative = 1e-15);
        assert!(b.contains(&pt(&[2.9, 0.0])).unwrap());
        assert!(!b.contains(&pt(&[3.1, 0.0])).unwrap());
        assert!(Ball::new(pt(&[0.0]), 0.0).is_err());
        assert!(Ball::new(pt(&[0.0]), f64::INFINITY).is_err());
        let doubled = b.scaled(2.0).unwrap();
        assert_relative_eq!(doubled.radius(), 4.0);
    }

    #[test]
    fn distances_to_sets() {
        let h = GeometricSet::hyperplane(vec![0.0, 1.0], 2.0).unwrap();
        assert_relative_eq!(h.distance(&pt(&[5.0, 7.0])).unwrap(), 5.0);
        let s = GeometricSet::sphere(pt(&[0.0, 0.0]), 2.0).unwrap();
        assert_relative_eq!(s.distance(&pt(&[0.5, 0.0])).unwrap(), 1.5);
        assert_relative_eq!(s.distance(&pt(&[3.0, 0.0])).unwrap(), 1.0);
        let f = GeometricSet::point_set(vec![pt(&[0.0, 0.0]), pt(&[4.0, 0.0])]).unwrap();
        assert_relative_eq!(f.distance(&pt(&[3.0, 0.0])).unwrap(), 1.0);
        assert!(h.distance(&pt(&[1.0])).is_err());
    }

    #[test]
    fn distance_is_one_lipschitz() {
        // |d(x,F) - d(y,F)| <= |x - y| for sampled pairs on each set kind.
        let sets = vec![
            GeometricSet::hyperplane(vec![0.6, 0.8], -1.0).unwrap(),
            GeometricSet::sphere(pt(&[0.5, -0.25]), 1.5).unwrap(),
            GeometricSet::point_set(vec![pt(&[0.0, 0.0]), pt(&[2.0, 1.0])]).unwrap(),
        ];
        let stream = SeedStream::new(7);
        let mut r = stream.stream_rng(0, 0);
        for set in &sets {
            for _ in 0..2000 {
                let a = pt(&[r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0)]);
                let b = pt(&[r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0)]);
                let lhs = (set.distance(&a).unwrap() - set.distance(&b).unwrap()).abs();
                let rhs = a.distance(&b).unwrap();
                assert!(lhs <= rhs + 1e-12, "Lipschitz violated: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn orthonormal_complement_is_orthonormal() {
        for unit in [
            vec![1.0, 0.0, 0.0],
            vec![0.6, 0.8],
            vec![0.5, -0.5, 0.5, -0.5],
        ] {
            let basis = orthonormal_complement(&unit);
            assert_eq!(basis.len(), unit.len() - 1);
            for (i, b) in basis.iter().enumerate() {
                assert_relative_eq!(norm(b), 1.0, max_relative = 1e-12);
                assert!(dot(b, &unit).abs() < 1e-12);
                for b2 in basis.iter().skip(i + 1) {
                    assert!(dot(b, b2).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn inclusions_hold_at_large_scale() {
        let report = proof_inclusions(&pt(&[0.0, 0.0]), &pt(&[1.0, 0.0]), 10.0, 10_000, 11).unwrap();
        assert!(report.all_hold());
        assert_relative_eq!(report.overlap_threshold, 2.0);
    }

    #[test]
    fn half_ball_inclusion_fails_below_threshold() {
        // R = 0.5 < 2d = 2: the half-balls are not inside the overlap.
        let report = proof_inclusions(&pt(&[0.0, 0.0]), &pt(&[1.0, 0.0]), 0.5, 10_000, 11).unwrap();
        assert!(report.difference_in_shell.iter().all(|&b| b));
        assert!(!report.half_ball_in_overlap[0]);
        assert!(!report.half_ball_in_overlap[1]);
    }

    #[test]
    fn coincident_observers_are_degenerate_but_valid() {
        let report = proof_inclusions(&pt(&[2.0, 1.0]), &pt(&[2.0, 1.0]), 3.0, 1_000, 5).unwrap();
        assert!(report.all_hold());
        assert_relative_eq!(report.overlap_threshold, 0.0);
    }
}
