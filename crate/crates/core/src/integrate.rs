//! Mass estimates for densities over balls and shells, and line masses along
//! rays.
//!
//! Ball and shell masses use closed forms when available, otherwise a
//! deterministic stratified Monte Carlo scheme: each point singularity gets a
//! spherical cap sampled with a radius law matching its exponent (so a pure
//! radial factor is integrated with zero variance inside its cap), each
//! codimension-1 singular surface gets a slab sampled with a power law in the
//! signed distance coordinate, and the remainder is covered by a uniform
//! stratum that excludes the caps and slabs. Streams are split by stratum and
//! by fixed-size chunk, and chunk results are merged in index order, so a
//! given seed produces bit-identical estimates for any worker count.
//!
//! Line masses integrate the density along a ray with adaptive quadrature,
//! after locating every crossing of the singular set and flattening each
//! crossing with a power substitution.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{Density, DensityKind, GeometricSet, Point, UNIT_NORM_TOL};
use crate::error::{Error, Result};
use crate::geometry::{self, Ball};
use crate::quad::{self, QuadTolerance};
use crate::rng::{self, SeedStream};

/// Fraction of draws allowed to land exactly on a singular or zero set before
/// the estimate is considered unreliable.
pub const RESAMPLE_FRACTION_LIMIT: f64 = 1e-6;

const MIN_SAMPLES: u64 = 100;
const DEFAULT_CHUNK: u64 = 65_536;

/// Integration region: a ball or a concentric shell.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball(Ball),
    /// `{ x : inner <= |x - center| <= outer }`, `0 <= inner < outer`.
    Shell { center: Point, inner: f64, outer: f64 },
}

impl Region {
    pub fn ball(ball: Ball) -> Region {
        Region::Ball(ball)
    }

    pub fn shell(center: Point, inner: f64, outer: f64) -> Result<Region> {
        if !(inner.is_finite() && outer.is_finite()) || inner < 0.0 || outer <= inner {
            return Err(Error::InvalidParameter(format!(
                "shell radii must satisfy 0 <= inner < outer: [{inner}, {outer}]"
            )));
        }
        Ok(Region::Shell { center, inner, outer })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ball(b) => b.dim(),
            Region::Shell { center, .. } => center.dim(),
        }
    }

    pub fn center(&self) -> &Point {
        match self {
            Region::Ball(b) => b.center(),
            Region::Shell { center, .. } => center,
        }
    }

    pub fn outer_radius(&self) -> f64 {
        match self {
            Region::Ball(b) => b.radius(),
            Region::Shell { outer, .. } => *outer,
        }
    }

    fn inner_radius(&self) -> f64 {
        match self {
            Region::Ball(_) => 0.0,
            Region::Shell { inner, .. } => *inner,
        }
    }

    /// Lebesgue volume.
    pub fn volume(&self) -> f64 {
        let n = self.dim() as i32;
        let outer = self.outer_radius().powi(n);
        let inner = self.inner_radius().powi(n);
        geometry::unit_ball_volume(self.dim()) * (outer - inner)
    }

    pub fn contains(&self, x: &Point) -> Result<bool> {
        let r = self.center().distance(x)?;
        Ok(self.inner_radius() <= r && r <= self.outer_radius())
    }
}

/// How a mass value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMethod {
    ClosedForm,
    MonteCarlo,
    StratifiedMonteCarlo,
}

/// A mass value with its uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassEstimate {
    pub value: f64,
    /// Standard error of the estimator (0 for closed forms).
    pub std_error: f64,
    /// Working error bound: three standard errors for Monte Carlo, 0 for
    /// closed forms.
    pub err_bound: f64,
    pub n_samples: u64,
    /// Draws discarded for landing exactly on a singular or zero set.
    pub resampled: u64,
    pub method: MassMethod,
}

impl MassEstimate {
    fn closed_form(value: f64) -> MassEstimate {
        MassEstimate {
            value,
            std_error: 0.0,
            err_bound: 0.0,
            n_samples: 0,
            resampled: 0,
            method: MassMethod::ClosedForm,
        }
    }
}

/// Options for a mass estimate.
#[derive(Debug, Clone, Copy)]
pub struct MassOptions {
    pub n_samples: u64,
    pub seed: u64,
    /// Samples per deterministic chunk; changing this changes the estimate
    /// (but not its distribution), so it is fixed by default.
    pub chunk_size: u64,
    /// Skip closed forms even when available (used to cross-check the
    /// sampler against exact values).
    pub force_monte_carlo: bool,
}

impl MassOptions {
    pub fn new(n_samples: u64, seed: u64) -> MassOptions {
        MassOptions {
            n_samples,
            seed,
            chunk_size: DEFAULT_CHUNK,
            force_monte_carlo: false,
        }
    }
}

impl Default for MassOptions {
    fn default() -> Self {
        MassOptions::new(1_000_000, 0)
    }
}

/// Estimates the density mass of a region.
///
/// Closed forms are used when the family admits one (unless
/// `force_monte_carlo` is set); shells combine the closed forms of their two
/// bounding balls. All other cases run the stratified sampler.
pub fn mass(density: &Density, region: &Region, options: &MassOptions) -> Result<MassEstimate> {
    if density.dim() != region.dim() {
        return Err(Error::DimensionMismatch {
            expected: density.dim(),
            found: region.dim(),
        });
    }
    if !options.force_monte_carlo {
        if let Some(value) = closed_form_region_mass(density, region) {
            return Ok(MassEstimate::closed_form(value));
        }
    }
    monte_carlo_mass(density, region, options)
}

/// Draws one point uniformly from the region: direction uniform on the
/// sphere, radius with density proportional to `t^{n-1}` restricted to
/// `[inner, outer]`.
pub fn sample_uniform(region: &Region, rng: &mut ChaCha8Rng) -> Point {
    let n = region.dim();
    let dir = rng::sample_unit_direction(n, rng);
    let t = rng::sample_power_radius(
        region.inner_radius(),
        region.outer_radius(),
        n as f64,
        rng,
    );
    region
        .center()
        .translate(&dir, t)
        .expect("direction dimension matches the region by construction")
}

fn closed_form_region_mass(density: &Density, region: &Region) -> Option<f64> {
    match region {
        Region::Ball(b) => density.closed_form_ball_mass(b),
        Region::Shell { center, inner, outer } => {
            let outer_ball = Ball::new(center.clone(), *outer).ok()?;
            let outer_mass = density.closed_form_ball_mass(&outer_ball)?;
            if *inner == 0.0 {
                Some(outer_mass)
            } else {
                let inner_ball = Ball::new(center.clone(), *inner).ok()?;
                Some(outer_mass - density.closed_form_ball_mass(&inner_ball)?)
            }
        }
    }
}

/// One flattening stratum of the sampler.
enum Stratum {
    /// Spherical cap around a point singularity, radius law `t^{n-1+e}`.
    Cap { center: Point, exponent: f64, radius: f64 },
    /// Slab of half-width `s_cap` around a hyperplane, distance law `|s|^e`.
    /// `lateral_center` is the region center's in-plane coordinate vector in
    /// the `basis` frame; the lateral ball of `lateral_radius` covers every
    /// in-plane offset the region can reach.
    HyperplaneSlab {
        normal: Vec<f64>,
        offset: f64,
        exponent: f64,
        s_cap: f64,
        basis: Vec<Vec<f64>>,
        lateral_center: Vec<f64>,
        lateral_radius: f64,
    },
    /// Slab of half-width `s_cap` around a sphere, distance law `|s|^e`,
    /// direction uniform on the full unit sphere.
    SphereSlab { center: Point, radius: f64, exponent: f64, s_cap: f64 },
}

impl Stratum {
    /// True when `x` belongs to this stratum (used by the uniform remainder
    /// to exclude already-covered territory).
    fn covers(&self, x: &Point) -> Result<bool> {
        Ok(match self {
            Stratum::Cap { center, radius, .. } => center.distance(x)? <= *radius,
            Stratum::HyperplaneSlab { normal, offset, s_cap, .. } => {
                (geometry::dot(normal, x.coords()) - offset).abs() <= *s_cap
            }
            Stratum::SphereSlab { center, radius, s_cap, .. } => {
                (center.distance(x)? - radius).abs() <= *s_cap
            }
        })
    }

    /// Draws a point of the stratum and returns the integrand weight
    /// `rho(x) * 1_region(x) / pdf(x)`.
    fn sample_weight(
        &self,
        density: &Density,
        region: &Region,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let n = density.dim();
        match self {
            Stratum::Cap { center, exponent, radius } => {
                let shape = n as f64 + exponent;
                let t = rng::sample_power_radius(0.0, *radius, shape, rng);
                let dir = rng::sample_unit_direction(n, rng);
                let x = center.translate(&dir, t)?;
                if !region.contains(&x)? {
                    return Ok(0.0);
                }
                // pdf(x) = [shape t^{shape-1} / radius^shape] / [sigma t^{n-1}]
                let weight = geometry::unit_sphere_area(n) * radius.powf(shape) / shape
                    * t.powf(-exponent);
                Ok(density.eval_at_center_distance(&x, center, t)? * weight)
            }
            Stratum::HyperplaneSlab {
                normal,
                offset,
                exponent,
                s_cap,
                basis,
                lateral_center,
                lateral_radius,
            } => {
                let s = sample_signed_power(*s_cap, *exponent, rng);
                let lateral_volume = if n > 1 {
                    geometry::unit_ball_volume(n - 1) * lateral_radius.powi(n as i32 - 1)
                } else {
                    1.0
                };
                let mut coords: Vec<f64> = normal.iter().map(|c| c * (offset + s)).collect();
                if n > 1 {
                    let u = rng::sample_unit_ball(n - 1, rng);
                    for (k, b) in basis.iter().enumerate() {
                        let lat = lateral_center[k] + lateral_radius * u[k];
                        for (ci, bi) in coords.iter_mut().zip(b) {
                            *ci += lat * bi;
                        }
                    }
                }
                let x = Point::new(coords)?;
                if !region.contains(&x)? {
                    return Ok(0.0);
                }
                // pdf(x) = p(s) / lateral_volume with
                // p(s) = (1+e) |s|^e / (2 s_cap^{1+e}).
                let p_s = (1.0 + exponent) * s.abs().powf(*exponent)
                    / (2.0 * s_cap.powf(1.0 + exponent));
                Ok(density.eval_at_surface_distance(&x, s.abs())? * lateral_volume / p_s)
            }
            Stratum::SphereSlab { center, radius, exponent, s_cap } => {
                let s = sample_signed_power(*s_cap, *exponent, rng);
                let t = radius + s;
                let dir = rng::sample_unit_direction(n, rng);
                let x = center.translate(&dir, t)?;
                if !region.contains(&x)? {
                    return Ok(0.0);
                }
                let p_s = (1.0 + exponent) * s.abs().powf(*exponent)
                    / (2.0 * s_cap.powf(1.0 + exponent));
                let weight =
                    geometry::unit_sphere_area(n) * t.powf(n as f64 - 1.0) / p_s;
                Ok(density.eval_at_surface_distance(&x, s.abs())? * weight)
            }
        }
    }
}

/// Signed distance draw with density proportional to `|s|^e` on
/// `[-s_cap, s_cap]`, via the inverse transform of `H(s) = sgn(s)|s|^{1+e}`.
fn sample_signed_power(s_cap: f64, exponent: f64, rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    let w: f64 = rng.gen_range(-1.0..1.0);
    w.signum() * (w.abs().powf(1.0 / (1.0 + exponent))) * s_cap
}

/// Builds the flattening strata for a density over a region.
fn build_strata(density: &Density, region: &Region) -> Vec<Stratum> {
    let mut strata = Vec::new();
    let outer = region.outer_radius();
    let points = density.point_singularities();
    // Caps must stay disjoint: half the minimum pairwise center distance.
    let mut cap_radius = outer;
    for (i, (a, _)) in points.iter().enumerate() {
        for (b, _) in points.iter().skip(i + 1) {
            let d = a.distance(b).expect("same density, same dimension");
            cap_radius = cap_radius.min(d / 2.0);
        }
    }
    for (center, exponent) in points {
        strata.push(Stratum::Cap { center, exponent, radius: cap_radius });
    }
    if let Some((set, exponent)) = density.surface_singularity() {
        match set {
            GeometricSet::Hyperplane { normal, offset } => {
                let n = normal.len();
                let basis = if n > 1 {
                    geometry::orthonormal_complement(normal)
                } else {
                    Vec::new()
                };
                // In-plane coordinates of the region center in the basis frame.
                let c = region.center().coords();
                let lateral_center: Vec<f64> =
                    basis.iter().map(|b| geometry::dot(b, c)).collect();
                strata.push(Stratum::HyperplaneSlab {
                    normal: normal.clone(),
                    offset: *offset,
                    exponent,
                    s_cap: outer,
                    basis,
                    lateral_center,
                    lateral_radius: outer,
                });
            }
            GeometricSet::Sphere { center, radius } => {
                strata.push(Stratum::SphereSlab {
                    center: center.clone(),
                    radius: *radius,
                    exponent,
                    // Keep the radial coordinate bounded away from the sphere
                    // center so the area Jacobian stays controlled.
                    s_cap: outer.min(radius / 2.0),
                });
            }
            GeometricSet::PointSet { .. } => unreachable!("point sets yield caps"),
        }
    }
    strata
}

struct Accumulator {
    sum: f64,
    sum_sq: f64,
    n: u64,
    resampled: u64,
}

/// Runs one stratum: `n` draws of `sample`, split into fixed chunks, each
/// chunk on its own deterministic stream, merged in chunk order.
fn run_stratum<F>(
    stream: &SeedStream,
    lane: u64,
    n: u64,
    chunk_size: u64,
    sample: F,
) -> Result<Accumulator>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    let n_chunks = n.div_ceil(chunk_size);
    let chunks: Vec<Accumulator> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let len = chunk_size.min(n - chunk * chunk_size);
            let mut rng = stream.stream_rng(lane, chunk);
            let mut acc = Accumulator { sum: 0.0, sum_sq: 0.0, n: len, resampled: 0 };
            for _ in 0..len {
                let mut w = sample(&mut rng)?;
                let mut tries = 0;
                while !w.is_finite() {
                    tries += 1;
                    acc.resampled += 1;
                    if tries > 64 {
                        return Err(Error::SingularHitRate {
                            fraction: 1.0,
                            limit: RESAMPLE_FRACTION_LIMIT,
                        });
                    }
                    w = sample(&mut rng)?;
                }
                acc.sum += w;
                acc.sum_sq += w * w;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Accumulator { sum: 0.0, sum_sq: 0.0, n: 0, resampled: 0 };
    for c in chunks {
        total.sum += c.sum;
        total.sum_sq += c.sum_sq;
        total.n += c.n;
        total.resampled += c.resampled;
    }
    Ok(total)
}

fn mean_and_variance_of_mean(acc: &Accumulator) -> (f64, f64) {
    let m = acc.n as f64;
    let mean = acc.sum / m;
    if acc.n < 2 {
        return (mean, 0.0);
    }
    let sample_var = ((acc.sum_sq - acc.sum * acc.sum / m) / (m - 1.0)).max(0.0);
    (mean, sample_var / m)
}

fn monte_carlo_mass(
    density: &Density,
    region: &Region,
    options: &MassOptions,
) -> Result<MassEstimate> {
    if options.n_samples < MIN_SAMPLES {
        return Err(Error::SampleBudgetTooSmall(options.n_samples, MIN_SAMPLES));
    }
    if options.chunk_size == 0 {
        return Err(Error::InvalidParameter("chunk size must be positive".into()));
    }
    let n = density.dim();
    let strata = build_strata(density, region);
    let n_groups = strata.len() as u64 + 1;
    let per_group = options.n_samples / n_groups;
    let uniform_samples = options.n_samples - per_group * (n_groups - 1);
    let stream = SeedStream::new(options.seed);
    let volume = region.volume();
    let inner = region.inner_radius();
    let outer = region.outer_radius();

    let mut value = 0.0;
    let mut variance = 0.0;
    let mut n_total = 0;
    let mut resampled = 0;

    for (k, stratum) in strata.iter().enumerate() {
        let acc = run_stratum(
            &stream,
            rng::lane::MASS_STRATUM_BASE + k as u64,
            per_group,
            options.chunk_size,
            |rng| stratum.sample_weight(density, region, rng),
        )?;
        let (mean, var) = mean_and_variance_of_mean(&acc);
        value += mean;
        variance += var;
        n_total += acc.n;
        resampled += acc.resampled;
    }

    let uniform_acc = run_stratum(
        &stream,
        rng::lane::MASS_UNIFORM,
        uniform_samples,
        options.chunk_size,
        |rng| {
            let dir = rng::sample_unit_direction(n, rng);
            let t = rng::sample_power_radius(inner, outer, n as f64, rng);
            let x = region.center().translate(&dir, t)?;
            for stratum in &strata {
                if stratum.covers(&x)? {
                    return Ok(0.0);
                }
            }
            Ok(density.eval(&x)? * volume)
        },
    )?;
    let (mean, var) = mean_and_variance_of_mean(&uniform_acc);
    value += mean;
    variance += var;
    n_total += uniform_acc.n;
    resampled += uniform_acc.resampled;

    let fraction = resampled as f64 / n_total as f64;
    if fraction > RESAMPLE_FRACTION_LIMIT {
        return Err(Error::SingularHitRate { fraction, limit: RESAMPLE_FRACTION_LIMIT });
    }
    let std_error = variance.sqrt();
    Ok(MassEstimate {
        value,
        std_error,
        err_bound: 3.0 * std_error,
        n_samples: n_total,
        resampled,
        method: if strata.is_empty() {
            MassMethod::MonteCarlo
        } else {
            MassMethod::StratifiedMonteCarlo
        },
    })
}

/// Masses of two same-dimension balls estimated from one shared point cloud.
///
/// The cloud is drawn once in the unit ball and mapped affinely into both
/// balls, so the two estimates are strongly positively correlated and their
/// ratio is far more stable than with independent draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMassEstimate {
    pub first: f64,
    pub second: f64,
    pub first_std_error: f64,
    pub second_std_error: f64,
    /// Covariance of the two mean estimators.
    pub covariance: f64,
    /// First-order standard error of `first / second`. Evaluated from the
    /// per-sample differences `w1 - r w2` rather than the textbook
    /// `se1^2 + r^2 se2^2 - 2 r cov` expression, which loses all its
    /// significant digits under the strong positive correlation the shared
    /// cloud is designed to create (and is exactly zero for identical balls).
    pub ratio_std_error: f64,
    pub n_samples: u64,
    pub resampled: u64,
}

impl PairMassEstimate {
    /// `first / second`.
    pub fn ratio(&self) -> f64 {
        self.first / self.second
    }
}

/// Estimates the masses of two balls from one shared unit-ball cloud.
///
/// For a fixed `seed` and `n_samples` the underlying cloud is identical
/// whatever the balls are, so ratio curves across radii reuse the same cloud
/// at every scale.
pub fn ball_mass_pair(
    density: &Density,
    first: &Ball,
    second: &Ball,
    n_samples: u64,
    seed: u64,
) -> Result<PairMassEstimate> {
    let n = density.dim();
    if first.dim() != n || second.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if first.dim() != n { first.dim() } else { second.dim() },
        });
    }
    if n_samples < MIN_SAMPLES {
        return Err(Error::SampleBudgetTooSmall(n_samples, MIN_SAMPLES));
    }
    let stream = SeedStream::new(seed);
    let vol1 = first.volume();
    let vol2 = second.volume();
    let n_chunks = n_samples.div_ceil(DEFAULT_CHUNK);
    struct PairAccum {
        s1: f64,
        s2: f64,
        s11: f64,
        s22: f64,
        s12: f64,
        n: u64,
        resampled: u64,
    }
    let chunks: Vec<PairAccum> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let len = DEFAULT_CHUNK.min(n_samples - chunk * DEFAULT_CHUNK);
            let mut rng = stream.stream_rng(rng::lane::PAIR_CLOUD, chunk);
            let mut acc =
                PairAccum { s1: 0.0, s2: 0.0, s11: 0.0, s22: 0.0, s12: 0.0, n: len, resampled: 0 };
            for _ in 0..len {
                let mut tries = 0;
                let (w1, w2) = loop {
                    let u = rng::sample_unit_ball(n, &mut rng);
                    let x1 = first.center().translate(&u, first.radius())?;
                    let x2 = second.center().translate(&u, second.radius())?;
                    let w1 = density.eval(&x1)? * vol1;
                    let w2 = density.eval(&x2)? * vol2;
                    if w1.is_finite() && w2.is_finite() {
                        break (w1, w2);
                    }
                    acc.resampled += 1;
                    tries += 1;
                    if tries > 64 {
                        return Err(Error::SingularHitRate {
                            fraction: 1.0,
                            limit: RESAMPLE_FRACTION_LIMIT,
                        });
                    }
                };
                acc.s1 += w1;
                acc.s2 += w2;
                acc.s11 += w1 * w1;
                acc.s22 += w2 * w2;
                acc.s12 += w1 * w2;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = PairAccum { s1: 0.0, s2: 0.0, s11: 0.0, s22: 0.0, s12: 0.0, n: 0, resampled: 0 };
    for c in chunks {
        t.s1 += c.s1;
        t.s2 += c.s2;
        t.s11 += c.s11;
        t.s22 += c.s22;
        t.s12 += c.s12;
        t.n += c.n;
        t.resampled += c.resampled;
    }
    let fraction = t.resampled as f64 / t.n as f64;
    if fraction > RESAMPLE_FRACTION_LIMIT {
        return Err(Error::SingularHitRate { fraction, limit: RESAMPLE_FRACTION_LIMIT });
    }
    let m = t.n as f64;
    let mean1 = t.s1 / m;
    let mean2 = t.s2 / m;
    let var1 = (((t.s11 - t.s1 * t.s1 / m) / (m - 1.0)) / m).max(0.0);
    let var2 = (((t.s22 - t.s2 * t.s2 / m) / (m - 1.0)) / m).max(0.0);
    let cov = ((t.s12 - t.s1 * t.s2 / m) / (m - 1.0)) / m;
    // Delta method via the differences d_i = w1_i - r w2_i: the ratio's
    // variance is Var(mean d)/mean2^2, with all cancellation done on the raw
    // sums.
    let r = mean1 / mean2;
    let s_d = t.s1 - r * t.s2;
    let s_dd = t.s11 - 2.0 * r * t.s12 + r * r * t.s22;
    let var_d = (((s_dd - s_d * s_d / m) / (m - 1.0)) / m).max(0.0);
    Ok(PairMassEstimate {
        first: mean1,
        second: mean2,
        first_std_error: var1.sqrt(),
        second_std_error: var2.sqrt(),
        covariance: cov,
        ratio_std_error: var_d.sqrt() / mean2.abs(),
        n_samples: t.n,
        resampled: t.resampled,
    })
}

/// A line mass `int_0^length rho(base + t v) dt` with its quadrature error
/// bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineMassEstimate {
    pub value: f64,
    pub err_bound: f64,
    pub n_evals: u64,
    /// Ray parameters where the ray crosses the singular set.
    pub crossings: Vec<f64>,
}

/// A crossing of the singular set at ray parameter `t`, where the density
/// behaves like `|t - t0|^exponent` along the ray.
#[derive(Debug, Clone, Copy)]
struct RayEvent {
    t: f64,
    exponent: f64,
}

/// Computes the line mass of `density` along `t -> base + t * direction` for
/// `t` in `[0, length]`. `direction` must be unit length.
///
/// Crossings of the singular set are located analytically: point
/// singularities the ray passes through, transversal hyperplane crossings,
/// and sphere crossings (a tangent ray doubles the local exponent). A
/// crossing exponent `<= -1` makes the line mass infinite and is reported as
/// an error, as is a ray running inside a negative-exponent surface.
pub fn line_mass(
    density: &Density,
    base: &Point,
    direction: &[f64],
    length: f64,
    tol: &QuadTolerance,
) -> Result<LineMassEstimate> {
    if direction.len() != density.dim() || base.dim() != density.dim() {
        return Err(Error::DimensionMismatch {
            expected: density.dim(),
            found: if direction.len() != density.dim() {
                direction.len()
            } else {
                base.dim()
            },
        });
    }
    let dnorm = geometry::norm(direction);
    if (dnorm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::InvalidParameter(format!(
            "ray direction must be unit length: |v| = {dnorm}"
        )));
    }
    if !length.is_finite() || length <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ray length must be positive and finite: {length}"
        )));
    }

    if let DensityKind::Constant { level } = density.kind() {
        return Ok(LineMassEstimate {
            value: level * length,
            err_bound: 0.0,
            n_evals: 0,
            crossings: Vec::new(),
        });
    }

    let mut events = find_ray_events(density, base, direction, length)?;
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    // Merge events that coincide (defensive; exponents add).
    let mut merged: Vec<RayEvent> = Vec::new();
    for e in events {
        match merged.last_mut() {
            Some(last) if (e.t - last.t).abs() <= 1e-12 * (1.0 + e.t.abs()) => {
                last.exponent += e.exponent;
            }
            _ => merged.push(e),
        }
    }
    for e in &merged {
        if e.exponent <= -1.0 {
            return Err(Error::LineMassUndefined { exponent: e.exponent });
        }
    }

    // Breakpoints: 0, interior crossings, length. Exponent lookup by value.
    let mut breaks: Vec<f64> = vec![0.0];
    for e in &merged {
        if e.t > 0.0 && e.t < length {
            breaks.push(e.t);
        }
    }
    breaks.push(length);
    let exponent_at = |t: f64| -> Option<f64> {
        merged
            .iter()
            .find(|e| (e.t - t).abs() <= 1e-12 * (1.0 + t.abs()))
            .map(|e| e.exponent)
    };

    let g = |t: f64| -> f64 {
        let x = base
            .translate(direction, t)
            .expect("dimension checked above");
        density.eval(&x).expect("dimension checked above")
    };

    let mut value = 0.0;
    let mut err_bound = 0.0;
    let mut n_evals = 0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let e_left = exponent_at(a).filter(|e| needs_substitution(*e));
        let e_right = exponent_at(b).filter(|e| needs_substitution(*e));
        let panels: Vec<(f64, f64, Option<f64>, Option<f64>)> = match (e_left, e_right) {
            (Some(el), Some(er)) => {
                // Keep at most one singular endpoint per panel.
                let mid = 0.5 * (a + b);
                vec![(a, mid, Some(el), None), (mid, b, None, Some(er))]
            }
            (el, er) => vec![(a, b, el, er)],
        };
        for (pa, pb, el, er) in panels {
            let out = match (el, er) {
                (Some(e), None) => integrate_with_left_singularity(&g, pa, pb, e, tol)?,
                (None, Some(e)) => integrate_with_right_singularity(&g, pa, pb, e, tol)?,
                (None, None) => quad::integrate_adaptive(&g, pa, pb, tol)?,
                (Some(_), Some(_)) => unreachable!("panels split above"),
            };
            value += out.value;
            err_bound += out.err_bound;
            n_evals += out.n_evals;
        }
    }

    Ok(LineMassEstimate {
        value,
        err_bound,
        n_evals,
        crossings: merged.iter().map(|e| e.t).collect(),
    })
}

/// Whether a crossing exponent needs the flattening substitution: the only
/// non-smooth integrable range is `-1 < e < 1`, `e != 0` (larger exponents
/// are continuous and handled by plain refinement).
fn needs_substitution(e: f64) -> bool {
    e != 0.0 && e > -1.0 && e < 1.0
}

/// Integrates `g` over `[a, b]` where `g(t) ~ C (t - a)^e` near `a`, via the
/// substitution `u = (t - a)^{1+e}` which makes the transformed integrand
/// bounded with a finite limit at `u = 0`.
fn integrate_with_left_singularity(
    g: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    e: f64,
    tol: &QuadTolerance,
) -> Result<quad::QuadOutcome> {
    let q = 1.0 + e;
    let transformed = |u: f64| {
        let t = a + u.powf(1.0 / q);
        let v = g(t) * u.powf(1.0 / q - 1.0) / q;
        // u -> 0 can round t onto the crossing; the true limit is finite, so
        // dropping the rounded evaluation only perturbs a vanishing sliver.
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    quad::integrate_adaptive(transformed, 0.0, (b - a).powf(q), tol)
}

/// Mirror image of [`integrate_with_left_singularity`] for `g(t) ~ C (b-t)^e`.
fn integrate_with_right_singularity(
    g: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    e: f64,
    tol: &QuadTolerance,
) -> Result<quad::QuadOutcome> {
    let q = 1.0 + e;
    let transformed = |u: f64| {
        let t = b - u.powf(1.0 / q);
        let v = g(t) * u.powf(1.0 / q - 1.0) / q;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    quad::integrate_adaptive(transformed, 0.0, (b - a).powf(q), tol)
}

/// Locates all crossings of the singular set along the ray.
fn find_ray_events(
    density: &Density,
    base: &Point,
    direction: &[f64],
    length: f64,
) -> Result<Vec<RayEvent>> {
    let mut events = Vec::new();
    for (center, exponent) in density.point_singularities() {
        let w: Vec<f64> = center
            .coords()
            .iter()
            .zip(base.coords())
            .map(|(c, x)| c - x)
            .collect();
        let t_star = geometry::dot(&w, direction);
        let perp: Vec<f64> = w
            .iter()
            .zip(direction)
            .map(|(wi, vi)| wi - t_star * vi)
            .collect();
        let perp_tol = 1e-12 * (1.0 + geometry::norm(&w));
        if geometry::norm(&perp) <= perp_tol && (0.0..=length).contains(&t_star) {
            if exponent <= -1.0 {
                return Err(Error::LineMassUndefined { exponent });
            }
            events.push(RayEvent { t: t_star, exponent });
        }
    }
    if let Some((set, exponent)) = density.surface_singularity() {
        match set {
            GeometricSet::Hyperplane { normal, offset } => {
                let vn = geometry::dot(direction, normal);
                let s0 = geometry::dot(base.coords(), normal) - offset;
                if vn.abs() <= 1e-12 {
                    // Ray parallel to the hyperplane.
                    if s0.abs() <= 1e-12 * (1.0 + offset.abs()) && exponent < 0.0 {
                        // Ray inside the surface: the density is identically
                        // infinite along it. (A positive exponent makes it
                        // identically zero instead, which needs no event.)
                        return Err(Error::LineMassUndefined { exponent });
                    }
                } else {
                    let t_star = -s0 / vn;
                    if (0.0..=length).contains(&t_star) {
                        events.push(RayEvent { t: t_star, exponent });
                    }
                }
            }
            GeometricSet::Sphere { center, radius } => {
                let w: Vec<f64> = base
                    .coords()
                    .iter()
                    .zip(center.coords())
                    .map(|(x, c)| x - c)
                    .collect();
                let b = geometry::dot(&w, direction);
                let c_quad = geometry::dot(&w, &w) - radius * radius;
                let disc = b * b - c_quad;
                let tol_disc = 1e-12 * (b * b + c_quad.abs()).max(1.0);
                if disc.abs() <= tol_disc {
                    // Tangent ray: |distance| ~ kappa (t - t0)^2.
                    let t_star = -b;
                    if (0.0..=length).contains(&t_star) {
                        let doubled = 2.0 * exponent;
                        if doubled <= -1.0 {
                            return Err(Error::LineMassUndefined { exponent: doubled });
                        }
                        events.push(RayEvent { t: t_star, exponent: doubled });
                    }
                } else if disc > 0.0 {
                    for t_star in [-b - disc.sqrt(), -b + disc.sqrt()] {
                        if (0.0..=length).contains(&t_star) {
                            events.push(RayEvent { t: t_star, exponent });
                        }
                    }
                }
            }
            GeometricSet::PointSet { .. } => unreachable!("point sets yield caps"),
        }
    }
    Ok(events)
}
