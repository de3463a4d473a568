//! Empirical probes of the Muckenhoupt-type average-product condition: the
//! normalized product over a single ball, scans over ball families with an
//! unboundedness verdict, mass-doubling ratios, and subset-concentration
//! scans.

use serde::Serialize;

use crate::density::{Density, Point};
use crate::error::{Error, Result};
use crate::fit;
use crate::geometry::Ball;
use crate::integrate::{mass, MassEstimate, MassOptions, Region};
use crate::rng::derive_seed;

// Seed salts: every sub-estimate of a compound experiment runs on its own
// derived stream so that estimates are independent unless sharing is wanted.
const SALT_DENSITY_AVG: u64 = 1;
const SALT_DUAL_AVG: u64 = 2;
const SALT_DOUBLING_BASE: u64 = 3;
const SALT_DOUBLING_DOUBLED: u64 = 4;
const SALT_SUBSET_BALL: u64 = 10;
const SALT_SUBSET_SHELL_BASE: u64 = 100;

/// The normalized average product over one ball at exponent `p`:
/// `(avg of rho) * (avg of rho^{-1/(p-1)})^{p-1}`, which is `>= 1` for every
/// density and equals the quantity whose supremum over balls defines the
/// class constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApProduct {
    pub ball: Ball,
    pub p: f64,
    /// Ball average of the density (mass normalized by ball volume).
    pub avg_density: MassEstimate,
    /// Ball average of the dual density `rho^{-1/(p-1)}`.
    pub avg_dual: MassEstimate,
    pub product: f64,
    pub product_std_error: f64,
}

fn scale_estimate(est: MassEstimate, factor: f64) -> MassEstimate {
    MassEstimate {
        value: est.value * factor,
        std_error: est.std_error * factor,
        err_bound: est.err_bound * factor,
        ..est
    }
}

/// Computes the average product over `ball` at exponent `p > 1`.
///
/// The density average and the dual average run on independent derived seed
/// streams; the dual density is integrated with its own singular strata.
/// A dual that is not locally integrable is a structured error naming the
/// failing exponent.
pub fn ap_product(
    density: &Density,
    ball: &Ball,
    p: f64,
    options: &MassOptions,
) -> Result<ApProduct> {
    let dual = density.dual(p)?;
    let region = Region::ball(ball.clone());
    let mut rho_options = *options;
    rho_options.seed = derive_seed(options.seed, SALT_DENSITY_AVG);
    let mut dual_options = *options;
    dual_options.seed = derive_seed(options.seed, SALT_DUAL_AVG);
    let volume = ball.volume();
    let avg_density = scale_estimate(mass(density, &region, &rho_options)?, 1.0 / volume);
    let avg_dual = scale_estimate(mass(&dual, &region, &dual_options)?, 1.0 / volume);

    let a = avg_density.value;
    let b = avg_dual.value;
    let product = a * b.powf(p - 1.0);
    // First-order propagation with independent factors.
    let da = b.powf(p - 1.0);
    let db = a * (p - 1.0) * b.powf(p - 2.0);
    let var = da * da * avg_density.std_error * avg_density.std_error
        + db * db * avg_dual.std_error * avg_dual.std_error;
    Ok(ApProduct {
        ball: ball.clone(),
        p,
        avg_density,
        avg_dual,
        product,
        product_std_error: var.max(0.0).sqrt(),
    })
}

/// A family of balls to scan for the supremum of the average product.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallFamily {
    balls: Vec<Ball>,
}

/// Size of the scan family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanDetail {
    /// Radii `2^j` for `j in -6..=12`, centers at every anchor point, at
    /// seven perturbations of it, and at a fixed eight-point far-field set.
    Full,
    /// A reduced family (about one-tenth the balls) still spanning more
    /// than three radius decades; for grids of scans.
    Coarse,
}

impl BallFamily {
    pub fn from_balls(balls: Vec<Ball>) -> Result<BallFamily> {
        if balls.is_empty() {
            return Err(Error::InvalidParameter("ball family must be non-empty".into()));
        }
        let dim = balls[0].dim();
        if let Some(b) = balls.iter().find(|b| b.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: b.dim() });
        }
        Ok(BallFamily { balls })
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    /// Builds the default scan family for a density: extremal balls for
    /// singular densities concentrate at and near the singular set and at
    /// scale transitions, so centers cluster around the anchors and radii
    /// are log-spaced.
    pub fn default_scan(density: &Density, detail: ScanDetail) -> Result<BallFamily> {
        let dim = density.dim();
        let anchors = density.scan_anchors();
        let (radii_exponents, perturbations, far_field): (Vec<i32>, Vec<f64>, usize) = match detail
        {
            ScanDetail::Full => (
                (-6..=12).collect(),
                (0..=6).map(|k| 1e-6 * 10f64.powi(k)).collect(),
                8,
            ),
            ScanDetail::Coarse => ((vec![-6, -3, 0, 2, 4, 8, 12]), vec![1e-3], 1),
        };
        let mut centers: Vec<Point> = Vec::new();
        let push_center = |p: Point, centers: &mut Vec<Point>| {
            if !centers.contains(&p) {
                centers.push(p);
            }
        };
        for anchor in &anchors {
            push_center(anchor.clone(), &mut centers);
            for &eps in &perturbations {
                let mut coords = anchor.coords().to_vec();
                coords[0] += eps;
                push_center(Point::new(coords)?, &mut centers);
            }
            // Fixed far-field points: +-8 along the coordinate axes, with the
            // distance doubling each time the axis cycle wraps so the set has
            // the stated size in every dimension.
            for slot in 0..far_field {
                let axis = (slot / 2) % dim;
                let sign = if slot % 2 == 0 { 1.0 } else { -1.0 };
                let distance = 8.0 * 2f64.powi((slot / (2 * dim)) as i32);
                let mut coords = anchor.coords().to_vec();
                coords[axis] += distance * sign;
                push_center(Point::new(coords)?, &mut centers);
            }
        }
        let mut balls = Vec::with_capacity(centers.len() * radii_exponents.len());
        for center in &centers {
            for &j in &radii_exponents {
                balls.push(Ball::new(center.clone(), 2.0f64.powi(j))?);
            }
        }
        BallFamily::from_balls(balls)
    }
}

/// Scan verdict on the boundedness of the average product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanVerdict {
    /// No blow-up detected across the family.
    ApConsistent,
    /// Empirical evidence that no finite class constant exists.
    ApViolatedEmpirical,
}

impl std::fmt::Display for ScanVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScanVerdict::ApConsistent => write!(f, "A_p consistent (empirical)"),
            ScanVerdict::ApViolatedEmpirical => write!(f, "A_p violated (empirical)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApScanEntry {
    pub ball: Ball,
    pub product: f64,
    pub product_std_error: f64,
}

/// Result of scanning the average product over a ball family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApScanReport {
    pub p: f64,
    pub entries: Vec<ApScanEntry>,
    pub sup_product: f64,
    /// Ball achieving the supremum, when any entry was computable.
    pub argmax: Option<Ball>,
    pub verdict: ScanVerdict,
    /// Human-readable evidence lines behind an unboundedness verdict.
    pub evidence: Vec<String>,
}

/// Estimates the class constant as the supremum of average products over the
/// family, with an advisory unboundedness verdict.
///
/// Per-ball failures that are themselves evidence of an unbounded product
/// (a non-integrable dual, estimator overflow at huge balls) are recorded as
/// evidence instead of aborting the scan; structural errors still propagate.
/// The verdict is empirical: it also fires when the running supremum keeps
/// doubling across the last three radius decades of the family.
pub fn estimate_ap_constant(
    density: &Density,
    p: f64,
    family: &BallFamily,
    options: &MassOptions,
) -> Result<ApScanReport> {
    let mut entries = Vec::new();
    let mut evidence = Vec::new();
    for ball in family.balls() {
        match ap_product(density, ball, p, options) {
            Ok(product) => {
                if product.product.is_finite() {
                    entries.push(ApScanEntry {
                        ball: ball.clone(),
                        product: product.product,
                        product_std_error: product.product_std_error,
                    });
                } else {
                    evidence.push(format!(
                        "non-finite product at ball of radius {}",
                        ball.radius()
                    ));
                }
            }
            Err(Error::DualNonIntegrable { dual_exponent, limit }) => {
                evidence.push(format!(
                    "dual density non-integrable: exponent {dual_exponent} <= {limit}"
                ));
            }
            Err(Error::SingularHitRate { .. }) => {
                evidence.push(format!(
                    "estimator breakdown (overflowing integrand) at ball of radius {}",
                    ball.radius()
                ));
            }
            Err(other) => return Err(other),
        }
    }
    evidence.dedup();

    let mut sup_product = f64::NEG_INFINITY;
    let mut argmax = None;
    for e in &entries {
        if e.product > sup_product {
            sup_product = e.product;
            argmax = Some(e.ball.clone());
        }
    }
    if entries.is_empty() {
        sup_product = f64::INFINITY;
    }

    // Running-sup blow-up across the last three radius decades.
    if let Some(r_top) = entries
        .iter()
        .map(|e| e.ball.radius())
        .fold(None::<f64>, |m, r| Some(m.map_or(r, |m| m.max(r))))
    {
        let sup_below = |r_max: f64| -> Option<f64> {
            entries
                .iter()
                .filter(|e| e.ball.radius() <= r_max)
                .map(|e| e.product)
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        };
        if let (Some(s0), Some(s1), Some(s2)) =
            (sup_below(r_top), sup_below(r_top / 10.0), sup_below(r_top / 100.0))
        {
            if s0 >= 2.0 * s1 && s1 >= 2.0 * s2 {
                evidence.push(format!(
                    "running sup doubles across the last three radius decades: \
                     {s2:.3e} -> {s1:.3e} -> {s0:.3e}"
                ));
            }
        }
    }

    let verdict = if evidence.is_empty() {
        ScanVerdict::ApConsistent
    } else {
        ScanVerdict::ApViolatedEmpirical
    };
    Ok(ApScanReport { p, entries, sup_product, argmax, verdict, evidence })
}

/// Mass-doubling ratio of a ball, with the optional theoretical ceiling
/// `2^{n p} C^p` computed from a supplied exponent and class constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingReport {
    pub ball: Ball,
    pub ball_mass: MassEstimate,
    pub doubled_mass: MassEstimate,
    /// `mass(2B) / mass(B)`.
    pub ratio: f64,
    pub ratio_std_error: f64,
    pub bound: Option<f64>,
    /// `ratio <= bound` within three standard errors, when a bound is given.
    pub within_bound: Option<bool>,
}

/// Parameters of the doubling ceiling `2^{n p} C^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoublingBound {
    pub p: f64,
    pub constant: f64,
}

/// Estimates `mass(2B) / mass(B)` on independent derived seed streams.
pub fn doubling_ratio(
    density: &Density,
    ball: &Ball,
    options: &MassOptions,
    bound: Option<DoublingBound>,
) -> Result<DoublingReport> {
    let mut base_options = *options;
    base_options.seed = derive_seed(options.seed, SALT_DOUBLING_BASE);
    let mut doubled_options = *options;
    doubled_options.seed = derive_seed(options.seed, SALT_DOUBLING_DOUBLED);
    let ball_mass = mass(density, &Region::ball(ball.clone()), &base_options)?;
    let doubled = ball.scaled(2.0)?;
    let doubled_mass = mass(density, &Region::ball(doubled), &doubled_options)?;
    let ratio = doubled_mass.value / ball_mass.value;
    let rel_var = (doubled_mass.std_error / doubled_mass.value).powi(2)
        + (ball_mass.std_error / ball_mass.value).powi(2);
    let ratio_std_error = ratio.abs() * rel_var.sqrt();
    let bound_value = bound.map(|b| {
        (2.0f64).powf(density.dim() as f64 * b.p) * b.constant.powf(b.p)
    });
    let within_bound = bound_value.map(|ceiling| ratio <= ceiling + 3.0 * ratio_std_error);
    Ok(DoublingReport {
        ball: ball.clone(),
        ball_mass,
        doubled_mass,
        ratio,
        ratio_std_error,
        bound: bound_value,
        within_bound,
    })
}

/// One shell fraction of a subset-concentration scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetScanPoint {
    pub theta: f64,
    /// `|E| / |B|` for the outer shell `E` of width `theta * R` (exact).
    pub volume_fraction: f64,
    /// `rho(E) / rho(B)`.
    pub mass_fraction: f64,
    pub mass_fraction_std_error: f64,
}

/// Check of the lower concentration inequality
/// `|E|/|B| <= C * (rho(E)/rho(B))^{1/p}` across the scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationCheck {
    pub p: f64,
    pub constant: f64,
    pub all_hold: bool,
    /// Largest violation of the inequality (negative when all points hold
    /// with slack).
    pub max_excess: f64,
}

/// Result of a subset-concentration scan over outer shells of a ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetScanReport {
    pub ball: Ball,
    pub points: Vec<SubsetScanPoint>,
    /// Fitted exponent of `mass_fraction <= C * volume_fraction^gamma` on
    /// the `theta <= 1/2` part of the scan.
    pub gamma: f64,
    pub coefficient: f64,
    pub max_log_residual: f64,
    pub concentration: Option<ConcentrationCheck>,
}

/// Scans outer shells `E_theta = { (1-theta) R <= |x - c| <= R }` of the
/// ball, recording Lebesgue and density mass fractions, and fits the power
/// law `mass_fraction ~ C * volume_fraction^gamma` on the `theta <= 1/2`
/// points. Optionally checks the lower concentration inequality for a
/// supplied `(p, constant)` pair.
pub fn subset_ratio_scan(
    density: &Density,
    ball: &Ball,
    thetas: &[f64],
    options: &MassOptions,
    concentration: Option<(f64, f64)>,
) -> Result<SubsetScanReport> {
    if thetas.is_empty() {
        return Err(Error::InvalidParameter("subset scan needs at least one theta".into()));
    }
    for &t in thetas {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "shell fraction theta must lie in (0, 1): {t}"
            )));
        }
    }
    let n = density.dim();
    let mut ball_options = *options;
    ball_options.seed = derive_seed(options.seed, SALT_SUBSET_BALL);
    let ball_mass = mass(density, &Region::ball(ball.clone()), &ball_options)?;
    let radius = ball.radius();
    let mut points = Vec::with_capacity(thetas.len());
    for (i, &theta) in thetas.iter().enumerate() {
        let shell = Region::shell(ball.center().clone(), (1.0 - theta) * radius, radius)?;
        let mut shell_options = *options;
        shell_options.seed = derive_seed(options.seed, SALT_SUBSET_SHELL_BASE + i as u64);
        let shell_mass = mass(density, &shell, &shell_options)?;
        let volume_fraction = 1.0 - (1.0 - theta).powi(n as i32);
        let mass_fraction = shell_mass.value / ball_mass.value;
        // Independent seed streams: relative errors add in quadrature.
        let rel_var = (shell_mass.std_error / shell_mass.value).powi(2)
            + (ball_mass.std_error / ball_mass.value).powi(2);
        points.push(SubsetScanPoint {
            theta,
            volume_fraction,
            mass_fraction,
            mass_fraction_std_error: mass_fraction * rel_var.sqrt(),
        });
    }

    // The exponent shows in the small-shell regime.
    let fit_points: Vec<(f64, f64)> = points
        .iter()
        .filter(|pt| pt.theta <= 0.5)
        .map(|pt| (pt.volume_fraction.ln(), pt.mass_fraction.ln()))
        .collect();
    if fit_points.len() < 2 {
        return Err(Error::InvalidParameter(
            "subset scan needs at least two thetas <= 1/2 to fit the exponent".into(),
        ));
    }
    let line = fit::fit_line(&fit_points)?;
    let concentration = concentration.map(|(p, constant)| {
        let mut max_excess = f64::NEG_INFINITY;
        for pt in &points {
            // Excess of |E|/|B| over C * (rho(E)/rho(B))^{1/p}, with a 3-sigma
            // allowance for the sampled mass fraction.
            let bound = constant * pt.mass_fraction.powf(1.0 / p);
            let slack = 3.0 * constant / p
                * pt.mass_fraction.powf(1.0 / p - 1.0)
                * pt.mass_fraction_std_error;
            max_excess = max_excess.max(pt.volume_fraction - bound - slack);
        }
        ConcentrationCheck { p, constant, all_hold: max_excess <= 1e-9, max_excess }
    });
    Ok(SubsetScanReport {
        ball: ball.clone(),
        points,
        gamma: line.slope,
        coefficient: line.intercept.exp(),
        max_log_residual: line.max_residual,
        concentration,
    })
}
