//! Typed experiment configuration: JSON schema, validation, and resolution
//! of defaults.
//!
//! Configs are strict: unknown keys are rejected and the seed is mandatory
//! (reproducibility is not optional). [`ExperimentConfig::resolve`] fills
//! every kind-specific default so the echoed config in a report describes
//! the run completely.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::density::{Density, GeometricSet, Point, RadialFactor};
use crate::error::{Error, Result};
use crate::geometry::Ball;
use crate::homogeneity;
use crate::integrate::Region;
use crate::isotropy::{self, Ray};

/// Top-level configuration for one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed for all sampling in the run.
    pub seed: u64,
    pub density: DensityConfig,
    pub experiment: ExperimentSpec,
    /// Monte Carlo samples per mass estimate; the default depends on the
    /// experiment kind.
    #[serde(default)]
    pub samples: Option<u64>,
    /// Relative tolerance for adaptive quadrature (line masses).
    #[serde(default)]
    pub quad_rel_tol: Option<f64>,
    /// Default output directory, overridable by the command line. Never
    /// echoed into reports: outputs must not depend on where they land.
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

/// Density schema mirroring the density catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityConfig {
    /// `rho(x) = level` on `R^dim`.
    Constant { dim: usize, level: f64 },
    /// `rho(x) = |x - center|^beta`.
    RadialPower { center: Vec<f64>, beta: f64 },
    /// Product of radial-power factors with distinct centers.
    ProductOfRadialPowers { factors: Vec<FactorConfig> },
    /// `rho(x) = d(x, set)^beta` for a hyperplane, sphere, or point set.
    DistancePower { set: SetConfig, beta: f64 },
    /// `rho(x) = exp(rate * <direction, x>)`.
    Exponential { direction: Vec<f64>, rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub center: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetConfig {
    Hyperplane { normal: Vec<f64>, offset: f64 },
    Sphere { center: Vec<f64>, radius: f64 },
    PointSet { points: Vec<Vec<f64>> },
}

/// Region schema for mass experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionConfig {
    Ball { center: Vec<f64>, radius: f64 },
    Shell { center: Vec<f64>, inner: f64, outer: f64 },
}

/// Observer schema for isotropy experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayConfig {
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanDetailConfig {
    Full,
    Coarse,
}

/// Bound parameters `(p, constant)` for doubling ceilings and the lower
/// concentration check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub p: f64,
    pub constant: f64,
}

/// The experiment to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// Estimate the density mass of one region.
    Mass {
        region: RegionConfig,
        /// Skip closed forms to exercise the sampler.
        #[serde(default)]
        force_monte_carlo: bool,
    },
    /// Scan the average product over a ball family and report the supremum
    /// with the boundedness verdict.
    ApScan {
        p: f64,
        #[serde(default)]
        detail: Option<ScanDetailConfig>,
    },
    /// Mass-doubling ratio of one ball, with an optional theoretical
    /// ceiling.
    Doubling {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        bound: Option<BoundConfig>,
    },
    /// Shell-fraction scan of one ball with the fitted concentration
    /// exponent.
    SubsetScan {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        thetas: Option<Vec<f64>>,
        #[serde(default)]
        concentration: Option<BoundConfig>,
    },
    /// Two-observer ball-mass ratio curve with the homogeneity verdict and
    /// envelope fit.
    Homogeneity {
        first: Vec<f64>,
        second: Vec<f64>,
        #[serde(default)]
        radii: Option<Vec<f64>>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    /// Two-observer line-mass ratio curve with the isotropy verdict.
    Isotropy {
        first: RayConfig,
        second: RayConfig,
        #[serde(default)]
        r_max: Option<f64>,
        #[serde(default)]
        radii: Option<Vec<f64>>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
}

impl DensityConfig {
    pub fn build(&self) -> Result<Density> {
        match self {
            DensityConfig::Constant { dim, level } => Density::constant(*dim, *level),
            DensityConfig::RadialPower { center, beta } => {
                Density::radial_power(Point::new(center.clone())?, *beta)
            }
            DensityConfig::ProductOfRadialPowers { factors } => {
                let factors = factors
                    .iter()
                    .map(|f| {
                        Ok(RadialFactor {
                            center: Point::new(f.center.clone())?,
                            exponent: f.beta,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Density::product_of_radial_powers(factors)
            }
            DensityConfig::DistancePower { set, beta } => {
                Density::distance_power(set.build()?, *beta)
            }
            DensityConfig::Exponential { direction, rate } => {
                Density::exponential(direction.clone(), *rate)
            }
        }
    }
}

impl SetConfig {
    pub fn build(&self) -> Result<GeometricSet> {
        match self {
            SetConfig::Hyperplane { normal, offset } => {
                GeometricSet::hyperplane(normal.clone(), *offset)
            }
            SetConfig::Sphere { center, radius } => {
                GeometricSet::sphere(Point::new(center.clone())?, *radius)
            }
            SetConfig::PointSet { points } => {
                let points = points
                    .iter()
                    .map(|p| Point::new(p.clone()))
                    .collect::<Result<Vec<_>>>()?;
                GeometricSet::point_set(points)
            }
        }
    }
}

impl RegionConfig {
    pub fn build(&self) -> Result<Region> {
        match self {
            RegionConfig::Ball { center, radius } => {
                Ok(Region::ball(Ball::new(Point::new(center.clone())?, *radius)?))
            }
            RegionConfig::Shell { center, inner, outer } => {
                Region::shell(Point::new(center.clone())?, *inner, *outer)
            }
        }
    }
}

impl RayConfig {
    pub fn build(&self) -> Result<Ray> {
        Ray::new(Point::new(self.base.clone())?, self.direction.clone())
    }
}

impl ExperimentSpec {
    /// Kind-specific default sample budget. Isotropy is quadrature-only and
    /// uses none.
    pub fn default_samples(&self) -> u64 {
        match self {
            ExperimentSpec::Mass { .. } => 1_000_000,
            ExperimentSpec::ApScan { .. } => 20_000,
            ExperimentSpec::Doubling { .. } => 1_000_000,
            ExperimentSpec::SubsetScan { .. } => 200_000,
            ExperimentSpec::Homogeneity { .. } => 1_000_000,
            ExperimentSpec::Isotropy { .. } => 0,
        }
    }
}

/// Default shell fractions for subset scans: `0.05, 0.10, ..., 0.50`.
pub fn default_thetas() -> Vec<f64> {
    (1..=10).map(|k| k as f64 * 0.05).collect()
}

impl ExperimentConfig {
    /// Parses a JSON config, reporting the line/column of syntax or schema
    /// violations.
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        serde_json::from_str(text).map_err(|e| {
            Error::InvalidConfig(format!(
                "{} (line {}, column {})",
                e,
                e.line(),
                e.column()
            ))
        })
    }

    /// Returns a copy with every kind-specific default filled in, so the
    /// echoed config fully describes the run. Validates enough of the
    /// config to compute the defaults (points parse, density constructs).
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let density = self.density.build()?;
        let mut resolved = self.clone();
        resolved.samples = Some(self.samples.unwrap_or_else(|| self.experiment.default_samples()));
        let quad_rel_tol = self.quad_rel_tol.unwrap_or(1e-8);
        if !(quad_rel_tol > 0.0 && quad_rel_tol < 0.1) {
            return Err(Error::InvalidConfig(format!(
                "quad_rel_tol must lie in (0, 0.1), got {quad_rel_tol}"
            )));
        }
        resolved.quad_rel_tol = Some(quad_rel_tol);
        match &mut resolved.experiment {
            ExperimentSpec::ApScan { detail, .. } => {
                detail.get_or_insert(ScanDetailConfig::Full);
            }
            ExperimentSpec::SubsetScan { thetas, .. } => {
                thetas.get_or_insert_with(default_thetas);
            }
            ExperimentSpec::Homogeneity { first, second, radii, tolerance } => {
                if radii.is_none() {
                    let a = Point::new(first.clone())?;
                    let b = Point::new(second.clone())?;
                    *radii = Some(homogeneity::default_schedule(a.distance(&b)?));
                }
                tolerance.get_or_insert(homogeneity::DEFAULT_RATIO_TOLERANCE);
            }
            ExperimentSpec::Isotropy { first, second, r_max, radii, tolerance } => {
                if radii.is_none() {
                    let top = match r_max {
                        Some(top) => *top,
                        None => {
                            // Default horizon: 1e4 times the larger observer
                            // distance from the density's primary anchor.
                            let anchor = density
                                .scan_anchors()
                                .into_iter()
                                .next()
                                .expect("densities always expose an anchor");
                            let d1 = Point::new(first.base.clone())?.distance(&anchor)?;
                            let d2 = Point::new(second.base.clone())?.distance(&anchor)?;
                            1e4 * d1.max(d2).max(1.0)
                        }
                    };
                    *radii = Some(isotropy::default_radii(top, 3));
                }
                let top = radii.as_ref().and_then(|r| r.last().copied());
                if r_max.is_none() {
                    *r_max = top;
                }
                tolerance.get_or_insert(isotropy::DEFAULT_RATIO_TOLERANCE);
            }
            ExperimentSpec::Mass { .. } | ExperimentSpec::Doubling { .. } => {}
        }
        Ok(resolved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves_a_homogeneity_config() {
        let text = r#"{
            "seed": 7,
            "density": {"kind": "radial-power", "center": [0.0, 0.0], "beta": -0.5},
            "experiment": {"kind": "homogeneity", "first": [1.0, 0.0], "second": [-1.0, 0.0]}
        }"#;
        let config = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(config.seed, 7);
        let resolved = config.resolve().unwrap();
        assert_eq!(resolved.samples, Some(1_000_000));
        match &resolved.experiment {
            ExperimentSpec::Homogeneity { radii, tolerance, .. } => {
                let radii = radii.as_ref().unwrap();
                assert_eq!(radii.len(), 8);
                assert_eq!(radii[0], 8.0);
                assert_eq!(*tolerance, Some(0.02));
            }
            other => panic!("wrong experiment: {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys_with_position() {
        let text = r#"{
            "seed": 7,
            "density": {"kind": "constant", "dim": 2, "level": 1.0},
            "experiment": {"kind": "mass", "region": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}},
            "bogus": true
        }"#;
        match ExperimentConfig::from_json(text) {
            Err(Error::InvalidConfig(msg)) => {
                assert!(msg.contains("bogus"), "{msg}");
                assert!(msg.contains("line"), "{msg}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_seed() {
        let text = r#"{
            "density": {"kind": "constant", "dim": 2, "level": 1.0},
            "experiment": {"kind": "mass", "region": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}}
        }"#;
        match ExperimentConfig::from_json(text) {
            Err(Error::InvalidConfig(msg)) => assert!(msg.contains("seed"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn echoed_config_round_trips() {
        let text = r#"{
            "seed": 3,
            "density": {"kind": "exponential", "direction": [1.0], "rate": 1.0},
            "experiment": {"kind": "homogeneity", "first": [1.0], "second": [0.0]},
            "out_dir": "/tmp/somewhere"
        }"#;
        let resolved = ExperimentConfig::from_json(text).unwrap().resolve().unwrap();
        let echoed = serde_json::to_string(&resolved).unwrap();
        // The output directory never reaches the echo.
        assert!(!echoed.contains("somewhere"));
        // The echo itself is a valid, fully-resolved config.
        let reparsed = ExperimentConfig::from_json(&echoed).unwrap();
        assert_eq!(reparsed.samples, Some(1_000_000));
        assert_eq!(reparsed.resolve().unwrap(), reparsed);
    }

    #[test]
    fn isotropy_defaults_use_the_anchor_distance() {
        let text = r#"{
            "seed": 1,
            "density": {"kind": "radial-power", "center": [0.0, 0.0], "beta": -0.5},
            "experiment": {
                "kind": "isotropy",
                "first": {"base": [1.0, 0.0], "direction": [0.0, 1.0]},
                "second": {"base": [-2.0, 0.0], "direction": [0.6, 0.8]}
            }
        }"#;
        let resolved = ExperimentConfig::from_json(text).unwrap().resolve().unwrap();
        match &resolved.experiment {
            ExperimentSpec::Isotropy { r_max, radii, tolerance, .. } => {
                assert_eq!(*r_max, Some(2e4));
                assert_eq!(radii.as_deref(), Some(&[2e2, 2e3, 2e4][..]));
                assert_eq!(*tolerance, Some(0.05));
            }
            other => panic!("wrong experiment: {other:?}"),
        }
    }

    #[test]
    fn builds_every_density_kind() {
        let configs = [
            r#"{"kind": "constant", "dim": 3, "level": 2.0}"#,
            r#"{"kind": "radial-power", "center": [0.0, 0.0], "beta": -1.0}"#,
            r#"{"kind": "product-of-radial-powers", "factors": [
                {"center": [0.0, 0.0], "beta": -0.5},
                {"center": [2.0, 0.0], "beta": -0.5}
            ]}"#,
            r#"{"kind": "distance-power", "set": {"kind": "hyperplane", "normal": [1.0, 0.0], "offset": 0.0}, "beta": -0.5}"#,
            r#"{"kind": "distance-power", "set": {"kind": "sphere", "center": [0.0, 0.0], "radius": 1.0}, "beta": -0.5}"#,
            r#"{"kind": "distance-power", "set": {"kind": "point-set", "points": [[0.0, 0.0], [3.0, 0.0]]}, "beta": -0.5}"#,
            r#"{"kind": "exponential", "direction": [0.6, 0.8], "rate": 2.0}"#,
        ];
        for text in configs {
            let parsed: DensityConfig = serde_json::from_str(text).unwrap();
            parsed.build().unwrap();
        }
    }

    #[test]
    fn invalid_density_parameters_fail_at_build() {
        let parsed: DensityConfig =
            serde_json::from_str(r#"{"kind": "radial-power", "center": [0.0, 0.0], "beta": -2.0}"#)
                .unwrap();
        assert!(matches!(parsed.build(), Err(Error::NonIntegrable { .. })));
    }
}
