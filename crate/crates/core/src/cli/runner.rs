//! Experiment dispatch and artifact writing.
//!
//! A run resolves its config, executes the requested experiment, and writes
//! `report.json` (resolved config echo, outcome record, verdict) plus
//! `curve.csv` for curve-shaped experiments. Outputs are byte-deterministic:
//! no timestamps, no absolute paths, and worker count never changes a value.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::ap::{self, BallFamily, DoublingBound, ScanDetail};
use crate::cli::config::{ExperimentConfig, ExperimentSpec, ScanDetailConfig};
use crate::density::Point;
use crate::error::{Error, Result};
use crate::geometry::Ball;
use crate::homogeneity::{self, HomogeneityVerdict, RatioCurveOptions};
use crate::integrate::{mass, MassOptions};
use crate::isotropy::{self, IsotropyOptions};
use crate::quad::QuadTolerance;

/// Verdict-bearing completion.
pub const EXIT_OK: i32 = 0;
/// Invalid config, non-integrable density, or any structured failure.
pub const EXIT_ERROR: i32 = 1;
/// Completed but the experiment could not reach a verdict.
pub const EXIT_INCONCLUSIVE: i32 = 2;

/// Artifacts of a completed run.
#[derive(Debug)]
pub struct RunArtifacts {
    pub exit_code: i32,
    pub verdict: Option<String>,
    pub report_path: PathBuf,
    pub csv_path: Option<PathBuf>,
}

#[derive(Serialize)]
struct Report<'a> {
    config: &'a ExperimentConfig,
    outcome: serde_json::Value,
    verdict: Option<String>,
}

struct Outcome {
    value: serde_json::Value,
    verdict: Option<String>,
    inconclusive: bool,
    csv: Option<String>,
}

/// Runs one experiment and writes its artifacts into `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let resolved = config.resolve()?;
    let outcome = execute(&resolved)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let report = Report {
        config: &resolved,
        outcome: outcome.value,
        verdict: outcome.verdict.clone(),
    };
    let mut text =
        serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    let report_path = out_dir.join("report.json");
    fs::write(&report_path, text)
        .map_err(|e| Error::Io(format!("{}: {e}", report_path.display())))?;
    let csv_path = match &outcome.csv {
        Some(content) => {
            let path = out_dir.join("curve.csv");
            fs::write(&path, content)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            Some(path)
        }
        None => None,
    };
    let exit_code = if outcome.inconclusive { EXIT_INCONCLUSIVE } else { EXIT_OK };
    Ok(RunArtifacts {
        exit_code,
        verdict: outcome.verdict,
        report_path,
        csv_path,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<serde_json::Value> {
    serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))
}

fn execute(resolved: &ExperimentConfig) -> Result<Outcome> {
    let density = resolved.density.build()?;
    let samples = resolved.samples.expect("config resolved");
    let seed = resolved.seed;
    match &resolved.experiment {
        ExperimentSpec::Mass { region, force_monte_carlo } => {
            let region = region.build()?;
            let mut options = MassOptions::new(samples, seed);
            options.force_monte_carlo = *force_monte_carlo;
            let estimate = mass(&density, &region, &options)?;
            Ok(Outcome {
                value: json!({ "mass": to_json(&estimate)? }),
                verdict: None,
                inconclusive: false,
                csv: None,
            })
        }
        ExperimentSpec::ApScan { p, detail } => {
            let detail = match detail.expect("config resolved") {
                ScanDetailConfig::Full => ScanDetail::Full,
                ScanDetailConfig::Coarse => ScanDetail::Coarse,
            };
            let family = BallFamily::default_scan(&density, detail)?;
            let report =
                ap::estimate_ap_constant(&density, *p, &family, &MassOptions::new(samples, seed))?;
            Ok(Outcome {
                verdict: Some(report.verdict.to_string()),
                csv: Some(ap_scan_csv(&report)),
                value: to_json(&report)?,
                inconclusive: false,
            })
        }
        ExperimentSpec::Doubling { center, radius, bound } => {
            let ball = Ball::new(Point::new(center.clone())?, *radius)?;
            let bound = bound.map(|b| DoublingBound { p: b.p, constant: b.constant });
            let report =
                ap::doubling_ratio(&density, &ball, &MassOptions::new(samples, seed), bound)?;
            Ok(Outcome {
                value: to_json(&report)?,
                verdict: None,
                inconclusive: false,
                csv: None,
            })
        }
        ExperimentSpec::SubsetScan { center, radius, thetas, concentration } => {
            let ball = Ball::new(Point::new(center.clone())?, *radius)?;
            let thetas = thetas.as_ref().expect("config resolved");
            let concentration = concentration.map(|c| (c.p, c.constant));
            let report = ap::subset_ratio_scan(
                &density,
                &ball,
                thetas,
                &MassOptions::new(samples, seed),
                concentration,
            )?;
            Ok(Outcome {
                csv: Some(subset_scan_csv(&report)),
                value: to_json(&report)?,
                verdict: None,
                inconclusive: false,
            })
        }
        ExperimentSpec::Homogeneity { first, second, radii, tolerance } => {
            let first = Point::new(first.clone())?;
            let second = Point::new(second.clone())?;
            let radii = radii.as_ref().expect("config resolved");
            let options = RatioCurveOptions {
                n_samples: samples,
                seed,
                tolerance: tolerance.expect("config resolved"),
            };
            let mut curve = homogeneity::ratio_curve(&density, &first, &second, radii, &options)?;
            let fit_status = match homogeneity::fit_envelope(&mut curve) {
                Ok(_) => "fitted".to_string(),
                Err(e @ Error::EnvelopeNoiseDominated { .. }) => e.to_string(),
                Err(other) => return Err(other),
            };
            Ok(Outcome {
                verdict: Some(curve.verdict.to_string()),
                inconclusive: curve.verdict == HomogeneityVerdict::Inconclusive,
                csv: Some(homogeneity_csv(&curve)),
                value: json!({ "curve": to_json(&curve)?, "envelope_fit": fit_status }),
            })
        }
        ExperimentSpec::Isotropy { first, second, radii, tolerance, .. } => {
            let first = first.build()?;
            let second = second.build()?;
            let radii = radii.as_ref().expect("config resolved");
            let options = IsotropyOptions {
                tolerance: tolerance.expect("config resolved"),
                quad: QuadTolerance {
                    rel_tol: resolved.quad_rel_tol.expect("config resolved"),
                    ..QuadTolerance::default()
                },
            };
            let report = isotropy::isotropy_ratio_curve(&density, &first, &second, radii, &options)?;
            Ok(Outcome {
                verdict: Some(report.verdict.to_string()),
                csv: Some(isotropy_csv(&report)),
                value: to_json(&report)?,
                inconclusive: false,
            })
        }
    }
}

/// 17 significant digits: round-trip exact for 64-bit floats.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn ap_scan_csv(report: &ap::ApScanReport) -> String {
    let mut out = String::from("index,center,radius,product,product_std_error\n");
    for (index, entry) in report.entries.iter().enumerate() {
        let center = entry
            .ball
            .center()
            .coords()
            .iter()
            .map(|c| fmt(*c))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{index},{center},{},{},{}\n",
            fmt(entry.ball.radius()),
            fmt(entry.product),
            fmt(entry.product_std_error)
        ));
    }
    out
}

fn subset_scan_csv(report: &ap::SubsetScanReport) -> String {
    let mut out = String::from("theta,volume_fraction,mass_fraction,mass_fraction_std_error\n");
    for point in &report.points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt(point.theta),
            fmt(point.volume_fraction),
            fmt(point.mass_fraction),
            fmt(point.mass_fraction_std_error)
        ));
    }
    out
}

fn homogeneity_csv(curve: &homogeneity::RatioCurve) -> String {
    let mut out = String::from("R,ratio,std_error,envelope,abs_deviation\n");
    for point in &curve.points {
        let envelope = point.envelope.map(fmt).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{envelope},{}\n",
            fmt(point.radius),
            fmt(point.ratio),
            fmt(point.std_error),
            fmt(point.abs_deviation)
        ));
    }
    out
}

fn isotropy_csv(report: &isotropy::IsotropyReport) -> String {
    let mut out = String::from("R,lambda1,lambda2,ratio,bracket_low,bracket_high\n");
    for point in &report.points {
        let (low, high) = match point.bracket {
            Some((lo, hi)) => (fmt(lo), fmt(hi)),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{low},{high}\n",
            fmt(point.radius),
            fmt(point.first_line_mass),
            fmt(point.second_line_mass),
            fmt(point.ratio)
        ));
    }
    out
}
