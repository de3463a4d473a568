//! End-to-end acceptance checks for the crate's quantitative guarantees.
//!
//! Each test prints one `acceptance NN <name>: PASS|FAIL (<detail>)` line
//! (shown with `cargo test --test acceptance -- --nocapture`) and then
//! asserts, so a red criterion both fails the suite and explains itself.
//! All randomness is seeded: every run evaluates the same cases.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weightlab::ap::{self, BallFamily, ScanDetail, ScanVerdict};
use weightlab::homogeneity::{self, HomogeneityVerdict, RatioCurveOptions};
use weightlab::integrate::{mass, MassOptions, Region};
use weightlab::isotropy::{self, IsotropyOptions, IsotropyVerdict, Ray};
use weightlab::quad::QuadTolerance;
use weightlab::{Ball, Density, Error, GeometricSet, Membership, Point};

fn conclude(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {id:02} {name}: {tag} ({detail})");
    assert!(pass, "acceptance {id:02} {name}: {tag} ({detail})");
}

fn origin(dim: usize) -> Point {
    Point::origin(dim).unwrap()
}

fn pt(coords: &[f64]) -> Point {
    Point::new(coords.to_vec()).unwrap()
}

/// 1. Forced Monte Carlo agrees with the closed-form ball masses across
///    dimensions, exponents, and radii: error <= max(3 sigma, 0.3%) at 1e6
///    samples, every case under 10 s.
#[test]
fn c01_integrator_oracle_agreement() {
    let mut worst_rel = 0.0f64;
    let mut slowest = Duration::ZERO;
    let mut failures = Vec::new();
    let mut case = 0u64;
    for n in 1..=3usize {
        for beta in [-(n as f64) + 0.5, -0.5, 0.0, 1.0] {
            for radius in [1.0, 10.0] {
                let start = Instant::now();
                let d = Density::radial_power(origin(n), beta).unwrap();
                let ball = Ball::new(origin(n), radius).unwrap();
                let exact = d.closed_form_ball_mass(&ball).unwrap();
                let mut opts = MassOptions::new(1_000_000, 1_000 + case);
                opts.force_monte_carlo = true;
                let est = mass(&d, &Region::ball(ball), &opts).unwrap();
                let err = (est.value - exact).abs();
                let allowed = (3.0 * est.std_error).max(3e-3 * exact);
                if err > allowed {
                    failures.push(format!("n={n} beta={beta} R={radius}: err={err:.3e}"));
                }
                worst_rel = worst_rel.max(err / exact);
                slowest = slowest.max(start.elapsed());
                case += 1;
            }
        }
    }
    let pass = failures.is_empty() && slowest < Duration::from_secs(10);
    conclude(
        1,
        "integrator-oracle-agreement",
        pass,
        &format!(
            "{case} cases, worst relative error {worst_rel:.3e} vs 3e-3 cap, \
             slowest case {:.2}s < 10s{}",
            slowest.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; failing: {failures:?}") },
        ),
    );
}

/// Draws an exponent in the open member range `(lo, hi)`, inset by 10% of
/// the width on each side so membership is comfortably strict.
fn inset_exponent(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let inset = 0.1 * (hi - lo);
    rng.gen_range(lo + inset..hi - inset)
}

fn random_coords(rng: &mut ChaCha8Rng, dim: usize, half_width: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-half_width..half_width)).collect()
}

/// 2. The average product respects its universal floor of 1: over 200 random
///    member (density, ball, p) triples, every product >= 1 - 3 sigma.
#[test]
fn c02_average_product_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF100);
    let ps = [1.5, 2.0, 3.0, 4.0];
    let mut violations = 0u32;
    let mut worst_margin = f64::INFINITY;
    for i in 0..200u64 {
        let p = ps[rng.gen_range(0..ps.len())];
        let dim = rng.gen_range(1..=3usize);
        let density = match rng.gen_range(0..4u8) {
            0 => Density::constant(dim, rng.gen_range(0.2..5.0)).unwrap(),
            1 => {
                let beta = inset_exponent(&mut rng, -(dim as f64), dim as f64 * (p - 1.0));
                Density::radial_power(pt(&random_coords(&mut rng, dim, 2.0)), beta).unwrap()
            }
            2 => {
                let beta = inset_exponent(&mut rng, -1.0, p - 1.0);
                let mut normal = vec![0.0; dim];
                normal[0] = 1.0;
                let offset = rng.gen_range(-1.0..1.0);
                Density::distance_power(GeometricSet::hyperplane(normal, offset).unwrap(), beta)
                    .unwrap()
            }
            _ => {
                let beta = inset_exponent(&mut rng, -1.0, p - 1.0);
                let center = pt(&random_coords(&mut rng, dim, 2.0));
                let radius = rng.gen_range(0.5..2.0);
                Density::distance_power(GeometricSet::sphere(center, radius).unwrap(), beta)
                    .unwrap()
            }
        };
        let ball = Ball::new(
            pt(&random_coords(&mut rng, dim, 4.0)),
            rng.gen_range(0.1f64.ln()..8f64.ln()).exp(),
        )
        .unwrap();
        let opts = MassOptions::new(20_000, 7_000 + i);
        let product = ap::ap_product(&density, &ball, p, &opts).unwrap();
        let margin = product.product - (1.0 - 3.0 * product.product_std_error);
        worst_margin = worst_margin.min(margin);
        // Closed-form constants have sigma = 0 and land a few ulps below 1
        // from powf rounding; 1e-12 of slack admits that roundoff while
        // still catching any statistically meaningful floor breach.
        if margin < -1e-12 {
            violations += 1;
        }
    }
    conclude(
        2,
        "average-product-floor",
        violations == 0,
        &format!(
            "200 member triples, {violations} floor violations (product < 1 - 3 sigma), \
             smallest margin above the floor {worst_margin:.3e}"
        ),
    );
}

/// 3. The average product is monotone in the exponent: on 100 random balls
///    for the planar inverse-distance density, product at q=4 stays below
///    product at p=2 within 3 sigma.
#[test]
fn c03_product_monotone_in_p() {
    let density = Density::radial_power(origin(2), -1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x30303);
    let mut violations = 0u32;
    let mut worst_excess = f64::NEG_INFINITY;
    for i in 0..100u64 {
        let ball = Ball::new(
            pt(&random_coords(&mut rng, 2, 5.0)),
            rng.gen_range(0.05f64.ln()..16f64.ln()).exp(),
        )
        .unwrap();
        let opts = MassOptions::new(20_000, 40_000 + i);
        let at_p = ap::ap_product(&density, &ball, 2.0, &opts).unwrap();
        let at_q = ap::ap_product(&density, &ball, 4.0, &opts).unwrap();
        let sigma = (at_p.product_std_error.powi(2) + at_q.product_std_error.powi(2)).sqrt();
        let excess = at_q.product - at_p.product - 3.0 * sigma;
        worst_excess = worst_excess.max(excess);
        if excess > 0.0 {
            violations += 1;
        }
    }
    conclude(
        3,
        "product-monotone-in-p",
        violations == 0,
        &format!(
            "100 balls, {violations} monotonicity violations (q=4 above p=2 + 3 sigma), \
             worst excess {worst_excess:.3e}"
        ),
    );
}

/// 4. The empirical boundedness verdict of a coarse family scan agrees with
///    the analytic membership criterion on every radial-power grid point
///    whose exponent clears the decision boundary by at least 0.25.
#[test]
fn c04_membership_scan_consistency() {
    let betas = [-0.75, -0.4, 0.5, 1.5, 3.5];
    let dims = [1usize, 2, 3];
    let ps = [1.5, 2.0, 3.0, 4.0];
    let mut evaluated = 0u32;
    let mut skipped = 0u32;
    let mut mismatches = Vec::new();
    for (gi, &beta) in betas.iter().enumerate() {
        for (gj, &n) in dims.iter().enumerate() {
            for (gk, &p) in ps.iter().enumerate() {
                let upper = n as f64 * (p - 1.0);
                let lower = -(n as f64);
                let margin = (beta - upper).abs().min((beta - lower).abs());
                if margin < 0.25 {
                    skipped += 1;
                    continue;
                }
                let density = Density::radial_power(origin(n), beta).unwrap();
                let expected = density.ap_membership(p).unwrap();
                let family = BallFamily::default_scan(&density, ScanDetail::Coarse).unwrap();
                let seed = 90_000 + (gi * 100 + gj * 10 + gk) as u64;
                let opts = MassOptions::new(20_000, seed);
                let report = ap::estimate_ap_constant(&density, p, &family, &opts).unwrap();
                let consistent = match expected {
                    Membership::Member => report.verdict == ScanVerdict::ApConsistent,
                    Membership::NonMember => report.verdict == ScanVerdict::ApViolatedEmpirical,
                    Membership::Unknown => true,
                };
                if !consistent {
                    mismatches.push(format!(
                        "beta={beta} n={n} p={p}: expected {expected:?}, scan said {}",
                        report.verdict
                    ));
                }
                evaluated += 1;
            }
        }
    }
    conclude(
        4,
        "membership-scan-consistency",
        mismatches.is_empty(),
        &format!(
            "{evaluated} grid points evaluated, {skipped} skipped (boundary margin < 0.25), \
             {} mismatches{}",
            mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!(": {mismatches:?}") },
        ),
    );
}

/// 5. Monte Carlo doubling ratios at the singularity reproduce the exact
///    scaling factor `2^(n+beta)` within max(3 sigma, 0.5%).
#[test]
fn c05_doubling_exactness() {
    let mut failures = Vec::new();
    let mut worst_rel = 0.0f64;
    let mut seed = 0u64;
    for beta in [-1.0, -0.5, 1.0] {
        for n in [2usize, 3] {
            let density = Density::radial_power(origin(n), beta).unwrap();
            let ball = Ball::new(origin(n), 1.0).unwrap();
            let mut opts = MassOptions::new(1_000_000, 60_000 + seed);
            opts.force_monte_carlo = true;
            let report = ap::doubling_ratio(&density, &ball, &opts, None).unwrap();
            let exact = 2f64.powf(n as f64 + beta);
            let err = (report.ratio - exact).abs();
            let allowed = (3.0 * report.ratio_std_error).max(5e-3 * exact);
            if err > allowed {
                failures.push(format!("beta={beta} n={n}: ratio={} vs {exact}", report.ratio));
            }
            worst_rel = worst_rel.max(err / exact);
            seed += 1;
        }
    }
    conclude(
        5,
        "doubling-exactness",
        failures.is_empty(),
        &format!(
            "6 (beta, n) cases vs 2^(n+beta), worst relative error {worst_rel:.3e} \
             vs 5e-3 cap{}",
            if failures.is_empty() { String::new() } else { format!("; failing: {failures:?}") },
        ),
    );
}

/// 6. Large-scale homogeneity at desk scale: planar inverse-square-root
///    observers at (+-1, 0), radii 8..512, 1e6 shared samples per radius.
///    The deviation |ratio - 1| trends downward, ends below 0.02, and no
///    point exceeds a fitted envelope (when the curve has signal to fit).
#[test]
fn c06_large_scale_homogeneity() {
    let start = Instant::now();
    let density = Density::radial_power(origin(2), -0.5).unwrap();
    let radii: Vec<f64> = (0..=6).map(|j| 8.0 * 2f64.powi(j)).collect();
    let options = RatioCurveOptions::new(1_000_000, 0x600D);
    let mut curve =
        homogeneity::ratio_curve(&density, &pt(&[1.0, 0.0]), &pt(&[-1.0, 0.0]), &radii, &options)
            .unwrap();
    let final_dev = curve.points.last().unwrap().abs_deviation;
    let trend = curve.deviation_trend.unwrap();
    let envelope_note;
    let envelope_ok = match homogeneity::fit_envelope(&mut curve) {
        Ok(fit) => {
            envelope_note = format!(
                "envelope fitted (K={:.3e}, gamma={:.3}), all points below = {}",
                fit.coefficient, fit.gamma, fit.all_points_below
            );
            fit.all_points_below
        }
        // A noise-dominated curve leaves no envelope to falsify: for this
        // symmetric observer pair the true ratio is identically 1.
        Err(Error::EnvelopeNoiseDominated { .. }) => {
            envelope_note = "envelope noise-dominated (true ratio is 1 by symmetry)".to_string();
            true
        }
        Err(other) => panic!("envelope fit failed structurally: {other}"),
    };
    let elapsed = start.elapsed();
    let pass = trend <= 0.0
        && final_dev <= 0.02
        && envelope_ok
        && curve.verdict == HomogeneityVerdict::Homogeneous
        && elapsed < Duration::from_secs(300);
    conclude(
        6,
        "large-scale-homogeneity",
        pass,
        &format!(
            "final |ratio-1| = {final_dev:.3e} <= 2e-2, deviation trend {trend:.3e} <= 0, \
             {envelope_note}, verdict {}, {:.1}s < 300s",
            curve.verdict,
            elapsed.as_secs_f64()
        ),
    );
}

/// 7. The exponential counterexample is flagged: a 1-D observer pair at
///    distance 1 has ratio exactly e at every radius (closed-form path) and
///    the verdict is NotHomogeneous.
#[test]
fn c07_exponential_counterexample() {
    let density = Density::exponential(vec![1.0], 1.0).unwrap();
    let radii = homogeneity::default_schedule(1.0);
    let curve = homogeneity::ratio_curve(
        &density,
        &pt(&[1.0]),
        &pt(&[0.0]),
        &radii,
        &RatioCurveOptions::default(),
    )
    .unwrap();
    let e = std::f64::consts::E;
    let worst = curve
        .points
        .iter()
        .map(|p| (p.ratio - e).abs())
        .fold(0.0f64, f64::max);
    let exact_path = curve.points.iter().all(|p| p.std_error == 0.0);
    let pass =
        worst <= 1e-12 && exact_path && curve.verdict == HomogeneityVerdict::NotHomogeneous;
    conclude(
        7,
        "exponential-counterexample",
        pass,
        &format!(
            "{} radii, worst |ratio - e| = {worst:.3e} <= 1e-12, closed-form path = {exact_path}, \
             verdict {}",
            curve.points.len(),
            curve.verdict
        ),
    );
}

/// 8. The line-mass sandwich holds on 1000 random rays: the quadrature value
///    lies inside its closed-form bracket with relative slack 1e-6.
#[test]
fn c08_line_mass_sandwich() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5A11D);
    let alphas = [0.25, 0.5, 0.75];
    let quad = QuadTolerance::default();
    let mut violations = 0u32;
    let mut checked = 0u32;
    while checked < 1000 {
        let dim = rng.gen_range(1..=3usize);
        let base = pt(&random_coords(&mut rng, dim, 3.0));
        let distance = base.distance(&origin(dim)).unwrap();
        if distance < 1e-6 {
            continue;
        }
        let direction = random_coords(&mut rng, dim, 1.0);
        if direction.iter().map(|c| c * c).sum::<f64>() < 1e-6 {
            continue;
        }
        let alpha = alphas[rng.gen_range(0..alphas.len())];
        let radius = (rng.gen_range((distance * 1.000_001).ln()..1000f64.ln())).exp();
        let density = Density::radial_power(origin(dim), -alpha).unwrap();
        let ray = Ray::new(base, direction).unwrap();
        let result = isotropy::observed_line_mass(&density, &ray, radius, &quad).unwrap();
        if result.within_bounds != Some(true) {
            violations += 1;
        }
        checked += 1;
    }
    conclude(
        8,
        "line-mass-sandwich",
        violations == 0,
        &format!("1000 random (x, v, alpha, R) draws, {violations} bracket violations"),
    );
}

/// 9. Directional averaging at desk scale: two observers within distance 3
///    of the singularity see line-mass ratios within 5% of 1 at R = 1e4,
///    inside the closed-form bracket, with bracket widths shrinking over
///    R = 1e2, 1e3, 1e4.
#[test]
fn c09_line_mass_isotropy() {
    let density = Density::radial_power(origin(2), -0.5).unwrap();
    let first = Ray::new(pt(&[1.0, 0.0]), vec![0.0, 1.0]).unwrap();
    let second = Ray::new(pt(&[-2.0, 0.0]), vec![0.6, 0.8]).unwrap();
    let radii = [1e2, 1e3, 1e4];
    let report =
        isotropy::isotropy_ratio_curve(&density, &first, &second, &radii, &IsotropyOptions::default())
            .unwrap();
    let last = report.points.last().unwrap();
    let final_dev = (last.ratio - 1.0).abs();
    let widths: Vec<f64> = report
        .points
        .iter()
        .map(|p| {
            let (lo, hi) = p.bracket.unwrap();
            hi - lo
        })
        .collect();
    let shrinking = widths.windows(2).all(|w| w[1] < w[0]);
    let pass = final_dev <= 0.05
        && last.within_bracket == Some(true)
        && shrinking
        && report.verdict == IsotropyVerdict::Isotropic;
    let width_list =
        widths.iter().map(|w| format!("{w:.3e}")).collect::<Vec<_>>().join(", ");
    conclude(
        9,
        "line-mass-isotropy",
        pass,
        &format!(
            "final |ratio-1| = {final_dev:.3e} <= 5e-2, inside bracket = {:?}, \
             bracket widths [{width_list}] shrinking = {shrinking}, verdict {}",
            last.within_bracket, report.verdict
        ),
    );
}

/// 10. CLI determinism: the same config run with `--workers 1` and
///     `--workers 8` produces byte-identical report and curve artifacts.
#[test]
fn c10_cli_determinism() {
    let config = r#"{
        "seed": 20260825,
        "density": { "kind": "radial-power", "center": [0.0, 0.0], "beta": -0.5 },
        "experiment": {
            "kind": "homogeneity",
            "first": [1.0, 0.0],
            "second": [-1.0, 0.0],
            "radii": [8.0, 16.0, 32.0, 64.0, 128.0]
        },
        "samples": 200000
    }"#;
    let work = tempfile::tempdir().unwrap();
    let config_path = work.path().join("config.json");
    std::fs::write(&config_path, config).unwrap();
    let run = |workers: &str, out: &std::path::Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_weightlab"))
            .arg("run")
            .arg(&config_path)
            .args(["--workers", workers])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success(), "run with --workers {workers} exited with {status}");
    };
    let out1 = work.path().join("single");
    let out8 = work.path().join("pool");
    run("1", &out1);
    run("8", &out8);
    let mut identical = true;
    let mut sizes = Vec::new();
    for name in ["report.json", "curve.csv"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out8.join(name)).unwrap();
        identical &= a == b;
        sizes.push(format!("{name}: {} bytes", a.len()));
    }
    conclude(
        10,
        "cli-determinism",
        identical,
        &format!("--workers 1 vs --workers 8, artifacts byte-identical = {identical} ({})",
            sizes.join(", ")),
    );
}
