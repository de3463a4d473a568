//! Adaptive one-dimensional quadrature on a 15-point Gauss-Kronrod rule.
//!
//! Panels are refined by bisection, worst estimated error first, until the
//! summed error bound meets `max(abs_tol, rel_tol * |integral|)` or the panel
//! budget is exhausted. The node set is interior-only, so integrands prepared
//! by the singularity-removing substitutions are never evaluated at panel
//! endpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Kronrod abscissae for the 15-point rule (positive half, plus center).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_7,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Weights of the embedded 7-point Gauss rule (abscissae `XGK[1,3,5,7]`).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadOutcome {
    pub value: f64,
    /// Summed per-panel error bound actually achieved.
    pub err_bound: f64,
    /// Number of integrand evaluations.
    pub n_evals: u64,
    /// Number of panels in the final partition.
    pub n_panels: usize,
}

/// Tolerances and budget for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadTolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        QuadTolerance {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_panels: 100_000,
        }
    }
}

struct PanelEstimate {
    value: f64,
    error: f64,
}

/// One 15-point Gauss-Kronrod evaluation over `[a, b]` with the QUADPACK
/// error rescaling.
fn kronrod15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> PanelEstimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = fc.abs() * WGK[7];
    let mut fv1 = [0.0f64; 7];
    let mut fv2 = [0.0f64; 7];
    for (j, wg) in WG.iter().enumerate().take(3) {
        let idx = 2 * j + 1;
        let absc = half * XGK[idx];
        let f1 = f(center - absc);
        let f2 = f(center + absc);
        fv1[idx] = f1;
        fv2[idx] = f2;
        resg += wg * (f1 + f2);
        resk += WGK[idx] * (f1 + f2);
        resabs += WGK[idx] * (f1.abs() + f2.abs());
    }
    for j in 0..4 {
        let idx = 2 * j;
        let absc = half * XGK[idx];
        let f1 = f(center - absc);
        let f2 = f(center + absc);
        fv1[idx] = f1;
        fv2[idx] = f2;
        resk += WGK[idx] * (f1 + f2);
        resabs += WGK[idx] * (f1.abs() + f2.abs());
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for idx in 0..7 {
        resasc += WGK[idx] * ((fv1[idx] - reskh).abs() + (fv2[idx] - reskh).abs());
    }
    let value = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * 1.0f64.min((200.0 * error / resasc).powf(1.5));
    }
    let tiny = f64::MIN_POSITIVE / (50.0 * f64::EPSILON);
    if resabs > tiny {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    PanelEstimate { value, error }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptively integrates `f` over `[a, b]`.
pub fn integrate_adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: &QuadTolerance,
) -> Result<QuadOutcome> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::InvalidParameter(format!(
            "integration interval must be finite and non-degenerate: [{a}, {b}]"
        )));
    }
    let mut n_evals: u64 = 0;
    let mut eval = |x: f64| {
        n_evals += 1;
        f(x)
    };
    let first = kronrod15(&mut eval, a, b);
    if !first.value.is_finite() {
        return Err(Error::InvalidParameter(
            "integrand produced a non-finite panel estimate".into(),
        ));
    }
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: first.value, error: first.error });
    let mut n_panels = 1usize;
    // Error carried by panels too narrow to split further.
    let mut frozen_err = 0.0;

    let target = |value: f64| tol.abs_tol.max(tol.rel_tol * value.abs());
    while total_err + frozen_err > target(total) && n_panels < tol.max_panels {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        let width_floor = 4.0 * f64::EPSILON * worst.a.abs().max(worst.b.abs()).max(1.0);
        if worst.b - worst.a <= width_floor {
            total_err -= worst.error;
            frozen_err += worst.error;
            continue;
        }
        let left = kronrod15(&mut eval, worst.a, mid);
        let right = kronrod15(&mut eval, mid, worst.b);
        if !(left.value.is_finite() && right.value.is_finite()) {
            return Err(Error::InvalidParameter(
                "integrand produced a non-finite panel estimate".into(),
            ));
        }
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: left.value, error: left.error });
        heap.push(Panel { a: mid, b: worst.b, value: right.value, error: right.error });
        n_panels += 1;
    }

    let err_bound = total_err + frozen_err;
    if err_bound > target(total) {
        return Err(Error::ToleranceNotReached {
            err_bound,
            panels: n_panels,
        });
    }
    Ok(QuadOutcome { value: total, err_bound, n_evals, n_panels })
}
