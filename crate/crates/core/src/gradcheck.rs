//! Central finite-difference gradient checking.

/// Relative error `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Central differences `(f(x+ε) − f(x−ε)) / 2ε` for every coordinate.
pub fn numeric_gradient(point: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let plus = f(&x);
        x[i] = orig - eps;
        let minus = f(&x);
        x[i] = orig;
        grad.push((plus - minus) / (2.0 * eps));
    }
    grad
}

/// Result of a gradient check: worst relative error and where it occurred.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub probed: usize,
    /// Coordinates where the analytic gradient is exactly zero and the two
    /// probes differ only by rounding; these count as exact matches.
    pub flat: usize,
}

/// Whether `plus` and `minus` are indistinguishable at working precision.
fn within_rounding(plus: f64, minus: f64) -> bool {
    (plus - minus).abs() <= 8.0 * f64::EPSILON * plus.abs().max(minus.abs())
}

/// Compares `analytic` against central differences of `f` at `point`.
///
/// Only coordinates for which `probe(i)` is true are compared, so callers
/// can exclude nondifferentiable points. `f` must be deterministic.
pub fn grad_check_masked(
    mut f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    analytic: &[f64],
    eps: f64,
    probe: impl Fn(usize) -> bool,
) -> GradCheck {
    assert_eq!(point.len(), analytic.len(), "gradient length mismatch");
    let mut x = point.to_vec();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst_index: None,
        probed: 0,
        flat: 0,
    };
    for i in 0..x.len() {
        if !probe(i) {
            continue;
        }
        let orig = x[i];
        x[i] = orig + eps;
        let plus = f(&x);
        x[i] = orig - eps;
        let minus = f(&x);
        x[i] = orig;
        report.probed += 1;
        let err = if analytic[i] == 0.0 && within_rounding(plus, minus) {
            report.flat += 1;
            0.0
        } else {
            relative_error(analytic[i], (plus - minus) / (2.0 * eps))
        };
        if report.worst_index.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = Some(i);
        }
    }
    report
}

/// Like [`grad_check_masked`] but with one Richardson step on the central
/// difference, `(4·D(ε/2) − D(ε)) / 3`. The truncation error drops to
/// `O(ε⁴)`, so a larger `ε` can be used and rounding noise shrinks; this
/// resolves gradient components far below the loss scale. `probe` must
/// screen kinks within `±ε`.
pub fn grad_check_extrapolated(
    mut f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    analytic: &[f64],
    eps: f64,
    probe: impl Fn(usize) -> bool,
) -> GradCheck {
    assert_eq!(point.len(), analytic.len(), "gradient length mismatch");
    let mut x = point.to_vec();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst_index: None,
        probed: 0,
        flat: 0,
    };
    let mut eval = |x: &mut Vec<f64>, i: usize, d: f64| {
        let orig = x[i];
        x[i] = orig + d;
        let v = f(x);
        x[i] = orig;
        v
    };
    for i in 0..x.len() {
        if !probe(i) {
            continue;
        }
        let (p1, m1) = (eval(&mut x, i, eps), eval(&mut x, i, -eps));
        let (p2, m2) = (eval(&mut x, i, eps / 2.0), eval(&mut x, i, -eps / 2.0));
        report.probed += 1;
        let err = if analytic[i] == 0.0 && within_rounding(p1, m1) && within_rounding(p2, m2) {
            report.flat += 1;
            0.0
        } else {
            let d1 = (p1 - m1) / (2.0 * eps);
            let d2 = (p2 - m2) / eps;
            relative_error(analytic[i], (4.0 * d2 - d1) / 3.0)
        };
        if report.worst_index.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = Some(i);
        }
    }
    report
}

/// Max relative error over all coordinates.
pub fn grad_check(f: impl FnMut(&[f64]) -> f64, point: &[f64], analytic: &[f64], eps: f64) -> f64 {
    grad_check_masked(f, point, analytic, eps, |_| true).max_rel_error
}
