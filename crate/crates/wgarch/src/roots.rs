//! Bracketed scalar root finding (Brent's method).
//!
//! Shared by disaggregation (solving for the fine ARCH coefficient), the
//! continuous-parameter kurtosis inversion, and implied-volatility search.

use libm::fabs;

/// Successful bracketed search outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrentResult {
    /// Abscissa of the located root.
    pub root: f64,
    /// Residual at `root`.
    pub f_root: f64,
    /// Iterations consumed.
    pub iterations: u32,
}

/// Failure modes of the bracketed search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootError {
    /// The endpoints do not bracket a sign change.
    NoSignChange { f_lo: f64, f_hi: f64 },
    /// Iteration budget exhausted before meeting either tolerance.
    MaxIterations { best: f64, f_best: f64 },
}

/// Finds a root of `f` in `[lo, hi]` by Brent's method.
///
/// Terminates when the bracket shrinks below `tol_x` (plus an unavoidable
/// floating-point floor of a few ulps of the iterate) or when
/// `|f| <= tol_f`. Both tolerances may be zero to request convergence to
/// machine precision within `max_iter` iterations.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol_x: f64,
    tol_f: f64,
    max_iter: u32,
) -> Result<BrentResult, RootError> {
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(BrentResult { root: a, f_root: fa, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(BrentResult { root: b, f_root: fb, iterations: 0 });
    }
    if (fa > 0.0) == (fb > 0.0) {
        return Err(RootError::NoSignChange { f_lo: fa, f_hi: fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = b - a;
    for iterations in 1..=max_iter {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fabs(fc) < fabs(fb) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * fabs(b) + 0.5 * tol_x;
        let xm = 0.5 * (c - b);
        if fabs(xm) <= tol1 || fb == 0.0 || fabs(fb) <= tol_f {
            return Ok(BrentResult { root: b, f_root: fb, iterations });
        }
        if fabs(e) >= tol1 && fabs(fa) > fabs(fb) {
            // Inverse quadratic interpolation, falling back to secant when
            // only two distinct points are available.
            let s = fb / fa;
            let mut p;
            let mut q;
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let r0 = fa / fc;
                let r1 = fb / fc;
                p = s * (2.0 * xm * r0 * (r0 - r1) - (b - a) * (r1 - 1.0));
                q = (r0 - 1.0) * (r1 - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = fabs(p);
            let min1 = 3.0 * xm * q - fabs(tol1 * q);
            let min2 = fabs(e * q);
            if 2.0 * p < (if min1 < min2 { min1 } else { min2 }) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if fabs(d) > tol1 {
            b += d;
        } else {
            b += if xm >= 0.0 { tol1 } else { -tol1 };
        }
        fb = f(b);
    }
    Err(RootError::MaxIterations { best: b, f_best: fb })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        // x^3 - 2x - 5, the classical test root.
        let r = brent(|x| x * x * x - 2.0 * x - 5.0, 2.0, 3.0, 0.0, 0.0, 100).unwrap();
        assert!((r.root - 2.094_551_481_542_326_5).abs() < 1e-14);
    }

    #[test]
    fn transcendental_root() {
        let r = brent(|x| libm::cos(x) - x, 0.0, 1.0, 0.0, 0.0, 100).unwrap();
        assert!((r.root - 0.739_085_133_215_160_6).abs() < 1e-14);
    }

    #[test]
    fn exact_endpoint_root() {
        let r = brent(|x| x - 1.0, 1.0, 2.0, 0.0, 0.0, 100).unwrap();
        assert_eq!(r.root, 1.0);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn no_sign_change_is_an_error() {
        match brent(|x| x * x + 1.0, -1.0, 1.0, 0.0, 0.0, 100) {
            Err(RootError::NoSignChange { .. }) => {}
            other => panic!("expected NoSignChange, got {other:?}"),
        }
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        match brent(|x| libm::cos(x) - x, 0.0, 1.0, 0.0, 0.0, 2) {
            Err(RootError::MaxIterations { best, .. }) => assert!(best > 0.0 && best < 1.0),
            other => panic!("expected MaxIterations, got {other:?}"),
        }
    }

    #[test]
    fn residual_tolerance_short_circuits() {
        let r = brent(|x| x - 0.25, 0.0, 1.0, 0.0, 0.3, 100).unwrap();
        assert!(r.f_root.abs() <= 0.3);
    }
}
