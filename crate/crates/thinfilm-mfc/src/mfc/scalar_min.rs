//! Guarded one-dimensional minimization on a half-open bracket (0, hi],
//! driven by the derivative with a golden-section fallback. Used by the
//! pointwise primal updates, whose reduced objectives are smooth with a
//! barrier at zero.

/// Outcome flag for a pointwise search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchOutcome {
    Interior,
    /// Minimum attained at the upper bracket end.
    UpperBound,
    /// No descent information found (flagged to the caller).
    Failed,
}

/// Minimize psi over (0, hi] given its derivative. `x0` seeds the search.
/// The derivative must tend to -infinity (or at least be negative) as
/// x -> 0+ whenever the true minimizer is interior; a trailing golden-section
/// sweep over psi handles the remaining cases.
pub fn minimize_scalar(
    dpsi: &mut dyn FnMut(f64) -> f64,
    psi: &mut dyn FnMut(f64) -> f64,
    hi: f64,
    x0: f64,
    tol: f64,
) -> (f64, SearchOutcome) {
    let lo_floor = 1e-12;
    let mut x = x0.clamp(lo_floor, hi);
    let d0 = dpsi(x);
    if !d0.is_finite() {
        return golden_fallback(psi, hi, tol);
    }
    // Bracket a sign change of the derivative by geometric walking.
    let (mut a, mut b, mut da, mut db);
    if d0 > 0.0 {
        // Walk down towards the barrier.
        b = x;
        db = d0;
        let mut step = x * 0.5;
        loop {
            let cand = (b - step).max(lo_floor);
            let d = dpsi(cand);
            if !d.is_finite() {
                return golden_fallback(psi, hi, tol);
            }
            if d <= 0.0 {
                a = cand;
                da = d;
                break;
            }
            b = cand;
            db = d;
            if cand <= lo_floor * 1.5 {
                // Derivative positive all the way down: boundary minimum at
                // the floor; treat as interior tiny value.
                return (cand, SearchOutcome::Interior);
            }
            step = (b * 0.5).max(step * 1.5);
        }
    } else {
        // Walk up towards hi.
        a = x;
        da = d0;
        let mut cand = (x * 2.0).min(hi).max(x + 1e-8);
        loop {
            let d = dpsi(cand);
            if !d.is_finite() {
                return golden_fallback(psi, hi, tol);
            }
            if d >= 0.0 {
                b = cand;
                db = d;
                break;
            }
            a = cand;
            da = d;
            if cand >= hi {
                return (hi, SearchOutcome::UpperBound);
            }
            cand = (cand * 2.0).min(hi);
        }
    }
    // Refine the root of dpsi in [a, b] by safeguarded secant/bisection.
    for _ in 0..100 {
        if (b - a).abs() <= tol * b.abs().max(1.0) {
            break;
        }
        let mut c = if (db - da).abs() > 1e-300 {
            b - db * (b - a) / (db - da)
        } else {
            0.5 * (a + b)
        };
        // Keep the iterate strictly inside the bracket.
        let margin = 0.1 * (b - a);
        if !(c > a + 0.01 * margin && c < b - 0.01 * margin) {
            c = 0.5 * (a + b);
        }
        let dc = dpsi(c);
        if !dc.is_finite() {
            return golden_fallback(psi, hi, tol);
        }
        if dc == 0.0 {
            return (c, SearchOutcome::Interior);
        }
        if dc < 0.0 {
            a = c;
            da = dc;
        } else {
            b = c;
            db = dc;
        }
    }
    let xm = 0.5 * (a + b);
    (xm, SearchOutcome::Interior)
}

fn golden_fallback(psi: &mut dyn FnMut(f64) -> f64, hi: f64, tol: f64) -> (f64, SearchOutcome) {
    // Coarse scan (log-spaced) then golden-section refinement.
    let lo = 1e-10;
    let n = 48;
    let mut best_x = hi;
    let mut best_v = f64::INFINITY;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let x = lo * (hi / lo).powf(t);
        let v = psi(x);
        if v < best_v {
            best_v = v;
            best_x = x;
        }
    }
    if !best_v.is_finite() {
        return (best_x, SearchOutcome::Failed);
    }
    let ratio = (hi / lo).powf(1.0 / n as f64);
    let mut a = (best_x / ratio).max(lo);
    let mut b = (best_x * ratio).min(hi);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = psi(c);
    let mut fd = psi(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol * b.abs().max(1.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = psi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = psi(d);
        }
    }
    let x = 0.5 * (a + b);
    let out = if (x - hi).abs() < 1e-9 * hi {
        SearchOutcome::UpperBound
    } else {
        SearchOutcome::Interior
    };
    (x, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_with_log_term() {
        // min (x-1)^2/2 + 0.02 x log x: stationarity x - 1 + 0.02(log x + 1) = 0.
        let mut dpsi = |x: f64| x - 1.0 + 0.02 * (x.ln() + 1.0);
        let mut psi = |x: f64| 0.5 * (x - 1.0) * (x - 1.0) + 0.02 * x * x.ln();
        let (x, flag) = minimize_scalar(&mut dpsi, &mut psi, 20.0, 1.0, 1e-12);
        assert_eq!(flag, SearchOutcome::Interior);
        // Independent bisection oracle.
        let mut lo = 0.5;
        let mut hi = 1.5;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - 1.0 + 0.02 * (mid.ln() + 1.0) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let want = 0.5 * (lo + hi);
        assert!((x - want).abs() < 1e-10, "{x} vs {want}");
        assert!((x - 0.9803).abs() < 1e-3);
    }

    #[test]
    fn barrier_keeps_minimizer_positive() {
        // psi = x + 1/x^3: minimum at x = 3^(1/4).
        let mut dpsi = |x: f64| 1.0 - 3.0 / x.powi(4);
        let mut psi = |x: f64| x + 1.0 / x.powi(3);
        let (x, flag) = minimize_scalar(&mut dpsi, &mut psi, 20.0, 5.0, 1e-12);
        assert_eq!(flag, SearchOutcome::Interior);
        assert!((x - 3f64.powf(0.25)).abs() < 1e-9);
    }

    #[test]
    fn boundary_minimum_is_reported() {
        let mut dpsi = |_x: f64| -1.0;
        let mut psi = |x: f64| -x;
        let (x, flag) = minimize_scalar(&mut dpsi, &mut psi, 7.0, 1.0, 1e-12);
        assert_eq!(flag, SearchOutcome::UpperBound);
        assert_eq!(x, 7.0);
    }
}
