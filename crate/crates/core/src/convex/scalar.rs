//! One-dimensional root and maximum searches.

use crate::error::{Result, SolveError};

/// Smallest `z` in `[lo, hi]` with `z >= f(z)`, to within `tol`.
///
/// Requires `g(z) = z - f(z)` concave with `g(hi) >= 0`, so that `{g >= 0}` is
/// an interval whose left end is found by bisection. The returned point
/// always satisfies `z >= f(z)`.
pub fn min_feasible_scalar(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let g = |z: f64| z - f(z);
    if g(lo) >= 0.0 {
        return Ok(lo);
    }
    if !(g(hi) >= 0.0) {
        return Err(SolveError::Infeasible(format!("no z in [{lo:.6e}, {hi:.6e}] with z >= f(z)")));
    }
    let (mut a, mut b) = (lo, hi);
    // Stop on the tolerance or when the bracket stops shrinking in floating point.
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) >= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(b)
}

/// Golden-section search for the maximizer of a concave (or unimodal) `g` on
/// `[lo, hi]`. Returns `(argmax, max)`.
pub fn maximize_unimodal(g: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while b - a > tol {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
        if c >= d {
            break;
        }
    }
    let mut best = (c, gc);
    for z in [a, b, d] {
        let v = g(z);
        if v > best.1 {
            best = (z, v);
        }
    }
    best
}

/// Smallest `z >= 0` with `z >= f(z)` for `g(z) = z - f(z)` concave on
/// `[0, inf)`, searching outward from `scale` (a typical magnitude of `z`)
/// until `g` turns nonnegative or starts to decrease.
pub fn min_feasible_from_zero(f: impl Fn(f64) -> f64, scale: f64, rel_tol: f64) -> Result<f64> {
    let g = |z: f64| z - f(z);
    let mut g_lo = g(0.0);
    if g_lo >= 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = if scale > 0.0 { scale } else { 1.0 };
    for _ in 0..1100 {
        let v = g(hi);
        if v >= 0.0 {
            return min_feasible_scalar(&f, lo, hi, rel_tol * hi);
        }
        if v <= g_lo {
            // Past the peak of a concave g, so its maximum lies in [0, hi].
            let (zm, gm) = maximize_unimodal(g, 0.0, hi, rel_tol * hi);
            if gm >= 0.0 {
                return min_feasible_scalar(&f, 0.0, zm, rel_tol * zm);
            }
            return Err(SolveError::Infeasible(format!("max of z - f(z) is {gm:.3e} < 0")));
        }
        lo = hi;
        g_lo = v;
        hi *= 2.0;
    }
    Err(SolveError::Infeasible("no feasible z found while expanding".into()))
}
