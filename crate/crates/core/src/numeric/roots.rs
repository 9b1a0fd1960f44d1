//! Scalar root finding and one-dimensional maximization.

use crate::error::{Error, Result};

/// Bisection on a bracket `[a, b]` where `f(a)` and `f(b)` have opposite signs
/// (a zero at either end is accepted). Stops when the bracket is narrower than
/// `tol * (1 + |midpoint|)`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoBracket { a, b, fa, fb });
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol * (1.0 + m.abs()) || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Brent's method (inverse quadratic interpolation with bisection fallback).
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoBracket { a, b, fa, fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol * (1.0 + b.abs());
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
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
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Ok(b)
}

/// Scans `grid` for the first adjacent pair where `f` changes sign and
/// refines the root with Brent's method. Returns `None` when no sign change
/// is found.
pub fn first_sign_change<F: FnMut(f64) -> f64>(
    mut f: F,
    grid: &[f64],
    tol: f64,
) -> Result<Option<f64>> {
    let mut prev: Option<(f64, f64)> = None;
    for &x in grid {
        let fx = f(x);
        if let Some((xp, fp)) = prev {
            if fp == 0.0 {
                return Ok(Some(xp));
            }
            if fx == 0.0 || fx.signum() != fp.signum() {
                return brent(&mut f, xp, x, tol).map(Some);
            }
        }
        prev = Some((x, fx));
    }
    Ok(None)
}

/// Golden-section search for a maximum of a unimodal function on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if (b - a).abs() <= rel_tol * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Coarse scan followed by golden-section refinement around the best grid
/// point. `grid` must be increasing. Ties on the grid resolve to the first
/// (leftmost) maximizer.
pub fn scan_then_golden<F: FnMut(f64) -> f64>(mut f: F, grid: &[f64], rel_tol: f64) -> (f64, f64) {
    assert!(grid.len() >= 3, "scan grid needs at least three points");
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (x, v) = golden_max(&mut f, lo, hi, rel_tol);
    if v >= values[best] {
        (x, v)
    } else {
        (grid[best], values[best])
    }
}

/// Which end of a flat maximum to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tie {
    Leftmost,
    Rightmost,
}

/// Maximizes `f` over the span of an increasing `grid`. Grid values within
/// `1e-10` (relative) of the best value and contiguous with it form a flat
/// plateau whose `tie` end is taken. The winner is refined by Brent on
/// `df` when it changes sign across the neighbouring grid points, otherwise
/// by golden section.
pub fn argmax<F, D>(mut f: F, df: Option<D>, grid: &[f64], tie: Tie) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    assert!(grid.len() >= 3, "argmax needs at least three grid points");
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] || vals[best].is_nan() {
            best = i;
        }
    }
    let top = vals[best];
    let flat = |v: f64| v >= top - 1e-10 * top.abs().max(f64::MIN_POSITIVE);
    let mut i = best;
    match tie {
        Tie::Leftmost => {
            while i > 0 && flat(vals[i - 1]) {
                i -= 1;
            }
        }
        Tie::Rightmost => {
            while i + 1 < grid.len() && flat(vals[i + 1]) {
                i += 1;
            }
        }
    }
    if i != best {
        // plateau end: no interior refinement
        return (grid[i], vals[i]);
    }
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    if let Some(mut d) = df {
        let (dl, dh) = (d(lo), d(hi));
        if dl > 0.0 && dh < 0.0 {
            if let Ok(x) = brent(&mut d, lo, hi, 1e-15) {
                let v = f(x);
                if v >= top - 1e-12 * top.abs() {
                    return (x, v.max(top));
                }
            }
        }
    }
    let (x, v) = golden_max(&mut f, lo, hi, 1e-13);
    if v >= top {
        (x, v)
    } else {
        (grid[i], top)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn bisect_rejects_unbracketed() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 0.3).powi(2) + 1.0, -2.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sign_change_scan() {
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let r = first_sign_change(|x| (x - 1.234).sin(), &grid, 1e-14).unwrap();
        assert!((r.unwrap() - 1.234).abs() < 1e-12);
        assert!(first_sign_change(|x| x + 1.0, &grid, 1e-12).unwrap().is_none());
    }

    #[test]
    fn argmax_polishes_with_derivative() {
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let (x, _) = argmax(|x| -(x - 1.2345678901).powi(2), Some(|x: f64| -2.0 * (x - 1.2345678901)), &grid, Tie::Leftmost);
        assert!((x - 1.2345678901).abs() < 1e-13);
    }

    #[test]
    fn argmax_plateau_ends() {
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let f = |x: f64| if (1.0..=2.0).contains(&x) { 1.0 } else { 0.0 };
        let (l, _) = argmax(f, None::<fn(f64) -> f64>, &grid, Tie::Leftmost);
        let (r, _) = argmax(f, None::<fn(f64) -> f64>, &grid, Tie::Rightmost);
        assert!((l - 1.0).abs() < 1e-12 && (r - 2.0).abs() < 1e-12, "{l} {r}");
    }
}
