//! Generic numerical building blocks: roots, quadrature, ODEs, hulls, grids.

pub mod hull;
pub mod ode;
pub mod quad;
pub mod roots;

/// `n` points log-spaced between `a` and `b` (both positive), endpoints included.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `n` points evenly spaced between `a` and `b`, endpoints included.
pub fn lin_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
