use super::FundamentalPair;
use crate::error::{Error, Result};

/// Discounted two-sided exit transforms from `(y, z)` started at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitTransforms {
    /// `E_x[e^{-q tau-(y)}; tau-(y) < tau+(z)]`
    pub down: f64,
    /// `E_x[e^{-q tau+(z)}; tau+(z) < tau-(y)]`
    pub up: f64,
}

/// Laplace transforms of the exit time from `(y, z)` through either side.
pub fn two_sided_exit(pair: &FundamentalPair, x: f64, y: f64, z: f64) -> Result<ExitTransforms> {
    let (l, r) = pair.model().interval();
    if !(l < y && y <= x && x <= z && z < r) {
        return Err(Error::Domain(format!("need l < y <= x <= z < r, got y={y}, x={x}, z={z}")));
    }
    if y == z {
        return Err(Error::DegenerateInterval(y));
    }
    if x == y {
        return Ok(ExitTransforms { down: 1.0, up: 0.0 });
    }
    if x == z {
        return Ok(ExitTransforms { down: 0.0, up: 1.0 });
    }
    Ok(exit_weights(pair, x, y, z))
}

/// Unchecked form for `y < x < z`, computed in logs.
pub(crate) fn exit_weights(pair: &FundamentalPair, x: f64, y: f64, z: f64) -> ExitTransforms {
    let (ex, ey, ez) = (pair.log_eval(x), pair.log_eval(y), pair.log_eval(z));
    let (lx, ly, lz) = (ex[0] - ex[2], ey[0] - ey[2], ez[0] - ez[2]);
    // (psi(z) - psi(x)) / (psi(z) - psi(y)) etc. with common factors pulled out
    let den = (ly - lz).exp_m1();
    let a = (lx - lz).exp_m1() / den;
    let b = (ly - lx).exp_m1() / den;
    ExitTransforms {
        down: (ex[2] - ey[2]).exp() * a,
        up: (ex[2] - ez[2] + lx - lz).exp() * b,
    }
}
