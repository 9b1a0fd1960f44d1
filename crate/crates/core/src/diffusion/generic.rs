//! Fundamental solutions for arbitrary coefficients by Riccati shooting.
//!
//! With `u = e^L` and `w = u'/u`, `(L - q) u = 0` becomes
//! `w' = 2 (q - mu w) / sigma^2 - w^2`. Integrated rightwards, every
//! solution is attracted to the log-derivative of the increasing solution;
//! leftwards, to that of the decreasing one. Both runs start from the
//! constant-coefficient root at a truncation point outside the window.

use super::pair::Kernel;
use super::{Coordinate, DiffusionModel};
use crate::error::{Error, Result};
use crate::numeric::ode::{integrate, OdeOptions};

/// Table of `(xi, L, dL/dxi, d2L/dxi2)` in increasing `xi`.
struct Branch {
    xi: Vec<f64>,
    l: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Branch {
    /// Quintic Hermite interpolation; returns `(L, dL/dxi)`.
    fn eval(&self, xi: f64) -> (f64, f64) {
        let n = self.xi.len();
        let i = self.xi.partition_point(|&s| s <= xi).clamp(1, n - 1) - 1;
        let h = self.xi[i + 1] - self.xi[i];
        let t = (xi - self.xi[i]) / h;
        let (y0, y1) = (self.l[i], self.l[i + 1]);
        let (p0, p1) = (self.d1[i] * h, self.d1[i + 1] * h);
        let (a0, a1) = (self.d2[i] * h * h, self.d2[i + 1] * h * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h21 = 0.5 * (t3 - 2.0 * t4 + t5);
        let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let d00 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
        let d10 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
        let d20 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
        let d21 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
        let d11 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
        let d01 = -d00;
        let v = h00 * y0 + h10 * p0 + h20 * a0 + h21 * a1 + h11 * p1 + h01 * y1;
        let dv = (d00 * y0 + d10 * p0 + d20 * a0 + d21 * a1 + d11 * p1 + d01 * y1) / h;
        (v, dv)
    }
}

pub(crate) struct NumericKernel {
    coord: Coordinate,
    plus: Branch,
    minus: Branch,
    domain: (f64, f64),
}

fn start_slope(mu: f64, s2: f64, q: f64, increasing: bool) -> f64 {
    // roots of s2/2 w^2 + mu w - q = 0, written to avoid cancellation
    let disc = (mu * mu + 2.0 * s2 * q).sqrt();
    if increasing {
        if mu <= 0.0 {
            (disc - mu) / s2
        } else {
            2.0 * q / (mu + disc)
        }
    } else if mu >= 0.0 {
        -(disc + mu) / s2
    } else {
        -2.0 * q / (disc - mu)
    }
}

fn shoot(model: &DiffusionModel, q: f64, from: f64, to: f64, increasing: bool) -> Result<Branch> {
    let c = model.coordinate();
    let x0 = c.to_x(from);
    let s0 = model.volatility(x0);
    let w0 = start_slope(model.drift(x0), s0 * s0, q, increasing);
    let rhs = |xi: f64, y: &[f64; 2]| -> [f64; 2] {
        let x = c.to_x(xi);
        let j = c.jacobian(x);
        let s = model.volatility(x);
        let w = y[0];
        [(2.0 * (q - model.drift(x) * w) / (s * s) - w * w) * j, w * j]
    };
    let opts = OdeOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-13,
        initial_step: 1e-4 * (to - from).abs(),
        max_steps: 500_000,
        ..OdeOptions::default()
    };
    let traj = integrate(rhs, from, [w0, 0.0], to, opts)?;
    let mut rows: Vec<(f64, f64, f64, f64)> = traj
        .t
        .iter()
        .zip(traj.y.iter().zip(traj.dy.iter()))
        .map(|(&xi, (y, dy))| {
            let x = c.to_x(xi);
            let d2 = dy[0] * c.jacobian(x) + y[0] * c.jacobian_deriv(x);
            (xi, y[1], dy[1], d2)
        })
        .collect();
    if rows.iter().any(|r| !(r.1.is_finite() && r.2.is_finite() && r.3.is_finite())) {
        return Err(Error::Numeric("Riccati shooting produced non-finite values".into()));
    }
    if from > to {
        rows.reverse();
    }
    Ok(Branch {
        xi: rows.iter().map(|r| r.0).collect(),
        l: rows.iter().map(|r| r.1).collect(),
        d1: rows.iter().map(|r| r.2).collect(),
        d2: rows.iter().map(|r| r.3).collect(),
    })
}

impl NumericKernel {
    /// Shoots both branches, doubling the truncation margin until `ln psi`
    /// at the probe points moves by less than `1e-8`.
    pub(crate) fn build(model: &DiffusionModel, q: f64) -> Result<Self> {
        let c = model.coordinate();
        let (wl, wr) = model.window();
        let (a, b) = (c.to_xi(wl), c.to_xi(wr));
        let probes: Vec<f64> = (0..9).map(|i| a + (b - a) * i as f64 / 8.0).collect();
        let mut margin = 0.5 * (b - a);
        let mut prev: Option<Vec<f64>> = None;
        for _ in 0..8 {
            let kernel = Self::with_margin(model, q, a, b, margin)?;
            let lp: Vec<f64> = probes
                .iter()
                .map(|&xi| {
                    let e = kernel.eval(c.to_x(xi));
                    e[0] - e[2]
                })
                .collect();
            let anchor = lp[4];
            let lp: Vec<f64> = lp.iter().map(|v| v - anchor).collect();
            if let Some(p) = &prev {
                let moved = p.iter().zip(&lp).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                if moved < 1e-8 {
                    return Ok(kernel);
                }
            }
            prev = Some(lp);
            margin *= 2.0;
        }
        Err(Error::Numeric(
            "fundamental solutions did not settle as the truncation points moved outwards".into(),
        ))
    }

    fn with_margin(model: &DiffusionModel, q: f64, a: f64, b: f64, margin: f64) -> Result<Self> {
        let c = model.coordinate();
        let (lo, hi) = (a - margin, b + margin);
        let plus = shoot(model, q, lo, hi, true)?;
        let minus = shoot(model, q, hi, lo, false)?;
        Ok(Self {
            coord: c,
            plus,
            minus,
            domain: (c.to_x(a - 0.5 * margin), c.to_x(b + 0.5 * margin)),
        })
    }
}

impl Kernel for NumericKernel {
    fn eval(&self, x: f64) -> [f64; 4] {
        if !(x > self.domain.0 && x < self.domain.1) && x != self.domain.0 && x != self.domain.1 {
            return [f64::NAN; 4];
        }
        let xi = self.coord.to_xi(x);
        let j = self.coord.jacobian(x);
        let (lp, dp) = self.plus.eval(xi);
        let (lm, dm) = self.minus.eval(xi);
        [lp, dp / j, lm, dm / j]
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Boundary, FundamentalPair};
    use super::*;

    #[test]
    fn matches_closed_form_on_exp_ou() {
        let m = DiffusionModel::exp_ou(0.6, 1.0, 0.2).unwrap();
        let exact = FundamentalPair::new(&m, 0.05).unwrap();
        let num = FundamentalPair::with_anchor(&m.with_numeric_backend(), 0.05, exact.anchor()).unwrap();
        let (lo, hi) = m.window();
        for x in m.coordinate().grid(lo, hi, 101) {
            let (a, b) = (exact.log_eval(x), num.log_eval(x));
            assert!((a[0] - b[0]).abs() < 1e-7, "phi+ at {x}: {} vs {}", a[0], b[0]);
            assert!((a[2] - b[2]).abs() < 1e-7, "phi- at {x}: {} vs {}", a[2], b[2]);
        }
        for &x in &[1.0, 2.0, 2.8845, 5.0] {
            assert!((exact.psi(x) / num.psi(x) - 1.0).abs() < 1e-8);
            assert!((exact.dlog_psi(x) / num.dlog_psi(x) - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn brownian_motion_with_drift() {
        // dX = m dt + s dW: phi+- = exp(w+- x) with s^2/2 w^2 + m w - q = 0
        let (mu, s, q) = (0.3, 0.7, 0.1);
        let m = DiffusionModel::generic(
            (f64::NEG_INFINITY, f64::INFINITY),
            (Boundary::Natural, Boundary::Natural),
            move |_| mu,
            move |_| s,
            (-3.0, 3.0),
        )
        .unwrap();
        let p = FundamentalPair::with_anchor(&m, q, 0.0).unwrap();
        let wp = start_slope(mu, s * s, q, true);
        let wm = start_slope(mu, s * s, q, false);
        for &x in &[-2.5, -1.0, 0.5, 2.9] {
            assert!((p.log_phi_plus(x) - wp * x).abs() < 1e-9);
            assert!((p.log_phi_minus(x) - wm * x).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_of_generator_is_small() {
        let m = DiffusionModel::generic(
            (0.0, f64::INFINITY),
            (Boundary::Natural, Boundary::Natural),
            |x: f64| 0.8 * (1.5 - x) * x,
            |x: f64| 0.3 * x,
            (0.3, 5.0),
        )
        .unwrap();
        let p = FundamentalPair::new(&m, 0.04).unwrap();
        for x in m.coordinate().grid(0.4, 4.5, 20) {
            for r in p.relative_residuals(x) {
                assert!(r.abs() <= 1e-6, "x={x} r={r}");
            }
        }
    }
}
