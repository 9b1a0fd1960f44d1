use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Payoff `h(x)` received when the position is sold at price `x`.
pub trait Reward: Send + Sync {
    fn value(&self, x: f64) -> f64;

    /// Analytic `h'(x)` when available.
    fn derivative(&self, _x: f64) -> Option<f64> {
        None
    }

    /// Analytic `h''(x)` when available. Returning `Some` everywhere declares
    /// the reward twice differentiable.
    fn second_derivative(&self, _x: f64) -> Option<f64> {
        None
    }

    /// Points where `h` may fail to be differentiable.
    fn kinks(&self) -> &[f64] {
        &[]
    }

    fn describe(&self) -> String;

    /// `h'(x)`: analytic if available, otherwise a finite difference that
    /// never straddles a declared kink (right derivative at a kink).
    fn slope(&self, x: f64) -> f64 {
        if let Some(d) = self.derivative(x) {
            return d;
        }
        let h = 1e-6 * (1.0 + x.abs());
        let kinks = self.kinks();
        let left_blocked = kinks.iter().any(|&k| k < x && k >= x - h) || kinks.contains(&x);
        let right_blocked = kinks.iter().any(|&k| k > x && k <= x + h);
        match (left_blocked, right_blocked) {
            (false, false) => (self.value(x + h) - self.value(x - h)) / (2.0 * h),
            (true, false) => (-3.0 * self.value(x) + 4.0 * self.value(x + h) - self.value(x + 2.0 * h)) / (2.0 * h),
            (false, true) => (3.0 * self.value(x) - 4.0 * self.value(x - h) + self.value(x - 2.0 * h)) / (2.0 * h),
            (true, true) => (self.value(x + 0.25 * h) - self.value(x)) / (0.25 * h),
        }
    }

    fn is_smooth(&self) -> bool {
        self.kinks().is_empty() && self.second_derivative(1.0).is_some()
    }
}

/// `h(x) = x - c0`: sale at price `x` net of a fixed cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearReward {
    pub c0: f64,
}

impl LinearReward {
    pub fn new(c0: f64) -> Self {
        Self { c0 }
    }
}

impl Reward for LinearReward {
    fn value(&self, x: f64) -> f64 {
        x - self.c0
    }

    fn derivative(&self, _x: f64) -> Option<f64> {
        Some(1.0)
    }

    fn second_derivative(&self, _x: f64) -> Option<f64> {
        Some(0.0)
    }

    fn describe(&self) -> String {
        format!("h(x) = x - {}", self.c0)
    }
}

/// Natural cubic spline through tabulated `(x, h)` pairs, extended linearly
/// outside the table.
#[derive(Debug, Clone)]
pub struct TabulatedReward {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl TabulatedReward {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return Err(Error::Domain("tabulated reward needs at least three (x, h) pairs".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::Domain("tabulated reward abscissae must be finite and increasing".into()));
        }
        // tridiagonal solve for second derivatives, m[0] = m[n-1] = 0
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
            let a = h0;
            let b = 2.0 * (h0 + h1);
            let rhs = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            let den = b - a * c[i - 1];
            c[i] = h1 / den;
            d[i] = (rhs - a * d[i - 1]) / den;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(Self { xs, ys, m })
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        self.xs.partition_point(|&s| s <= x).clamp(1, n - 1) - 1
    }

    fn end_slope(&self, left: bool) -> f64 {
        let n = self.xs.len();
        if left {
            let h = self.xs[1] - self.xs[0];
            (self.ys[1] - self.ys[0]) / h - h * (2.0 * self.m[0] + self.m[1]) / 6.0
        } else {
            let h = self.xs[n - 1] - self.xs[n - 2];
            (self.ys[n - 1] - self.ys[n - 2]) / h + h * (self.m[n - 2] + 2.0 * self.m[n - 1]) / 6.0
        }
    }
}

impl Reward for TabulatedReward {
    fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.ys[0] + self.end_slope(true) * (x - self.xs[0]);
        }
        if x > self.xs[n - 1] {
            return self.ys[n - 1] + self.end_slope(false) * (x - self.xs[n - 1]);
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = 1.0 - a;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    fn derivative(&self, x: f64) -> Option<f64> {
        let n = self.xs.len();
        if x < self.xs[0] {
            return Some(self.end_slope(true));
        }
        if x > self.xs[n - 1] {
            return Some(self.end_slope(false));
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = 1.0 - a;
        Some(
            (self.ys[i + 1] - self.ys[i]) / h
                + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0,
        )
    }

    fn second_derivative(&self, x: f64) -> Option<f64> {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return Some(0.0);
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        Some(a * self.m[i] + (1.0 - a) * self.m[i + 1])
    }

    fn describe(&self) -> String {
        format!(
            "cubic spline through {} points on [{}, {}]",
            self.xs.len(),
            self.xs[0],
            self.xs[self.xs.len() - 1]
        )
    }
}

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Reward given by closures.
#[derive(Clone)]
pub struct FnReward {
    value: Scalar,
    derivative: Option<Scalar>,
    second: Option<Scalar>,
    kinks: Vec<f64>,
    name: String,
}

impl fmt::Debug for FnReward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnReward").field("name", &self.name).field("kinks", &self.kinks).finish()
    }
}

impl FnReward {
    pub fn new(name: impl Into<String>, value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            derivative: None,
            second: None,
            kinks: Vec::new(),
            name: name.into(),
        }
    }

    pub fn with_derivative(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    pub fn with_second_derivative(mut self, d2: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.second = Some(Arc::new(d2));
        self
    }

    pub fn with_kinks(mut self, mut kinks: Vec<f64>) -> Self {
        kinks.sort_by(f64::total_cmp);
        self.kinks = kinks;
        self
    }
}

impl Reward for FnReward {
    fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    fn derivative(&self, x: f64) -> Option<f64> {
        self.derivative.as_ref().map(|d| d(x))
    }

    fn second_derivative(&self, x: f64) -> Option<f64> {
        self.second.as_ref().map(|d| d(x))
    }

    fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_linear_data() {
        let xs: Vec<f64> = (0..8).map(|i| 0.5 + i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x - 0.02).collect();
        let t = TabulatedReward::new(xs, ys).unwrap();
        let lin = LinearReward::new(0.02);
        for &x in &[0.1, 0.7, 3.3, 9.0] {
            assert!((t.value(x) - lin.value(x)).abs() < 1e-12);
            assert!((t.derivative(x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_interpolates_and_is_c1() {
        let xs: Vec<f64> = (0..20).map(|i| 0.2 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let t = TabulatedReward::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((t.value(*x) - y).abs() < 1e-14);
        }
        for &k in &xs[1..19] {
            let e = 1e-9;
            assert!((t.derivative(k - e).unwrap() - t.derivative(k + e).unwrap()).abs() < 1e-7);
        }
        assert!((t.value(1.1) - 1.1f64.sin()).abs() < 1e-3);
    }

    #[test]
    fn finite_difference_slope_respects_kinks() {
        let r = FnReward::new("max(x-1,0)", |x: f64| (x - 1.0).max(0.0)).with_kinks(vec![1.0]);
        assert!((r.slope(1.0) - 1.0).abs() < 1e-8);
        assert!(r.slope(1.0 - 1e-7).abs() < 1e-8);
        assert!((r.slope(2.0) - 1.0).abs() < 1e-8);
        assert!(!r.is_smooth());
        assert!(LinearReward::new(0.0).is_smooth());
    }
}
