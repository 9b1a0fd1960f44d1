use std::fmt;
use std::sync::Arc;

use super::generic::NumericKernel;
use super::{Backend, Coordinate, DiffusionModel, ExpOuParams};
use crate::error::{Error, Result};
use crate::specialfn::parabolic_cylinder_log;

/// Unnormalized log fundamental solutions:
/// `[ln phi+, (ln phi+)', ln phi-, (ln phi-)']` at `x`, derivatives in `x`.
pub(crate) trait Kernel: Send + Sync {
    fn eval(&self, x: f64) -> [f64; 4];
    /// Price range where `eval` is valid.
    fn domain(&self) -> (f64, f64);
}

struct ExpOuKernel {
    p: ExpOuParams,
    nu: f64,
    k: f64,
}

impl Kernel for ExpOuKernel {
    fn eval(&self, x: f64) -> [f64; 4] {
        if !(x > 0.0) {
            return [f64::NAN; 4];
        }
        let u = x.ln() - self.p.theta;
        let s = self.k * u;
        // phi+ carries D_nu(-s) (increasing in x), phi- carries D_nu(s)
        let (dp, dm) = match (parabolic_cylinder_log(self.nu, -s), parabolic_cylinder_log(self.nu, s)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return [f64::NAN; 4],
        };
        let quad = 0.25 * s * s;
        let slope = self.p.lambda * u / (self.p.sigma * self.p.sigma);
        [
            quad + dp.ln_abs,
            (slope - self.k * dp.log_derivative) / x,
            quad + dm.ln_abs,
            (slope + self.k * dm.log_derivative) / x,
        ]
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

/// The increasing and decreasing positive solutions of `(L - q) u = 0`,
/// normalized to equal one at the anchor, together with
/// `psi = phi+ / phi-` and its inverse.
#[derive(Clone)]
pub struct FundamentalPair {
    model: DiffusionModel,
    q: f64,
    anchor: f64,
    kernel: Arc<dyn Kernel>,
    ln_plus_anchor: f64,
    ln_minus_anchor: f64,
}

impl fmt::Debug for FundamentalPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FundamentalPair")
            .field("q", &self.q)
            .field("anchor", &self.anchor)
            .field("model", &self.model)
            .finish()
    }
}

impl FundamentalPair {
    /// Builds the pair with the model's default anchor.
    pub fn new(model: &DiffusionModel, q: f64) -> Result<Self> {
        Self::with_anchor(model, q, model.default_anchor())
    }

    pub fn with_anchor(model: &DiffusionModel, q: f64, anchor: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::Domain(format!("discount rate must be positive, got {q}")));
        }
        let (l, r) = model.interval();
        if !(anchor > l && anchor < r) {
            return Err(Error::Domain(format!("anchor {anchor} outside ({l}, {r})")));
        }
        let kernel: Arc<dyn Kernel> = match model.backend() {
            Backend::ExpOu(p) => Arc::new(ExpOuKernel {
                p,
                nu: -q / p.lambda,
                k: (2.0 * p.lambda).sqrt() / p.sigma,
            }),
            Backend::Numeric => Arc::new(NumericKernel::build(model, q)?),
        };
        let (dl, dr) = kernel.domain();
        if !(anchor > dl && anchor < dr) {
            return Err(Error::Domain(format!(
                "anchor {anchor} outside the tabulated range ({dl}, {dr})"
            )));
        }
        let at = kernel.eval(anchor);
        Ok(Self {
            model: model.clone(),
            q,
            anchor,
            kernel,
            ln_plus_anchor: at[0],
            ln_minus_anchor: at[2],
        })
    }

    /// Same solutions renormalized at a different anchor.
    pub fn reanchored(&self, anchor: f64) -> Result<Self> {
        let (dl, dr) = self.kernel.domain();
        if !(anchor > dl && anchor < dr) {
            return Err(Error::Domain(format!("anchor {anchor} outside ({dl}, {dr})")));
        }
        let at = self.kernel.eval(anchor);
        Ok(Self {
            anchor,
            ln_plus_anchor: at[0],
            ln_minus_anchor: at[2],
            ..self.clone()
        })
    }

    pub fn rate(&self) -> f64 {
        self.q
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn model(&self) -> &DiffusionModel {
        &self.model
    }

    pub fn window(&self) -> (f64, f64) {
        self.model.window()
    }

    pub fn coordinate(&self) -> Coordinate {
        self.model.coordinate()
    }

    /// Price range on which the solutions can be evaluated.
    pub fn domain(&self) -> (f64, f64) {
        self.kernel.domain()
    }

    /// `[ln phi+, (ln phi+)', ln phi-, (ln phi-)']`, normalized at the anchor.
    pub fn log_eval(&self, x: f64) -> [f64; 4] {
        let mut e = self.kernel.eval(x);
        e[0] -= self.ln_plus_anchor;
        e[2] -= self.ln_minus_anchor;
        e
    }

    pub fn log_phi_plus(&self, x: f64) -> f64 {
        self.log_eval(x)[0]
    }

    pub fn log_phi_minus(&self, x: f64) -> f64 {
        self.log_eval(x)[2]
    }

    pub fn phi_plus(&self, x: f64) -> f64 {
        self.log_phi_plus(x).exp()
    }

    pub fn phi_minus(&self, x: f64) -> f64 {
        self.log_phi_minus(x).exp()
    }

    /// `phi+'(x) / phi+(x)`.
    pub fn dlog_phi_plus(&self, x: f64) -> f64 {
        self.kernel.eval(x)[1]
    }

    /// `phi-'(x) / phi-(x)`.
    pub fn dlog_phi_minus(&self, x: f64) -> f64 {
        self.kernel.eval(x)[3]
    }

    pub fn phi_plus_deriv(&self, x: f64) -> f64 {
        let e = self.log_eval(x);
        e[0].exp() * e[1]
    }

    pub fn phi_minus_deriv(&self, x: f64) -> f64 {
        let e = self.log_eval(x);
        e[2].exp() * e[3]
    }

    pub fn log_psi(&self, x: f64) -> f64 {
        let e = self.log_eval(x);
        e[0] - e[2]
    }

    pub fn psi(&self, x: f64) -> f64 {
        self.log_psi(x).exp()
    }

    /// `psi'(x) / psi(x)`.
    pub fn dlog_psi(&self, x: f64) -> f64 {
        let e = self.kernel.eval(x);
        e[1] - e[3]
    }

    pub fn psi_deriv(&self, x: f64) -> f64 {
        let e = self.log_eval(x);
        (e[0] - e[2]).exp() * (e[1] - e[3])
    }

    /// `(L - q) phi+- / phi+-` at `x`, from the analytic log-derivatives and
    /// a central difference of them. Both entries vanish for exact solutions.
    pub fn relative_residuals(&self, x: f64) -> [f64; 2] {
        let h = 1e-5 * self.coordinate().jacobian(x);
        let (a, b, c) = (self.kernel.eval(x - h), self.kernel.eval(x), self.kernel.eval(x + h));
        let s = self.model.volatility(x);
        let mu = self.model.drift(x);
        let res = |w: f64, dw: f64| 0.5 * s * s * (dw + w * w) + mu * w - self.q;
        [
            res(b[1], (c[1] - a[1]) / (2.0 * h)),
            res(b[3], (c[3] - a[3]) / (2.0 * h)),
        ]
    }

    /// Solves `psi(x) = z` for `x`.
    pub fn psi_inverse(&self, z: f64) -> Result<f64> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Domain(format!("psi inverse needs 0 < z < inf, got {z}")));
        }
        self.log_psi_inverse(z.ln())
    }

    /// Solves `ln psi(x) = lz` for `x`: safeguarded Newton inside a bisection
    /// bracket in the model coordinate, to `1e-14` in that coordinate.
    pub fn log_psi_inverse(&self, lz: f64) -> Result<f64> {
        let c = self.coordinate();
        let (dl, dr) = self.domain();
        let (wl, wr) = self.window();
        let (mut a, mut b) = (c.to_xi(wl), c.to_xi(wr));
        let xi_min = if dl > self.model.interval().0 { c.to_xi(dl) } else { f64::NEG_INFINITY };
        let xi_max = if dr < self.model.interval().1 { c.to_xi(dr) } else { f64::INFINITY };
        let g = |xi: f64| self.log_psi(c.to_x(xi)) - lz;
        let mut ga = g(a);
        let mut gb = g(b);
        let mut width = b - a;
        let mut tries = 0;
        while ga > 0.0 {
            tries += 1;
            if tries > 60 || a <= xi_min {
                return Err(Error::Domain(format!("psi^-1: ln z = {lz} below the evaluable range")));
            }
            b = a;
            gb = ga;
            a = (a - width).max(xi_min);
            width *= 2.0;
            ga = g(a);
        }
        while gb < 0.0 {
            tries += 1;
            if tries > 60 || b >= xi_max {
                return Err(Error::Domain(format!("psi^-1: ln z = {lz} above the evaluable range")));
            }
            a = b;
            ga = gb;
            b = (b + width).min(xi_max);
            width *= 2.0;
            gb = g(b);
        }
        if !(ga.is_finite() && gb.is_finite()) {
            return Err(Error::Numeric(format!("psi^-1: non-finite bracket for ln z = {lz}")));
        }
        let mut xi = 0.5 * (a + b);
        for _ in 0..200 {
            let x = c.to_x(xi);
            let gx = self.log_psi(x) - lz;
            if gx == 0.0 {
                return Ok(x);
            }
            if gx < 0.0 {
                a = xi;
            } else {
                b = xi;
            }
            let slope = self.dlog_psi(x) * c.jacobian(x);
            let newton = xi - gx / slope;
            let next = if newton > a && newton < b && slope.is_finite() {
                newton
            } else {
                0.5 * (a + b)
            };
            if (next - xi).abs() <= 1e-14 * (1.0 + xi.abs()) || (b - a) <= 1e-14 * (1.0 + xi.abs()) {
                return Ok(c.to_x(next));
            }
            xi = next;
        }
        Ok(c.to_x(xi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_pair() -> FundamentalPair {
        let m = DiffusionModel::exp_ou(0.6, 1.0, 0.2).unwrap();
        FundamentalPair::new(&m, 0.05).unwrap()
    }

    #[test]
    fn normalized_at_anchor() {
        let p = paper_pair();
        let k = p.anchor();
        assert!((p.phi_plus(k) - 1.0).abs() < 1e-15);
        assert!((p.phi_minus(k) - 1.0).abs() < 1e-15);
        assert!((p.psi(k) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn monotone_on_grid() {
        let p = paper_pair();
        let (lo, hi) = p.window();
        let grid = p.coordinate().grid(lo, hi, 400);
        for w in grid.windows(2) {
            assert!(p.phi_plus(w[1]) > p.phi_plus(w[0]));
            assert!(p.phi_minus(w[1]) < p.phi_minus(w[0]));
            assert!(p.log_psi(w[1]) > p.log_psi(w[0]));
        }
        // psi(l+) = 0, psi(r-) = inf, seen as extreme logs at the window ends
        assert!(p.log_psi(lo) < -60.0);
        assert!(p.log_psi(hi) > 60.0);
    }

    #[test]
    fn inverse_round_trip() {
        let p = paper_pair();
        for &x in &[0.3, 1.0, 2.0, 2.8845, 7.5, 20.0] {
            let back = p.psi_inverse(p.psi(x)).unwrap();
            assert!((back - x).abs() <= 1e-9 * x, "{x} -> {back}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = paper_pair();
        for &x in &[0.5, 2.0, 4.0] {
            let h = 1e-6 * x;
            let fd = (p.phi_minus(x + h) - p.phi_minus(x - h)) / (2.0 * h);
            assert!((fd - p.phi_minus_deriv(x)).abs() <= 1e-7 * fd.abs());
            let fd = (p.psi(x + h) - p.psi(x - h)) / (2.0 * h);
            assert!((fd - p.psi_deriv(x)).abs() <= 1e-7 * fd.abs());
        }
    }

    #[test]
    fn solves_sturm_liouville() {
        let p = paper_pair();
        let (lo, hi) = p.window();
        for x in p.coordinate().grid(lo, hi, 60) {
            for r in p.relative_residuals(x) {
                assert!(r.abs() < 1e-6, "x={x} residual {r}");
            }
        }
    }

    #[test]
    fn rejects_nonpositive_rate() {
        let m = DiffusionModel::exp_ou(0.6, 1.0, 0.2).unwrap();
        assert!(FundamentalPair::new(&m, 0.0).is_err());
        assert!(FundamentalPair::new(&m, -1.0).is_err());
    }
}
