//! Linear diffusions, their fundamental solutions, exit transforms and the
//! transformed reward.

mod exit;
mod generic;
mod pair;
mod reward;
mod transform;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub use exit::{two_sided_exit, ExitTransforms};
pub(crate) use exit::exit_weights;
pub use pair::FundamentalPair;
pub use reward::{FnReward, LinearReward, Reward, TabulatedReward};
pub use transform::{AssumptionReport, RewardTransform, ShapeMethod};

/// Boundary classification of an interval endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Natural,
    Absorbing,
    Reflecting,
}

/// Parameters of the exponential Ornstein–Uhlenbeck price
/// `dX = X (lambda (theta - ln X) + sigma^2/2) dt + sigma X dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpOuParams {
    pub lambda: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl ExpOuParams {
    /// Stationary standard deviation of the log-price.
    pub fn stationary_sd(&self) -> f64 {
        self.sigma / (2.0 * self.lambda).sqrt()
    }
}

/// Change of variable `xi(x)` mapping the open interval onto the real line;
/// grids and the numeric backend work uniformly in `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coordinate {
    /// `(-inf, inf)`, `xi = x`.
    Identity,
    /// `(a, inf)`, `xi = ln(x - a)`.
    LogLower(f64),
    /// `(-inf, b)`, `xi = -ln(b - x)`.
    LogUpper(f64),
    /// `(a, b)`, `xi = ln((x - a)/(b - x))`.
    Logit(f64, f64),
}

impl Coordinate {
    pub fn for_interval(l: f64, r: f64) -> Self {
        match (l.is_finite(), r.is_finite()) {
            (false, false) => Coordinate::Identity,
            (true, false) => Coordinate::LogLower(l),
            (false, true) => Coordinate::LogUpper(r),
            (true, true) => Coordinate::Logit(l, r),
        }
    }

    pub fn to_xi(&self, x: f64) -> f64 {
        match *self {
            Coordinate::Identity => x,
            Coordinate::LogLower(a) => (x - a).ln(),
            Coordinate::LogUpper(b) => -(b - x).ln(),
            Coordinate::Logit(a, b) => ((x - a) / (b - x)).ln(),
        }
    }

    pub fn to_x(&self, xi: f64) -> f64 {
        match *self {
            Coordinate::Identity => xi,
            Coordinate::LogLower(a) => a + xi.exp(),
            Coordinate::LogUpper(b) => b - (-xi).exp(),
            Coordinate::Logit(a, b) => {
                let e = (-xi.abs()).exp();
                if xi >= 0.0 {
                    (a * e + b) / (1.0 + e)
                } else {
                    (a + b * e) / (1.0 + e)
                }
            }
        }
    }

    /// `dx/dxi` at `x`.
    pub fn jacobian(&self, x: f64) -> f64 {
        match *self {
            Coordinate::Identity => 1.0,
            Coordinate::LogLower(a) => x - a,
            Coordinate::LogUpper(b) => b - x,
            Coordinate::Logit(a, b) => (x - a) * (b - x) / (b - a),
        }
    }

    /// `d^2x/dxi^2` at `x`.
    pub fn jacobian_deriv(&self, x: f64) -> f64 {
        match *self {
            Coordinate::Identity => 0.0,
            Coordinate::LogLower(a) => x - a,
            Coordinate::LogUpper(b) => -(b - x),
            Coordinate::Logit(a, b) => self.jacobian(x) * (a + b - 2.0 * x) / (b - a),
        }
    }

    /// `n` points uniform in `xi` between `a` and `b`.
    pub fn grid(&self, a: f64, b: f64, n: usize) -> Vec<f64> {
        let (xa, xb) = (self.to_xi(a), self.to_xi(b));
        let mut g: Vec<f64> = (0..n)
            .map(|i| self.to_x(xa + (xb - xa) * i as f64 / (n - 1) as f64))
            .collect();
        g[0] = a;
        g[n - 1] = b;
        g
    }
}

/// Backend used to produce the fundamental solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Parabolic-cylinder closed form.
    ExpOu(ExpOuParams),
    /// Riccati shooting from truncated boundaries.
    Numeric,
}

type CoefFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A one-dimensional diffusion on `(l, r)` with generator
/// `sigma(x)^2/2 d^2/dx^2 + mu(x) d/dx`.
#[derive(Clone)]
pub struct DiffusionModel {
    lower: f64,
    upper: f64,
    drift: CoefFn,
    volatility: CoefFn,
    backend: Backend,
    window: (f64, f64),
}

impl fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionModel")
            .field("interval", &(self.lower, self.upper))
            .field("backend", &self.backend)
            .field("window", &self.window)
            .finish()
    }
}

/// Half-width of the default exp-OU evaluation window in stationary standard
/// deviations of the log-price.
pub const EXP_OU_WINDOW_SDS: f64 = 13.0;

impl DiffusionModel {
    /// Exponential OU model on `(0, inf)` with the closed-form backend.
    pub fn exp_ou(lambda: f64, theta: f64, sigma: f64) -> Result<Self> {
        if !(lambda > 0.0 && sigma > 0.0 && theta.is_finite() && lambda.is_finite() && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "exp-OU needs lambda > 0, sigma > 0, finite theta (got {lambda}, {theta}, {sigma})"
            )));
        }
        let p = ExpOuParams { lambda, theta, sigma };
        let half = EXP_OU_WINDOW_SDS * p.stationary_sd();
        Ok(Self {
            lower: 0.0,
            upper: f64::INFINITY,
            drift: Arc::new(move |x: f64| x * (lambda * (theta - x.ln()) + 0.5 * sigma * sigma)),
            volatility: Arc::new(move |x: f64| sigma * x),
            backend: Backend::ExpOu(p),
            window: ((theta - half).exp(), (theta + half).exp()),
        })
    }

    /// A model with user-supplied coefficients and the numeric backend.
    /// `window` is the price range on which the fundamental solutions are
    /// tabulated and on which all grids live.
    pub fn generic<M, S>(
        interval: (f64, f64),
        boundaries: (Boundary, Boundary),
        drift: M,
        volatility: S,
        window: (f64, f64),
    ) -> Result<Self>
    where
        M: Fn(f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let (l, r) = interval;
        if !(l < r) {
            return Err(Error::Domain(format!("empty interval ({l}, {r})")));
        }
        if boundaries != (Boundary::Natural, Boundary::Natural) {
            return Err(Error::UnsupportedModel(format!(
                "only natural boundaries are supported (got {:?})",
                boundaries
            )));
        }
        if !(window.0 > l && window.1 < r && window.0 < window.1) {
            return Err(Error::Domain(format!(
                "window {:?} must lie strictly inside ({l}, {r})",
                window
            )));
        }
        let model = Self {
            lower: l,
            upper: r,
            drift: Arc::new(drift),
            volatility: Arc::new(volatility),
            backend: Backend::Numeric,
            window,
        };
        model.check_volatility()?;
        Ok(model)
    }

    /// Same coefficients, numeric backend. Used to cross-check the closed form.
    pub fn with_numeric_backend(&self) -> Self {
        let mut m = self.clone();
        m.backend = Backend::Numeric;
        m
    }

    /// Replaces the evaluation window.
    pub fn with_window(&self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo > self.lower && hi < self.upper && lo < hi) {
            return Err(Error::Domain(format!("window ({lo}, {hi}) outside the interval")));
        }
        let mut m = self.clone();
        m.window = (lo, hi);
        Ok(m)
    }

    fn check_volatility(&self) -> Result<()> {
        for x in self.coordinate().grid(self.window.0, self.window.1, 257) {
            let s = (self.volatility)(x);
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Domain(format!("volatility {s} is not positive at x = {x}")));
            }
            if !(self.drift)(x).is_finite() {
                return Err(Error::Domain(format!("drift is not finite at x = {x}")));
            }
        }
        Ok(())
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn exp_ou_params(&self) -> Option<ExpOuParams> {
        match self.backend {
            Backend::ExpOu(p) => Some(p),
            Backend::Numeric => None,
        }
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn volatility(&self, x: f64) -> f64 {
        (self.volatility)(x)
    }

    pub fn coordinate(&self) -> Coordinate {
        Coordinate::for_interval(self.lower, self.upper)
    }

    /// `(L - q) u` at `x` given `u, u', u''`.
    pub fn generator_minus_rate(&self, q: f64, x: f64, u: f64, du: f64, d2u: f64) -> f64 {
        let s = self.volatility(x);
        0.5 * s * s * d2u + self.drift(x) * du - q * u
    }

    /// Default anchor: the long-run level `e^theta` for exp-OU, the geometric
    /// (or arithmetic) centre of the window otherwise.
    pub fn default_anchor(&self) -> f64 {
        match self.backend {
            Backend::ExpOu(p) => p.theta.exp(),
            Backend::Numeric => {
                let c = self.coordinate();
                c.to_x(0.5 * (c.to_xi(self.window.0) + c.to_xi(self.window.1)))
            }
        }
    }
}
