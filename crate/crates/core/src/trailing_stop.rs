//! Liquidation under a trailing stop: the position is sold automatically as
//! soon as the price falls to `f(m)`, where `m` is its running maximum, and
//! may be sold earlier at will.
//!
//! Everything is computed along the diagonal `x = m` and extended off it by
//! two-sided exit transforms. The diagonal value `u(m) = v_f(m, m)` obeys
//!
//! ```text
//! u'(m) = ((ln phi-)'(m) + rho(m)) u(m) - rho(m) h(f(m)) phi-(m) / phi-(f(m)),
//! rho(m) = psi'(m) / (psi(m) - psi(f(m))),
//! ```
//!
//! which is integrated downwards from the liquidation threshold.

use std::fmt;
use std::sync::Arc;

use crate::diffusion::{exit_weights, FundamentalPair, RewardTransform};
use crate::error::{Error, Result};
use crate::fixed_stop::{convexity_switches, solve_fixed_stop, FixedStopSolution, ShapeCertificate};
use crate::numeric::hull::{eval_hull, upper_hull};
use crate::numeric::ode::{integrate, OdeOptions, Trajectory};
use crate::numeric::quad;
use crate::numeric::roots::{argmax, bisect, Tie};

const SCAN_POINTS: usize = 1024;
/// Floors closer than this (relative, in `z`) to the running maximum are rejected.
const MIN_RELATIVE_GAP: f64 = 1e-12;
/// Target for the truncation error of the plain trailing-stop value, relative
/// to `max(1, |h|)` at the top of the window.
const PLAIN_TOL: f64 = 1e-10;

type Map = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FloorKind {
    /// `f(m) = (1 - alpha) m`.
    Percentage(f64),
    /// `f(m) = m - a`.
    Absolute(f64),
    Custom,
}

/// Floor map `m -> f(m)` together with its inverse.
#[derive(Clone)]
pub struct FloorSpec {
    kind: FloorKind,
    f: Map,
    inv: Map,
    name: String,
}

impl fmt::Debug for FloorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FloorSpec").field("kind", &self.kind).field("name", &self.name).finish()
    }
}

impl FloorSpec {
    pub fn percentage(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidFloor(format!("percentage drawdown must lie in (0, 1), got {alpha}")));
        }
        Ok(Self {
            kind: FloorKind::Percentage(alpha),
            f: Arc::new(move |m| (1.0 - alpha) * m),
            inv: Arc::new(move |y| y / (1.0 - alpha)),
            name: format!("f(m) = (1 - {alpha}) m"),
        })
    }

    pub fn absolute(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidFloor(format!("absolute drawdown must be positive, got {a}")));
        }
        Ok(Self {
            kind: FloorKind::Absolute(a),
            f: Arc::new(move |m| m - a),
            inv: Arc::new(move |y| y + a),
            name: format!("f(m) = m - {a}"),
        })
    }

    /// Arbitrary increasing floor with `f(m) < m`; checked when solving.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { kind: FloorKind::Custom, f: Arc::new(f), inv: Arc::new(inverse), name: name.into() }
    }

    pub fn kind(&self) -> FloorKind {
        self.kind
    }

    pub fn apply(&self, m: f64) -> f64 {
        (self.f)(m)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        (self.inv)(y)
    }

    pub fn describe(&self) -> &str {
        &self.name
    }

    /// The induced map on the `z` axis, `z -> psi(f(psi^-1(z)))`.
    pub fn z_floor(&self, pair: &FundamentalPair, z: f64) -> Result<f64> {
        Ok(pair.psi(self.apply(pair.psi_inverse(z)?)))
    }

    fn validate(&self, pair: &FundamentalPair, grid: &[f64]) -> Result<()> {
        let (l, _) = pair.model().interval();
        let (dlo, _) = pair.domain();
        let mut prev = f64::NEG_INFINITY;
        for &x in grid {
            let y = self.apply(x);
            if !(y < x) {
                return Err(Error::InvalidFloor(format!("f({x}) = {y} is not below the maximum")));
            }
            if !(y > l && y >= dlo) {
                return Err(Error::InvalidFloor(format!("f({x}) = {y} leaves the state space")));
            }
            if !(y > prev) {
                return Err(Error::InvalidFloor(format!("floor is not increasing near {x}")));
            }
            let back = self.inverse(y);
            if !((back - x).abs() <= 1e-8 * (1.0 + x.abs())) {
                return Err(Error::InvalidFloor(format!("inverse does not invert the floor at {x}: got {back}")));
            }
            let gap = -(pair.log_psi(y) - pair.log_psi(x)).exp_m1();
            if gap < MIN_RELATIVE_GAP {
                let z = pair.psi(x);
                return Err(Error::IllConditionedFloor { z, gap: z * gap });
            }
            prev = y;
        }
        Ok(())
    }
}

/// A value together with a bound on its truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error_bound: f64,
}

/// Solution of the trailing-stop liquidation problem for one floor.
#[derive(Debug, Clone)]
pub struct TrailingSolution {
    transform: RewardTransform,
    floor: FloorSpec,
    b_star: Option<f64>,
    x_min: f64,
    /// `[u, I]` on `[x_min, b_star]` against the model coordinate, where
    /// `I(m) = int_m^b* ((ln phi-)' + rho)`.
    diagonal: Trajectory<2>,
    /// Same pair for the plain trailing stop, started at `plain_top` with
    /// value zero.
    plain: Trajectory<2>,
    plain_top: f64,
    plain_top_bound: f64,
    fixed_point_gap: Option<f64>,
}

/// `(ln phi-)'(x) + rho(x)` and the source term `rho(x) h(f(x)) phi-(x) / phi-(f(x))`.
fn diagonal_coefficients(t: &RewardTransform, floor: &FloorSpec, x: f64) -> (f64, f64) {
    let pair = t.pair();
    let fx = floor.apply(x);
    let (e, ef) = (pair.log_eval(x), pair.log_eval(fx));
    let rho = (e[1] - e[3]) / -((ef[0] - ef[2]) - (e[0] - e[2])).exp_m1();
    (e[3] + rho, rho * t.h(fx) * (e[2] - ef[2]).exp())
}

fn rho(pair: &FundamentalPair, floor: &FloorSpec, x: f64) -> f64 {
    let fx = floor.apply(x);
    pair.dlog_psi(x) / -(pair.log_psi(fx) - pair.log_psi(x)).exp_m1()
}

fn integrate_diagonal(t: &RewardTransform, floor: &FloorSpec, from: f64, u0: f64, to: f64) -> Result<Trajectory<2>> {
    let c = t.pair().coordinate();
    let (a, b) = (c.to_xi(from), c.to_xi(to));
    let span = (a - b).abs();
    let rhs = |xi: f64, y: &[f64; 2]| -> [f64; 2] {
        let x = c.to_x(xi);
        let j = c.jacobian(x);
        let (k, src) = diagonal_coefficients(t, floor, x);
        [j * (k * y[0] - src), -j * k]
    };
    let opts = OdeOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-14 * u0.abs().max(t.h(from).abs()).max(1.0),
        initial_step: 1e-4 * span,
        max_steps: 1_000_000,
        max_step: span / 512.0,
    };
    integrate(rhs, a, [u0, 0.0], b, opts)
}

/// Solves the trailing-stop problem for `floor`.
pub fn solve_trailing_stop(transform: &RewardTransform, floor: &FloorSpec) -> Result<TrailingSolution> {
    let pair = transform.pair();
    let c = pair.coordinate();
    let (l, _) = pair.model().interval();
    let (wlo, whi) = pair.window();
    let (dlo, dhi) = pair.domain();
    let x_min = {
        let m = floor.inverse(dlo);
        if m.is_finite() && m >= wlo {
            c.to_x(c.to_xi(m) + 1e-9 * (c.to_xi(whi) - c.to_xi(wlo)))
        } else {
            wlo
        }
    };
    if !(x_min < whi) {
        return Err(Error::InvalidFloor(format!("floor leaves the state space everywhere below {whi}")));
    }
    floor.validate(pair, &c.grid(x_min, whi, SCAN_POINTS))?;

    // threshold: first downward crossing of H'(psi(b)) - secant(f(b), b)
    let gamma = |b: f64| transform.dh_dz_right(b) - transform.secant(floor.apply(b), b);
    let lo = transform.x0().max(x_min);
    let grid = c.grid(lo, whi, SCAN_POINTS);
    let mut b_star = None;
    if gamma(lo) <= 0.0 {
        b_star = Some(lo);
    } else {
        let mut prev = lo;
        for &x in &grid[1..] {
            if gamma(x) <= 0.0 {
                b_star = Some(bisect(gamma, prev, x, 1e-15)?);
                break;
            }
            prev = x;
        }
    }
    // cross-check: b* is the fixed point b(f(b)) = b of the fixed-stop threshold
    let fixed_point_gap = match b_star {
        Some(b) if floor.apply(b) < transform.x0() => {
            let fixed = solve_fixed_stop(transform, floor.apply(b))?;
            let gap = (fixed.threshold() - b).abs();
            if gap > 1e-6 * b.abs().max(1.0) {
                return Err(Error::Numeric(format!(
                    "trailing threshold {b} is not a fixed point of the fixed-stop threshold ({})",
                    fixed.threshold()
                )));
            }
            Some(gap)
        }
        _ => None,
    };

    let unconstrained = match solve_fixed_stop(transform, l) {
        Ok(s) => Some(s),
        Err(Error::NoFiniteThreshold(_)) => None,
        Err(e) => return Err(e),
    };
    let (plain_top, plain_top_bound, plain) = plain_table(transform, floor, x_min, b_star, unconstrained.as_ref(), dhi)?;
    let diagonal = match b_star {
        Some(b) => integrate_diagonal(transform, floor, b, transform.h(b), x_min)?,
        None => plain.clone(),
    };
    Ok(TrailingSolution {
        transform: transform.clone(),
        floor: floor.clone(),
        b_star,
        x_min,
        diagonal,
        plain,
        plain_top,
        plain_top_bound,
        fixed_point_gap,
    })
}

/// Pushes the truncation point of the plain trailing stop upwards until
/// `V(b) * mass(top, b)` is below the target, where `mass` is the discounted
/// probability of reaching `b` before the floor and `V >= g_f` on the
/// diagonal. Returns the truncation point, the bound, and the trajectory.
fn plain_table(
    t: &RewardTransform,
    floor: &FloorSpec,
    x_min: f64,
    b_star: Option<f64>,
    unconstrained: Option<&FixedStopSolution>,
    dhi: f64,
) -> Result<(f64, f64, Trajectory<2>)> {
    let pair = t.pair();
    let c = pair.coordinate();
    let (wlo, whi) = pair.window();
    let step = 0.02 * (c.to_xi(whi) - c.to_xi(wlo));
    let target = PLAIN_TOL * t.h(whi).abs().max(1.0);
    let dominating = |b: f64| match (unconstrained, b_star) {
        (Some(s), _) => s.value_unchecked(b).max(0.0),
        (None, Some(bs)) if b >= bs => t.h(b).max(0.0),
        _ => f64::INFINITY,
    };
    let density = |x: f64| diagonal_coefficients(t, floor, x).0;
    let mut b = whi;
    let mut exponent = 0.0;
    let mut bound = f64::INFINITY;
    for _ in 0..2000 {
        let next = c.to_x(c.to_xi(b) + step);
        if !(next < dhi) || !next.is_finite() {
            break;
        }
        exponent += quad::integrate(density, b, next, 1e-14, 1e-12).value;
        b = next;
        let mass = (-exponent).exp();
        bound = dominating(b) * mass;
        if mass < 0.005 && bound < target {
            let traj = integrate_diagonal(t, floor, b, 0.0, x_min)?;
            return Ok((b, bound, traj));
        }
    }
    Err(Error::AccuracyNotReached { achieved: bound, target })
}

impl TrailingSolution {
    pub fn transform(&self) -> &RewardTransform {
        &self.transform
    }

    pub fn floor(&self) -> &FloorSpec {
        &self.floor
    }

    /// Liquidation threshold `b_f*` on the diagonal; `None` when liquidating
    /// at will never pays.
    pub fn threshold(&self) -> Option<f64> {
        self.b_star
    }

    /// `psi(b_f*)`.
    pub fn z_threshold(&self) -> Option<f64> {
        self.b_star.map(|b| self.transform.pair().psi(b))
    }

    /// Lowest running maximum the tables cover.
    pub fn min_running_max(&self) -> f64 {
        self.x_min
    }

    /// `|b(f(b_f*)) - b_f*|` from the fixed-stop solver.
    pub fn fixed_point_gap(&self) -> Option<f64> {
        self.fixed_point_gap
    }

    fn xi(&self, x: f64) -> f64 {
        self.transform.pair().coordinate().to_xi(x)
    }

    fn check_max(&self, m: f64) -> Result<()> {
        if !(m >= self.x_min) {
            return Err(Error::Domain(format!("running maximum {m} below the solved range {}", self.x_min)));
        }
        Ok(())
    }

    /// `v_f(m, m)`.
    pub fn diagonal_value(&self, m: f64) -> Result<f64> {
        self.check_max(m)?;
        if let Some(b) = self.b_star {
            if m >= b {
                return Ok(self.transform.h(m));
            }
        }
        self.diagonal
            .interpolate(self.xi(m), 0)
            .ok_or_else(|| Error::Domain(format!("running maximum {m} above the solved range")))
    }

    /// `d/dm v_f(m, m)`.
    pub fn diagonal_derivative(&self, m: f64) -> Result<f64> {
        if let Some(b) = self.b_star {
            if m >= b {
                self.check_max(m)?;
                return Ok(self.transform.reward().slope(m));
            }
        }
        let u = self.diagonal_value(m)?;
        let (k, src) = diagonal_coefficients(&self.transform, &self.floor, m);
        Ok(k * u - src)
    }

    /// `H_f(z)` at `z = psi(m)`.
    pub fn h_f_at(&self, m: f64) -> Result<f64> {
        Ok(self.diagonal_value(m)? * (-self.transform.pair().log_phi_minus(m)).exp())
    }

    /// `H_f(z)`.
    pub fn h_f(&self, z: f64) -> Result<f64> {
        self.h_f_at(self.transform.pair().psi_inverse(z)?)
    }

    /// `H_f` at `psi(m)` from the excursion integral
    /// `H(z*) e^{-R(m, b*)} + int_m^b* rho(v) H(psi(f(v))) e^{-R(m, v)} dv`,
    /// `R(a, b) = int_a^b rho`, evaluated by nested quadrature.
    pub fn h_f_by_quadrature(&self, m: f64) -> Result<f64> {
        self.check_max(m)?;
        let Some(b) = self.b_star else {
            return Err(Error::Domain("no finite threshold".into()));
        };
        let t = &self.transform;
        if m >= b {
            return Ok(t.big_h_at(m));
        }
        let pair = t.pair();
        let r = |v: f64| rho(pair, &self.floor, v);
        let discount = |v: f64| (-quad::integrate(r, m, v, 1e-15, 1e-13).value).exp();
        let body = quad::integrate(|v| r(v) * t.big_h_at(self.floor.apply(v)) * discount(v), m, b, 0.0, 1e-12);
        Ok(t.big_h_at(b) * discount(b) + body.value)
    }

    /// `E_x[e^{-q tau} ; X reaches m before f(m)]`-type mass on the diagonal:
    /// `phi-(m) / phi-(b*) e^{-R(m, b*)}`.
    fn mass_to_threshold(&self, m: f64) -> f64 {
        (-self.diagonal.interpolate(self.xi(m), 1).unwrap_or(f64::NAN)).exp()
    }

    fn check_state(&self, x: f64, m: f64) -> Result<()> {
        if !(x <= m) {
            return Err(Error::Domain(format!("price {x} above the running maximum {m}")));
        }
        let floor = self.floor.apply(m);
        if x <= floor {
            return Err(Error::AlreadyStopped { floor });
        }
        Ok(())
    }

    /// `v_f(x, m)` for `f(m) < x <= m`.
    pub fn value(&self, x: f64, m: f64) -> Result<f64> {
        self.check_state(x, m)?;
        let t = &self.transform;
        match self.b_star {
            Some(b) if m >= b => solve_fixed_stop(t, self.floor.apply(m))?.value(x),
            _ => {
                let u = self.diagonal_value(m)?;
                if x == m {
                    return Ok(u);
                }
                let fm = self.floor.apply(m);
                let w = exit_weights(t.pair(), x, fm, m);
                Ok(w.down * t.h(fm) + w.up * u)
            }
        }
    }

    /// `g_f(m, m)`: value of holding until the floor is hit.
    pub fn plain_diagonal(&self, m: f64) -> Result<Estimate> {
        self.check_max(m)?;
        let xi = self.xi(m);
        let (u, i) = match (self.plain.interpolate(xi, 0), self.plain.interpolate(xi, 1)) {
            (Some(u), Some(i)) => (u, i),
            _ => {
                return Err(Error::Domain(format!(
                    "running maximum {m} above the truncation point {}",
                    self.plain_top
                )))
            }
        };
        Ok(Estimate { value: u, error_bound: self.plain_top_bound * (-i).exp() })
    }

    /// `g_f(x, m) = E[e^{-q tau_f} h(f(M_tau_f))]` for `f(m) < x <= m`.
    pub fn plain_value(&self, x: f64, m: f64) -> Result<Estimate> {
        self.check_state(x, m)?;
        let d = self.plain_diagonal(m)?;
        if x == m {
            return Ok(d);
        }
        let fm = self.floor.apply(m);
        let w = exit_weights(self.transform.pair(), x, fm, m);
        Ok(Estimate {
            value: w.down * self.transform.h(fm) + w.up * d.value,
            error_bound: w.up * d.error_bound,
        })
    }

    /// Early liquidation premium `p_f(x, m) = v_f(x, m) - g_f(x, m)`,
    /// assembled from the three cases of the threshold structure.
    pub fn premium(&self, x: f64, m: f64) -> Result<f64> {
        self.check_state(x, m)?;
        let t = &self.transform;
        let pair = t.pair();
        let Some(b) = self.b_star else {
            return Ok(0.0);
        };
        let fm = self.floor.apply(m);
        if m < b {
            // reach m before f(m), then b* before the floor, then the gain at b*
            let up = if x == m { 1.0 } else { exit_weights(pair, x, fm, m).up };
            let gain = t.h(b) - self.plain_diagonal(b)?.value;
            return Ok(up * self.mass_to_threshold(m) * gain);
        }
        if fm < t.x0() {
            let bb = solve_fixed_stop(t, fm)?.threshold();
            if x < bb {
                let up = exit_weights(pair, x, fm, bb).up;
                return Ok(up * (t.h(bb) - self.plain_value(bb, m)?.value));
            }
        }
        Ok(t.h(x) - self.plain_value(x, m)?.value)
    }
}

/// Solution of `V^(1)(x) = sup_tau E_x[e^{-q^ tau} (v_f(X, X) - h(X) - c)]`:
/// buy, then manage the position with the trailing stop.
#[derive(Debug, Clone)]
pub struct TrailingAcquisitionSolution {
    pair_hat: FundamentalPair,
    trailing: TrailingSolution,
    cost: f64,
    /// `H_{f,q^}` on the diagonal when `q^ < q`.
    discounted: Option<Trajectory<1>>,
    entry: Option<f64>,
    k_max: f64,
    certificate: ShapeCertificate,
    /// Concave majorant `(z, K, hull)` when the objective is not concave then convex.
    majorant: Option<(Vec<f64>, Vec<f64>, Vec<usize>)>,
}

pub fn solve_trailing_acquisition(sol: &TrailingSolution, q_hat: f64, cost: f64) -> Result<TrailingAcquisitionSolution> {
    let t = &sol.transform;
    let pair = t.pair();
    let q = pair.rate();
    if !(q_hat > 0.0 && q_hat <= q) {
        return Err(Error::Domain(format!("acquisition rate must lie in (0, {q}], got {q_hat}")));
    }
    if !(cost >= 0.0 && cost.is_finite()) {
        return Err(Error::Domain(format!("cost must be non-negative, got {cost}")));
    }
    let pair_hat = if q_hat == q { pair.clone() } else { FundamentalPair::with_anchor(pair.model(), q_hat, pair.anchor())? };
    let c = pair.coordinate();
    let hi = sol.b_star.unwrap_or(sol.plain_top.min(pair.window().1));
    let discounted = if q_hat < q { Some(integrate_discounted(sol, &pair_hat, hi)?) } else { None };
    let mut out = TrailingAcquisitionSolution {
        pair_hat,
        trailing: sol.clone(),
        cost,
        discounted,
        entry: None,
        k_max: 0.0,
        certificate: ShapeCertificate { switches: Vec::new(), starts_concave: true, generator_precheck: None },
        majorant: None,
    };
    let grid: Vec<f64> = c.grid(sol.x_min, hi, SCAN_POINTS + 2)[1..=SCAN_POINTS].to_vec();
    let k = |x: f64| out.objective(x);
    let dk = |x: f64| out.objective_derivative(x);
    let zs: Vec<f64> = grid.iter().map(|&x| out.pair_hat.psi(x)).collect();
    let ks: Vec<f64> = grid.iter().map(|&x| k(x)).collect();
    if ks.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("acquisition objective is not finite on the grid".into()));
    }
    let (switches, starts_concave) = convexity_switches(&grid, &zs, &ks);
    let (x_bar, k_max) = argmax(k, Some(dk), &grid, Tie::Rightmost);
    let simple = switches.is_empty() || (switches.len() == 1 && starts_concave);
    out.certificate = ShapeCertificate { switches, starts_concave, generator_precheck: None };
    out.k_max = k_max;
    if k_max <= 0.0 {
        return Ok(out);
    }
    out.entry = Some(x_bar);
    if !simple {
        let mut hz = vec![0.0];
        let mut hk = vec![0.0];
        for (z, kv) in zs.iter().zip(&ks) {
            if *z <= out.pair_hat.psi(x_bar) {
                hz.push(*z);
                hk.push(*kv);
            }
        }
        let hull = upper_hull(&hz, &hk);
        out.majorant = Some((hz, hk, hull));
    }
    Ok(out)
}

/// `H_{f,q^}(psi^(m)) = v_f(m, m) / phi^-(m)` from its own equation
/// `H' = ((ln phi-)' - (ln phi^-)') H + rho (H - pi H(psi(f)))`, `pi = phi- / phi^-`.
fn integrate_discounted(sol: &TrailingSolution, pair_hat: &FundamentalPair, top: f64) -> Result<Trajectory<1>> {
    let t = &sol.transform;
    let pair = t.pair();
    let c = pair.coordinate();
    let floor = &sol.floor;
    let (a, b) = (c.to_xi(top), c.to_xi(sol.x_min));
    let span = (a - b).abs();
    let u0 = sol.diagonal_value(top)? * (-pair_hat.log_phi_minus(top)).exp();
    let rhs = |xi: f64, y: &[f64; 1]| -> [f64; 1] {
        let x = c.to_x(xi);
        let j = c.jacobian(x);
        let fx = floor.apply(x);
        let r = rho(pair, floor, x);
        let src = t.h(fx) * (pair.log_phi_minus(x) - pair.log_phi_minus(fx) - pair_hat.log_phi_minus(x)).exp();
        let w = pair.dlog_phi_minus(x) - pair_hat.dlog_phi_minus(x);
        [j * (w * y[0] + r * (y[0] - src))]
    };
    let opts = OdeOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-300,
        initial_step: 1e-4 * span,
        max_steps: 1_000_000,
        max_step: span / 512.0,
    };
    integrate(rhs, a, [u0], b, opts)
}

impl TrailingAcquisitionSolution {
    pub fn trailing(&self) -> &TrailingSolution {
        &self.trailing
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn acquisition_rate(&self) -> f64 {
        self.pair_hat.rate()
    }

    /// `psi` at the acquisition rate, with the same anchor as the
    /// liquidation problem.
    pub fn psi_hat(&self, x: f64) -> f64 {
        self.pair_hat.psi(x)
    }

    /// `v_f(x, x) / phi^-(x)`.
    fn discounted_diagonal(&self, x: f64) -> f64 {
        if self.trailing.b_star.is_some_and(|b| x >= b) {
            return self.trailing.transform.h(x) * (-self.pair_hat.log_phi_minus(x)).exp();
        }
        match &self.discounted {
            Some(traj) => traj.interpolate(self.pair_hat.coordinate().to_xi(x), 0).unwrap_or(f64::NAN),
            None => self.trailing.h_f_at(x).unwrap_or(f64::NAN),
        }
    }

    /// `H^(1)(psi^(x)) = (v_f(x, x) - h(x) - c) / phi^-(x)`.
    pub fn objective(&self, x: f64) -> f64 {
        let t = &self.trailing.transform;
        self.discounted_diagonal(x) - (t.h(x) + self.cost) * (-self.pair_hat.log_phi_minus(x)).exp()
    }

    fn objective_derivative(&self, x: f64) -> f64 {
        let t = &self.trailing.transform;
        let wh = self.pair_hat.dlog_phi_minus(x);
        let u = self.trailing.diagonal_value(x).unwrap_or(f64::NAN);
        let du = self.trailing.diagonal_derivative(x).unwrap_or(f64::NAN);
        let g = u - t.h(x) - self.cost;
        let dg = du - t.reward().slope(x);
        (dg - g * wh) * (-self.pair_hat.log_phi_minus(x)).exp()
    }

    /// `v_f(x, x) - h(x) - c`.
    pub fn entry_reward(&self, x: f64) -> f64 {
        let t = &self.trailing.transform;
        self.trailing.diagonal_value(x).unwrap_or(f64::NAN) - t.h(x) - self.cost
    }

    /// Largest price at which buying is optimal; `None` when it never pays.
    pub fn entry_threshold(&self) -> Option<f64> {
        self.entry
    }

    /// `psi^(entry_threshold)`.
    pub fn z_entry(&self) -> Option<f64> {
        self.entry.map(|x| self.pair_hat.psi(x))
    }

    pub fn max_objective(&self) -> f64 {
        self.k_max
    }

    pub fn certificate(&self) -> &ShapeCertificate {
        &self.certificate
    }

    /// Whether the value comes from a numerical concave majorant rather
    /// than from the single-threshold rule.
    pub fn uses_majorant(&self) -> bool {
        self.majorant.is_some()
    }

    /// Concave majorant of the objective at `z = psi^(x)`.
    pub fn majorant_at(&self, x: f64) -> f64 {
        let Some(b) = self.entry else {
            return 0.0;
        };
        if x >= b {
            return self.k_max;
        }
        match &self.majorant {
            Some((zs, ks, hull)) => eval_hull(zs, ks, hull, self.pair_hat.psi(x)),
            None => self.objective(x).max(0.0),
        }
    }

    /// `V^(1)(x)`.
    pub fn value(&self, x: f64) -> f64 {
        let Some(b) = self.entry else {
            return 0.0;
        };
        if x >= b {
            return self.entry_reward(b) * (self.pair_hat.log_phi_minus(x) - self.pair_hat.log_phi_minus(b)).exp();
        }
        match &self.majorant {
            Some(_) => self.majorant_at(x) * self.pair_hat.log_phi_minus(x).exp(),
            None => self.entry_reward(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{DiffusionModel, LinearReward};

    fn solution() -> TrailingSolution {
        let m = DiffusionModel::exp_ou(0.6, 1.0, 0.2).unwrap();
        let p = FundamentalPair::new(&m, 0.05).unwrap();
        let t = RewardTransform::new(&p, LinearReward::new(0.02)).unwrap();
        solve_trailing_stop(&t, &FloorSpec::percentage(0.3).unwrap()).unwrap()
    }

    #[test]
    fn threshold_is_fixed_point_of_fixed_stop() {
        let s = solution();
        let b = s.threshold().unwrap();
        assert!(b > s.transform().x0());
        assert!(s.fixed_point_gap().unwrap() < 1e-8, "{:?}", s.fixed_point_gap());
    }

    #[test]
    fn diagonal_matches_quadrature() {
        let s = solution();
        for &m in &[0.6, 1.0, 1.7, 2.4, 2.8] {
            let a = s.h_f_at(m).unwrap();
            let b = s.h_f_by_quadrature(m).unwrap();
            assert!((a - b).abs() <= 1e-8 * a.abs(), "m={m}: {a} vs {b}");
        }
    }

    #[test]
    fn value_is_continuous_across_threshold() {
        let s = solution();
        let b = s.threshold().unwrap();
        let below = s.value(0.95 * b, b * (1.0 - 1e-9)).unwrap();
        let above = s.value(0.95 * b, b * (1.0 + 1e-9)).unwrap();
        assert!((below - above).abs() < 1e-6, "{below} vs {above}");
    }

    #[test]
    fn premium_equals_difference() {
        let s = solution();
        for &(x, m) in &[(1.5, 2.0), (2.0, 2.0), (2.7, 3.2), (3.0, 3.0), (2.3, 3.2), (10.0, 12.0)] {
            let p = s.premium(x, m).unwrap();
            let d = s.value(x, m).unwrap() - s.plain_value(x, m).unwrap().value;
            assert!((p - d).abs() < 1e-7, "({x}, {m}): {p} vs {d}");
        }
    }

    #[test]
    fn below_floor_is_rejected() {
        let s = solution();
        assert!(matches!(s.value(1.3, 2.0), Err(Error::AlreadyStopped { .. })));
        assert!(s.value(2.1, 2.0).is_err());
    }

    #[test]
    fn discounted_equation_matches_direct_ratio() {
        let s = solution();
        let a = solve_trailing_acquisition(&s, 0.03, 0.04).unwrap();
        for &x in &[0.8, 1.5, 2.5] {
            let direct = s.diagonal_value(x).unwrap() * (-a.pair_hat.log_phi_minus(x)).exp();
            let ode = a.discounted_diagonal(x);
            assert!((direct / ode - 1.0).abs() < 1e-8, "x={x}: {direct} vs {ode}");
        }
    }
}
