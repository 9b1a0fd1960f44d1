//! Liquidation with a fixed stop-loss level `y`, and acquisition of a
//! position that will then be managed that way.

use crate::diffusion::{FundamentalPair, RewardTransform};
use crate::error::{AssumptionClause, Error, Result};
use crate::numeric::roots::{argmax, bisect, brent, Tie};

/// Points of the coarse threshold scan.
const SCAN_POINTS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `y < psi^-1(z0)`: wait in `(y, b(y))`.
    Interior,
    /// `y >= psi^-1(z0)`: stop at once everywhere above `y`.
    Degenerate,
}

/// Solution of `V_y(x) = sup_tau E_x[e^{-q (tau ^ tau-(y))} h(X_{tau ^ tau-(y)})]`.
#[derive(Debug, Clone)]
pub struct FixedStopSolution {
    transform: RewardTransform,
    y: f64,
    b: f64,
    z: f64,
    regime: Regime,
    unconstrained: bool,
    /// `V = alpha phi+ + beta phi-` on the continuation region.
    alpha: f64,
    beta: f64,
    smooth_fit_gap: Option<f64>,
}

/// Secant slope of `H` from `psi(y)` (or from the origin when unconstrained).
fn secant_from(t: &RewardTransform, y: Option<f64>, x: f64) -> f64 {
    match y {
        Some(y) => t.secant(y, x),
        None => t.h(x) * (-t.pair().log_phi_plus(x)).exp(),
    }
}

/// Solves the fixed-stop problem. Any `y <= l` is read as "no stop".
pub fn solve_fixed_stop(transform: &RewardTransform, y: f64) -> Result<FixedStopSolution> {
    let pair = transform.pair();
    let (l, r) = pair.model().interval();
    if y.is_nan() || y >= r {
        return Err(Error::Domain(format!("stop level {y} outside the interval")));
    }
    let unconstrained = y <= l;
    let x0 = transform.x0();
    if !unconstrained && y >= x0 {
        return Ok(FixedStopSolution {
            transform: transform.clone(),
            y,
            b: y,
            z: pair.psi(y),
            regime: Regime::Degenerate,
            unconstrained,
            alpha: 0.0,
            beta: 0.0,
            smooth_fit_gap: None,
        });
    }
    let stop = if unconstrained { None } else { Some(y) };
    let c = pair.coordinate();
    let (_, dr) = pair.domain();
    let lo = x0.max(pair.window().0);
    let mut hi = pair.window().1;
    let s = |x: f64| secant_from(transform, stop, x);
    let mut grid;
    let mut extensions = 0;
    loop {
        grid = c.grid(lo, hi, SCAN_POINTS);
        let vals: Vec<f64> = grid.iter().map(|&x| s(x)).collect();
        let best = (0..vals.len()).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
        if best + 1 < grid.len() {
            break;
        }
        extensions += 1;
        let span = c.to_xi(hi) - c.to_xi(lo);
        let next = c.to_x(c.to_xi(hi) + span);
        if extensions > 6 || !(next < dr) || !next.is_finite() {
            return Err(Error::NoFiniteThreshold(pair.psi(hi)));
        }
        hi = next;
    }
    // sandwich route: H'+ - secant is positive left of the argmax, negative right
    let gap = |x: f64| transform.dh_dz_right(x) - s(x);
    let (xg, _) = argmax(s, None::<fn(f64) -> f64>, &grid, Tie::Leftmost);
    let step = c.to_xi(grid[1]) - c.to_xi(grid[0]);
    let (a, bb) = (c.to_x(c.to_xi(xg) - step).max(lo), c.to_x(c.to_xi(xg) + step).min(hi));
    let x_sandwich = if gap(a) > 0.0 && gap(bb) < 0.0 {
        bisect(gap, a, bb, 1e-15)?
    } else {
        xg
    };
    let (b, smooth_fit_gap) = if transform.reward().derivative(x_sandwich).is_some() || transform.reward().kinks().is_empty() {
        // smooth fit: smallest root of H'(z) = secant beyond z0
        let fit = |x: f64| transform.dh_dz_with_slope(x, transform.reward().slope(x)) - s(x);
        let mut root = None;
        let mut prev = (grid[0], fit(grid[0]));
        for &x in &grid[1..] {
            let v = fit(x);
            if prev.1 > 0.0 && v <= 0.0 {
                root = Some(brent(fit, prev.0, x, 1e-15)?);
                break;
            }
            prev = (x, v);
        }
        match root {
            Some(xs) => {
                let dz = (pair.psi(xs) - pair.psi(x_sandwich)).abs();
                if dz > 1e-6 * pair.psi(xs).max(1.0) {
                    return Err(Error::Numeric(format!(
                        "smooth-fit root {xs} and secant maximizer {x_sandwich} disagree"
                    )));
                }
                (xs, Some(dz))
            }
            None => (x_sandwich, None),
        }
    } else {
        (x_sandwich, None)
    };
    let (alpha, beta) = coefficients(pair, transform, stop, b);
    Ok(FixedStopSolution {
        transform: transform.clone(),
        y: if unconstrained { l } else { y },
        b,
        z: pair.psi(b),
        regime: Regime::Interior,
        unconstrained,
        alpha,
        beta,
        smooth_fit_gap,
    })
}

/// `alpha, beta` with `alpha phi+ + beta phi-` equal to `h` at `y` and `b`.
fn coefficients(pair: &FundamentalPair, t: &RewardTransform, y: Option<f64>, b: f64) -> (f64, f64) {
    let eb = pair.log_eval(b);
    match y {
        None => (t.h(b) * (-eb[0]).exp(), 0.0),
        Some(y) => {
            let ey = pair.log_eval(y);
            // determinant phi-(y) phi-(b) (psi(b) - psi(y))
            let det_log = ey[2] + eb[2];
            let dpsi = (eb[0] - eb[2]).exp() - (ey[0] - ey[2]).exp();
            let alpha = (t.h(b) * (ey[2] - det_log).exp() - t.h(y) * (eb[2] - det_log).exp()) / dpsi;
            let beta = (t.h(y) * (eb[0] - det_log).exp() - t.h(b) * (ey[0] - det_log).exp()) / dpsi;
            (alpha, beta)
        }
    }
}

impl FixedStopSolution {
    pub fn transform(&self) -> &RewardTransform {
        &self.transform
    }

    pub fn stop_level(&self) -> f64 {
        self.y
    }

    /// Liquidation threshold `b(y)`; equals `y` in the degenerate regime.
    pub fn threshold(&self) -> f64 {
        self.b
    }

    /// `z(y) = psi(b(y))`.
    pub fn z_threshold(&self) -> f64 {
        self.z
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn is_unconstrained(&self) -> bool {
        self.unconstrained
    }

    /// Distance in `z` between the smooth-fit root and the secant maximizer,
    /// when both were computed.
    pub fn smooth_fit_gap(&self) -> Option<f64> {
        self.smooth_fit_gap
    }

    fn in_continuation(&self, x: f64) -> bool {
        self.regime == Regime::Interior && x > self.y && x < self.b
    }

    fn check(&self, x: f64) -> Result<()> {
        if x.is_nan() || (!self.unconstrained && x < self.y) {
            return Err(Error::Domain(format!("price {x} below the stop level {}", self.y)));
        }
        Ok(())
    }

    /// `V_y(x)` for `x >= y`.
    pub fn value(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: f64) -> f64 {
        if !self.in_continuation(x) {
            return self.transform.h(x);
        }
        let e = self.transform.pair().log_eval(x);
        self.alpha * e[0].exp() + self.beta * e[2].exp()
    }

    /// `V_y'(x)`; on the stopping region this is `h'(x)`.
    pub fn value_derivative(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        if !self.in_continuation(x) {
            return Ok(self.transform.reward().slope(x));
        }
        let e = self.transform.pair().log_eval(x);
        Ok(self.alpha * e[0].exp() * e[1] + self.beta * e[2].exp() * e[3])
    }

    /// Smallest concave majorant `H^_y` at `z = psi(x)`.
    pub fn majorant_at(&self, x: f64) -> f64 {
        if self.in_continuation(x) {
            self.value_unchecked(x) * (-self.transform.pair().log_phi_minus(x)).exp()
        } else {
            self.transform.big_h_at(x)
        }
    }

    /// Early liquidation premium `P_y(x) = V_y(x) - E_x[e^{-q tau-(y)} h(y)]`.
    pub fn premium(&self, x: f64) -> Result<f64> {
        if self.unconstrained {
            return Err(Error::Domain("premium needs a finite stop level".into()));
        }
        self.check(x)?;
        let pair = self.transform.pair();
        let (y, b) = (self.y, self.b);
        let ratio = (pair.log_phi_minus(x) - pair.log_phi_minus(y)).exp();
        if self.in_continuation(x) {
            // phi-(x) (H(z_b) - H(z_y)) (psi(x) - psi(y)) / (psi(b) - psi(y))
            let w = crate::diffusion::exit_weights(pair, x, y, b);
            let frac = w.up * (pair.log_phi_minus(b) - pair.log_phi_minus(x)).exp();
            Ok(w.up * self.transform.h(b) - ratio * frac * self.transform.h(y))
        } else {
            Ok(self.transform.h(x) - self.transform.h(y) * ratio)
        }
    }
}

/// Shape record of the acquisition objective on `(y, b(y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeCertificate {
    /// Prices where the second differences change sign.
    pub switches: Vec<f64>,
    /// Concave before the first switch.
    pub starts_concave: bool,
    /// Result of the sufficient test "(L - q^) h non-increasing", when `h''`
    /// is available.
    pub generator_precheck: Option<bool>,
}

/// Solution of `V^(1)_y(x) = sup_tau E_x[e^{-q^ tau} (V_y - h - c)(X_tau)]`.
#[derive(Debug, Clone)]
pub struct FixedAcquisitionSolution {
    stop: FixedStopSolution,
    pair_hat: FundamentalPair,
    cost: f64,
    region: Option<(f64, f64)>,
    certificate: Option<ShapeCertificate>,
    sup_gain: f64,
}

pub fn solve_fixed_acquisition(sol: &FixedStopSolution, q_hat: f64, cost: f64) -> Result<FixedAcquisitionSolution> {
    let pair = sol.transform.pair();
    let q = pair.rate();
    if !(q_hat > 0.0 && q_hat <= q) {
        return Err(Error::Domain(format!("acquisition rate must lie in (0, {q}], got {q_hat}")));
    }
    if !(cost >= 0.0 && cost.is_finite()) {
        return Err(Error::Domain(format!("cost must be non-negative, got {cost}")));
    }
    let pair_hat = if q_hat == q { pair.clone() } else { FundamentalPair::with_anchor(pair.model(), q_hat, pair.anchor())? };
    let mut out = FixedAcquisitionSolution {
        stop: sol.clone(),
        pair_hat: pair_hat.clone(),
        cost,
        region: None,
        certificate: None,
        sup_gain: 0.0,
    };
    if sol.regime == Regime::Degenerate {
        return Ok(out);
    }
    let c = pair.coordinate();
    let (y, b) = (sol.y, sol.b);
    let lo = if sol.unconstrained { pair.window().0 } else { y };
    let grid: Vec<f64> = c.grid(lo, b, SCAN_POINTS + 2)[1..=SCAN_POINTS].to_vec();
    let gain = |x: f64| sol.value_unchecked(x) - sol.transform.h(x);
    let dgain = |x: f64| sol.value_derivative(x).unwrap_or(f64::NAN) - sol.transform.reward().slope(x);
    let (_, sup_gain) = argmax(gain, Some(dgain), &grid, Tie::Leftmost);
    out.sup_gain = sup_gain;
    if cost >= sup_gain {
        return Ok(out);
    }
    let k = |x: f64| (gain(x) - cost) * (-pair_hat.log_phi_minus(x)).exp();
    let certificate = acquisition_shape(&pair_hat, &grid, &k, sol)?;
    let dk = |x: f64| dgain(x) - (gain(x) - cost) * pair_hat.dlog_phi_minus(x);
    let (x_hi, _) = argmax(k, Some(dk), &grid, Tie::Rightmost);
    // K(z)/z with K(0+) = 0 at a natural lower boundary
    let kz = |x: f64| (gain(x) - cost) * (-pair_hat.log_phi_plus(x)).exp();
    let dkz = |x: f64| dgain(x) - (gain(x) - cost) * pair_hat.dlog_phi_plus(x);
    let sub: Vec<f64> = grid.iter().copied().filter(|&x| x <= x_hi).collect();
    let x_lo = if sub.len() >= 3 { argmax(kz, Some(dkz), &sub, Tie::Leftmost).0 } else { x_hi };
    out.region = Some((x_lo.min(x_hi), x_hi));
    out.certificate = Some(certificate);
    Ok(out)
}

/// Sign changes of the second differences of `ks` against `zs`, reported at
/// the corresponding prices, and whether the data start out concave.
pub(crate) fn convexity_switches(grid: &[f64], zs: &[f64], ks: &[f64]) -> (Vec<f64>, bool) {
    let mut signs: Vec<(f64, i8)> = Vec::new();
    for i in 1..grid.len() - 1 {
        let s1 = (ks[i + 1] - ks[i]) / (zs[i + 1] - zs[i]);
        let s0 = (ks[i] - ks[i - 1]) / (zs[i] - zs[i - 1]);
        let scale = ks[i - 1].abs().max(ks[i].abs()).max(ks[i + 1].abs());
        let tol = 1e-8 * scale / (zs[i + 1] - zs[i - 1]);
        let d = s1 - s0;
        if d.abs() > tol {
            signs.push((grid[i], if d > 0.0 { 1 } else { -1 }));
        }
    }
    let switches: Vec<f64> = signs.windows(2).filter(|w| w[0].1 != w[1].1).map(|w| 0.5 * (w[0].0 + w[1].0)).collect();
    let starts_concave = signs.first().is_none_or(|s| s.1 < 0);
    (switches, starts_concave)
}

fn acquisition_shape(
    pair_hat: &FundamentalPair,
    grid: &[f64],
    k: &dyn Fn(f64) -> f64,
    sol: &FixedStopSolution,
) -> Result<ShapeCertificate> {
    let zs: Vec<f64> = grid.iter().map(|&x| pair_hat.psi(x)).collect();
    let ks: Vec<f64> = grid.iter().map(|&x| k(x)).collect();
    let (switches, starts_concave) = convexity_switches(grid, &zs, &ks);
    let t = &sol.transform;
    let generator_precheck = if t.reward().is_smooth() {
        let m = pair_hat.model();
        let g: Vec<f64> = grid
            .iter()
            .map(|&x| {
                m.generator_minus_rate(
                    pair_hat.rate(),
                    x,
                    t.h(x),
                    t.reward().slope(x),
                    t.reward().second_derivative(x).unwrap_or(0.0),
                )
            })
            .collect();
        Some(g.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)))
    } else {
        None
    };
    let ok = switches.is_empty() || (switches.len() == 1 && starts_concave);
    if !ok && generator_precheck != Some(true) {
        return Err(Error::AssumptionFailure {
            clause: AssumptionClause::AcquisitionShape,
            detail: format!("acquisition objective switches convexity at {:?}", switches),
        });
    }
    Ok(ShapeCertificate { switches, starts_concave, generator_precheck })
}

impl FixedAcquisitionSolution {
    pub fn stop(&self) -> &FixedStopSolution {
        &self.stop
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn acquisition_rate(&self) -> f64 {
        self.pair_hat.rate()
    }

    /// `[x_lo, x_hi]`, or `None` when entering never pays.
    pub fn region(&self) -> Option<(f64, f64)> {
        self.region
    }

    /// `(z_lo, z_hi)` under `psi` at the acquisition rate.
    pub fn z_region(&self) -> Option<(f64, f64)> {
        self.region.map(|(a, b)| (self.pair_hat.psi(a), self.pair_hat.psi(b)))
    }

    pub fn certificate(&self) -> Option<&ShapeCertificate> {
        self.certificate.as_ref()
    }

    /// `sup_x (V_y(x) - h(x))`.
    pub fn sup_gain(&self) -> f64 {
        self.sup_gain
    }

    /// Reward for entering at `x`: `V_y(x) - h(x) - c`.
    pub fn entry_reward(&self, x: f64) -> f64 {
        self.stop.value_unchecked(x) - self.stop.transform.h(x) - self.cost
    }

    /// `V^(1)_y(x)`.
    pub fn value(&self, x: f64) -> f64 {
        let Some((lo, hi)) = self.region else {
            return 0.0;
        };
        if x < lo {
            self.entry_reward(lo) * (self.pair_hat.log_phi_plus(x) - self.pair_hat.log_phi_plus(lo)).exp()
        } else if x > hi {
            self.entry_reward(hi) * (self.pair_hat.log_phi_minus(x) - self.pair_hat.log_phi_minus(hi)).exp()
        } else {
            self.entry_reward(x)
        }
    }
}
