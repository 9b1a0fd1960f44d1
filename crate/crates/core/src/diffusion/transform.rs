use std::fmt;
use std::sync::Arc;

use super::{FundamentalPair, Reward};
use crate::error::{AssumptionClause, Error, Result};
use crate::numeric::roots::{brent, scan_then_golden};

/// Number of base points of the standard price grid.
pub const GRID_POINTS: usize = 4096;

/// How the inflection point `z0` was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeMethod {
    /// Sign change of `(L - q) h`, which shares the sign of `H''`.
    Generator,
    /// Sign change of second divided differences of `H`.
    SecondDifferences,
}

/// Outcome of the shape checks on `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Price at which `H` turns from convex to concave.
    pub x0: f64,
    pub z0: f64,
    /// Price at which `h` turns positive, `None` if it is positive on the
    /// whole window.
    pub x1: Option<f64>,
    pub z1: f64,
    pub method: ShapeMethod,
    /// `H` at `z = psi(x0) * 1e-3, ..., psi(x0) * 1e-8` (or the window edge).
    pub origin_tail: Vec<(f64, f64)>,
    /// Slope of `H` at infinity, secant over the last decade of the grid.
    pub slope_at_infinity: f64,
    /// Change of the slope estimate between the last two decades.
    pub slope_settling: f64,
    /// `sup_{z > z0} H(z) / z` and the price where it is attained.
    pub sup_ratio: f64,
    pub sup_ratio_at: f64,
}

/// The reward seen through the fundamental pair:
/// `H(z) = h(x) / phi-(x)` with `z = psi(x)`.
#[derive(Clone)]
pub struct RewardTransform {
    pair: FundamentalPair,
    reward: Arc<dyn Reward>,
    report: AssumptionReport,
}

impl fmt::Debug for RewardTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RewardTransform")
            .field("reward", &self.reward.describe())
            .field("report", &self.report)
            .finish()
    }
}

fn fail(clause: AssumptionClause, detail: impl Into<String>) -> Error {
    Error::AssumptionFailure { clause, detail: detail.into() }
}

impl RewardTransform {
    /// Builds `H` and checks the convex/concave shape, `H(0+) = 0` and the
    /// slope condition at infinity.
    pub fn new<R: Reward + 'static>(pair: &FundamentalPair, reward: R) -> Result<Self> {
        Self::from_arc(pair, Arc::new(reward))
    }

    pub fn from_arc(pair: &FundamentalPair, reward: Arc<dyn Reward>) -> Result<Self> {
        let report = check_assumptions(pair, reward.as_ref())?;
        Ok(Self { pair: pair.clone(), reward, report })
    }

    /// Same reward, solutions renormalized at another anchor.
    pub fn reanchored(&self, anchor: f64) -> Result<Self> {
        Self::from_arc(&self.pair.reanchored(anchor)?, self.reward.clone())
    }

    pub fn pair(&self) -> &FundamentalPair {
        &self.pair
    }

    pub fn reward(&self) -> &dyn Reward {
        self.reward.as_ref()
    }

    pub fn reward_arc(&self) -> Arc<dyn Reward> {
        self.reward.clone()
    }

    pub fn report(&self) -> &AssumptionReport {
        &self.report
    }

    pub fn x0(&self) -> f64 {
        self.report.x0
    }

    pub fn z0(&self) -> f64 {
        self.report.z0
    }

    pub fn z1(&self) -> f64 {
        self.report.z1
    }

    pub fn h(&self, x: f64) -> f64 {
        self.reward.value(x)
    }

    /// `H(psi(x))`.
    pub fn big_h_at(&self, x: f64) -> f64 {
        self.reward.value(x) * (-self.pair.log_phi_minus(x)).exp()
    }

    /// `H(z)`; `H(0) = 0`.
    pub fn big_h(&self, z: f64) -> Result<f64> {
        if z == 0.0 {
            return Ok(0.0);
        }
        Ok(self.big_h_at(self.pair.psi_inverse(z)?))
    }

    /// `dH/dz` at `z = psi(x)` for a given value of `h'(x)`.
    pub fn dh_dz_with_slope(&self, x: f64, slope: f64) -> f64 {
        let e = self.pair.log_eval(x);
        let num = slope - self.reward.value(x) * e[3];
        // H' = (h' - h (ln phi-)') / (phi- psi'),  psi' = psi (ln psi)'
        num * (-e[2] - (e[0] - e[2])).exp() / (e[1] - e[3])
    }

    /// Right derivative `H'+` at `z = psi(x)`.
    pub fn dh_dz_right(&self, x: f64) -> f64 {
        if self.reward.derivative(x).is_some() || !self.near_kink(x) {
            return self.dh_dz_with_slope(x, self.reward.slope(x));
        }
        let h = 1e-6 * (1.0 + x.abs());
        let s = (-3.0 * self.reward.value(x) + 4.0 * self.reward.value(x + h) - self.reward.value(x + 2.0 * h))
            / (2.0 * h);
        self.dh_dz_with_slope(x, s)
    }

    /// Left derivative `H'-` at `z = psi(x)`.
    pub fn dh_dz_left(&self, x: f64) -> f64 {
        if self.reward.derivative(x).is_some() || !self.near_kink(x) {
            return self.dh_dz_with_slope(x, self.reward.slope(x));
        }
        let h = 1e-6 * (1.0 + x.abs());
        let s = (3.0 * self.reward.value(x) - 4.0 * self.reward.value(x - h) + self.reward.value(x - 2.0 * h))
            / (2.0 * h);
        self.dh_dz_with_slope(x, s)
    }

    fn near_kink(&self, x: f64) -> bool {
        let h = 2e-6 * (1.0 + x.abs());
        self.reward.kinks().iter().any(|&k| (k - x).abs() <= h)
    }

    /// `(L - q) h(x)` when `h''` is available.
    pub fn generator_of_reward(&self, x: f64) -> Option<f64> {
        let d2 = self.reward.second_derivative(x)?;
        Some(self.pair.model().generator_minus_rate(
            self.pair.rate(),
            x,
            self.reward.value(x),
            self.reward.slope(x),
            d2,
        ))
    }

    /// Standard price grid: uniform in the model coordinate over the window.
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.pair.window();
        self.pair.coordinate().grid(lo, hi, GRID_POINTS)
    }

    /// Secant slope `(H(psi(b)) - H(psi(a))) / (psi(b) - psi(a))`.
    pub fn secant(&self, a: f64, b: f64) -> f64 {
        let (ea, eb) = (self.pair.log_eval(a), self.pair.log_eval(b));
        let (ha, hb) = (self.reward.value(a) * (-ea[2]).exp(), self.reward.value(b) * (-eb[2]).exp());
        let (la, lb) = (ea[0] - ea[2], eb[0] - eb[2]);
        // psi(b) - psi(a) = psi(b) (1 - psi(a)/psi(b))
        (hb - ha) / (-(la - lb).exp_m1() * lb.exp())
    }
}

fn check_assumptions(pair: &FundamentalPair, r: &dyn Reward) -> Result<AssumptionReport> {
    let (lo, hi) = pair.window();
    let c = pair.coordinate();
    let grid = c.grid(lo, hi, GRID_POINTS);
    let hs: Vec<f64> = grid.iter().map(|&x| r.value(x)).collect();
    if hs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("reward is not finite on the grid".into()));
    }
    if !hs.iter().any(|&v| v > 0.0) {
        return Err(fail(AssumptionClause::PositiveSomewhere, "h <= 0 on the whole grid"));
    }
    let big_h = |x: f64| r.value(x) * (-pair.log_phi_minus(x)).exp();

    // z1: last sign change of h from negative to positive
    let changes: Vec<usize> = (1..grid.len()).filter(|&i| (hs[i] > 0.0) != (hs[i - 1] > 0.0)).collect();
    let x1 = match changes.len() {
        0 => locate_below_window(pair, r, grid[0])?,
        1 if hs[0] <= 0.0 => {
            let i = changes[0];
            Some(brent(|x| r.value(x), grid[i - 1], grid[i], 1e-14 * (1.0 + grid[i].abs()))?)
        }
        _ => {
            return Err(Error::UnsupportedReward(format!(
                "h changes sign {} times on the grid; expected at most one change from - to +",
                changes.len()
            )))
        }
    };
    let z1 = x1.map_or(0.0, |x| pair.psi(x));

    // z0
    let (x0, method) = if r.is_smooth() {
        let g: Vec<f64> = grid
            .iter()
            .map(|&x| {
                let d2 = r.second_derivative(x).unwrap_or(0.0);
                pair.model().generator_minus_rate(pair.rate(), x, r.value(x), r.slope(x), d2)
            })
            .collect();
        (locate_switch(&grid, &g, |x| {
            pair.model().generator_minus_rate(
                pair.rate(),
                x,
                r.value(x),
                r.slope(x),
                r.second_derivative(x).unwrap_or(0.0),
            )
        })?, ShapeMethod::Generator)
    } else {
        (second_difference_switch(pair, &grid, &big_h)?, ShapeMethod::SecondDifferences)
    };
    let x0 = match x0 {
        Some(x) => x,
        None => {
            return Err(fail(
                AssumptionClause::ConvexConcaveShape,
                "H is convex on the whole window, no concave branch found",
            ))
        }
    };
    let z0 = if x0 <= lo { 0.0 } else { pair.psi(x0) };
    if let Some(x1) = x1 {
        if x1 >= x0 {
            return Err(fail(
                AssumptionClause::ConvexConcaveShape,
                format!("sign change of h at {x1} is not below the inflection {x0}"),
            ));
        }
    }

    // H(0+) = 0, probed at decades below psi(x0) so the probes do not move
    // with the anchor
    let zmin = pair.psi(lo);
    let zref = pair.psi(x0.max(lo));
    let mut tail = Vec::new();
    for k in 3..=8 {
        let z = (zref * 10f64.powi(-k)).max(zmin);
        let x = pair.psi_inverse(z)?;
        tail.push((z, big_h(x)));
    }
    let decays = tail.windows(2).all(|w| w[1].1.abs() <= w[0].1.abs() * (1.0 + 1e-12));
    let last = tail.last().map_or(0.0, |t| t.1.abs());
    let scale = big_h(x0.max(lo)).abs().max(tail[0].1.abs()).max(f64::MIN_POSITIVE);
    if !decays || last > 1e-2 * scale {
        return Err(fail(
            AssumptionClause::VanishingAtOrigin,
            format!("|H| does not decay towards z = 0 (tail {:?})", tail),
        ));
    }

    // slope at infinity and sup H/z beyond z0
    let top = grid.len() - 1;
    let decade = |end: f64| -> Result<f64> {
        let lz = pair.log_psi(end);
        let start = pair.log_psi_inverse(lz - std::f64::consts::LN_10)?;
        Ok(secant_free(pair, r, start, end))
    };
    let s_last = decade(grid[top])?;
    let prev_end = pair.log_psi_inverse(pair.log_psi(grid[top]) - std::f64::consts::LN_10)?;
    let s_prev = decade(prev_end)?;
    let ratio = |x: f64| r.value(x) * (-pair.log_phi_plus(x)).exp();
    let beyond: Vec<f64> = grid.iter().copied().filter(|&x| x > x0).collect();
    let (sup_at, sup_ratio) = if beyond.len() >= 3 {
        scan_then_golden(ratio, &beyond, 1e-12)
    } else {
        (grid[top], ratio(grid[top]))
    };
    if !(sup_ratio > s_last) {
        return Err(fail(
            AssumptionClause::SlopeAtInfinity,
            format!("sup H(z)/z = {sup_ratio} does not exceed H'(inf) = {s_last}"),
        ));
    }
    Ok(AssumptionReport {
        x0,
        z0,
        x1,
        z1,
        method,
        origin_tail: tail,
        slope_at_infinity: s_last,
        slope_settling: (s_last - s_prev).abs(),
        sup_ratio,
        sup_ratio_at: sup_at,
    })
}

/// When `h > 0` on the whole window, looks for its sign change further left.
fn locate_below_window(pair: &FundamentalPair, r: &dyn Reward, lo: f64) -> Result<Option<f64>> {
    let c = pair.coordinate();
    let (dl, _) = pair.domain();
    let (l, _) = pair.model().interval();
    let xi_min = if dl > l { c.to_xi(dl) } else { f64::NEG_INFINITY };
    let (wl, wr) = pair.window();
    let step = c.to_xi(wr) - c.to_xi(wl);
    let mut hi = c.to_xi(lo);
    for _ in 0..8 {
        let next = (hi - step).max(xi_min);
        if next >= hi {
            break;
        }
        let x = c.to_x(next);
        if r.value(x) <= 0.0 {
            let a = c.to_x(next);
            let b = c.to_x(hi);
            return Ok(Some(brent(|x| r.value(x), a, b, 1e-14 * (1.0 + b.abs()))?));
        }
        hi = next;
    }
    Ok(None)
}

fn secant_free(pair: &FundamentalPair, r: &dyn Reward, a: f64, b: f64) -> f64 {
    let (ea, eb) = (pair.log_eval(a), pair.log_eval(b));
    let (ha, hb) = (r.value(a) * (-ea[2]).exp(), r.value(b) * (-eb[2]).exp());
    let (la, lb) = (ea[0] - ea[2], eb[0] - eb[2]);
    (hb - ha) / (-(la - lb).exp_m1() * lb.exp())
}

/// Locates the single `+ -> -` sign change of `g` on `grid`. `Ok(None)` when
/// `g > 0` throughout; the window's left end when `g <= 0` throughout.
fn locate_switch(grid: &[f64], g: &[f64], mut f: impl FnMut(f64) -> f64) -> Result<Option<f64>> {
    let sign = |v: f64| v > 0.0;
    let changes: Vec<usize> = (1..g.len()).filter(|&i| sign(g[i]) != sign(g[i - 1])).collect();
    match changes.len() {
        0 if g[0] > 0.0 => Ok(None),
        0 => Ok(Some(grid[0])),
        1 if g[0] > 0.0 => {
            let i = changes[0];
            Ok(Some(brent(&mut f, grid[i - 1], grid[i], 1e-14 * (1.0 + grid[i].abs()))?))
        }
        n => Err(Error::UnsupportedReward(format!(
            "(L - q) h changes sign {n} times; H must switch from convex to concave exactly once"
        ))),
    }
}

/// Second divided differences of `H` in `z`, with a 10x refined pass around
/// the detected change.
fn second_difference_switch(
    pair: &FundamentalPair,
    grid: &[f64],
    big_h: &dyn Fn(f64) -> f64,
) -> Result<Option<f64>> {
    let dd = |xs: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let zs: Vec<f64> = xs.iter().map(|&x| pair.psi(x)).collect();
        let hs: Vec<f64> = xs.iter().map(|&x| big_h(x)).collect();
        let scale = hs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut mids = Vec::new();
        let mut vals = Vec::new();
        for i in 1..xs.len() - 1 {
            let s1 = (hs[i + 1] - hs[i]) / (zs[i + 1] - zs[i]);
            let s0 = (hs[i] - hs[i - 1]) / (zs[i] - zs[i - 1]);
            let v = s1 - s0;
            // slope jumps below roundoff count as zero
            let tol = 1e-8 * scale / (zs[i + 1] - zs[i - 1]);
            mids.push(xs[i]);
            vals.push(if v.abs() <= tol { 0.0 } else { v });
        }
        (mids, vals)
    };
    let (mids, vals) = dd(grid);
    let nz: Vec<(f64, f64)> = mids.iter().zip(&vals).filter(|(_, v)| **v != 0.0).map(|(x, v)| (*x, *v)).collect();
    if nz.is_empty() {
        return Ok(Some(grid[0]));
    }
    let changes: Vec<usize> = (1..nz.len()).filter(|&i| (nz[i].1 > 0.0) != (nz[i - 1].1 > 0.0)).collect();
    match changes.len() {
        0 if nz[0].1 > 0.0 => Ok(None),
        0 => Ok(Some(grid[0])),
        1 if nz[0].1 > 0.0 => {
            let i = changes[0];
            let (a, b) = (nz[i - 1].0, nz[i].0);
            let ia = grid.partition_point(|&x| x < a).saturating_sub(1);
            let ib = (grid.partition_point(|&x| x <= b) + 1).min(grid.len() - 1);
            let fine = pair.coordinate().grid(grid[ia], grid[ib], 10 * (ib - ia) + 1);
            let (fm, fv) = dd(&fine);
            let mut last_pos = None;
            let mut first_neg = None;
            for (x, v) in fm.iter().zip(&fv) {
                if *v > 0.0 {
                    last_pos = Some(*x);
                } else if *v < 0.0 && last_pos.is_some() && first_neg.is_none() {
                    first_neg = Some(*x);
                }
            }
            Ok(Some(match (last_pos, first_neg) {
                (Some(p), Some(n)) => 0.5 * (p + n),
                _ => 0.5 * (a + b),
            }))
        }
        n => Err(Error::UnsupportedReward(format!(
            "second differences of H change sign {n} times; expected one convex-to-concave switch"
        ))),
    }
}
