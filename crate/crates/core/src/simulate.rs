//! Monte Carlo for the strategies the solvers prescribe.
//!
//! Exponential-OU prices are stepped exactly in `ln x` (an OU process with
//! mean `theta`); other models use an Euler step in `x`. Barrier and floor
//! crossings between grid times are detected with the Brownian-bridge
//! crossing probability, and the running maximum is updated with an exact
//! bridge-maximum draw whenever the path is close to it. A stopped path is
//! paid at the barrier (or floor) level and discounted from the end of the
//! step in which it stopped.
//!
//! Paths are grouped in batches of [`BATCH`]; batch `i` draws from ChaCha8
//! stream `i`, and batch totals are merged in index order, so results do not
//! depend on the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::diffusion::{Backend, DiffusionModel, Reward};
use crate::error::{Error, Result};
use crate::fixed_stop::FixedStopSolution;
use crate::trailing_stop::{FloorSpec, TrailingSolution};

/// Paths per independently seeded batch.
pub const BATCH: usize = 8192;
/// Bridge checks are skipped when the path is more than this many local
/// standard deviations from a level; the neglected probability is below
/// `e^{-32}`.
const NEAR: f64 = 4.0;
/// Fraction of unresolved paths tolerated before the residual is examined.
const UNRESOLVED_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct PathConfig {
    pub model: DiffusionModel,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub n_paths: usize,
}

impl PathConfig {
    /// Horizon at which the discount factor `e^{-qT}` reaches `1e-4`.
    pub fn horizon_for_rate(q: f64) -> f64 {
        (1e4f64).ln() / q
    }

    pub fn new(model: DiffusionModel, dt: f64, horizon: f64, seed: u64, n_paths: usize) -> Result<Self> {
        let cfg = Self { model, dt, horizon, seed, n_paths };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= self.horizon && self.horizon.is_finite()) {
            return Err(Error::Domain(format!("need 0 < dt <= horizon, got dt = {}, T = {}", self.dt, self.horizon)));
        }
        if self.n_paths == 0 {
            return Err(Error::Domain("need at least one path".into()));
        }
        Ok(())
    }

    /// Same configuration with the step halved.
    pub fn refined(&self) -> Self {
        Self { dt: 0.5 * self.dt, ..self.clone() }
    }

    fn steps(&self) -> usize {
        (self.horizon / self.dt).ceil() as usize
    }
}

/// Liquidation (or acquisition) rule followed along each path.
#[derive(Debug, Clone)]
pub enum StrategyKind {
    /// Sell at once.
    Immediate,
    /// Hold until the price falls to `f(running max)`.
    PlainTrailing { floor: FloorSpec },
    /// Sell at the first of: price reaches `b`, price falls to the floor.
    BarrierOrTrailing { b: f64, floor: FloorSpec },
    /// Sell when the price leaves `(y, b)`; `b = inf` for a pure stop-loss.
    FixedTwoSided { y: f64, b: f64 },
    /// Buy (paying `h(x) + cost`) when the price first enters `[lo, hi]`,
    /// discounting at `q_hat`, then follow `inner` from the entry price.
    AcquisitionThenLiquidate { lo: f64, hi: f64, q_hat: f64, cost: f64, inner: Box<StrategyKind> },
}

#[derive(Debug, Clone)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub x0: f64,
    /// Running maximum at the start; `>= x0`.
    pub m0: f64,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind, x0: f64, m0: f64) -> Result<Self> {
        if !(m0 >= x0) {
            return Err(Error::Domain(format!("running maximum {m0} below the start price {x0}")));
        }
        match &kind {
            StrategyKind::FixedTwoSided { y, b } if !(y < b) => {
                return Err(Error::Domain(format!("need y < b, got y = {y}, b = {b}")))
            }
            StrategyKind::AcquisitionThenLiquidate { lo, hi, q_hat, .. } if !(lo <= hi && *q_hat > 0.0) => {
                return Err(Error::Domain("entry interval must be ordered and q_hat positive".into()))
            }
            _ => {}
        }
        Ok(Self { kind, x0, m0 })
    }

    /// The rule attaining `v_f(x, m)`: sell at `b_f*` or at the floor while
    /// `m < b_f*`, otherwise the fixed stop at `f(m)` with threshold `b(f(m))`.
    pub fn optimal_trailing(sol: &TrailingSolution, x: f64, m: f64) -> Result<Self> {
        let floor = sol.floor().clone();
        let kind = match sol.threshold() {
            None => StrategyKind::PlainTrailing { floor },
            Some(b) if m < b => StrategyKind::BarrierOrTrailing { b, floor },
            Some(_) => {
                let y = floor.apply(m);
                let fixed = crate::fixed_stop::solve_fixed_stop(sol.transform(), y)?;
                if fixed.threshold() <= y {
                    StrategyKind::Immediate
                } else {
                    StrategyKind::FixedTwoSided { y, b: fixed.threshold() }
                }
            }
        };
        Self::new(kind, x, m)
    }

    /// Hold until the floor: attains `g_f(x, m)`.
    pub fn plain_trailing(sol: &TrailingSolution, x: f64, m: f64) -> Result<Self> {
        Self::new(StrategyKind::PlainTrailing { floor: sol.floor().clone() }, x, m)
    }

    /// The rule attaining `V_y(x)`.
    pub fn fixed_stop(sol: &FixedStopSolution, x: f64) -> Result<Self> {
        let (y, b) = (sol.stop_level(), sol.threshold());
        let kind = if b <= y { StrategyKind::Immediate } else { StrategyKind::FixedTwoSided { y, b } };
        Self::new(kind, x, x)
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// Paths still running at the horizon (valued at zero).
    pub unresolved: usize,
}

impl McEstimate {
    /// `(self - value) / stderr`; zero when both sides agree exactly.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = self.mean - value;
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Estimates at `dt` and `dt / 2` with independent seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub coarse: McEstimate,
    pub fine: McEstimate,
}

impl Refinement {
    /// Difference in units of the combined standard error.
    pub fn discrepancy(&self) -> f64 {
        let se = self.coarse.stderr.hypot(self.fine.stderr);
        let d = self.coarse.mean - self.fine.mean;
        if d == 0.0 {
            0.0
        } else {
            d.abs() / se
        }
    }

    /// Whether the two step sizes agree within two combined standard errors.
    pub fn consistent(&self) -> bool {
        self.discrepancy() <= 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitEstimate {
    pub down: McEstimate,
    pub up: McEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalEstimate {
    pub mean: f64,
    pub mean_stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
}

/// One-step transition in the simulation variable `s` (`ln x` for exp-OU,
/// `x` otherwise).
struct Stepper<'a> {
    model: &'a DiffusionModel,
    dt: f64,
    log: bool,
    /// exp-OU: `theta`, `e^{-lambda dt}`, conditional sd, `sigma^2 dt`.
    theta: f64,
    decay: f64,
    sd: f64,
    var: f64,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a DiffusionModel, dt: f64) -> Self {
        match model.backend() {
            Backend::ExpOu(p) => {
                let decay = (-p.lambda * dt).exp();
                let sd = p.sigma * (-(-2.0 * p.lambda * dt).exp_m1() / (2.0 * p.lambda)).sqrt();
                Self { model, dt, log: true, theta: p.theta, decay, sd, var: p.sigma * p.sigma * dt }
            }
            Backend::Numeric => Self { model, dt, log: false, theta: 0.0, decay: 1.0, sd: 0.0, var: 0.0 },
        }
    }

    fn to_s(&self, x: f64) -> f64 {
        if self.log {
            x.ln()
        } else {
            x
        }
    }

    fn to_x(&self, s: f64) -> f64 {
        if self.log {
            s.exp()
        } else {
            s
        }
    }

    fn step(&self, s: f64, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        if self.log {
            self.theta + (s - self.theta) * self.decay + self.sd * z
        } else {
            let v = self.model.volatility(s);
            s + self.model.drift(s) * self.dt + v * self.dt.sqrt() * z
        }
    }

    /// Local bridge variance over one step started at `s`.
    fn bridge_var(&self, s: f64) -> f64 {
        if self.log {
            self.var
        } else {
            let v = self.model.volatility(s);
            v * v * self.dt
        }
    }
}

/// Uniform on `(0, 1]`.
fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.gen::<f64>()
}

enum Lower<'a> {
    None,
    Fixed(f64),
    Trailing(&'a FloorSpec),
}

/// Outcome of one path segment.
enum Exit {
    /// Stopped after `steps` steps at price `x`; `upper` tells which side.
    Stopped { steps: usize, x: f64, upper: bool },
    Unresolved { x: f64 },
}

/// Runs a path from `(x, m)` until it reaches `upper` (from below) or the
/// lower level, for at most `max_steps` steps.
fn run(
    st: &Stepper,
    x: f64,
    m: f64,
    upper: Option<f64>,
    lower: &Lower,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Exit {
    let mut s = st.to_s(x);
    let up = upper.map(|u| st.to_s(u));
    let track = matches!(lower, Lower::Trailing(_));
    let mut mx = st.to_s(m);
    let level = |mx: f64| match lower {
        Lower::None => f64::NEG_INFINITY,
        Lower::Fixed(y) => st.to_s(*y),
        Lower::Trailing(f) => st.to_s(f.apply(st.to_x(mx))),
    };
    let mut low = level(mx);
    for k in 1..=max_steps {
        let s1 = st.step(s, rng);
        let v = st.bridge_var(s);
        let band = NEAR * v.sqrt();
        let top = s.max(s1);
        let near_max = track && top > mx - band;
        let near_up = up.is_some_and(|u| top > u - band);
        if near_max || near_up {
            // maximum of the bridge from s to s1
            let d = s1 - s;
            let bm = 0.5 * (s + s1 + (d * d - 2.0 * v * open_uniform(rng).ln()).sqrt());
            if let Some(u) = up {
                if bm >= u {
                    return Exit::Stopped { steps: k, x: st.to_x(u), upper: true };
                }
            }
            if track && bm > mx {
                mx = bm;
                low = level(mx);
            }
        }
        if s1 <= low {
            return Exit::Stopped { steps: k, x: st.to_x(low), upper: false };
        }
        if s.min(s1) - low < band {
            let p = (-2.0 * (s - low) * (s1 - low) / v).exp();
            if rng.gen::<f64>() < p {
                return Exit::Stopped { steps: k, x: st.to_x(low), upper: false };
            }
        }
        s = s1;
    }
    Exit::Unresolved { x: st.to_x(s) }
}

/// Discounted payoff of a liquidation rule from `(x, m)`, and the price at
/// the horizon for paths that were still running.
fn liquidate(
    st: &Stepper,
    h: &dyn Reward,
    kind: &StrategyKind,
    x: f64,
    m: f64,
    q: f64,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, Option<f64>) {
    let (upper, lower) = match kind {
        StrategyKind::Immediate => return (h.value(x), None),
        StrategyKind::PlainTrailing { floor } => (None, Lower::Trailing(floor)),
        StrategyKind::BarrierOrTrailing { b, floor } => (Some(*b), Lower::Trailing(floor)),
        StrategyKind::FixedTwoSided { y, b } => (b.is_finite().then_some(*b), Lower::Fixed(*y)),
        StrategyKind::AcquisitionThenLiquidate { .. } => unreachable!("nested acquisition"),
    };
    if upper.is_some_and(|u| x >= u) {
        return (h.value(x), None);
    }
    let floor_now = match &lower {
        Lower::Fixed(y) => *y,
        Lower::Trailing(f) => f.apply(m),
        Lower::None => f64::NEG_INFINITY,
    };
    if x <= floor_now {
        return (h.value(x), None);
    }
    match run(st, x, m, upper, &lower, max_steps, rng) {
        Exit::Stopped { steps, x, .. } => ((-q * steps as f64 * st.dt).exp() * h.value(x), None),
        Exit::Unresolved { x } => (0.0, Some(x)),
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Totals {
    sum: [f64; 2],
    sumsq: [f64; 2],
    n: usize,
    unresolved: usize,
    /// Sum over unresolved paths of `e^{-qT} |h(X_T)|`.
    residual: f64,
}

impl Totals {
    fn push(&mut self, v: [f64; 2]) {
        for i in 0..2 {
            self.sum[i] += v[i];
            self.sumsq[i] += v[i] * v[i];
        }
        self.n += 1;
    }

    fn merge(mut self, o: &Totals) -> Totals {
        for i in 0..2 {
            self.sum[i] += o.sum[i];
            self.sumsq[i] += o.sumsq[i];
        }
        self.n += o.n;
        self.unresolved += o.unresolved;
        self.residual += o.residual;
        self
    }

    fn estimate(&self, i: usize) -> McEstimate {
        let n = self.n as f64;
        let mean = self.sum[i] / n;
        let var = ((self.sumsq[i] / n - mean * mean).max(0.0)) * n / (n - 1.0).max(1.0);
        McEstimate { mean, stderr: (var / n).sqrt(), n_paths: self.n, unresolved: self.unresolved }
    }

    /// Horizon error when too many paths are unresolved and the mass they
    /// could carry is not negligible against the estimate.
    fn check_horizon(&self, scale: f64) -> Result<()> {
        let frac = self.unresolved as f64 / self.n as f64;
        let residual = self.residual / self.n as f64;
        if frac >= UNRESOLVED_FRACTION && residual > 1e-4 * scale.abs().max(1e-12) {
            return Err(Error::Horizon { unresolved: frac, residual });
        }
        Ok(())
    }
}

/// Runs `cfg.n_paths` paths of `path` in seeded batches and merges the totals
/// in batch order.
fn run_batches<F>(cfg: &PathConfig, path: F) -> Totals
where
    F: Fn(&mut ChaCha8Rng, &mut Totals) + Sync,
{
    let batches = cfg.n_paths.div_ceil(BATCH);
    let parts: Vec<Totals> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let mut t = Totals::default();
            let count = BATCH.min(cfg.n_paths - b * BATCH);
            for _ in 0..count {
                path(&mut rng, &mut t);
            }
            t
        })
        .collect();
    parts.iter().fold(Totals::default(), |acc, t| acc.merge(t))
}

/// `E[e^{-q tau} h(X_tau)]` under `strat`.
pub fn simulate_value(cfg: &PathConfig, reward: &dyn Reward, strat: &StrategySpec, q: f64) -> Result<McEstimate> {
    cfg.validate()?;
    if !(q > 0.0) {
        return Err(Error::Domain(format!("discount rate must be positive, got {q}")));
    }
    if let Some(v) = settled_at_start(&strat.kind, strat.x0, strat.m0) {
        return Ok(McEstimate { mean: reward.value(v), stderr: 0.0, n_paths: cfg.n_paths, unresolved: 0 });
    }
    let st = Stepper::new(&cfg.model, cfg.dt);
    let n_steps = cfg.steps();
    let tail = (-q * cfg.horizon).exp();
    let totals = run_batches(cfg, |rng, t| {
        let (v, open) = match &strat.kind {
            StrategyKind::AcquisitionThenLiquidate { lo, hi, q_hat, cost, inner } => {
                acquire(&st, reward, (*lo, *hi), *q_hat, *cost, inner, strat.x0, q, n_steps, rng)
            }
            kind => liquidate(&st, reward, kind, strat.x0, strat.m0, q, n_steps, rng),
        };
        if let Some(x) = open {
            t.unresolved += 1;
            t.residual += tail * reward.value(x).abs();
        }
        t.push([v, 0.0]);
    });
    let est = totals.estimate(0);
    totals.check_horizon(est.mean)?;
    Ok(est)
}

/// Sale price when a liquidation rule stops at time zero.
fn settled_at_start(kind: &StrategyKind, x: f64, m: f64) -> Option<f64> {
    let stops = match kind {
        StrategyKind::Immediate => true,
        StrategyKind::PlainTrailing { floor } => x <= floor.apply(m),
        StrategyKind::BarrierOrTrailing { b, floor } => x >= *b || x <= floor.apply(m),
        StrategyKind::FixedTwoSided { y, b } => x <= *y || x >= *b,
        StrategyKind::AcquisitionThenLiquidate { .. } => false,
    };
    stops.then_some(x)
}

#[allow(clippy::too_many_arguments)]
fn acquire(
    st: &Stepper,
    h: &dyn Reward,
    (lo, hi): (f64, f64),
    q_hat: f64,
    cost: f64,
    inner: &StrategyKind,
    x0: f64,
    q: f64,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, Option<f64>) {
    let (steps, x) = if x0 >= lo && x0 <= hi {
        (0, x0)
    } else {
        let exit = if x0 > hi {
            run(st, x0, x0, None, &Lower::Fixed(hi), max_steps, rng)
        } else {
            run(st, x0, x0, Some(lo), &Lower::None, max_steps, rng)
        };
        match exit {
            Exit::Stopped { steps, x, .. } => (steps, x),
            Exit::Unresolved { x } => return (0.0, Some(x)),
        }
    };
    let (v, open) = liquidate(st, h, inner, x, x, q, max_steps, rng);
    ((-q_hat * steps as f64 * st.dt).exp() * (v - h.value(x) - cost), open)
}

/// Both discounted exit indicators of `(y, z)` from `x0`.
pub fn simulate_exit_probabilities(cfg: &PathConfig, y: f64, z: f64, q: f64, x0: f64) -> Result<ExitEstimate> {
    cfg.validate()?;
    if !(y <= x0 && x0 <= z && y < z) {
        return Err(Error::Domain(format!("need y <= x0 <= z with y < z, got ({y}, {x0}, {z})")));
    }
    if !(q > 0.0) {
        return Err(Error::Domain(format!("discount rate must be positive, got {q}")));
    }
    let exact = |down: f64, up: f64| {
        let e = |m| McEstimate { mean: m, stderr: 0.0, n_paths: cfg.n_paths, unresolved: 0 };
        Ok(ExitEstimate { down: e(down), up: e(up) })
    };
    if x0 == y {
        return exact(1.0, 0.0);
    }
    if x0 == z {
        return exact(0.0, 1.0);
    }
    let st = Stepper::new(&cfg.model, cfg.dt);
    let n_steps = cfg.steps();
    let tail = (-q * cfg.horizon).exp();
    let totals = run_batches(cfg, |rng, t| match run(&st, x0, x0, Some(z), &Lower::Fixed(y), n_steps, rng) {
        Exit::Stopped { steps, upper, .. } => {
            let d = (-q * steps as f64 * st.dt).exp();
            t.push(if upper { [0.0, d] } else { [d, 0.0] });
        }
        Exit::Unresolved { .. } => {
            t.unresolved += 1;
            t.residual += tail;
            t.push([0.0, 0.0]);
        }
    });
    let (down, up) = (totals.estimate(0), totals.estimate(1));
    totals.check_horizon(down.mean + up.mean)?;
    Ok(ExitEstimate { down, up })
}

/// Sample mean and variance of the simulation variable at `horizon` with no
/// stopping (`ln X_T` for exp-OU).
pub fn simulate_log_marginal(cfg: &PathConfig, x0: f64) -> Result<MarginalEstimate> {
    cfg.validate()?;
    let st = Stepper::new(&cfg.model, cfg.dt);
    let n_steps = cfg.steps();
    // accumulate s - s0 to keep the sums well scaled
    let s0 = st.to_s(x0);
    let totals = run_batches(cfg, |rng, t| {
        let mut s = s0;
        for _ in 0..n_steps {
            s = st.step(s, rng);
        }
        let d = s - s0;
        t.push([d, d * d]);
    });
    let n = totals.n as f64;
    let m1 = totals.sum[0] / n;
    let m2 = totals.sum[1] / n;
    let variance = (m2 - m1 * m1) * n / (n - 1.0);
    // standard error of a Gaussian sample variance
    let variance_stderr = variance * (2.0 / (n - 1.0)).sqrt();
    Ok(MarginalEstimate {
        mean: s0 + m1,
        mean_stderr: (variance / n).sqrt(),
        variance,
        variance_stderr,
    })
}

/// Runs `simulate_value` at `cfg.dt` and at half the step with a different seed.
pub fn simulate_refined(cfg: &PathConfig, reward: &dyn Reward, strat: &StrategySpec, q: f64) -> Result<Refinement> {
    let coarse = simulate_value(cfg, reward, strat, q)?;
    let fine_cfg = PathConfig { seed: cfg.seed ^ 0x9e37_79b9_7f4a_7c15, ..cfg.refined() };
    let fine = simulate_value(&fine_cfg, reward, strat, q)?;
    Ok(Refinement { coarse, fine })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{two_sided_exit, FundamentalPair, LinearReward};

    fn cfg(n: usize) -> PathConfig {
        let m = DiffusionModel::exp_ou(0.6, 1.0, 0.2).unwrap();
        PathConfig::new(m, 1e-2, PathConfig::horizon_for_rate(0.05), 7, n).unwrap()
    }

    #[test]
    fn immediate_and_started_on_barrier() {
        let h = LinearReward::new(0.02);
        let c = cfg(100);
        let s = StrategySpec::new(StrategyKind::Immediate, 2.0, 2.0).unwrap();
        let e = simulate_value(&c, &h, &s, 0.05).unwrap();
        assert_eq!((e.mean, e.stderr), (1.98, 0.0));
        let s = StrategySpec::new(StrategyKind::FixedTwoSided { y: 1.5, b: 3.0 }, 1.5, 1.5).unwrap();
        let e = simulate_value(&c, &h, &s, 0.05).unwrap();
        assert_eq!((e.mean, e.stderr), (1.48, 0.0));
        let e = simulate_exit_probabilities(&c, 1.5, 2.5, 0.05, 2.5).unwrap();
        assert_eq!((e.down.mean, e.up.mean, e.up.stderr), (0.0, 1.0, 0.0));
    }

    #[test]
    fn reproducible_for_a_seed() {
        let c = cfg(20_000);
        let a = simulate_exit_probabilities(&c, 1.5, 2.5, 0.05, 2.0).unwrap();
        let b = simulate_exit_probabilities(&c, 1.5, 2.5, 0.05, 2.0).unwrap();
        assert_eq!(a, b);
        let other = PathConfig { seed: 8, ..c };
        assert_ne!(a, simulate_exit_probabilities(&other, 1.5, 2.5, 0.05, 2.0).unwrap());
    }

    #[test]
    fn exit_transforms_agree_with_closed_form() {
        let c = cfg(100_000);
        let p = FundamentalPair::new(&c.model, 0.05).unwrap();
        let w = two_sided_exit(&p, 2.0, 1.5, 2.5).unwrap();
        let e = simulate_exit_probabilities(&c, 1.5, 2.5, 0.05, 2.0).unwrap();
        assert!(e.down.z_score(w.down).abs() < 4.0, "{:?} vs {}", e.down, w.down);
        assert!(e.up.z_score(w.up).abs() < 4.0, "{:?} vs {}", e.up, w.up);
    }

    #[test]
    fn log_marginal_is_gaussian_ou() {
        let m = DiffusionModel::exp_ou(0.6, 1.0, 0.2).unwrap();
        let c = PathConfig::new(m, 1e-2, 1.0, 3, 200_000).unwrap();
        let r = simulate_log_marginal(&c, 2.0).unwrap();
        let decay = (-0.6f64).exp();
        let mean = 1.0 + (2f64.ln() - 1.0) * decay;
        let var = 0.04 * (1.0 - decay * decay) / 1.2;
        assert!(((r.mean - mean) / r.mean_stderr).abs() < 4.0);
        assert!(((r.variance - var) / r.variance_stderr).abs() < 4.0);
    }

    #[test]
    fn horizon_error_when_paths_never_stop() {
        let h = LinearReward::new(0.02);
        let m = DiffusionModel::exp_ou(0.6, 1.0, 0.2).unwrap();
        let c = PathConfig::new(m, 1e-2, 0.5, 1, 5_000).unwrap();
        let s = StrategySpec::new(StrategyKind::FixedTwoSided { y: 0.5, b: 20.0 }, 2.0, 2.0).unwrap();
        assert!(matches!(simulate_value(&c, &h, &s, 0.05), Err(Error::Horizon { .. })));
    }
}
