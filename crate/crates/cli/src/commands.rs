use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use trailstop::diffusion::{two_sided_exit, RewardTransform};
use trailstop::fixed_stop::solve_fixed_stop;
use trailstop::numeric::lin_grid;
use trailstop::simulate::{simulate_exit_probabilities, simulate_value, McEstimate, PathConfig, StrategySpec};
use trailstop::trailing_stop::{
    solve_trailing_acquisition, solve_trailing_stop, FloorKind, FloorSpec, TrailingAcquisitionSolution, TrailingSolution,
};

use crate::config::{RunConfig, SweepParameter};
use crate::fmt_sig;

/// Everything `solve` computes for one configuration.
pub struct Plan {
    pub transform: RewardTransform,
    pub floor: FloorSpec,
    pub trailing: TrailingSolution,
    pub acquisition: TrailingAcquisitionSolution,
}

impl Plan {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let transform = cfg.build_transform()?;
        let floor = cfg.build_floor()?;
        let trailing = solve_trailing_stop(&transform, &floor)?;
        let acquisition = solve_trailing_acquisition(&trailing, cfg.q_hat(), cfg.costs.c)?;
        Ok(Self { transform, floor, trailing, acquisition })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x0: f64,
    pub z0: f64,
    pub x1: Option<f64>,
    pub z1: f64,
    pub b_star: Option<f64>,
    pub z_star: Option<f64>,
    pub z_bar: Option<f64>,
    pub b_lower: Option<f64>,
    pub uses_majorant: bool,
    pub convexity_switches: usize,
}

impl SolveReport {
    pub fn from_plan(plan: &Plan) -> Self {
        let r = plan.transform.report();
        let a = &plan.acquisition;
        Self {
            x0: r.x0,
            z0: r.z0,
            x1: r.x1,
            z1: r.z1,
            b_star: plan.trailing.threshold(),
            z_star: plan.trailing.z_threshold(),
            z_bar: a.z_entry(),
            b_lower: a.entry_threshold(),
            uses_majorant: a.uses_majorant(),
            convexity_switches: a.certificate().switches.len(),
        }
    }

    pub fn rows(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), fmt_sig);
        vec![
            ("x0", fmt_sig(self.x0)),
            ("z0", fmt_sig(self.z0)),
            ("x1", opt(self.x1)),
            ("z1", fmt_sig(self.z1)),
            ("b_f_star", opt(self.b_star)),
            ("psi_b_f_star", opt(self.z_star)),
            ("z_bar_f_star", opt(self.z_bar)),
            ("b_lower_f_star", opt(self.b_lower)),
            ("never_liquidate", (self.b_star.is_none()).to_string()),
            ("enter", (self.b_lower.is_some()).to_string()),
            ("acquisition_majorant", self.uses_majorant.to_string()),
            ("acquisition_convexity_switches", self.convexity_switches.to_string()),
        ]
    }
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .with_context(|| format!("creating {}", path.display()))
}

pub fn solve(cfg: &RunConfig, out: &Path, fixed_table: bool) -> Result<SolveReport> {
    let plan = Plan::build(cfg)?;
    let report = SolveReport::from_plan(&plan);
    let mut w = writer(out, "solve.csv")?;
    w.write_record(["quantity", "value"])?;
    for (k, v) in report.rows() {
        w.write_record([k, v.as_str()])?;
    }
    w.flush()?;
    if fixed_table {
        let mut w = writer(out, "fixed_stop_table.csv")?;
        w.write_record(["running_max", "floor", "b_of_floor"])?;
        for m in price_grid(cfg, &plan, &[]) {
            let y = plan.floor.apply(m);
            let b = solve_fixed_stop(&plan.transform, y)?.threshold();
            w.write_record([fmt_sig(m), fmt_sig(y), fmt_sig(b)])?;
        }
        w.flush()?;
    }
    Ok(report)
}

/// Configured price grid clipped to the solved range, with `extra` points
/// inserted.
fn price_grid(cfg: &RunConfig, plan: &Plan, extra: &[f64]) -> Vec<f64> {
    let lo = cfg.grid.x_min.max(plan.trailing.min_running_max());
    let mut xs = lin_grid(lo, cfg.grid.x_max, cfg.grid.points);
    xs.extend(extra.iter().copied().filter(|x| *x >= lo && *x <= cfg.grid.x_max));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Writes the five curve files and returns their names.
pub fn curves(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let plan = Plan::build(cfg)?;
    let t = &plan.transform;
    let tr = &plan.trailing;
    let acq = &plan.acquisition;
    let pair = t.pair();
    let b_star = tr.threshold();
    let b_low = acq.entry_threshold();
    let xs = price_grid(cfg, &plan, &[b_star, b_low].into_iter().flatten().collect::<Vec<_>>());
    let marker = |x: f64, at: Option<f64>, label: &str| if Some(x) == at { label.to_string() } else { String::new() };
    let mut names = Vec::new();

    let name = "transform_h_hf.csv";
    let mut w = writer(out, name)?;
    w.write_record(["z", "H", "H_f", "marker"])?;
    for &x in &xs {
        w.write_record([fmt_sig(pair.psi(x)), fmt_sig(t.big_h_at(x)), fmt_sig(tr.h_f_at(x)?), marker(x, b_star, "z_f_star")])?;
    }
    w.flush()?;
    names.push(name.to_string());

    let name = "value_h_vf.csv";
    let mut w = writer(out, name)?;
    w.write_record(["x", "h", "v_f", "marker"])?;
    for &x in &xs {
        w.write_record([fmt_sig(x), fmt_sig(t.h(x)), fmt_sig(tr.diagonal_value(x)?), marker(x, b_star, "b_f_star")])?;
    }
    w.flush()?;
    names.push(name.to_string());

    let name = "acquisition_transform.csv";
    let mut w = writer(out, name)?;
    w.write_record(["z", "H1", "majorant", "marker"])?;
    for &x in &xs {
        w.write_record([fmt_sig(acq.psi_hat(x)), fmt_sig(acq.objective(x)), fmt_sig(acq.majorant_at(x)), marker(x, b_low, "z_bar_f_star")])?;
    }
    w.flush()?;
    names.push(name.to_string());

    let name = "acquisition_value.csv";
    let mut w = writer(out, name)?;
    w.write_record(["x", "entry_reward", "v_f1", "marker"])?;
    for &x in &xs {
        w.write_record([fmt_sig(x), fmt_sig(acq.entry_reward(x)), fmt_sig(acq.value(x)), marker(x, b_low, "b_lower_f_star")])?;
    }
    w.flush()?;
    names.push(name.to_string());

    let name = "premium.csv";
    let mut w = writer(out, name)?;
    let drawdown = |x: f64| match plan.floor.kind() {
        FloorKind::Percentage(a) => a * x,
        FloorKind::Absolute(a) => a,
        FloorKind::Custom => x - plan.floor.apply(x),
    };
    w.write_record(["x", "p_f", "drawdown", "marker"])?;
    for &x in &xs {
        w.write_record([fmt_sig(x), fmt_sig(tr.premium(x, x)?), fmt_sig(drawdown(x)), marker(x, b_star, "b_f_star")])?;
    }
    w.flush()?;
    names.push(name.to_string());
    Ok(names)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub b_star: Option<f64>,
    pub x0: f64,
    pub b_lower: Option<f64>,
}

pub fn sweep_rows(cfg: &RunConfig) -> Result<(SweepParameter, Vec<SweepRow>)> {
    let s = cfg.sweep.as_ref().context("the configuration has no [sweep] block")?;
    let values = lin_grid(s.from, s.to, s.steps);
    let rows: Result<Vec<SweepRow>> = values
        .par_iter()
        .map(|&v| {
            let c = cfg.with_parameter(s.parameter, v)?;
            let plan = Plan::build(&c).with_context(|| format!("{} = {v}", s.parameter.name()))?;
            Ok(SweepRow {
                value: v,
                b_star: plan.trailing.threshold(),
                x0: plan.transform.x0(),
                b_lower: plan.acquisition.entry_threshold(),
            })
        })
        .collect();
    Ok((s.parameter, rows?))
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<SweepRow>> {
    let (p, rows) = sweep_rows(cfg)?;
    let mut w = writer(out, &format!("sweep_{}.csv", p.name()))?;
    w.write_record([p.name(), "b_f_star", "x0", "b_lower_f_star", "entry"])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, fmt_sig);
    for r in &rows {
        let entry = if r.b_lower.is_some() { "enter" } else { "no-entry" };
        w.write_record([fmt_sig(r.value), opt(r.b_star), fmt_sig(r.x0), opt(r.b_lower), entry.to_string()])?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub quantity: String,
    pub analytic: f64,
    pub coarse: McEstimate,
    pub fine: Option<McEstimate>,
}

impl Check {
    pub fn z(&self) -> f64 {
        self.coarse.z_score(self.analytic)
    }

    pub fn z_fine(&self) -> Option<f64> {
        self.fine.map(|f| f.z_score(self.analytic))
    }

    /// Coarse against fine, in combined standard errors.
    pub fn refinement_gap(&self) -> Option<f64> {
        self.fine.map(|f| {
            let d = self.coarse.mean - f.mean;
            if d == 0.0 {
                0.0
            } else {
                d.abs() / self.coarse.stderr.hypot(f.stderr)
            }
        })
    }

    pub fn passed(&self) -> bool {
        self.z().abs() <= 3.0 && self.z_fine().is_none_or(|z| z.abs() <= 3.0)
    }
}

/// Options for [`verify`] beyond the configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub seed: Option<u64>,
    /// Relative shift applied to `b_f*` in the simulated strategies (the
    /// analytic side is unchanged).
    pub threshold_shift: f64,
}

pub fn verify_checks(cfg: &RunConfig, opts: VerifyOptions) -> Result<Vec<Check>> {
    let mc = cfg.mc.as_ref().context("the configuration has no [mc] block")?;
    let plan = Plan::build(cfg)?;
    let t = &plan.transform;
    let tr = &plan.trailing;
    let q = cfg.rates.q;
    let reward = cfg.build_reward()?;
    let coarse_cfg = cfg.path_config(opts.seed)?;
    let fine_cfg = mc.refine.then(|| PathConfig { seed: coarse_cfg.seed ^ 0x5851_f42d_4c95_7f2d, ..coarse_cfg.refined() });
    let both = |strat: &StrategySpec| -> Result<(McEstimate, Option<McEstimate>)> {
        let a = simulate_value(&coarse_cfg, reward.as_ref(), strat, q)?;
        let b = fine_cfg.as_ref().map(|c| simulate_value(c, reward.as_ref(), strat, q)).transpose()?;
        Ok((a, b))
    };
    let mut checks = Vec::new();
    for &[x, y, z] in &mc.exit_points {
        let w = two_sided_exit(t.pair(), x, y, z)?;
        let a = simulate_exit_probabilities(&coarse_cfg, y, z, q, x)?;
        let b = fine_cfg.as_ref().map(|c| simulate_exit_probabilities(c, y, z, q, x)).transpose()?;
        let point = format!("x={x} y={y} z={z}");
        checks.push(Check { quantity: format!("exit_down {point}"), analytic: w.down, coarse: a.down, fine: b.map(|e| e.down) });
        checks.push(Check { quantity: format!("exit_up {point}"), analytic: w.up, coarse: a.up, fine: b.map(|e| e.up) });
    }
    for &[y, x] in &mc.fixed_points {
        let sol = solve_fixed_stop(t, y)?;
        let (a, b) = both(&StrategySpec::fixed_stop(&sol, x)?)?;
        checks.push(Check { quantity: format!("V_y y={y} x={x}"), analytic: sol.value(x)?, coarse: a, fine: b });
    }
    for &[x, m] in &mc.trailing_points {
        let mut strat = StrategySpec::optimal_trailing(tr, x, m)?;
        if opts.threshold_shift != 0.0 {
            if let trailstop::simulate::StrategyKind::BarrierOrTrailing { b, .. } = &mut strat.kind {
                *b *= 1.0 + opts.threshold_shift;
            }
        }
        let (va, vb) = both(&strat)?;
        let v = tr.value(x, m)?;
        checks.push(Check { quantity: format!("v_f x={x} m={m}"), analytic: v, coarse: va, fine: vb });
        let (ga, gb) = both(&StrategySpec::plain_trailing(tr, x, m)?)?;
        let g = tr.plain_value(x, m)?.value;
        checks.push(Check { quantity: format!("g_f x={x} m={m}"), analytic: g, coarse: ga, fine: gb });
        if opts.threshold_shift == 0.0 {
            checks.push(Check {
                quantity: format!("p_f x={x} m={m}"),
                analytic: v - g,
                coarse: difference(&va, &ga),
                fine: vb.zip(gb).map(|(v, g)| difference(&v, &g)),
            });
        }
    }
    Ok(checks)
}

/// Premium estimate from the two runs. Both share a seed and are positively
/// correlated, so adding the variances overstates the standard error.
fn difference(v: &McEstimate, g: &McEstimate) -> McEstimate {
    McEstimate {
        mean: v.mean - g.mean,
        stderr: v.stderr.hypot(g.stderr),
        n_paths: v.n_paths.min(g.n_paths),
        unresolved: v.unresolved.max(g.unresolved),
    }
}

pub fn verify(cfg: &RunConfig, out: &Path, opts: VerifyOptions) -> Result<Vec<Check>> {
    let checks = verify_checks(cfg, opts)?;
    let mut w = writer(out, "verify.csv")?;
    w.write_record(["quantity", "analytic", "mc", "stderr", "z", "mc_fine", "stderr_fine", "z_fine", "refinement_gap", "pass"])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, fmt_sig);
    for c in &checks {
        w.write_record([
            c.quantity.clone(),
            fmt_sig(c.analytic),
            fmt_sig(c.coarse.mean),
            fmt_sig(c.coarse.stderr),
            fmt_sig(c.z()),
            opt(c.fine.map(|f| f.mean)),
            opt(c.fine.map(|f| f.stderr)),
            opt(c.z_fine()),
            opt(c.refinement_gap()),
            c.passed().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(checks)
}
