//! Run configuration, read from a TOML file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use trailstop::diffusion::{Boundary, DiffusionModel, FundamentalPair, LinearReward, Reward, RewardTransform, TabulatedReward};
use trailstop::simulate::PathConfig;
use trailstop::trailing_stop::FloorSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub reward: RewardConfig,
    pub rates: Rates,
    pub costs: Costs,
    pub floor: FloorConfig,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `dX = X (lambda (theta - ln X) + sigma^2 / 2) dt + sigma X dW`.
    ExpOu {
        lambda: f64,
        theta: f64,
        sigma: f64,
        #[serde(default = "default_backend")]
        backend: BackendChoice,
    },
    /// Drift and volatility interpolated linearly between tabulated points
    /// (flat outside), on `(lower, upper)` with natural boundaries.
    Tabulated {
        x: Vec<f64>,
        drift: Vec<f64>,
        vol: Vec<f64>,
        lower: f64,
        upper: f64,
        window: [f64; 2],
    },
}

fn default_backend() -> BackendChoice {
    BackendChoice::ClosedForm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardConfig {
    /// `h(x) = x - c0` with `c0` from the costs block.
    Linear,
    /// Cubic spline through `(x, h)`.
    Tabulated { x: Vec<f64>, h: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rates {
    pub q: f64,
    /// Discount rate while waiting to buy; defaults to `q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Costs {
    /// Cost of selling.
    pub c0: f64,
    /// Cost of buying.
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FloorConfig {
    Percentage { alpha: f64 },
    Absolute { a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    Sigma,
    Lambda,
    C0,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Alpha => "alpha",
            SweepParameter::Sigma => "sigma",
            SweepParameter::Lambda => "lambda",
            SweepParameter::C0 => "c0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Defaults to the horizon where `e^{-qT} = 1e-4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Also run every point at `dt / 2`.
    #[serde(default = "yes")]
    pub refine: bool,
    /// `(x, running max)` points for `v_f` and `g_f`.
    #[serde(default)]
    pub trailing_points: Vec<[f64; 2]>,
    /// `(y, x)` points for the fixed stop-loss value `V_y(x)`.
    #[serde(default)]
    pub fixed_points: Vec<[f64; 2]>,
    /// `(x, y, z)` triples for the two-sided exit transforms.
    #[serde(default)]
    pub exit_points: Vec<[f64; 3]>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), format: OutputFormat::Csv }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn q_hat(&self) -> f64 {
        self.rates.q_hat.unwrap_or(self.rates.q)
    }

    /// Checks every numeric constraint that can be checked without solving,
    /// and builds the model, floor and reward once to let their own
    /// validation run.
    pub fn validate(&self) -> Result<()> {
        let q = self.rates.q;
        ensure!(q > 0.0 && q.is_finite(), "rates.q must be positive, got {q}");
        let qh = self.q_hat();
        ensure!(qh > 0.0 && qh <= q, "rates.q_hat must lie in (0, q], got {qh}");
        ensure!(self.costs.c0 >= 0.0 && self.costs.c >= 0.0, "costs must be non-negative");
        let g = &self.grid;
        ensure!(g.x_min > 0.0 && g.x_min < g.x_max && g.points >= 3, "grid needs 0 < x_min < x_max and at least 3 points");
        if let Some(s) = &self.sweep {
            ensure!(s.steps >= 2 && s.from < s.to, "sweep needs from < to and at least 2 steps");
        }
        if let Some(mc) = &self.mc {
            ensure!(mc.dt > 0.0 && mc.n_paths > 0, "mc needs dt > 0 and n_paths > 0");
            for p in &mc.trailing_points {
                ensure!(p[0] <= p[1], "trailing point {p:?}: price above the running maximum");
            }
            for p in &mc.exit_points {
                ensure!(p[1] <= p[0] && p[0] <= p[2] && p[1] < p[2], "exit point {p:?}: need y <= x <= z");
            }
        }
        self.build_model()?;
        self.build_floor()?;
        self.build_reward()?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<DiffusionModel> {
        Ok(match &self.model {
            ModelConfig::ExpOu { lambda, theta, sigma, backend } => {
                let m = DiffusionModel::exp_ou(*lambda, *theta, *sigma)?;
                match backend {
                    BackendChoice::ClosedForm => m,
                    BackendChoice::Numeric => m.with_numeric_backend(),
                }
            }
            ModelConfig::Tabulated { x, drift, vol, lower, upper, window } => {
                ensure!(x.len() >= 2 && drift.len() == x.len() && vol.len() == x.len(), "model tables must have equal length >= 2");
                ensure!(x.windows(2).all(|w| w[1] > w[0]), "model.x must be increasing");
                ensure!(vol.iter().all(|v| *v > 0.0), "model.vol must be positive");
                let (xs, ds, vs) = (Arc::new(x.clone()), drift.clone(), vol.clone());
                let xs2 = xs.clone();
                DiffusionModel::generic(
                    (*lower, *upper),
                    (Boundary::Natural, Boundary::Natural),
                    move |p| lerp(&xs, &ds, p),
                    move |p| lerp(&xs2, &vs, p),
                    (window[0], window[1]),
                )?
            }
        })
    }

    pub fn build_floor(&self) -> Result<FloorSpec> {
        Ok(match self.floor {
            FloorConfig::Percentage { alpha } => FloorSpec::percentage(alpha)?,
            FloorConfig::Absolute { a } => FloorSpec::absolute(a)?,
        })
    }

    pub fn build_reward(&self) -> Result<Arc<dyn Reward>> {
        Ok(match &self.reward {
            RewardConfig::Linear => Arc::new(LinearReward::new(self.costs.c0)),
            RewardConfig::Tabulated { x, h } => Arc::new(TabulatedReward::new(x.clone(), h.clone())?),
        })
    }

    pub fn build_transform(&self) -> Result<RewardTransform> {
        let pair = FundamentalPair::new(&self.build_model()?, self.rates.q)?;
        Ok(RewardTransform::from_arc(&pair, self.build_reward()?)?)
    }

    pub fn path_config(&self, seed: Option<u64>) -> Result<PathConfig> {
        let Some(mc) = &self.mc else {
            bail!("the configuration has no [mc] block");
        };
        let horizon = mc.horizon.unwrap_or_else(|| PathConfig::horizon_for_rate(self.rates.q));
        Ok(PathConfig::new(self.build_model()?, mc.dt, horizon, seed.unwrap_or(mc.seed), mc.n_paths)?)
    }

    /// Copy with one sweep parameter replaced.
    pub fn with_parameter(&self, p: SweepParameter, v: f64) -> Result<Self> {
        let mut out = self.clone();
        match (p, &mut out.model, &mut out.floor) {
            (SweepParameter::Alpha, _, FloorConfig::Percentage { alpha }) => *alpha = v,
            (SweepParameter::Alpha, _, _) => bail!("alpha sweeps need a percentage floor"),
            (SweepParameter::Sigma, ModelConfig::ExpOu { sigma, .. }, _) => *sigma = v,
            (SweepParameter::Lambda, ModelConfig::ExpOu { lambda, .. }, _) => *lambda = v,
            (SweepParameter::Sigma | SweepParameter::Lambda, _, _) => bail!("sigma and lambda sweeps need the exp_ou model"),
            (SweepParameter::C0, _, _) => out.costs.c0 = v,
        }
        out.validate()?;
        Ok(out)
    }
}

fn lerp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&s| s <= x) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + w * (ys[i + 1] - ys[i])
}
