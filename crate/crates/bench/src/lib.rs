//! Shared setup for the criterion benchmarks in `benches/`.

use trailstop::diffusion::{DiffusionModel, FundamentalPair, LinearReward, RewardTransform};
use trailstop::trailing_stop::FloorSpec;

pub const LAMBDA: f64 = 0.6;
pub const THETA: f64 = 1.0;
pub const SIGMA: f64 = 0.2;
pub const Q: f64 = 0.05;
pub const C0: f64 = 0.02;
pub const ALPHA: f64 = 0.3;

pub fn model() -> DiffusionModel {
    DiffusionModel::exp_ou(LAMBDA, THETA, SIGMA).unwrap()
}

pub fn transform() -> RewardTransform {
    let pair = FundamentalPair::new(&model(), Q).unwrap();
    RewardTransform::new(&pair, LinearReward::new(C0)).unwrap()
}

pub fn floor() -> FloorSpec {
    FloorSpec::percentage(ALPHA).unwrap()
}
