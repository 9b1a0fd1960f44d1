use std::fmt;

/// Clauses of the standing shape conditions on the transformed reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionClause {
    /// H convex then concave with a single switch point z0.
    ConvexConcaveShape,
    /// H(0+) = 0.
    VanishingAtOrigin,
    /// sup_{z>z0} H(z)/z exceeds the slope of H at infinity.
    SlopeAtInfinity,
    /// The reward is positive somewhere.
    PositiveSomewhere,
    /// Acquisition objective is concave then convex on the continuation region.
    AcquisitionShape,
}

impl fmt::Display for AssumptionClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AssumptionClause::ConvexConcaveShape => "H convex on (0, z0) and concave on (z0, inf)",
            AssumptionClause::VanishingAtOrigin => "H(0+) = 0",
            AssumptionClause::SlopeAtInfinity => "sup_{z>z0} H(z)/z > H'(inf)",
            AssumptionClause::PositiveSomewhere => "h > 0 somewhere on the interval",
            AssumptionClause::AcquisitionShape => "K concave then convex on (y, b(y))",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("degenerate interval: lower and upper barrier coincide at {0}")]
    DegenerateInterval(f64),
    #[error("assumption failed ({clause}): {detail}")]
    AssumptionFailure { clause: AssumptionClause, detail: String },
    #[error("unsupported reward: {0}")]
    UnsupportedReward(String),
    #[error("no finite threshold: secant slope keeps increasing up to z = {0}")]
    NoFiniteThreshold(f64),
    #[error("ill-conditioned floor: z - floor(z) = {gap:e} at z = {z}")]
    IllConditionedFloor { z: f64, gap: f64 },
    #[error("accuracy not reached: achieved bound {achieved:e}, target {target:e}")]
    AccuracyNotReached { achieved: f64, target: f64 },
    #[error("position already stopped: price at or below the floor {floor}")]
    AlreadyStopped { floor: f64 },
    #[error("invalid floor: {0}")]
    InvalidFloor(String),
    #[error("simulation horizon too short: {unresolved:.4} of paths unresolved, residual bound {residual:e}")]
    Horizon { unresolved: f64, residual: f64 },
    #[error("root not bracketed on [{a}, {b}] (f = {fa}, {fb})")]
    NoBracket { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
