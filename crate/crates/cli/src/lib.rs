//! Configuration loading and the `solve`, `curves`, `sweep` and `verify`
//! commands behind the `trailstop` binary.

pub mod commands;
pub mod config;

pub use commands::{curves, solve, sweep, verify, Check, Plan, SolveReport, SweepRow, VerifyOptions};
pub use config::RunConfig;

/// Formats with 12 significant digits, switching to exponent notation for
/// very small or large magnitudes.
pub fn fmt_sig(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..12).contains(&mag) {
        format!("{:.*}", (11 - mag) as usize, v)
    } else {
        format!("{v:.11e}")
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(2.884463136239), "2.88446313624");
        assert_eq!(fmt_sig(0.05), "0.0500000000000");
        assert_eq!(fmt_sig(-1234.5), "-1234.50000000");
        assert_eq!(fmt_sig(1.5e-7), "1.50000000000e-7");
        assert_eq!(fmt_sig(0.0), "0");
    }
}
