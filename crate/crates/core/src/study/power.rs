use statrs::distribution::{ContinuousCDF, Normal};

use super::StudyError;

/// Per-group sample size for a two-sided two-sample comparison of means,
/// normal approximation: `n = 2 sigma^2 (z_{1-alpha/2} + z_power)^2 / delta^2`,
/// rounded up.
pub fn power_analysis(delta: f64, sigma: f64, alpha: f64, power: f64) -> Result<u64, StudyError> {
    let in_unit = |x: f64| x > 0.0 && x < 1.0;
    if !(delta > 0.0 && delta.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(StudyError::Domain(format!(
            "delta and sigma must be positive (got {delta}, {sigma})"
        )));
    }
    if !in_unit(alpha) || !in_unit(power) {
        return Err(StudyError::Domain(format!(
            "alpha and power must lie in (0, 1) (got {alpha}, {power})"
        )));
    }
    let z = Normal::standard();
    let z_alpha = z.inverse_cdf(1.0 - alpha / 2.0);
    let z_power = z.inverse_cdf(power);
    let n = 2.0 * sigma * sigma * (z_alpha + z_power).powi(2) / (delta * delta);
    // Guard against 63.000000001-style float noise pushing the ceiling up.
    Ok((n - 1e-9).ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_sd_effect() {
        // classical n ~ 15.7 / d^2 rule
        assert_eq!(power_analysis(0.5, 1.0, 0.05, 0.8).unwrap(), 63);
        assert_eq!(power_analysis(5.0, 10.0, 0.05, 0.8).unwrap(), 63);
    }

    #[test]
    fn recruitment_target() {
        let n = power_analysis(0.1, 0.977, 0.05, 0.8).unwrap();
        assert!((1498..=1502).contains(&n), "{n}");
    }

    #[test]
    fn coin_flip_power_drops_the_power_term() {
        let z = 1.959_963_984_540_054_f64;
        let expected = (2.0 * z * z / 0.25_f64 - 1e-9).ceil() as u64;
        assert_eq!(power_analysis(0.5, 1.0, 0.05, 0.5).unwrap(), expected);
    }

    #[test]
    fn domain_errors() {
        assert!(power_analysis(0.0, 1.0, 0.05, 0.8).is_err());
        assert!(power_analysis(0.1, -1.0, 0.05, 0.8).is_err());
        assert!(power_analysis(0.1, 1.0, 1.0, 0.8).is_err());
        assert!(power_analysis(0.1, 1.0, 0.05, 0.0).is_err());
    }
}
