//! Gamma-function ratios and the closed-form moments built from them.
//!
//! Everything goes through log-Gamma differences. The difference
//! `ln Γ(x+s) − ln Γ(x)` is evaluated with an upward shift followed by the
//! Stirling series written in `ln_1p` form, so large arguments do not lose
//! digits to cancellation between two big logarithms.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Arguments below this are shifted upward before the Stirling series.
const STIRLING_MIN: f64 = 16.0;

/// `B_{2k} / (2k (2k-1))` for k = 1..=7.
const STIRLING_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

fn stirling_tail(y: f64) -> f64 {
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut pow = inv;
    let mut acc = 0.0;
    for c in STIRLING_COEFFS {
        acc += c * pow;
        pow *= inv2;
    }
    acc
}

/// Natural log of the Gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires a positive argument, got {x}");
    let mut y = x;
    let mut shift = 0.0;
    while y < STIRLING_MIN {
        shift += y.ln();
        y += 1.0;
    }
    (y - 0.5) * y.ln() - y + 0.5 * (2.0 * PI).ln() + stirling_tail(y) - shift
}

/// `ln Γ(x+s) − ln Γ(x) − s ln x`, the log of `Γ(x+s) / (x^s Γ(x))`.
///
/// Requires `x > 0` and `x + s > 0`. For large `x` the result is `O(s²/x)` and
/// is returned with small absolute error, which is what makes
/// `E|Z|^p − 1 = O(1/d)` computable to full relative precision.
pub fn ln_gamma_ratio_scaled(x: f64, s: f64) -> f64 {
    assert!(x > 0.0 && x + s > 0.0, "ln_gamma_ratio_scaled({x}, {s}) out of domain");
    if s == 0.0 || s == 1.0 {
        // Γ(x+1) = x Γ(x)
        return 0.0;
    }
    if s < 0.0 {
        let y = x + s;
        return -ln_gamma_ratio_scaled(y, -s) + s * (y / x).ln();
    }
    let mut y = x;
    let mut correction = 0.0;
    while y < STIRLING_MIN {
        correction += (s / y).ln_1p();
        y += 1.0;
    }
    let rel = (s / y).ln_1p();
    let series = stirling_tail(y + s) - stirling_tail(y);
    let shift_log = if y == x { 0.0 } else { s * (y / x).ln() };
    (y + s - 0.5) * rel - s + shift_log + series - correction
}

/// `ln Γ(x+s) − ln Γ(x)`.
pub fn ln_gamma_ratio(x: f64, s: f64) -> f64 {
    ln_gamma_ratio_scaled(x, s) + s * x.ln()
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

/// `E|Z|^p` for `Z ~ N(0, I_d / d)`.
pub fn gaussian_abs_moment(p: f64, d: usize) -> Result<f64> {
    check_dim(d)?;
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::InvalidExponent { value: p, reason: "Gaussian moment needs p >= 0" });
    }
    Ok(ln_gamma_ratio_scaled(d as f64 / 2.0, p / 2.0).exp())
}

/// `E|Z|^p − 1`, accurate when it is small (large `d` or `p` near 2).
pub fn gaussian_abs_moment_minus_one(p: f64, d: usize) -> Result<f64> {
    check_dim(d)?;
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::InvalidExponent { value: p, reason: "Gaussian moment needs p >= 0" });
    }
    Ok(ln_gamma_ratio_scaled(d as f64 / 2.0, p / 2.0).exp_m1())
}

/// Gaussian moment for general real `q > -d` (the chi law has mass near zero,
/// so negative orders above `-d` are finite).
pub fn gaussian_abs_moment_signed(q: f64, d: usize) -> f64 {
    ln_gamma_ratio_scaled(d as f64 / 2.0, q / 2.0).exp()
}

/// Normalizing constant `A_d = √π Γ((d−1)/2) / Γ(d/2)` of the marginal density.
pub fn theta_normalizer(d: usize) -> f64 {
    let x = (d as f64 - 1.0) / 2.0;
    PI.sqrt() * (-ln_gamma_ratio(x, 0.5)).exp()
}

/// Density of `θ = ⟨ξ, e₁⟩` for `ξ` uniform on `S^{d−1}`.
pub fn theta_density(x: f64, d: usize) -> Result<f64> {
    check_dim(d)?;
    if !(x > -1.0 && x < 1.0) {
        return Err(Error::Domain(x));
    }
    let alpha = (d as f64 - 3.0) / 2.0;
    Ok(((1.0 - x) * (1.0 + x)).powf(alpha) / theta_normalizer(d))
}

/// `E|θ|^m = Γ((m+1)/2) Γ(d/2) / (√π Γ((d+m)/2))` for real `m > -1`.
pub fn theta_abs_moment(m: f64, d: usize) -> f64 {
    let half = (m + 1.0) / 2.0;
    (ln_gamma_ratio(0.5, half - 0.5) - ln_gamma_ratio(d as f64 / 2.0, m / 2.0)).exp()
}

/// `E(1+θ)^s = 2^s Γ((d−1)/2+s) Γ(d−1) / (Γ(d−1+s) Γ((d−1)/2))`.
///
/// Finite iff `s > (1−d)/2`.
pub fn theta_shifted_power_mean(s: f64, d: usize) -> f64 {
    let h = (d as f64 - 1.0) / 2.0;
    let full = d as f64 - 1.0;
    (s * 2f64.ln() + ln_gamma_ratio(h, s) - ln_gamma_ratio(full, s)).exp()
}

/// `E(R₁R₂)^m` for the product law with density `(d(d+2)/2) x^{d−1}(1−x²)` on (0,1).
pub fn product_radius_moment(m: f64, d: usize) -> f64 {
    let d = d as f64;
    d * (d + 2.0) / ((d + m) * (d + m + 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-15);
        assert!(ln_gamma(2.0).abs() < 1e-15);
        assert!((ln_gamma(0.5) - 0.5 * PI.ln()).abs() < 1e-14);
        // ln(10!) = ln(3628800)
        assert!(rel(ln_gamma(11.0), 3_628_800f64.ln()) < 1e-15);
    }

    #[test]
    fn gaussian_moment_examples() {
        assert!((gaussian_abs_moment(2.0, 7).unwrap() - 1.0).abs() < 1e-15);
        assert!((gaussian_abs_moment(4.0, 3).unwrap() - 5.0 / 3.0).abs() < 1e-14);
        assert_eq!(gaussian_abs_moment(0.0, 5).unwrap(), 1.0);
        assert!(gaussian_abs_moment(1.0, 1).is_err());
        assert!(gaussian_abs_moment(-1.0, 3).is_err());
    }

    #[test]
    fn minus_one_form_is_accurate_for_large_d() {
        for d in [64usize, 256, 1024, 4096] {
            let v = gaussian_abs_moment_minus_one(4.0, d).unwrap();
            assert!(rel(v * d as f64, 2.0) < 1e-12, "d={d}: {}", v * d as f64);
        }
    }

    #[test]
    fn negative_shift_ratio_matches_reciprocal() {
        let a = ln_gamma_ratio(3.7, -1.2);
        let b = ln_gamma(2.5) - ln_gamma(3.7);
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn theta_density_examples() {
        assert!((theta_density(0.0, 3).unwrap() - 0.5).abs() < 1e-15);
        assert!(theta_density(1.0, 3).is_err());
        assert!(theta_density(-1.2, 4).is_err());
        assert!((theta_normalizer(2) - PI).abs() < 1e-14);
    }

    #[test]
    fn theta_moments_closed_form() {
        for d in 2..12 {
            assert!(rel(theta_abs_moment(2.0, d), 1.0 / d as f64) < 1e-14);
            let fourth = 3.0 / (d as f64 * (d as f64 + 2.0));
            assert!(rel(theta_abs_moment(4.0, d), fourth) < 1e-14);
        }
    }

    #[test]
    fn shifted_power_mean_small_cases() {
        // E(1+θ) = 1, E(1+θ)^2 = 1 + 1/d
        for d in 2..8 {
            assert!(rel(theta_shifted_power_mean(1.0, d), 1.0) < 1e-14);
            assert!(rel(theta_shifted_power_mean(2.0, d), 1.0 + 1.0 / d as f64) < 1e-14);
        }
    }

    #[test]
    fn product_moment_at_d2() {
        assert!(rel(product_radius_moment(2.0, 2), 1.0 / 3.0) < 1e-15);
    }
}
