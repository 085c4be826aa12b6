//! Ball averages and the first two derivatives of `t ↦ E|v + √t ξ|^q`.

use super::Estimate;
use crate::constants::beta;
use crate::error::{Error, Result};
use crate::kernel::quadrature::tanh_sinh;
use crate::kernel::theta::{theta_power_mean, KERNEL_REL_ERR};

const TOL: f64 = 1e-13;

/// `∫_0^1 w(x, 1−x) E|u e₁ + s x ξ|^q dx`, split where `s x = u`.
fn radial_mixture<W>(u: f64, s: f64, q: f64, d: usize, weight: W) -> Result<Estimate>
where
    W: Fn(f64, f64) -> f64,
{
    let x_star = u / s;
    let mut failure = None;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut evals = 0usize;
    let mut piece = |lo: f64, hi: f64, left_of_kink: bool| {
        let res = tanh_sinh(lo, hi, TOL, |_, da, db| {
            let x = lo + da;
            let one_minus = if hi == 1.0 { db } else { 1.0 - x };
            let dx = if left_of_kink { (x_star - hi) + db } else { (lo - x_star) + da };
            let gap = s * dx;
            match theta_power_mean(gap * gap, 2.0 * u * s * x, 0.5 * q, d) {
                Ok(m) => weight(x, one_minus) * m,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        });
        value += res.value;
        err += res.err;
        evals += res.evals;
    };
    if x_star < 1.0 {
        piece(0.0, x_star, true);
        piece(x_star, 1.0, false);
    } else {
        piece(0.0, 1.0, true);
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Estimate::quadrature(value, err + KERNEL_REL_ERR * value.abs(), evals as u64))
}

fn check(v: f64, s: f64, q: f64, d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(v >= 0.0 && s >= 0.0) || !v.is_finite() || !s.is_finite() || !q.is_finite() {
        return Err(Error::Precondition(format!("need finite |v|, s >= 0 and finite q; got ({v}, {s}, {q})")));
    }
    Ok(())
}

/// Average of `|v + s x|^q` over `x` uniform in the unit ball.
pub fn ball_average(v: f64, s: f64, q: f64, d: usize) -> Result<Estimate> {
    check(v, s, q, d)?;
    let df = d as f64;
    if s == 0.0 {
        if v == 0.0 && q < 0.0 {
            return Err(Error::Singular(format!("|0|^{q}")));
        }
        return Ok(Estimate::closed_form(if q == 0.0 { 1.0 } else { v.powf(q) }));
    }
    if v <= s && q <= -df {
        return Err(Error::Singular(format!("|v + s x|^{q} is not integrable over the ball in dimension {d}")));
    }
    if v == 0.0 {
        return Ok(Estimate::closed_form(df * s.powf(q) / (df + q)));
    }
    radial_mixture(v, s, q, d, |r, _| df * r.powi(d as i32 - 1))
}

/// `g′_v(t)` for `g_v(t) = E|v + √t ξ|^q`:
/// `q(q+d−2)/(2d)` times the ball average of `|v + √t x|^{q−2}`.
pub fn g_prime(v: f64, t: f64, q: f64, d: usize) -> Result<Estimate> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("g′ needs t > 0, got {t}")));
    }
    check(v, t, q, d)?;
    let factor = q * (q + d as f64 - 2.0) / (2.0 * d as f64);
    if factor == 0.0 {
        return Ok(Estimate::closed_form(0.0));
    }
    Ok(ball_average(v, t.sqrt(), q - 2.0, d)?.scaled(factor))
}

/// `g″_v(η) = β_{p,d} E|v + R₁R₂√η ξ|^{p−4}`, where `R₁R₂` has density
/// `(d(d+2)/2) x^{d−1}(1−x²)` on (0, 1).
pub fn g_second_derivative(v: f64, eta: f64, p: f64, d: usize) -> Result<Estimate> {
    if !(eta > 0.0) {
        return Err(Error::Precondition(format!("g″ needs eta > 0, got {eta}")));
    }
    check(v, eta, p, d)?;
    let b = beta(p, d)?;
    let df = d as f64;
    let q = p - 4.0;
    if b == 0.0 {
        return Ok(Estimate::closed_form(0.0));
    }
    if q == 0.0 {
        return Ok(Estimate::closed_form(b));
    }
    let s = eta.sqrt();
    if v <= s && q <= -df {
        return Err(Error::Singular(format!("g″ integrand diverges for p = {p} in dimension {d}")));
    }
    if v == 0.0 {
        let moment = df * (df + 2.0) / ((df + q) * (df + q + 2.0));
        return Ok(Estimate::closed_form(b * s.powf(q) * moment));
    }
    let c = 0.5 * df * (df + 2.0);
    let est = radial_mixture(v, s, q, d, |x, one_minus| c * x.powi(d as i32 - 1) * one_minus * (1.0 + x))?;
    Ok(est.scaled(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::shifted_single_moment;

    fn g(v: f64, t: f64, q: f64, d: usize) -> f64 {
        shifted_single_moment(v, 1.0, t, q, d).unwrap().value
    }

    #[test]
    fn ball_average_examples() {
        for d in [2usize, 3, 6] {
            let e = ball_average(0.0, 1.0, 2.0, d).unwrap();
            assert!((e.value - d as f64 / (d as f64 + 2.0)).abs() < 1e-15);
            let e = ball_average(1.0, 1.0, 0.0, d).unwrap();
            assert!((e.value - 1.0).abs() < 1e-12);
            // |v + x|² averages to |v|² + d/(d+2).
            let e = ball_average(0.6, 1.0, 2.0, d).unwrap();
            assert!((e.value - (0.36 + d as f64 / (d as f64 + 2.0))).abs() < 1e-12, "{}", e.value);
        }
        let e = ball_average(3.0, 0.0, 1.7, 4).unwrap();
        assert!((e.value - 3f64.powf(1.7)).abs() < 1e-14);
        assert!(ball_average(0.5, 1.0, -3.0, 3).is_err());
    }

    #[test]
    fn g_prime_matches_finite_difference() {
        let (v, t, q, d) = (1.0, 1.0, 5.0, 3);
        let h = 1e-4;
        let fd = (g(v, t + h, q, d) - g(v, t - h, q, d)) / (2.0 * h);
        let e = g_prime(v, t, q, d).unwrap();
        assert!(((e.value - fd) / fd).abs() < 1e-7, "{} vs {fd}", e.value);
        for d in [2usize, 4] {
            assert!((g_prime(0.8, 0.3, 2.0, d).unwrap().value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn g_second_matches_finite_difference() {
        let (v, eta, p, d) = (1.0, 1.0, 6.0, 2);
        let h = 1e-3;
        let fd = (g(v, eta + h, p, d) - 2.0 * g(v, eta, p, d) + g(v, eta - h, p, d)) / (h * h);
        let e = g_second_derivative(v, eta, p, d).unwrap();
        assert!(((e.value - fd) / fd).abs() < 1e-5, "{} vs {fd}", e.value);
        assert_eq!(g_second_derivative(0.4, 2.0, 2.0, 3).unwrap().value, 0.0);
    }

    #[test]
    fn g_second_singular_low_exponent() {
        // p = 3 in the plane: the inner kernel diverges at the crossing but
        // the radial integral converges.
        let (v, eta, p, d) = (0.5, 1.0, 3.0, 2);
        let e = g_second_derivative(v, eta, p, d).unwrap();
        let b = beta(p, d).unwrap();
        let lower = b * (v * v + d as f64 / (d as f64 + 4.0) * eta).powf((p - 4.0) / 2.0);
        assert!(e.value >= lower, "{} < {lower}", e.value);
        assert!(g_second_derivative(0.5, 1.0, 2.0, 2).is_ok());
    }
}
