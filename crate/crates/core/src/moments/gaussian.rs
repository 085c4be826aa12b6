use super::Estimate;
use crate::error::{Error, Result};
use crate::kernel::quadrature::tanh_sinh;
use crate::kernel::special::{gaussian_abs_moment, ln_gamma};
use crate::kernel::theta::{theta_power_mean, KERNEL_REL_ERR};

const PANEL_LENGTH: f64 = 8.0;
const TOL: f64 = 1e-13;

/// `E|aZ + v|^p`, mixing the sphere kernel over the law of `|Z|`.
///
/// With `x = d|Z|²/2 ~ Gamma(d/2)` the radius integral becomes a Gamma
/// integral, split where `|a||Z| = |v|` and truncated far in the tail.
pub fn shifted_gaussian_moment(v: f64, a: f64, p: f64, d: usize) -> Result<Estimate> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::InvalidExponent { value: p, reason: "Gaussian moment needs p >= 0" });
    }
    if !(v >= 0.0) || !v.is_finite() || !a.is_finite() {
        return Err(Error::Precondition(format!("need finite a and |v| >= 0, got ({a}, {v})")));
    }
    let a = a.abs();
    if a == 0.0 {
        return Ok(Estimate::closed_form(if p == 0.0 { 1.0 } else { v.powf(p) }));
    }
    if v == 0.0 {
        return Ok(Estimate::closed_form(a.powf(p) * gaussian_abs_moment(p, d)?));
    }
    let df = d as f64;
    let k = 0.5 * df;
    let lg = ln_gamma(k);
    let r_star = v / a;
    let x_star = 0.5 * df * r_star * r_star;
    let m = k + 0.5 * p;
    let x_max = (m + 40.0 + 12.0 * m.sqrt()).max(1.25 * x_star);

    let mut failure = None;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut evals = 0usize;
    let mut segment = |lo: f64, hi: f64, left_of_kink: bool| {
        let pieces = ((hi - lo) / PANEL_LENGTH).ceil().max(1.0) as usize;
        let width = (hi - lo) / pieces as f64;
        for i in 0..pieces {
            let (plo, phi) = (lo + i as f64 * width, if i + 1 == pieces { hi } else { lo + (i + 1) as f64 * width });
            let q = tanh_sinh(plo, phi, TOL, |_, da, db| {
                let x = plo + da;
                let r = (2.0 * x / df).sqrt();
                // |x − x*| from the endpoint distance nearest the kink.
                let dx = if left_of_kink { (x_star - phi) + db } else { (plo - x_star) + da };
                let gap = a * (2.0 / df) * dx / (r_star + r);
                let c = a * r;
                let density = ((k - 1.0) * x.ln() - x - lg).exp();
                match theta_power_mean(gap * gap, 2.0 * v * c, 0.5 * p, d) {
                    Ok(m) => density * m,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            });
            value += q.value;
            err += q.err;
            evals += q.evals;
        }
    };
    if x_star < x_max {
        segment(0.0, x_star, true);
        segment(x_star, x_max, false);
    } else {
        segment(0.0, x_max, true);
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Estimate::quadrature(value, err + KERNEL_REL_ERR * value.abs(), evals as u64))
}
