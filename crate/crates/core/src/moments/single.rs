use super::Estimate;
use crate::error::{Error, Result};
use crate::kernel::theta::{kernel_nodes, theta_power_mean, KERNEL_REL_ERR};

/// `E|v + a√t ξ|^q = E_θ (|v|² + a²t + 2a√t|v|θ)^{q/2}`.
pub fn shifted_single_moment(v: f64, a: f64, t: f64, q: f64, d: usize) -> Result<Estimate> {
    if !(v >= 0.0 && t >= 0.0) || !a.is_finite() || !q.is_finite() {
        return Err(Error::Precondition(format!(
            "need |v| >= 0, t >= 0 and finite a, q; got ({v}, {a}, {t}, {q})"
        )));
    }
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let c = a.abs() * t.sqrt();
    let gap_sq = (v - c).powi(2);
    let cross = 2.0 * v * c;
    let value = theta_power_mean(gap_sq, cross, 0.5 * q, d)?;
    let nodes = kernel_nodes(gap_sq, cross);
    if nodes == 0 {
        Ok(Estimate::closed_form(value))
    } else {
        Ok(Estimate::quadrature(value, KERNEL_REL_ERR * value.abs(), nodes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        for d in [2usize, 3, 6] {
            for p in [2.0, 3.5, 7.0] {
                let e = shifted_single_moment(0.0, 1.0, 1.0, p, d).unwrap();
                assert!((e.value - 1.0).abs() < 1e-15);
            }
            let e = shifted_single_moment(1.0, 1.0, 1.0, 2.0, d).unwrap();
            assert!((e.value - 2.0).abs() < 1e-14);
        }
        let e = shifted_single_moment(1.0, 1.0, 1.0, 4.0, 3).unwrap();
        assert!((e.value - 16.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn singular_inputs_rejected() {
        // q ≤ 1 − d at |v| = a√t diverges.
        assert!(shifted_single_moment(1.0, 1.0, 1.0, -1.0, 2).is_err());
        assert!(shifted_single_moment(0.0, 0.0, 1.0, -1.0, 3).is_err());
        assert!(shifted_single_moment(1.0, 1.0, 1.0, -0.9, 2).is_ok());
        assert!(shifted_single_moment(1.0, 1.0, -1.0, 2.0, 2).is_err());
    }

    #[test]
    fn sign_of_a_is_irrelevant() {
        let x = shifted_single_moment(0.7, 1.3, 0.8, 3.3, 4).unwrap().value;
        let y = shifted_single_moment(0.7, -1.3, 0.8, 3.3, 4).unwrap().value;
        assert_eq!(x, y);
    }
}
