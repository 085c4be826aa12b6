use serde::{Deserialize, Serialize};

use crate::constants::{beta, Branch};
use crate::error::{Error, Result};
use crate::kernel::theta::sphere_shift_moment;
use crate::moments::{sum_moments_exact, Estimate, ExactOptions};

/// Relative slack allowed in the ordering and norm constraints.
const ADMISSIBLE_TOL: f64 = 1e-12;

/// Replacement of `(a1, a2)` by the more balanced `(b1, b2)` with the same
/// ℓ₂ mass, in the presence of a shift `|v|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalStep {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub shift: f64,
}

impl LocalStep {
    /// Requires `a1 ≥ b1 ≥ b2 ≥ a2 > 0` and `a1² + a2² = b1² + b2²`.
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64, shift: f64) -> Result<Self> {
        Self::build(a1, a2, b1, b2, shift, false)
    }

    /// Same constraints, but `a2 = 0` is admitted as the limiting case.
    pub(crate) fn allowing_zero(a1: f64, a2: f64, b1: f64, b2: f64, shift: f64) -> Result<Self> {
        Self::build(a1, a2, b1, b2, shift, true)
    }

    fn build(a1: f64, a2: f64, b1: f64, b2: f64, shift: f64, allow_zero: bool) -> Result<Self> {
        let sigma_sq = a1 * a1 + a2 * a2;
        let slack = ADMISSIBLE_TOL * sigma_sq.sqrt();
        let ordered = a1 + slack >= b1 && b1 + slack >= b2 && b2 + slack >= a2 && (a2 > 0.0 || (allow_zero && a2 == 0.0));
        if !ordered {
            return Err(Error::NonAdmissible(format!(
                "need a1 >= b1 >= b2 >= a2 > 0, got a = ({a1}, {a2}), b = ({b1}, {b2})"
            )));
        }
        if (sigma_sq - (b1 * b1 + b2 * b2)).abs() > ADMISSIBLE_TOL * sigma_sq {
            return Err(Error::NonAdmissible(format!(
                "ℓ2 mass changes: {sigma_sq} vs {}",
                b1 * b1 + b2 * b2
            )));
        }
        if !(shift >= 0.0) || !shift.is_finite() {
            return Err(Error::NonAdmissible(format!("shift must be a finite magnitude, got {shift}")));
        }
        Ok(Self { a1, a2, b1, b2, shift })
    }

    pub fn sigma_sq(&self) -> f64 {
        self.a1 * self.a1 + self.a2 * self.a2
    }

    /// `a1⁴ + a2⁴ − b1⁴ − b2⁴`.
    pub fn l4_drop(&self) -> f64 {
        // (a1² − b1²)(a1² + b1²) + (a2² − b2²)(a2² + b2²), with a1² − b1² = b2² − a2².
        let shift = (self.b2 - self.a2) * (self.b2 + self.a2);
        shift * ((self.a1 * self.a1 + self.b1 * self.b1) - (self.a2 * self.a2 + self.b2 * self.b2))
    }

    /// `b1²b2² − a1²a2² − (a1⁴ + a2⁴ − b1⁴ − b2⁴)/2`, zero up to rounding.
    pub fn product_identity_residual(&self) -> f64 {
        let prod = (self.b1 * self.b2).powi(2) - (self.a1 * self.a2).powi(2);
        let drop = self.a1.powi(4) + self.a2.powi(4) - self.b1.powi(4) - self.b2.powi(4);
        prod - 0.5 * drop
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalBound {
    pub step: LocalStep,
    pub deficit: Estimate,
    pub bound: f64,
    pub branch: Branch,
}

/// Deficit of one local step by exact quadrature together with its lower bound
/// `(1/d)(a1⁴+a2⁴−b1⁴−b2⁴)·[β(|v|²+σ²)^{(p−4)/2} or (p(p−2)/8) E|v+σξ|^{p−4}]`.
pub fn local_two_coordinate_bound(step: &LocalStep, p: f64, d: usize) -> Result<LocalBound> {
    let b = beta(p, d)?;
    let sigma_sq = step.sigma_sq();
    let v = step.shift;
    let opts = ExactOptions::default();
    let after = sum_moments_exact(&[step.b1, step.b2], v, &[p], d, opts)?[0];
    let before = sum_moments_exact(&[step.a1, step.a2], v, &[p], d, opts)?[0];
    let deficit = if step.a1 == step.b1 && step.a2 == step.b2 {
        Estimate::closed_form(0.0)
    } else {
        after.minus(&before)
    };
    let branch = Branch::of(p);
    let factor = match branch {
        Branch::Low => b * (v * v + sigma_sq).powf(0.5 * (p - 4.0)),
        Branch::High => p * (p - 2.0) / 8.0 * sphere_shift_moment(v, sigma_sq.sqrt(), p - 4.0, d)?,
    };
    let bound = step.l4_drop() * factor / d as f64;
    Ok(LocalBound { step: *step, deficit, bound, branch })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_enforces_ordering() {
        let h = 0.5f64.sqrt();
        assert!(LocalStep::new(0.9, 0.1f64.sqrt() * 0.0 + (1.0 - 0.81f64).sqrt(), h, h, 0.0).is_ok());
        assert!(LocalStep::new(h, h, 0.9, (1.0 - 0.81f64).sqrt(), 0.0).is_err());
        assert!(LocalStep::new(0.9, 0.1, 0.8, 0.2, 0.0).is_err());
    }

    #[test]
    fn no_op_step() {
        let s = LocalStep::new(0.8, 0.6, 0.8, 0.6, 0.5).unwrap();
        let r = local_two_coordinate_bound(&s, 3.0, 3).unwrap();
        assert_eq!(r.deficit.value, 0.0);
        assert_eq!(r.bound, 0.0);
    }

    #[test]
    fn balancing_pair_in_the_plane() {
        let h = 0.5f64.sqrt();
        let a1 = 0.95f64;
        let a2 = (1.0 - a1 * a1).sqrt();
        let s = LocalStep::new(a1, a2, h, h, 0.0).unwrap();
        let r = local_two_coordinate_bound(&s, 4.0, 2).unwrap();
        let drop = a1.powi(4) + a2.powi(4) - 0.5;
        assert!((r.bound - drop).abs() < 1e-14);
        // For p = 4: E|Σ|⁴ = 1 + (2/d)(1 − ‖a‖₄⁴), so the deficit is exactly the drop.
        assert!((r.deficit.value - drop).abs() < 1e-12);
        assert!(r.deficit.value >= r.bound - 1e-12);
    }

    #[test]
    fn second_moment_step_is_flat() {
        let s = LocalStep::new(0.9, 0.3, 0.8, (0.81 + 0.09 - 0.64f64).sqrt(), 0.4).unwrap();
        let r = local_two_coordinate_bound(&s, 2.0, 3).unwrap();
        assert_eq!(r.bound, 0.0);
        assert!(r.deficit.value.abs() < 1e-12);
    }

    #[test]
    fn product_identity() {
        let s = LocalStep::new(0.9, 0.3, 0.8, (0.81 + 0.09 - 0.64f64).sqrt(), 0.0).unwrap();
        assert!(s.product_identity_residual().abs() < 1e-15);
        assert!(s.l4_drop() > 0.0);
    }
}
