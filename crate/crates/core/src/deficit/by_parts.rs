use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::quadrature::cached_jacobi_rule;
use crate::moments::{g_prime, g_second_derivative};

const NODES: usize = 48;

/// Test function for `E[f(θ)θ] = (1/d) E f′(θ̃)`, `θ̃` the coordinate law in
/// dimension `d + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ByPartsFunction {
    Identity,
    Cube,
    /// `f(x) = g′_v(σ² + 2ux)` for `g_v(t) = E|v + √t ξ|^p`.
    GPrime { shift: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ByPartsPair {
    pub lhs: f64,
    pub rhs: f64,
}

impl ByPartsPair {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

pub fn theta_by_parts_check(u: f64, sigma: f64, p: f64, d: usize, f: ByPartsFunction) -> Result<ByPartsPair> {
    let lhs_rule = cached_jacobi_rule(d, NODES)?;
    let rhs_rule = cached_jacobi_rule(d + 2, NODES)?;
    let inv_d = 1.0 / d as f64;
    match f {
        ByPartsFunction::Identity => Ok(ByPartsPair {
            lhs: lhs_rule.expect(|x| x * x),
            rhs: inv_d * rhs_rule.expect(|_| 1.0),
        }),
        ByPartsFunction::Cube => Ok(ByPartsPair {
            lhs: lhs_rule.expect(|x| x.powi(4)),
            rhs: inv_d * rhs_rule.expect(|x| 3.0 * x * x),
        }),
        ByPartsFunction::GPrime { shift } => {
            let s2 = sigma * sigma;
            if !(s2 > 2.0 * u.abs()) {
                return Err(Error::Precondition(format!(
                    "σ² + 2ux must stay positive on [−1, 1]; got σ = {sigma}, u = {u}"
                )));
            }
            let mut failure = None;
            let mut eval = |r: Result<f64>| {
                r.unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    0.0
                })
            };
            let lhs = lhs_rule.expect(|x| x * eval(g_prime(shift, s2 + 2.0 * u * x, p, d).map(|e| e.value)));
            let rhs = inv_d
                * rhs_rule.expect(|x| {
                    2.0 * u * eval(g_second_derivative(shift, s2 + 2.0 * u * x, p, d).map(|e| e.value))
                });
            match failure {
                Some(e) => Err(e),
                None => Ok(ByPartsPair { lhs, rhs }),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_functions() {
        for d in [2usize, 3, 5, 8] {
            let df = d as f64;
            let r = theta_by_parts_check(0.0, 1.0, 3.0, d, ByPartsFunction::Identity).unwrap();
            assert!((r.lhs - 1.0 / df).abs() < 1e-14 && (r.rhs - 1.0 / df).abs() < 1e-14);
            let r = theta_by_parts_check(0.0, 1.0, 3.0, d, ByPartsFunction::Cube).unwrap();
            let want = 3.0 / (df * (df + 2.0));
            assert!((r.lhs - want).abs() < 1e-14 && (r.rhs - want).abs() < 1e-14, "{r:?}");
        }
    }

    #[test]
    fn g_prime_composition() {
        let r = theta_by_parts_check(0.3, 1.0, 5.0, 3, ByPartsFunction::GPrime { shift: 1.0 }).unwrap();
        assert!(r.residual() < 1e-8, "{r:?}");
        assert!(theta_by_parts_check(0.6, 1.0, 5.0, 3, ByPartsFunction::GPrime { shift: 1.0 }).is_err());
    }
}
