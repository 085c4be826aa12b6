//! The single-swap deficit `D_p(a, v) = E|aZ + v|^p − E|aξ + v|^p`, its lower
//! bounds, the swapping decomposition and the two-coordinate local step.

mod by_parts;
mod lindeberg;
mod local;

pub use by_parts::{theta_by_parts_check, ByPartsFunction, ByPartsPair};
pub use lindeberg::{lindeberg_decompose, SwapTrace};
pub use local::{local_two_coordinate_bound, LocalBound, LocalStep};

use serde::{Deserialize, Serialize};

use crate::constants::{kappa, Branch};
use crate::error::{Error, Result};
use crate::kernel::sampling::{fill_normal, rng_stream};
use crate::moments::{
    shifted_gaussian_moment, shifted_single_moment, Estimate, MomentAccumulator,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DeficitMethod {
    Quadrature,
    Mc { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitSample {
    pub p: f64,
    pub d: usize,
    pub a: f64,
    pub shift: f64,
    pub value: Estimate,
    pub bound: f64,
    pub branch: Branch,
}

fn check(p: f64, d: usize, a: f64, v: f64) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::InvalidExponent { value: p, reason: "deficit needs p >= 2" });
    }
    if !a.is_finite() || !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Precondition(format!("need finite a and |v| >= 0, got ({a}, {v})")));
    }
    Ok(())
}

/// `D_p(a, v)`; only `|v|` matters by rotation invariance.
pub fn deficit(a: f64, v: f64, p: f64, d: usize, method: DeficitMethod) -> Result<Estimate> {
    check(p, d, a, v)?;
    if a == 0.0 {
        return Ok(Estimate::closed_form(0.0));
    }
    match method {
        DeficitMethod::Quadrature => {
            let gauss = shifted_gaussian_moment(v, a, p, d)?;
            let sphere = shifted_single_moment(v, a, 1.0, p, d)?;
            Ok(gauss.minus(&sphere))
        }
        DeficitMethod::Mc { samples, seed } => deficit_mc(a, v, p, d, samples, seed),
    }
}

/// Paired estimator: `Z = g/√d` and `ξ = g/|g|` share the Gaussian draw `g`.
fn deficit_mc(a: f64, v: f64, p: f64, d: usize, samples: u64, seed: u64) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::Precondition(format!("Monte Carlo needs at least 2 samples, got {samples}")));
    }
    let mut rng = rng_stream(seed, 0);
    let mut g = vec![0.0; d];
    let mut acc = MomentAccumulator::default();
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    for _ in 0..samples {
        fill_normal(&mut rng, &mut g);
        let r = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let moment = |scale: f64| {
            let first = v + scale * g[0];
            let rest: f64 = g[1..].iter().map(|x| (scale * x).powi(2)).sum();
            (first * first + rest).powf(0.5 * p)
        };
        acc.push(moment(a * inv_sqrt_d) - moment(a / r));
    }
    Ok(acc.estimate())
}

/// `κ_{p,d} a⁴ (|v|² + 2a²)^{(p−4)/2}` for `p ≤ 4`, `κ_{p,d} a⁴ |v|^{p−4}` above.
pub fn deficit_lower_bound(a: f64, v: f64, p: f64, d: usize) -> Result<f64> {
    check(p, d, a, v)?;
    let k = kappa(p, d)?;
    if k == 0.0 || a == 0.0 {
        return Ok(0.0);
    }
    let a4 = a.powi(4);
    Ok(match Branch::of(p) {
        Branch::Low => k * a4 * (v * v + 2.0 * a * a).powf(0.5 * (p - 4.0)),
        Branch::High if v == 0.0 => 0.0,
        Branch::High => k * a4 * v.powf(p - 4.0),
    })
}

pub fn deficit_sample(a: f64, v: f64, p: f64, d: usize, method: DeficitMethod) -> Result<DeficitSample> {
    Ok(DeficitSample {
        p,
        d,
        a,
        shift: v,
        value: deficit(a, v, p, d, method)?,
        bound: deficit_lower_bound(a, v, p, d)?,
        branch: Branch::of(p),
    })
}
