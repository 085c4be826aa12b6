//! The one-dimensional kernel `E_θ (g + c(1+θ))^s`.
//!
//! With `g = (u−c')²` and `c = 2uc'` this is `E|u e₁ + c' ξ|^{2s}`, the
//! building block of every exact moment in the crate. The integrand is
//! analytic unless `g` is small compared with `c`, in which case it develops
//! an algebraic singularity at `θ = −1`. The smooth regime uses a fixed
//! Gauss-Jacobi rule; the near-singular regime switches to the angle
//! `φ = arccos(−θ)` and grades Gauss-Legendre panels geometrically toward
//! `φ = 0`, where the kink sits at `φ ≈ √(2g/c)`.

use std::f64::consts::{FRAC_PI_2, PI};

use super::quadrature::{cached_jacobi_rule, gauss_legendre};
use super::special::{theta_normalizer, theta_shifted_power_mean};
use crate::error::{Error, Result};

/// Above this ratio `c/(g+c)` the angle form is used.
const SMOOTH_RATIO: f64 = 0.8;
const SMOOTH_NODES: usize = 32;
const PANEL_NODES: usize = 20;
const GRADING: f64 = 4.0;

/// Relative accuracy the kernel is validated to; reported as its error bar.
pub const KERNEL_REL_ERR: f64 = 1e-12;

/// Calls `f(base, weight)` for a discretization of the law of
/// `g + c(1+θ)`; weights sum to one. Requires `c > 0` and `g > 0`.
fn for_each_node<F: FnMut(f64, f64)>(gap_sq: f64, cross: f64, d: usize, mut f: F) -> Result<()> {
    let total = gap_sq + cross;
    if cross <= SMOOTH_RATIO * total {
        let rule = cached_jacobi_rule(d, SMOOTH_NODES)?;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            f(total + cross * x, *w);
        }
        return Ok(());
    }
    let gl = gauss_legendre(PANEL_NODES);
    let norm = 1.0 / theta_normalizer(d);
    let expo = d as i32 - 2;
    let mut panel = |lo: f64, hi: f64| {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let phi = mid + half * x;
            let s = (0.5 * phi).sin();
            let base = gap_sq + 2.0 * cross * s * s;
            f(base, w * (hi - lo) * norm * phi.sin().powi(expo));
        }
    };
    panel(0.75 * PI, PI);
    panel(FRAC_PI_2, 0.75 * PI);
    let kink = (2.0 * gap_sq / cross).sqrt();
    let mut hi = FRAC_PI_2;
    while hi > 0.5 * kink * GRADING {
        let lo = hi / GRADING;
        panel(lo, hi);
        hi = lo;
    }
    panel(0.0, hi);
    Ok(())
}

/// Number of integrand evaluations `theta_power_mean` spends on the inputs.
pub fn kernel_nodes(gap_sq: f64, cross: f64) -> u64 {
    if cross == 0.0 || gap_sq == 0.0 {
        return 0;
    }
    if cross <= SMOOTH_RATIO * (gap_sq + cross) {
        return SMOOTH_NODES as u64;
    }
    let kink = (2.0 * gap_sq / cross).sqrt();
    let mut panels = 3;
    let mut hi = FRAC_PI_2;
    while hi > 0.5 * kink * GRADING {
        hi /= GRADING;
        panels += 1;
    }
    (panels * PANEL_NODES) as u64
}

fn degenerate(base: f64, s: f64) -> Result<f64> {
    if base > 0.0 {
        Ok(base.powf(s))
    } else if s > 0.0 {
        Ok(0.0)
    } else if s == 0.0 {
        Ok(1.0)
    } else {
        Err(Error::Singular(format!("zero base raised to negative power {s}")))
    }
}

fn singular_power(cross: f64, s: f64, d: usize) -> Result<f64> {
    if 2.0 * s + d as f64 - 1.0 <= 0.0 {
        return Err(Error::Singular(format!(
            "E(1+θ)^{s} diverges in dimension {d}"
        )));
    }
    Ok(cross.powf(s) * theta_shifted_power_mean(s, d))
}

/// `E_θ (gap_sq + cross·(1+θ))^s` for `gap_sq, cross ≥ 0`.
pub fn theta_power_mean(gap_sq: f64, cross: f64, s: f64, d: usize) -> Result<f64> {
    let mut out = [0.0];
    theta_power_means(gap_sq, cross, &[s], d, &mut out)?;
    Ok(out[0])
}

/// Several exponents at once; the discretization is shared.
pub fn theta_power_means(
    gap_sq: f64,
    cross: f64,
    exps: &[f64],
    d: usize,
    out: &mut [f64],
) -> Result<()> {
    debug_assert_eq!(exps.len(), out.len());
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(gap_sq >= 0.0 && cross >= 0.0) {
        return Err(Error::Precondition(format!(
            "kernel needs nonnegative arguments, got ({gap_sq}, {cross})"
        )));
    }
    if cross == 0.0 {
        for (o, &s) in out.iter_mut().zip(exps) {
            *o = degenerate(gap_sq, s)?;
        }
        return Ok(());
    }
    if gap_sq == 0.0 {
        for (o, &s) in out.iter_mut().zip(exps) {
            *o = singular_power(cross, s, d)?;
        }
        return Ok(());
    }
    out.iter_mut().for_each(|o| *o = 0.0);
    if let [s] = exps {
        let mut acc = 0.0;
        for_each_node(gap_sq, cross, d, |base, w| acc += w * base.powf(*s))?;
        out[0] = acc;
    } else {
        for_each_node(gap_sq, cross, d, |base, w| {
            let l = base.ln();
            for (o, s) in out.iter_mut().zip(exps) {
                *o += w * (s * l).exp();
            }
        })?;
    }
    Ok(())
}

/// `E|u e₁ + c ξ|^q` with `u, c ≥ 0`.
pub fn sphere_shift_moment(u: f64, c: f64, q: f64, d: usize) -> Result<f64> {
    theta_power_mean((u - c).powi(2), 2.0 * u * c, 0.5 * q, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::quadrature::tanh_sinh;

    /// Independent route: tanh-sinh in the angle variable, split at the kink.
    fn angle_oracle(gap_sq: f64, cross: f64, s: f64, d: usize) -> f64 {
        let norm = theta_normalizer(d);
        let g = |phi: f64| {
            let h = (0.5 * phi).sin();
            (gap_sq + 2.0 * cross * h * h).powf(s) * phi.sin().powi(d as i32 - 2) / norm
        };
        let kink = (2.0 * gap_sq / cross).sqrt().min(1.0);
        tanh_sinh(0.0, kink, 1e-15, |x, _, _| g(x)).value
            + tanh_sinh(kink, PI, 1e-15, |x, _, _| g(x)).value
    }

    #[test]
    fn polynomial_cases_are_exact() {
        // E(2+2θ)^2 = 4 + 4/d for u = c = 1 (gap 0 branch).
        for d in 2..7 {
            let want = 4.0 + 4.0 / d as f64;
            assert!((sphere_shift_moment(1.0, 1.0, 4.0, d).unwrap() - want).abs() < 1e-13);
            assert!((sphere_shift_moment(1.0, 1.0, 2.0, d).unwrap() - 2.0).abs() < 1e-14);
        }
        // E|2e + ξ|^4 = E(5+4θ)^2 = 25 + 16/d, smooth branch.
        let got = sphere_shift_moment(2.0, 1.0, 4.0, 3).unwrap();
        assert!((got - (25.0 + 16.0 / 3.0)).abs() < 1e-12);
        // Near-singular branch with a polynomial integrand.
        let got = sphere_shift_moment(1.0, 1.01, 4.0, 3).unwrap();
        let (a, b) = (1.0 + 1.0201, 2.0 * 1.01);
        assert!((got - (a * a + b * b / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn matches_angle_oracle_across_regimes() {
        for d in [2usize, 3, 4, 7] {
            for &s in &[-0.45, -0.2, 0.25, 0.5, 1.5, 3.0] {
                if 2.0 * s + d as f64 - 1.0 <= 0.0 {
                    continue;
                }
                for &(g, c) in &[(1.0, 0.3), (0.1, 1.0), (1e-4, 2.0), (1e-10, 0.7), (0.3, 1.3)] {
                    let got = theta_power_mean(g, c, s, d).unwrap();
                    let want = angle_oracle(g, c, s, d);
                    assert!(
                        ((got - want) / want).abs() < 1e-11,
                        "d={d} s={s} g={g} c={c}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn continuity_into_the_singular_limit() {
        for d in [2usize, 3, 5] {
            let s = -0.3;
            let lim = theta_power_mean(0.0, 1.0, s, d).unwrap();
            let near = theta_power_mean(1e-60, 1.0, s, d).unwrap();
            assert!(((near - lim) / lim).abs() < 1e-9, "d={d}: {near} vs {lim}");
        }
    }

    #[test]
    fn rejects_divergent_input() {
        assert!(theta_power_mean(0.0, 1.0, -0.6, 2).is_err());
        assert!(theta_power_mean(0.0, 0.0, -1.0, 3).is_err());
        assert_eq!(theta_power_mean(0.0, 0.0, 2.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn multi_exponent_agrees_with_single() {
        let exps = [0.5, 1.25, 2.0, 4.0];
        let mut out = [0.0; 4];
        theta_power_means(0.02, 1.0, &exps, 3, &mut out).unwrap();
        for (s, o) in exps.iter().zip(out) {
            let single = theta_power_mean(0.02, 1.0, *s, 3).unwrap();
            assert!(((o - single) / single).abs() < 1e-14);
        }
    }
}
