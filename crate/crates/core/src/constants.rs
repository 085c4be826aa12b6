//! Every explicit constant of the inequalities, with a per-(p, d) cache.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::special::{gaussian_abs_moment, theta_shifted_power_mean};
use crate::moments::{sum_moments_exact, ExactOptions};

/// Universal lower constant of the Khinchin-type inequality for `0 < q < 2`.
pub const C_KH: f64 = 0.77;

/// Threshold of the small-exponent branch.
pub const BRANCH_POINT: f64 = 4.0;

fn check(p: f64, d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::InvalidExponent { value: p, reason: "constants are defined for p >= 2" });
    }
    Ok(())
}

fn common(p: f64, d: f64) -> f64 {
    (p + d - 2.0) * (p + d - 4.0)
}

fn c_main_branch(p: f64, d: f64, low: bool) -> f64 {
    let factor = if low { 3.0 * p * (p - 2.0) } else { 1.0 };
    common(p, d) / (24.0 * d * d * (d + 2.0)) * factor
}

fn c_diag_branch(p: f64, d: f64, low: bool) -> f64 {
    let tail = if low { common(p, d) / (d * (d + 2.0)) } else { 0.385 };
    p * (p - 2.0) / (4.0 * d) * tail
}

/// Deficit constant of the main inequality.
pub fn c_main(p: f64, d: usize) -> Result<f64> {
    check(p, d)?;
    Ok(c_main_branch(p, d as f64, p <= BRANCH_POINT))
}

/// `κ_{p,d} = p(p−2)(p+d−2)(p+d−4) / (4d²(d+2))`.
pub fn kappa(p: f64, d: usize) -> Result<f64> {
    Ok(beta(p, d)? / d as f64)
}

/// `β_{p,d} = p(p−2)(p+d−2)(p+d−4) / (4d(d+2))`.
pub fn beta(p: f64, d: usize) -> Result<f64> {
    check(p, d)?;
    let df = d as f64;
    Ok(p * (p - 2.0) * common(p, df) / (4.0 * df * (df + 2.0)))
}

pub fn beta_tilde(p: f64, d: usize) -> Result<f64> {
    Ok(2.0 * beta(p, d)? / d as f64)
}

/// Deficit constant of the fixed-length inequality.
pub fn c_diag(p: f64, d: usize) -> Result<f64> {
    check(p, d)?;
    Ok(c_diag_branch(p, d as f64, p <= BRANCH_POINT))
}

/// The large-exponent constant as it arises in the argument, `c_Kh p(p−2)/(8d)`.
pub fn c_diag_from_khinchin(p: f64, d: usize) -> Result<f64> {
    check(p, d)?;
    Ok(C_KH * p * (p - 2.0) / (8.0 * d as f64))
}

/// Cut-off `m_p`: 1 up to the branch point, `√(1 − 2^{−1/(p−4)})` above it.
pub fn m_cut(p: f64) -> Result<f64> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::InvalidExponent { value: p, reason: "cut-off is defined for p >= 2" });
    }
    if p <= BRANCH_POINT {
        Ok(1.0)
    } else {
        Ok((-(-(2f64.ln()) / (p - 4.0)).exp_m1()).sqrt())
    }
}

/// `m_p⁴ · 3p(p−2)`, which must exceed one above the branch point.
pub fn m_cut_margin(p: f64) -> Result<f64> {
    Ok(m_cut(p)?.powi(4) * 3.0 * p * (p - 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `2 ≤ p ≤ 4`.
    Low,
    /// `p > 4`.
    High,
}

impl Branch {
    pub fn of(p: f64) -> Self {
        if p <= BRANCH_POINT {
            Branch::Low
        } else {
            Branch::High
        }
    }
}

/// Both branch formulas evaluated at the same `(p, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchValues {
    pub c_main_low: f64,
    pub c_main_high: f64,
    pub c_diag_low: f64,
    pub c_diag_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    pub p: f64,
    pub d: usize,
    pub branch: Branch,
    pub c_main: f64,
    pub c_diag: f64,
    pub kappa: f64,
    pub beta: f64,
    pub beta_tilde: f64,
    pub m_cut: f64,
    pub c_kh: f64,
    /// `c_Kh p(p−2)/(8d)`; coincides with `c_diag` above the branch point.
    pub c_diag_khinchin_route: f64,
    pub both_branches: BranchValues,
}

impl ConstantSet {
    fn compute(p: f64, d: usize) -> Result<Self> {
        check(p, d)?;
        let df = d as f64;
        Ok(Self {
            p,
            d,
            branch: Branch::of(p),
            c_main: c_main(p, d)?,
            c_diag: c_diag(p, d)?,
            kappa: kappa(p, d)?,
            beta: beta(p, d)?,
            beta_tilde: beta_tilde(p, d)?,
            m_cut: m_cut(p)?,
            c_kh: C_KH,
            c_diag_khinchin_route: c_diag_from_khinchin(p, d)?,
            both_branches: BranchValues {
                c_main_low: c_main_branch(p, df, true),
                c_main_high: c_main_branch(p, df, false),
                c_diag_low: c_diag_branch(p, df, true),
                c_diag_high: c_diag_branch(p, df, false),
            },
        })
    }
}

type Cache = RwLock<HashMap<(u64, usize), ConstantSet>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// All constants at `(p, d)`, computed once and cached.
pub fn constant_set(p: f64, d: usize) -> Result<ConstantSet> {
    let key = (p.to_bits(), d);
    if let Some(set) = cache().read().expect("constants cache poisoned").get(&key) {
        return Ok(*set);
    }
    let set = ConstantSet::compute(p, d)?;
    cache().write().expect("constants cache poisoned").entry(key).or_insert(set);
    Ok(set)
}

/// The two competitors for the best constant at `0 < q < 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KhinchinTerms {
    pub q: f64,
    pub d: usize,
    /// `2^{−q/2} E|ξ₁+ξ₂|^q` by quadrature.
    pub two_point: f64,
    /// Closed form of the same term, available for `d = 2`.
    pub two_point_closed: Option<f64>,
    pub gaussian: f64,
    pub value: f64,
}

fn check_q(q: f64, d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(q > 0.0 && q < 2.0) {
        return Err(Error::InvalidExponent { value: q, reason: "Khinchin constant needs 0 < q < 2" });
    }
    Ok(())
}

/// `2^{q/2} Γ((q+1)/2) / (√π Γ(q/2 + 1))`, the planar two-point term.
pub fn steinhaus_two_point(q: f64) -> f64 {
    theta_shifted_power_mean(0.5 * q, 2)
}

/// `2^{(q+1)/2} / √(π(q+1))`, the lower bound for the planar two-point term.
pub fn steinhaus_lower_bound(q: f64) -> f64 {
    2f64.powf(0.5 * (q + 1.0)) / (std::f64::consts::PI * (q + 1.0)).sqrt()
}

/// Minimizer `1/ln 2 − 1` of `steinhaus_lower_bound`.
pub fn steinhaus_argmin() -> f64 {
    1.0 / 2f64.ln() - 1.0
}

pub fn khinchin_terms(q: f64, d: usize) -> Result<KhinchinTerms> {
    check_q(q, d)?;
    let h = 0.5f64.sqrt();
    let two_point = sum_moments_exact(&[h, h], 0.0, &[q], d, ExactOptions::default())?[0].value;
    let gaussian = gaussian_abs_moment(q, d)?;
    Ok(KhinchinTerms {
        q,
        d,
        two_point,
        two_point_closed: (d == 2).then(|| steinhaus_two_point(q)),
        gaussian,
        value: two_point.min(gaussian),
    })
}

/// `min{2^{−q/2} E|ξ₁+ξ₂|^q, E|Z|^q}`.
pub fn khinchin_best_constant(q: f64, d: usize) -> Result<f64> {
    Ok(khinchin_terms(q, d)?.value)
}

/// The chain `E|Z|^q ≥ e^{−s(1−s)} ≥ e^{−1/4}` with `s = q/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WendelCheck {
    pub q: f64,
    pub d: usize,
    pub moment: f64,
    pub bound: f64,
    pub floor: f64,
    pub holds: bool,
}

pub fn wendel_bounds_check(q: f64, d: usize) -> Result<WendelCheck> {
    check_q(q, d)?;
    let s = 0.5 * q;
    let moment = gaussian_abs_moment(q, d)?;
    let bound = (-s * (1.0 - s)).exp();
    let floor = (-0.25f64).exp();
    Ok(WendelCheck { q, d, moment, bound, floor, holds: moment >= bound && bound >= floor })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        assert!((c_main(4.0, 3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((c_main(6.0, 2).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!((kappa(3.0, 2).unwrap() - 9.0 / 64.0).abs() < 1e-15);
        assert!((kappa(4.0, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((beta(4.0, 2).unwrap() - 2.0).abs() < 1e-15);
        assert!((c_diag(6.0, 3).unwrap() - 0.77).abs() < 1e-15);
        assert!((m_cut(5.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(m_cut(3.0).unwrap(), 1.0);
    }

    #[test]
    fn vanish_at_two() {
        for d in 2..12 {
            let s = constant_set(2.0, d).unwrap();
            assert_eq!((s.c_main, s.c_diag, s.kappa, s.beta), (0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(c_main(1.5, 3).is_err());
        assert!(beta(3.0, 1).is_err());
        assert!(m_cut(f64::NAN).is_err());
        assert!(khinchin_best_constant(2.0, 3).is_err());
        assert!(wendel_bounds_check(0.0, 3).is_err());
    }

    #[test]
    fn diag_routes_agree_above_branch() {
        for p in [4.5, 6.0, 11.0] {
            for d in [2, 3, 10] {
                let s = constant_set(p, d).unwrap();
                assert!((s.c_diag - s.c_diag_khinchin_route).abs() < 1e-15 * s.c_diag.max(1.0));
            }
        }
    }

    #[test]
    fn cache_returns_identical_sets() {
        let a = constant_set(3.7, 5).unwrap();
        let b = constant_set(3.7, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.beta_tilde, 2.0 * a.beta / 5.0);
    }

    #[test]
    fn steinhaus_bound_minimum() {
        let q = steinhaus_argmin();
        assert!((steinhaus_lower_bound(q) - 0.774).abs() < 1e-3);
        assert!(steinhaus_lower_bound(q - 0.01) > steinhaus_lower_bound(q));
        assert!(steinhaus_lower_bound(q + 0.01) > steinhaus_lower_bound(q));
    }

    #[test]
    fn planar_two_point_matches_quadrature() {
        for q in [0.25, 0.5, 1.0, 1.5] {
            let t = khinchin_terms(q, 2).unwrap();
            assert!((t.two_point - t.two_point_closed.unwrap()).abs() < 1e-12);
        }
    }
}
