use super::eval::{compare, Pair, Partner};
use super::{Budget, InequalityId, Params, Verdict, VerificationRecord};
use crate::constants::{c_diag, c_main, khinchin_best_constant, C_KH};
use crate::deficit::{deficit, deficit_lower_bound, local_two_coordinate_bound, DeficitMethod, LocalStep};
use crate::error::{Error, Result};
use crate::kernel::special::gaussian_abs_moment_minus_one;
use crate::moments::{CoeffVector, Estimate};

const UNIT_TOL: f64 = 1e-12;

fn check_exponents(ps: &[f64], d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if let Some(&p) = ps.iter().find(|p| !(**p >= 2.0) || !p.is_finite()) {
        return Err(Error::InvalidExponent { value: p, reason: "the inequalities need p >= 2" });
    }
    Ok(())
}

fn check_unit(a: &CoeffVector) -> Result<()> {
    if !a.is_unit(UNIT_TOL) {
        return Err(Error::Precondition(format!("coefficients must have unit ℓ2 norm, got Σa² = {}", a.norm_sq())));
    }
    Ok(())
}

/// Runs `attempt` and reruns the inconclusive entries with 4× samples.
pub(crate) fn with_retries<F>(ps: &[f64], budget: &Budget, mut attempt: F) -> Result<Vec<VerificationRecord>>
where
    F: FnMut(&[f64], u64) -> Result<Vec<VerificationRecord>>,
{
    let mut records = attempt(ps, budget.samples)?;
    let mut samples = budget.samples;
    for _ in 0..budget.retries {
        let pending: Vec<usize> = (0..records.len()).filter(|&i| records[i].verdict == Verdict::Inconclusive).collect();
        if pending.is_empty() {
            break;
        }
        samples = samples.saturating_mul(4);
        let sub: Vec<f64> = pending.iter().map(|&i| ps[i]).collect();
        for (i, r) in pending.into_iter().zip(attempt(&sub, samples)?) {
            records[i] = r;
        }
    }
    Ok(records)
}

pub(crate) fn main_record(p: f64, d: usize, a: &CoeffVector, pair: &Pair) -> Result<VerificationRecord> {
    let term = c_main(p, d)? * a.l4_pow4();
    let lhs = Estimate { value: pair.first.value + term, ..pair.first };
    let margin = Estimate { value: pair.gap.value - term, ..pair.gap };
    let params = Params::new(p, d).with_a(a.as_slice());
    Ok(VerificationRecord::judge(InequalityId::ThmMain, params, lhs, pair.second, margin)
        .with_extra("deficit_term", term))
}

pub(crate) fn diag_record(p: f64, d: usize, a: &CoeffVector, pair: &Pair) -> Result<VerificationRecord> {
    let term = c_diag(p, d)? * a.diagonal_deficit();
    let lhs = Estimate { value: pair.first.value + term, ..pair.first };
    let margin = Estimate { value: pair.gap.value - term, ..pair.gap };
    let params = Params::new(p, d).with_a(a.as_slice());
    Ok(VerificationRecord::judge(InequalityId::ThmDiag, params, lhs, pair.second, margin)
        .with_extra("deficit_term", term))
}

pub(crate) fn lpl2_record(p: f64, d: usize, a: &CoeffVector, pair: &Pair) -> VerificationRecord {
    let params = Params::new(p, d).with_a(a.as_slice());
    VerificationRecord::judge(InequalityId::Lpl2Homogeneous, params, pair.first, pair.second, pair.gap)
}

/// `E|Σ a_j ξ_j|^p + c_{p,d} ‖a‖₄⁴ ≤ E|Z|^p` for several `p` at once.
pub fn verify_theorem_main_multi(ps: &[f64], d: usize, a: &CoeffVector, budget: &Budget) -> Result<Vec<VerificationRecord>> {
    check_exponents(ps, d)?;
    check_unit(a)?;
    with_retries(ps, budget, |ps, samples| {
        let pairs = compare(a.as_slice(), Partner::Gaussian, ps, d, budget, samples, budget.seed)?;
        ps.iter().zip(&pairs).map(|(&p, pair)| main_record(p, d, a, pair)).collect()
    })
}

pub fn verify_theorem_main(p: f64, d: usize, a: &CoeffVector, budget: &Budget) -> Result<VerificationRecord> {
    Ok(verify_theorem_main_multi(&[p], d, a, budget)?.remove(0))
}

/// `E|Σ a_j ξ_j|^p + c̃_{p,d} Σ(1/n − a_j²)² ≤ E|Σ ξ_j/√n|^p`.
pub fn verify_theorem_diag_multi(ps: &[f64], d: usize, a: &CoeffVector, budget: &Budget) -> Result<Vec<VerificationRecord>> {
    check_exponents(ps, d)?;
    check_unit(a)?;
    if a.len() < 2 {
        return Err(Error::Precondition("the diagonal comparison needs n >= 2".into()));
    }
    let diag = CoeffVector::diagonal(a.len())?;
    with_retries(ps, budget, |ps, samples| {
        let pairs = compare(a.as_slice(), Partner::Sphere(diag.as_slice()), ps, d, budget, samples, budget.seed)?;
        ps.iter().zip(&pairs).map(|(&p, pair)| diag_record(p, d, a, pair)).collect()
    })
}

pub fn verify_theorem_diag(p: f64, d: usize, a: &CoeffVector, budget: &Budget) -> Result<VerificationRecord> {
    Ok(verify_theorem_diag_multi(&[p], d, a, budget)?.remove(0))
}

/// `E|Σ a_j ξ_j|^p ≤ E|Z|^p (Σ a_j²)^{p/2}` for unnormalized `a`.
pub fn verify_homogeneous_lpl2_multi(ps: &[f64], d: usize, a: &CoeffVector, budget: &Budget) -> Result<Vec<VerificationRecord>> {
    check_exponents(ps, d)?;
    with_retries(ps, budget, |ps, samples| {
        let pairs = compare(a.as_slice(), Partner::Gaussian, ps, d, budget, samples, budget.seed)?;
        Ok(ps.iter().zip(&pairs).map(|(&p, pair)| lpl2_record(p, d, a, pair)).collect())
    })
}

pub fn verify_homogeneous_lpl2(p: f64, d: usize, a: &CoeffVector, budget: &Budget) -> Result<VerificationRecord> {
    Ok(verify_homogeneous_lpl2_multi(&[p], d, a, budget)?.remove(0))
}

/// `D_p(a, v) ≥ κ a⁴ h(|v|)`.
pub fn verify_lemma2(a: f64, v: f64, p: f64, d: usize, method: DeficitMethod) -> Result<VerificationRecord> {
    let value = deficit(a, v, p, d, method)?;
    let bound = Estimate::closed_form(deficit_lower_bound(a, v, p, d)?);
    let params = Params::new(p, d).with_a(&[a]).with_shift(v);
    Ok(VerificationRecord::judge(InequalityId::Lemma2Bound, params, bound, value, value.minus(&bound)))
}

/// Local two-coordinate step against its ℓ₄-drop bound.
pub fn verify_lemma4(step: &LocalStep, p: f64, d: usize) -> Result<VerificationRecord> {
    let local = local_two_coordinate_bound(step, p, d)?;
    let bound = Estimate::closed_form(local.bound);
    let params = Params::new(p, d).with_a(&[step.a1, step.a2]).with_b(&[step.b1, step.b2]).with_shift(step.shift);
    Ok(VerificationRecord::judge(InequalityId::Lemma4Bound, params, bound, local.deficit, local.deficit.minus(&bound))
        .with_extra("identity_residual", step.product_identity_residual()))
}

/// `c_{p,d} ≤ E|Z|^p − 1`, with `d (E|Z|^p − 1)` kept as `scaled_gap`.
pub fn verify_remark_scaling(p: f64, ds: &[usize]) -> Result<Vec<VerificationRecord>> {
    check_exponents(&[p], 2)?;
    ds.iter()
        .map(|&d| {
            let c = Estimate::closed_form(c_main(p, d)?);
            let gap = Estimate::closed_form(gaussian_abs_moment_minus_one(p, d)?);
            Ok(VerificationRecord::judge(InequalityId::RemarkScaling, Params::new(p, d), c, gap, gap.minus(&c))
                .with_extra("scaled_gap", d as f64 * gap.value))
        })
        .collect()
}

/// `0.77 ≤` the best constant in the Khinchin inequality between `L_q` and `L_2`.
pub fn verify_khinchin_lower(q: f64, d: usize) -> Result<VerificationRecord> {
    let best = Estimate::closed_form(khinchin_best_constant(q, d)?);
    let floor = Estimate::closed_form(C_KH);
    Ok(VerificationRecord::judge(InequalityId::KhinchinLower, Params::new(q, d), floor, best, best.minus(&floor)))
}
