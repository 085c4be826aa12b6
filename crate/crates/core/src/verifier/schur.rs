use serde::{Deserialize, Serialize};

use super::eval::{compare, Partner};
use super::theorems::with_retries;
use super::{Budget, InequalityId, Params, Verdict, VerificationRecord};
use crate::constants::{c_diag, c_main, kappa, m_cut, Branch};
use crate::deficit::LocalStep;
use crate::error::{Error, Result};
use crate::moments::{CoeffVector, Estimate};

const SUM_TOL: f64 = 1e-12;

fn sorted_desc(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Whether `x` majorizes `y` (equal totals, dominating partial sums of the
/// decreasing rearrangements); shorter vectors are padded with zeros.
pub fn majorizes(x: &[f64], y: &[f64], tol: f64) -> bool {
    let n = x.len().max(y.len());
    let mut xs = sorted_desc(x);
    let mut ys = sorted_desc(y);
    xs.resize(n, 0.0);
    ys.resize(n, 0.0);
    let (mut sx, mut sy) = (0.0, 0.0);
    for (a, b) in xs.iter().zip(&ys) {
        sx += a;
        sy += b;
        if sx < sy - tol {
            return false;
        }
    }
    (sx - sy).abs() <= tol
}

/// `y_i = λx_i + (1−λ)x_j`, `y_j = λx_j + (1−λ)x_i`, other entries unchanged.
pub fn t_transform(x: &[f64], i: usize, j: usize, lambda: f64) -> Result<Vec<f64>> {
    if i >= x.len() || j >= x.len() || i == j {
        return Err(Error::Precondition(format!("T-transform needs two distinct indices below {}", x.len())));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Precondition(format!("T-transform weight must lie in [0, 1], got {lambda}")));
    }
    let mut y = x.to_vec();
    y[i] = lambda * x[i] + (1.0 - lambda) * x[j];
    y[j] = lambda * x[j] + (1.0 - lambda) * x[i];
    Ok(y)
}

fn sqrt_coeffs(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Precondition("squared coefficients must be finite and nonnegative".into()));
    }
    Ok(x.iter().map(|v| v.sqrt()).collect())
}

/// `E|Σ √x_j ξ_j|^p ≤ E|Σ √y_j ξ_j|^p` whenever `x` majorizes `y`.
pub fn schur_ttransform_checks(ps: &[f64], d: usize, x: &[f64], y: &[f64], budget: &Budget) -> Result<Vec<VerificationRecord>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if let Some(&p) = ps.iter().find(|p| !(**p >= 2.0)) {
        return Err(Error::InvalidExponent { value: p, reason: "Schur concavity needs p >= 2" });
    }
    let scale = x.iter().sum::<f64>().abs().max(1.0);
    if !majorizes(x, y, SUM_TOL * scale) {
        return Err(Error::Precondition("the first vector does not majorize the second".into()));
    }
    let a = sqrt_coeffs(x)?;
    let b = sqrt_coeffs(y)?;
    with_retries(ps, budget, |ps, samples| {
        let pairs = compare(&a, Partner::Sphere(&b), ps, d, budget, samples, budget.seed)?;
        Ok(ps
            .iter()
            .zip(&pairs)
            .map(|(&p, pair)| {
                let params = Params::new(p, d).with_a(x).with_b(y);
                VerificationRecord::judge(InequalityId::SchurTtransform, params, pair.first, pair.second, pair.gap)
            })
            .collect())
    })
}

pub fn schur_ttransform_check(p: f64, d: usize, x: &[f64], y: &[f64], budget: &Budget) -> Result<VerificationRecord> {
    Ok(schur_ttransform_checks(&[p], d, x, y, budget)?.remove(0))
}

/// Replacement of a vector with a large coordinate by the flattest vector it
/// majorizes, and the constant deficit that replacement guarantees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorizeStep {
    /// `(m_p, √((1−m_p²)/(N−1)), …)` of length `N`.
    pub comparison: Vec<f64>,
    /// `½ κ m_p⁴`.
    pub deficit_floor: f64,
    /// `½ κ (m_p⁴ + (1−m_p²)²/(N−1))`.
    pub comparison_floor: f64,
    /// `c_{p,d} ‖a‖₄⁴`, which the floor must dominate.
    pub target: f64,
    pub floor_dominates: bool,
    pub record: VerificationRecord,
}

pub fn majorize_step(a: &CoeffVector, p: f64, d: usize, budget: &Budget) -> Result<MajorizeStep> {
    if Branch::of(p) == Branch::Low {
        return Err(Error::Precondition(format!("no coordinate can exceed the cut for p = {p} <= 4")));
    }
    let m = m_cut(p)?;
    let sup = a.sup_norm();
    if !(sup > m) {
        return Err(Error::Precondition(format!("need ‖a‖∞ > m_p = {m}, got {sup}")));
    }
    let m2 = m * m;
    let n = a.len();
    let len = if n as f64 * m2 >= 1.0 { n } else { ((1.0 / m2).ceil() as usize).max(2) };
    let tail = ((1.0 - m2) / (len - 1) as f64).sqrt();
    let mut comparison = vec![tail; len];
    comparison[0] = m;

    let x: Vec<f64> = a.as_slice().iter().map(|v| v * v).collect();
    let y: Vec<f64> = comparison.iter().map(|v| v * v).collect();
    let mut record = schur_ttransform_check(p, d, &x, &y, budget)?;
    record.params.b = Some(comparison.clone());

    let k = kappa(p, d)?;
    let deficit_floor = 0.5 * k * m2 * m2;
    let comparison_floor = 0.5 * k * (m2 * m2 + (1.0 - m2).powi(2) / (len - 1) as f64);
    let target = c_main(p, d)? * a.l4_pow4();
    Ok(MajorizeStep {
        comparison,
        deficit_floor,
        comparison_floor,
        target,
        floor_dominates: deficit_floor >= target,
        record,
    })
}

/// Sequence of local balancing steps from `a` to the diagonal vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalWalk {
    pub steps: Vec<LocalStep>,
    /// Vector after each step, decreasingly sorted.
    pub states: Vec<Vec<f64>>,
    /// Per step: `E|S_after|^p ≥ E|S_before|^p + c̃ (ℓ₄ drop)`.
    pub records: Vec<VerificationRecord>,
    pub l4_drop_total: f64,
    /// `‖a‖₄⁴ − 1/n`.
    pub l4_target: f64,
    pub telescoping_residual: f64,
    pub max_norm_error: f64,
}

impl DiagonalWalk {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.verdict == Verdict::Pass)
    }
}

const DIAGONAL_TOL: f64 = 1e-12;

/// Repeatedly replaces `(a_max, a_min)` by `(√(a_max² + a_min² − 1/n), 1/√n)`.
/// Each step pins one more coordinate at `1/√n`, so at most `n − 1` steps occur.
pub fn diagonalization_walk(a: &CoeffVector, p: f64, d: usize, budget: &Budget) -> Result<DiagonalWalk> {
    let n = a.len();
    if n < 2 {
        return Err(Error::Precondition("the walk needs n >= 2".into()));
    }
    if !a.is_unit(SUM_TOL) {
        return Err(Error::Precondition(format!("coefficients must have unit ℓ2 norm, got Σa² = {}", a.norm_sq())));
    }
    let c = c_diag(p, d)?;
    let inv_n = 1.0 / n as f64;
    let target = inv_n.sqrt();
    let mut cur = sorted_desc(&a.as_slice().iter().map(|v| v.abs()).collect::<Vec<_>>());
    let mut walk = DiagonalWalk {
        steps: Vec::new(),
        states: Vec::new(),
        records: Vec::new(),
        l4_drop_total: 0.0,
        l4_target: a.l4_pow4() - inv_n,
        telescoping_residual: 0.0,
        max_norm_error: 0.0,
    };
    for index in 0..n {
        if cur.iter().all(|v| (v - target).abs() <= DIAGONAL_TOL) {
            break;
        }
        if index == n - 1 {
            return Err(Error::NonAdmissible(format!("walk did not reach the diagonal in {} steps", n - 1)));
        }
        let (hi, lo) = (cur[0], cur[n - 1]);
        let moved = ((hi - target) * (hi + target) + lo * lo).max(0.0).sqrt();
        let (b1, b2) = if moved >= target { (moved, target) } else { (target, moved) };
        let step = LocalStep::allowing_zero(hi, lo, b1, b2, 0.0)?;
        let mut next = cur.clone();
        next[0] = moved;
        next[n - 1] = target;
        let next = sorted_desc(&next);

        let drop = step.l4_drop();
        let term = c * drop;
        let seed = super::derive_seed(budget.seed, index as u64);
        let step_budget = budget.with_seed(seed);
        let record = with_retries(&[p], &step_budget, |ps, samples| {
            let pairs = compare(&cur, Partner::Sphere(&next), ps, d, &step_budget, samples, seed)?;
            let pair = pairs[0];
            let lhs = Estimate { value: pair.first.value + term, ..pair.first };
            let margin = Estimate { value: pair.gap.value - term, ..pair.gap };
            let params = Params::new(p, d).with_a(&cur).with_b(&next);
            Ok(vec![VerificationRecord::judge(InequalityId::Lemma4Bound, params, lhs, pair.second, margin)
                .with_extra("l4_drop", drop)])
        })?
        .remove(0);

        walk.l4_drop_total += drop;
        let norm: f64 = next.iter().map(|v| v * v).sum();
        walk.max_norm_error = walk.max_norm_error.max((norm - 1.0).abs());
        walk.steps.push(step);
        walk.records.push(record);
        walk.states.push(next.clone());
        cur = next;
    }
    walk.telescoping_residual = (walk.l4_drop_total - walk.l4_target).abs();
    Ok(walk)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majorization_basics() {
        assert!(majorizes(&[1.0, 0.0], &[0.5, 0.5], 1e-15));
        assert!(!majorizes(&[0.5, 0.5], &[1.0, 0.0], 1e-15));
        assert!(majorizes(&[0.6, 0.4], &[0.4, 0.6], 1e-15));
        assert!(!majorizes(&[0.6, 0.4], &[0.5, 0.4], 1e-15));
        let y = t_transform(&[0.7, 0.2, 0.1], 0, 2, 0.75).unwrap();
        assert!(majorizes(&[0.7, 0.2, 0.1], &y, 1e-15));
        assert!(t_transform(&[0.5, 0.5], 0, 0, 0.5).is_err());
    }

    #[test]
    fn schur_examples() {
        let b = Budget::default();
        let r = schur_ttransform_check(4.0, 3, &[1.0, 0.0], &[0.5, 0.5], &b).unwrap();
        assert!((r.lhs.value - 1.0).abs() < 1e-15);
        assert!((r.rhs.value - 4.0 / 3.0).abs() < 1e-10);
        assert_eq!(r.verdict, Verdict::Pass);
        let r = schur_ttransform_check(3.0, 3, &[0.6, 0.4], &[0.6, 0.4], &b).unwrap();
        assert!(r.margin.abs() < 1e-14);
        assert!(schur_ttransform_check(3.0, 3, &[0.5, 0.5], &[1.0, 0.0], &b).is_err());
    }

    #[test]
    fn majorize_step_for_a_singleton() {
        let a = CoeffVector::new(vec![1.0]).unwrap();
        let s = majorize_step(&a, 5.0, 3, &Budget::default()).unwrap();
        assert_eq!(s.comparison.len(), 2);
        assert!((s.comparison[0] - 0.5f64.sqrt()).abs() < 1e-15);
        let k = kappa(5.0, 3).unwrap();
        assert!((s.deficit_floor - 0.125 * k).abs() < 1e-15);
        assert!(s.floor_dominates);
        assert_eq!(s.record.verdict, Verdict::Pass);
        assert!(majorize_step(&a, 4.0, 3, &Budget::default()).is_err());
        let m = m_cut(6.0).unwrap();
        let edge = CoeffVector::new(vec![m, m, m, (1.0 - 3.0 * m * m).sqrt()]).unwrap();
        assert!(majorize_step(&edge, 6.0, 3, &Budget::default()).is_err());
    }

    #[test]
    fn walk_on_three_coordinates() {
        let a = CoeffVector::new(vec![0.5f64.sqrt(), 0.3f64.sqrt(), 0.2f64.sqrt()]).unwrap();
        let w = diagonalization_walk(&a, 3.0, 3, &Budget::default()).unwrap();
        assert_eq!(w.steps.len(), 2);
        assert!(w.telescoping_residual < 1e-12, "{}", w.telescoping_residual);
        assert!(w.max_norm_error < 1e-12);
        assert!(w.all_pass(), "{:?}", w.records);
        let diag = CoeffVector::diagonal(4).unwrap();
        assert!(diagonalization_walk(&diag, 3.0, 3, &Budget::default()).unwrap().steps.is_empty());
    }

    #[test]
    fn walk_through_zero_coordinates() {
        let a = CoeffVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        let w = diagonalization_walk(&a, 4.0, 2, &Budget::default()).unwrap();
        assert_eq!(w.steps.len(), 2);
        assert!(w.telescoping_residual < 1e-12);
        assert!(w.all_pass());
    }
}
