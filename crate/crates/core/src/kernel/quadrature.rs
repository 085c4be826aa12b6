//! Gaussian rules on [-1, 1] built by Golub-Welsch, the marginal law of θ
//! discretized as a Gauss-Jacobi rule, and a tanh-sinh integrator that hands
//! the integrand its exact distance to both endpoints.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes and probability weights on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_a^b f` treating the rule as Gauss-Legendre (weights sum to one).
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * (b - a)
    }
}

/// Golub-Welsch: eigen-decomposition of the Jacobi matrix built from the
/// monic recurrence `p_{k+1} = (x − diag_k) p_k − offdiag_sq_k p_{k−1}`.
fn golub_welsch(diag: &[f64], offdiag_sq: &[f64]) -> GaussRule {
    let k = diag.len();
    let mut m = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        m[(i, i)] = diag[i];
        if i + 1 < k {
            let b = offdiag_sq[i + 1].sqrt();
            m[(i, i + 1)] = b;
            m[(i + 1, i)] = b;
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    }
}

/// Gauss-Jacobi rule for the weight `(1−x)^α (1+x)^β`, normalized to unit mass.
pub fn gauss_jacobi(alpha: f64, beta: f64, k: usize) -> GaussRule {
    assert!(alpha > -1.0 && beta > -1.0 && k >= 1);
    let ab = alpha + beta;
    let mut diag = vec![0.0; k];
    let mut off = vec![0.0; k];
    diag[0] = (beta - alpha) / (ab + 2.0);
    for i in 1..k {
        let n = i as f64;
        let s = 2.0 * n + ab;
        diag[i] = (beta * beta - alpha * alpha) / (s * (s + 2.0));
        off[i] = if i == 1 {
            // Closed form at n = 1 avoids 0/0 when α + β = −1.
            4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            4.0 * n * (n + alpha) * (n + beta) * (n + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
    }
    let mut rule = golub_welsch(&diag, &off);
    if alpha == beta {
        symmetrize(&mut rule);
    }
    rule
}

fn symmetrize(rule: &mut GaussRule) {
    let k = rule.len();
    for i in 0..k / 2 {
        let j = k - 1 - i;
        let x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        let w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if k % 2 == 1 {
        rule.nodes[k / 2] = 0.0;
    }
}

type RuleCache = RwLock<HashMap<(u64, u64, usize), Arc<GaussRule>>>;

fn rule_cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Cached Gauss-Jacobi rule.
pub fn cached_gauss_jacobi(alpha: f64, beta: f64, k: usize) -> Arc<GaussRule> {
    let key = (alpha.to_bits(), beta.to_bits(), k);
    if let Some(rule) = rule_cache().read().expect("rule cache poisoned").get(&key) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(gauss_jacobi(alpha, beta, k));
    rule_cache()
        .write()
        .expect("rule cache poisoned")
        .entry(key)
        .or_insert(rule)
        .clone()
}

/// Cached Gauss-Legendre rule with probability weights.
pub fn gauss_legendre(k: usize) -> Arc<GaussRule> {
    cached_gauss_jacobi(0.0, 0.0, k)
}

/// Discretization of the law of `θ = ⟨ξ, e₁⟩`: a Gauss-Jacobi rule with
/// `α = β = (d−3)/2` whose weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiRule {
    pub dim: usize,
    pub alpha: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl JacobiRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E f(θ)` under the rule.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss-Jacobi rule for θ in dimension `d` with `k` nodes. Dimension 2 uses
/// the closed-form Chebyshev nodes.
pub fn jacobi_rule(d: usize, k: usize) -> Result<JacobiRule> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if k == 0 {
        return Err(Error::Precondition("a quadrature rule needs at least one node".into()));
    }
    let alpha = (d as f64 - 3.0) / 2.0;
    let (nodes, weights) = if d == 2 {
        let mut nodes: Vec<f64> = (1..=k)
            .map(|i| ((2 * i - 1) as f64 * PI / (2 * k) as f64).cos())
            .collect();
        nodes.reverse();
        let mut rule = GaussRule { nodes, weights: vec![1.0 / k as f64; k] };
        symmetrize(&mut rule);
        (rule.nodes, rule.weights)
    } else {
        let rule = cached_gauss_jacobi(alpha, alpha, k);
        (rule.nodes.clone(), rule.weights.clone())
    };
    Ok(JacobiRule { dim: d, alpha, nodes, weights })
}

type ThetaCache = RwLock<HashMap<(usize, usize), Arc<JacobiRule>>>;

/// Shared θ rules; building one costs an eigen-decomposition.
pub fn cached_jacobi_rule(d: usize, k: usize) -> Result<Arc<JacobiRule>> {
    static CACHE: OnceLock<ThetaCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(rule) = cache.read().expect("theta cache poisoned").get(&(d, k)) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(jacobi_rule(d, k)?);
    Ok(cache.write().expect("theta cache poisoned").entry((d, k)).or_insert(rule).clone())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Difference between the last two refinement levels.
    pub err: f64,
    pub evals: usize,
}

const TANH_SINH_MAX_LEVEL: u32 = 9;

/// Tanh-sinh (double exponential) quadrature of `f` over `[a, b]`.
///
/// The integrand receives `(x, x − a, b − x)` with both distances computed
/// without cancellation, so integrable endpoint singularities can be
/// evaluated correctly even when `x` rounds to an endpoint.
pub fn tanh_sinh<F>(a: f64, b: f64, rel_tol: f64, mut f: F) -> Quadrature
where
    F: FnMut(f64, f64, f64) -> f64,
{
    if b <= a {
        return Quadrature { value: 0.0, err: 0.0, evals: 0 };
    }
    let mid = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut evals = 0usize;

    let mut total = FRAC_PI_2 * hw * f(mid, hw, hw);
    evals += 1;
    total += tanh_sinh_sweep(a, b, 1.0, 1.0, total, &mut evals, &mut f);
    let mut h = 1.0;
    let mut estimate = h * total;
    let mut err = f64::INFINITY;
    for level in 1..=TANH_SINH_MAX_LEVEL {
        h *= 0.5;
        total += tanh_sinh_sweep(a, b, h, 2.0 * h, total, &mut evals, &mut f);
        let next = h * total;
        err = (next - estimate).abs();
        estimate = next;
        if level >= 3 && err <= rel_tol * estimate.abs() {
            break;
        }
    }
    Quadrature { value: estimate, err, evals }
}

/// Sum of `w(t) [f(left) + f(right)]` over `t = t0, t0 + step, ...` until the
/// terms are negligible or the nodes reach the endpoints.
fn tanh_sinh_sweep<F>(a: f64, b: f64, t0: f64, step: f64, running: f64, evals: &mut usize, f: &mut F) -> f64
where
    F: FnMut(f64, f64, f64) -> f64,
{
    let hw = 0.5 * (b - a);
    let mut acc = 0.0;
    let mut t = t0;
    loop {
        let u = FRAC_PI_2 * t.sinh();
        let e = (2.0 * u).exp();
        if !e.is_finite() {
            break;
        }
        let delta = 2.0 / (1.0 + e);
        let gap = hw * delta;
        if gap < f64::MIN_POSITIVE {
            break;
        }
        let far = hw * (2.0 - delta);
        let w = FRAC_PI_2 * t.cosh() * delta * (2.0 - delta) * hw;
        let right = f(b - gap, far, gap);
        let left = f(a + gap, gap, far);
        *evals += 2;
        let term = w * (left + right);
        acc += term;
        if t > 2.5 && term.abs() <= 1e-18 * (running + acc).abs() {
            break;
        }
        t += step;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::special::theta_abs_moment;

    #[test]
    fn legendre_two_point_rule() {
        let r = jacobi_rule(3, 2).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0] + x).abs() < 1e-15 && (r.nodes[1] - x).abs() < 1e-15);
        assert!((r.weights[0] - 0.5).abs() < 1e-15 && (r.weights[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rules_are_normalized_sorted_and_symmetric() {
        for d in [2usize, 3, 4, 5, 10, 33] {
            for k in [1usize, 2, 7, 32, 64] {
                let r = jacobi_rule(d, k).unwrap();
                let total: f64 = r.weights.iter().sum();
                assert!((total - 1.0).abs() < 1e-14);
                assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
                assert!(r.expect(|x| x).abs() < 1e-15);
                assert!(r.nodes.iter().all(|x| x.abs() < 1.0));
            }
        }
    }

    #[test]
    fn rule_reproduces_even_moments() {
        for d in [2usize, 3, 4, 6, 9] {
            let r = jacobi_rule(d, 12).unwrap();
            for m in (0..=22).step_by(2) {
                let got = r.expect(|x| x.powi(m));
                let want = theta_abs_moment(m as f64, d);
                assert!((got - want).abs() < 1e-12 * want.max(1e-300), "d={d} m={m}");
            }
        }
    }

    #[test]
    fn nonsymmetric_jacobi_integrates_beta_weight() {
        // Weight (1+x)^β normalized: E[(1+x)] = 2 (β+1)/(β+2).
        let beta = 0.37;
        let r = gauss_jacobi(0.0, beta, 6);
        let got: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * (1.0 + x)).sum();
        assert!((got - 2.0 * (beta + 1.0) / (beta + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_smooth_and_singular() {
        let q = tanh_sinh(0.0, 1.0, 1e-14, |x, _, _| x.exp());
        assert!((q.value - (1f64.exp() - 1.0)).abs() < 1e-14);
        // ∫_0^1 x^{-0.9} dx = 10, singular at the left endpoint.
        let q = tanh_sinh(0.0, 1.0, 1e-14, |_, da, _| da.powf(-0.9));
        assert!((q.value - 10.0).abs() < 1e-10, "{}", q.value);
        // Right endpoint: ∫_0^2 (2−x)^{-1/2} dx = 2√2.
        let q = tanh_sinh(0.0, 2.0, 1e-14, |_, _, db| db.powf(-0.5));
        assert!((q.value - 2.0 * 2f64.sqrt()).abs() < 1e-12, "{}", q.value);
    }
}
