use serde::{Deserialize, Serialize};

use crate::constants::{kappa, m_cut, Branch};
use crate::error::{Error, Result};
use crate::kernel::sampling::{fill_normal, rng_stream};
use crate::moments::{sharded, Estimate, MomentAccumulator, MomentQuery};

/// Term-by-term record of replacing sphere summands by Gaussians one at a time.
///
/// `S_k` has Gaussians in the first `k` slots and sphere vectors after them;
/// every chain member is computed from the same draws, so the terms telescope
/// sample by sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapTrace {
    pub query: MomentQuery,
    pub samples: u64,
    pub seed: u64,
    /// `E|S_k|^p` for `k = 0..=n`.
    pub moments: Vec<Estimate>,
    /// `E|S_k|^p − E|S_{k−1}|^p` for `k = 1..=n`.
    pub terms: Vec<Estimate>,
    /// `E|S_n|^p − E|S_0|^p`.
    pub total: Estimate,
    /// Averaged single-swap bound `κ a_k⁴ E h(v_k)`, with `v_k` the rest of `S_k`.
    pub lemma_bounds: Vec<Estimate>,
    /// Deterministic per-step floor `½ κ a_k⁴` where it applies.
    pub step_floors: Vec<Option<f64>>,
    /// `|Σ terms − total|`.
    pub telescoping_residual: f64,
}

#[derive(Clone)]
struct Chain {
    moments: Vec<MomentAccumulator>,
    terms: Vec<MomentAccumulator>,
    total: MomentAccumulator,
    rest: Vec<MomentAccumulator>,
}

impl Chain {
    fn new(n: usize) -> Self {
        Self {
            moments: vec![MomentAccumulator::default(); n + 1],
            terms: vec![MomentAccumulator::default(); n],
            total: MomentAccumulator::default(),
            rest: vec![MomentAccumulator::default(); n],
        }
    }

    fn merge(&mut self, other: &Chain) {
        let pairs = self.moments.iter_mut().zip(&other.moments);
        let pairs = pairs.chain(self.terms.iter_mut().zip(&other.terms));
        let pairs = pairs.chain(self.rest.iter_mut().zip(&other.rest));
        for (a, b) in pairs {
            a.merge(b);
        }
        self.total.merge(&other.total);
    }
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|t| t * t).sum()
}

pub fn lindeberg_decompose(query: &MomentQuery, samples: u64, seed: u64) -> Result<SwapTrace> {
    if !query.all_sphere() {
        return Err(Error::Precondition("the swapping chain starts from sphere summands".into()));
    }
    if samples < 2 {
        return Err(Error::Precondition(format!("Monte Carlo needs at least 2 samples, got {samples}")));
    }
    let (p, d) = (query.p, query.d);
    if !(p >= 2.0) {
        return Err(Error::InvalidExponent { value: p, reason: "swapping bounds need p >= 2" });
    }
    let a = query.a.as_slice();
    let n = a.len();
    let half_p = 0.5 * p;
    let low = Branch::of(p) == Branch::Low;
    let half_rest = 0.5 * (p - 4.0);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();

    let chains = sharded(
        samples,
        |shard, len| {
            let mut rng = rng_stream(seed, shard);
            let mut chain = Chain::new(n);
            let mut g = vec![0.0; n * d];
            let mut radius = vec![0.0; n];
            let mut s = vec![0.0; d];
            let mut vals = vec![0.0; n + 1];
            for _ in 0..len {
                fill_normal(&mut rng, &mut g);
                s.iter_mut().for_each(|x| *x = 0.0);
                s[0] = query.shift;
                for j in 0..n {
                    let gj = &g[j * d..(j + 1) * d];
                    radius[j] = norm_sq(gj).sqrt();
                    let scale = a[j] / radius[j];
                    s.iter_mut().zip(gj).for_each(|(x, y)| *x += scale * y);
                }
                vals[0] = norm_sq(&s).powf(half_p);
                for k in 0..n {
                    let gk = &g[k * d..(k + 1) * d];
                    let sphere = a[k] / radius[k];
                    let rest_sq: f64 = s.iter().zip(gk).map(|(x, y)| (x - sphere * y).powi(2)).sum();
                    let h = if low {
                        (rest_sq + 2.0 * a[k] * a[k]).powf(half_rest)
                    } else {
                        rest_sq.powf(half_rest)
                    };
                    chain.rest[k].push(h);
                    let step = a[k] * inv_sqrt_d - sphere;
                    s.iter_mut().zip(gk).for_each(|(x, y)| *x += step * y);
                    vals[k + 1] = norm_sq(&s).powf(half_p);
                    chain.terms[k].push(vals[k + 1] - vals[k]);
                }
                for (m, v) in chain.moments.iter_mut().zip(&vals) {
                    m.push(*v);
                }
                chain.total.push(vals[n] - vals[0]);
            }
            chain
        },
        |acc, part| acc.merge(&part),
    );
    let chain = chains.into_iter().next().expect("at least one shard");

    let k = kappa(p, d)?;
    let cap = m_cut(p)?;
    let floor_applies = low || query.a.sup_norm() <= cap;
    let lemma_bounds = a
        .iter()
        .zip(&chain.rest)
        .map(|(ak, r)| r.estimate().scaled(k * ak.powi(4)))
        .collect();
    let step_floors = a
        .iter()
        .map(|ak| floor_applies.then(|| 0.5 * k * ak.powi(4)))
        .collect();
    let terms: Vec<Estimate> = chain.terms.iter().map(MomentAccumulator::estimate).collect();
    let total = chain.total.estimate();
    let telescoping_residual = (terms.iter().map(|t| t.value).sum::<f64>() - total.value).abs();
    Ok(SwapTrace {
        query: query.clone(),
        samples,
        seed,
        moments: chain.moments.iter().map(MomentAccumulator::estimate).collect(),
        terms,
        total,
        lemma_bounds,
        step_floors,
        telescoping_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::CoeffVector;

    fn query(a: Vec<f64>, p: f64, d: usize) -> MomentQuery {
        MomentQuery::new(d, p, CoeffVector::normalized(a).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn terms_telescope() {
        let q = query(vec![0.7, 0.5, 0.4, 0.3], 3.0, 3);
        let t = lindeberg_decompose(&q, 20_000, 11).unwrap();
        let scale = t.moments.iter().fold(0.0f64, |m, e| m.max(e.value.abs()));
        assert!(t.telescoping_residual <= 1e-12 * scale, "{}", t.telescoping_residual);
        assert_eq!(t.terms.len(), 4);
        assert_eq!(t.moments.len(), 5);
    }

    #[test]
    fn second_moment_terms_vanish_in_mean() {
        let q = query(vec![0.8, 0.6], 2.0, 4);
        let t = lindeberg_decompose(&q, 50_000, 1).unwrap();
        for term in &t.terms {
            assert!(term.value.abs() < 5.0 * term.err + 1e-12, "{term:?}");
        }
        assert!(t.step_floors.iter().all(|f| *f == Some(0.0)));
    }

    #[test]
    fn terms_dominate_their_floors() {
        let q = query(vec![1.0, 1.0, 1.0, 1.0], 6.0, 3);
        let t = lindeberg_decompose(&q, 100_000, 5).unwrap();
        for (term, floor) in t.terms.iter().zip(&t.step_floors) {
            let floor = floor.expect("sup norm below the cut");
            assert!(term.value - floor > -4.0 * term.err, "{term:?} vs {floor}");
        }
    }

    #[test]
    fn floors_absent_for_spiked_high_exponent() {
        let q = query(vec![0.95, 0.3], 6.0, 3);
        let t = lindeberg_decompose(&q, 2_000, 5).unwrap();
        assert!(t.step_floors.iter().all(Option::is_none));
        assert!(t.lemma_bounds.iter().all(|b| b.value > 0.0));
    }
}
