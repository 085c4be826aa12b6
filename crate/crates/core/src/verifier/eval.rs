//! Paired evaluation of two moments, exact when both sides fit under the
//! cap and by common random numbers otherwise.

use super::Budget;
use crate::error::Result;
use crate::kernel::sampling::{fill_normal, rng_stream};
use crate::kernel::special::gaussian_abs_moment;
use crate::moments::{sharded, sum_moments_exact, Estimate, ExactOptions, MomentAccumulator};

/// The second random vector of a comparison.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Partner<'a> {
    /// `Σ a_j Z_j`, the Gaussian counterpart of the first vector.
    Gaussian,
    /// `Σ b_j ξ_j` with the same `ξ_j` as the first vector.
    Sphere(&'a [f64]),
}

/// `E|Σ a_j ξ_j|^p`, the partner moment and their difference (partner − first).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pair {
    pub first: Estimate,
    pub second: Estimate,
    pub gap: Estimate,
}

fn nonzero(a: &[f64]) -> usize {
    a.iter().filter(|x| **x != 0.0).count()
}

pub(crate) fn exact_fits(a: &[f64], budget: &Budget) -> bool {
    nonzero(a) <= budget.exact_cap
}

pub(crate) fn options(budget: &Budget) -> ExactOptions {
    ExactOptions { nodes: budget.nodes, cap: budget.exact_cap }
}

/// `E|Z|^p (Σ a_j²)^{p/2}`.
pub(crate) fn gaussian_side(a: &[f64], p: f64, d: usize) -> Result<Estimate> {
    let norm_sq: f64 = a.iter().map(|x| x * x).sum();
    Ok(Estimate::closed_form(gaussian_abs_moment(p, d)? * norm_sq.powf(0.5 * p)))
}

pub(crate) fn exact_moments(a: &[f64], ps: &[f64], d: usize, budget: &Budget) -> Result<Vec<Estimate>> {
    sum_moments_exact(a, 0.0, ps, d, options(budget))
}

pub(crate) fn compare(
    a: &[f64],
    partner: Partner<'_>,
    ps: &[f64],
    d: usize,
    budget: &Budget,
    samples: u64,
    seed: u64,
) -> Result<Vec<Pair>> {
    let exact = exact_fits(a, budget)
        && match partner {
            Partner::Gaussian => true,
            Partner::Sphere(b) => exact_fits(b, budget),
        };
    if exact {
        let first = exact_moments(a, ps, d, budget)?;
        let second = match partner {
            Partner::Gaussian => ps.iter().map(|&p| gaussian_side(a, p, d)).collect::<Result<Vec<_>>>()?,
            Partner::Sphere(b) => exact_moments(b, ps, d, budget)?,
        };
        return Ok(first
            .into_iter()
            .zip(second)
            .map(|(first, second)| Pair { first, second, gap: second.minus(&first) })
            .collect());
    }
    compare_mc(a, partner, ps, d, samples, seed)
}

struct Accs {
    first: Vec<MomentAccumulator>,
    second: Vec<MomentAccumulator>,
    gap: Vec<MomentAccumulator>,
}

impl Accs {
    fn new(k: usize) -> Self {
        let v = vec![MomentAccumulator::default(); k];
        Self { first: v.clone(), second: v.clone(), gap: v }
    }
}

fn compare_mc(
    a: &[f64],
    partner: Partner<'_>,
    ps: &[f64],
    d: usize,
    samples: u64,
    seed: u64,
) -> Result<Vec<Pair>> {
    if samples < 2 {
        return Err(crate::Error::Precondition(format!(
            "Monte Carlo needs at least 2 samples, got {samples}"
        )));
    }
    let n = match partner {
        Partner::Gaussian => a.len(),
        Partner::Sphere(b) => a.len().max(b.len()),
    };
    let coeff = |v: &[f64], j: usize| v.get(j).copied().unwrap_or(0.0);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let halves: Vec<f64> = ps.iter().map(|p| 0.5 * p).collect();
    let accs = sharded(
        samples,
        |shard, len| {
            let mut rng = rng_stream(seed, shard);
            let mut accs = Accs::new(ps.len());
            let mut g = vec![0.0; d];
            let mut x = vec![0.0; d];
            let mut y = vec![0.0; d];
            for _ in 0..len {
                x.iter_mut().for_each(|t| *t = 0.0);
                y.iter_mut().for_each(|t| *t = 0.0);
                for j in 0..n {
                    fill_normal(&mut rng, &mut g);
                    let inv_r = 1.0 / g.iter().map(|t| t * t).sum::<f64>().sqrt();
                    let sa = coeff(a, j) * inv_r;
                    let sb = match partner {
                        Partner::Gaussian => coeff(a, j) * inv_sqrt_d,
                        Partner::Sphere(b) => coeff(b, j) * inv_r,
                    };
                    for ((xi, yi), gi) in x.iter_mut().zip(y.iter_mut()).zip(&g) {
                        *xi += sa * gi;
                        *yi += sb * gi;
                    }
                }
                let lx = 0.5 * x.iter().map(|t| t * t).sum::<f64>().ln();
                let ly = 0.5 * y.iter().map(|t| t * t).sum::<f64>().ln();
                for (k, h) in halves.iter().enumerate() {
                    let vx = (2.0 * h * lx).exp();
                    let vy = (2.0 * h * ly).exp();
                    accs.first[k].push(vx);
                    accs.second[k].push(vy);
                    accs.gap[k].push(vy - vx);
                }
            }
            accs
        },
        |acc, part| {
            for (dst, src) in [(&mut acc.first, &part.first), (&mut acc.second, &part.second), (&mut acc.gap, &part.gap)] {
                dst.iter_mut().zip(src).for_each(|(x, y)| x.merge(y));
            }
        },
    );
    let accs = accs.into_iter().next().expect("at least one shard");
    let mut out = Vec::with_capacity(ps.len());
    for (k, &p) in ps.iter().enumerate() {
        let gap = accs.gap[k].estimate();
        let pair = match partner {
            // Control variate: the Gaussian side is known in closed form.
            Partner::Gaussian => {
                let second = gaussian_side(a, p, d)?;
                let first = Estimate::mc(second.value - gap.value, gap.err, samples);
                Pair { first, second, gap }
            }
            Partner::Sphere(_) => Pair { first: accs.first[k].estimate(), second: accs.second[k].estimate(), gap },
        };
        out.push(pair);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_and_mc_routes_agree() {
        let a = [0.8, 0.6];
        let b = [0.5f64.sqrt(), 0.5f64.sqrt()];
        let ps = [3.0, 5.0];
        let exact = compare(&a, Partner::Sphere(&b), &ps, 3, &Budget::default(), 0, 0).unwrap();
        let mc = compare_mc(&a, Partner::Sphere(&b), &ps, 3, 400_000, 9).unwrap();
        for (e, m) in exact.iter().zip(&mc) {
            assert!((e.gap.value - m.gap.value).abs() < 4.0 * m.gap.err, "{e:?} {m:?}");
            assert!(m.gap.err < m.first.err.hypot(m.second.err));
        }
        let exact = compare(&a, Partner::Gaussian, &ps, 3, &Budget::default(), 0, 0).unwrap();
        let mc = compare_mc(&a, Partner::Gaussian, &ps, 3, 400_000, 9).unwrap();
        for (e, m) in exact.iter().zip(&mc) {
            assert!((e.first.value - m.first.value).abs() < 4.0 * m.first.err, "{e:?} {m:?}");
            assert_eq!(e.second, m.second);
        }
    }

    #[test]
    fn mc_is_reproducible() {
        let a = [0.5; 4];
        let one = compare_mc(&a, Partner::Gaussian, &[3.0], 2, 40_000, 1).unwrap();
        let two = compare_mc(&a, Partner::Gaussian, &[3.0], 2, 40_000, 1).unwrap();
        assert_eq!(one[0].gap, two[0].gap);
    }
}
