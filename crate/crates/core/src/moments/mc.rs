//! Monte Carlo evaluation with sharded, reproducible streams.

use rayon::prelude::*;

use super::{Estimate, Law, MomentQuery};
use crate::error::{Error, Result};
use crate::kernel::sampling::{fill_normal, rng_stream};

/// Samples per shard; shard `i` always uses stream `i`, so results do not
/// depend on the number of worker threads.
pub const SHARD: u64 = 1 << 14;

/// Running mean and centred second moment (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::mc(self.mean, self.stderr(), self.n)
    }
}

/// Splits `samples` into shards, runs `body(shard_index, shard_len)` on each
/// and merges the per-shard results in shard order.
pub(crate) fn sharded<T, F, M>(samples: u64, body: F, mut merge: M) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
    M: FnMut(&mut T, T),
{
    let shards = samples.div_ceil(SHARD);
    let parts: Vec<T> = (0..shards)
        .into_par_iter()
        .map(|i| body(i, SHARD.min(samples - i * SHARD)))
        .collect();
    let mut iter = parts.into_iter();
    let Some(mut acc) = iter.next() else { return Vec::new() };
    for part in iter {
        merge(&mut acc, part);
    }
    vec![acc]
}

/// Sample mean of `|v + Σ a_j X_j|^p`, with `X_j` drawn per law tag.
pub fn sum_moment_mc(query: &MomentQuery, samples: u64, seed: u64) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::Precondition(format!("Monte Carlo needs at least 2 samples, got {samples}")));
    }
    let d = query.d;
    let a = query.a.as_slice();
    let half_p = 0.5 * query.p;
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let acc = sharded(
        samples,
        |shard, len| {
            let mut rng = rng_stream(seed, shard);
            let mut acc = MomentAccumulator::default();
            let mut g = vec![0.0; d];
            let mut x = vec![0.0; d];
            for _ in 0..len {
                x.iter_mut().for_each(|xi| *xi = 0.0);
                x[0] = query.shift;
                for (aj, law) in a.iter().zip(&query.mix) {
                    fill_normal(&mut rng, &mut g);
                    let scale = match law {
                        Law::Sphere => aj / g.iter().map(|t| t * t).sum::<f64>().sqrt(),
                        Law::Gaussian => aj * inv_sqrt_d,
                    };
                    x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi += scale * gi);
                }
                let r2: f64 = x.iter().map(|t| t * t).sum();
                acc.push(r2.powf(half_p));
            }
            acc
        },
        |acc, part| acc.merge(&part),
    );
    Ok(acc[0].estimate())
}
